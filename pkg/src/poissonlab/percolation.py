"""Continuum percolation models: k-coverage Boolean model, confetti
(dead-leaves) coloring, and the planar Boolean model with heavy-tailed radii.

Connectivity conventions
------------------------
* k = 1 with ball/box grains: exact via the grain intersection graph
  (union-find).  For convex grains, connectivity of the occupied union
  equals connectivity of the intersection graph.  Crossing events inside a
  rectangle use the grains meeting the rectangle; chains may overlap
  slightly outside it (within one grain diameter).  Sphere-reaching events
  (one-arm) are exact.  A raster layer is available as an independent
  cross-check.
* k >= 2 and confetti: rasterized occupancy at resolution ``h`` (reported
  with every result).  Raster components are labeled with
  ``scipy.ndimage.label``.  Confetti rasters use the self-matching
  triangular adjacency (4-neighbors plus one diagonal pair) for BOTH
  colors: the left-right/top-down crossing XOR is exact on every planar
  sample, and the two colors stay exchangeable, so the crossing
  probability at p = 1/2 is exactly 1/2.  (The asymmetric
  black-8/white-4 pairing also makes the XOR exact but biases black
  crossings by several percent at raster scale h = r/10.)
  Plain k >= 2 occupancy rasters use 8-adjacency; no duality is claimed
  for them.
* Windows are padded by the maximal grain radius; residual boundary
  effects are documented, not corrected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .process import (
    BoxWindow,
    FixedRadius,
    ParetoRadius,
    PointConfig,
    RadiusLaw,
    UniformRadius,
)

__all__ = [
    "UnionFind",
    "GrainSpec",
    "BooleanModel",
    "ConfettiModel",
    "BooleanWorld",
    "ConfettiWorld",
    "EventQuery",
    "ThresholdScan",
    "sample_boolean_config",
    "build_world",
    "sample_boolean_world",
    "sample_confetti_world",
    "confetti_world_from_config",
    "required_confetti_horizon",
    "is_k_covered",
    "crossing",
    "one_arm_event",
    "arm_event",
    "evaluate_event",
    "one_arm",
    "arm_probability",
    "crossing_probability",
    "threshold_scan",
    "one_arm_decay_fit",
    "estimate_critical",
    "confetti_duality_check",
    "truncate_radii",
    "component_volume_proxy",
    "raster_to_text",
]


# ---------------------------------------------------------------------------
# Union-find over grain indices


class UnionFind:
    """Disjoint sets with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, x: int, y: int) -> None:
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return
        if self.size[rx] < self.size[ry]:
            rx, ry = ry, rx
        self.parent[ry] = rx
        self.size[rx] += self.size[ry]

    def roots(self, idx) -> np.ndarray:
        return np.array([self.find(int(i)) for i in np.atleast_1d(idx)], dtype=int)


# ---------------------------------------------------------------------------
# Grains and models


@dataclass(frozen=True)
class GrainSpec:
    """Grain shape and size law.

    ``kind``: "ball" (Euclidean ball of the sampled radius), "box"
    (axis-aligned cube of half-side = sampled radius) or "raster" (an
    explicit boolean stencil pasted in raster mode only).
    """

    kind: str
    law: RadiusLaw
    stencil: Optional[np.ndarray] = None
    stencil_cell: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("ball", "box", "raster"):
            raise ValueError(f"unknown grain kind {self.kind!r}")
        if self.kind == "raster" and self.stencil is None:
            raise ValueError("raster grains need a stencil mask")

    @property
    def max_radius(self) -> Optional[float]:
        if self.kind == "raster":
            ny, nx = self.stencil.shape
            return 0.5 * self.stencil_cell * math.hypot(nx, ny)
        b = self.law.bound
        if b is None:
            return None
        return b * (math.sqrt(2.0) if self.kind == "box" else 1.0)

    def mean_area(self, dim: int = 2) -> float:
        """Expected grain volume (used for coverage-rate bookkeeping)."""
        if self.kind == "ball":
            if dim == 2:
                return math.pi * self.law.mean_power(2)
            return 4.0 / 3.0 * math.pi * self.law.mean_power(3)
        if self.kind == "box":
            return 2.0**dim * self.law.mean_power(dim)
        return float(self.stencil.sum()) * self.stencil_cell**2


@dataclass(frozen=True)
class BooleanModel:
    gamma: float
    grain: GrainSpec
    k: int = 1
    dim: int = 2

    def __post_init__(self):
        if self.gamma < 0 or self.k < 1:
            raise ValueError("need gamma >= 0 and k >= 1")

    def with_gamma(self, gamma: float) -> "BooleanModel":
        return BooleanModel(gamma, self.grain, self.k, self.dim)


@dataclass(frozen=True)
class ConfettiModel:
    """Space-time dead-leaves coloring; black arrives with probability p."""

    p: float
    black: GrainSpec
    white: GrainSpec
    horizon: Optional[float] = None  # None -> default rule at build time

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")

    def with_p(self, p: float) -> "ConfettiModel":
        return ConfettiModel(p, self.black, self.white, self.horizon)

    def point_cover_rate(self) -> float:
        """Arrival rate of grains covering a fixed location (unit space-time
        intensity)."""
        return self.p * self.black.mean_area() + (1 - self.p) * self.white.mean_area()


# ---------------------------------------------------------------------------
# Sampling Boolean configurations (with exact handling of unbounded tails)


def _rounded_rect_area(a: float, b: float, r: float) -> float:
    return a * b + 2.0 * r * (a + b) + math.pi * r * r


def _sample_rounded_rect(
    rng: np.random.Generator, lo: np.ndarray, hi: np.ndarray, r: float
) -> np.ndarray:
    """Uniform point in rect([lo,hi]) dilated by a disk of radius r (d=2)."""
    a, b = hi[0] - lo[0], hi[1] - lo[1]
    areas = np.array([a * b, r * b, r * b, a * r, a * r, math.pi * r * r])
    region = rng.choice(6, p=areas / areas.sum())
    if region == 0:
        return rng.uniform(lo, hi)
    if region in (1, 2):  # left / right strips
        x = lo[0] - rng.uniform(0, r) if region == 1 else hi[0] + rng.uniform(0, r)
        return np.array([x, rng.uniform(lo[1], hi[1])])
    if region in (3, 4):  # bottom / top strips
        y = lo[1] - rng.uniform(0, r) if region == 3 else hi[1] + rng.uniform(0, r)
        return np.array([rng.uniform(lo[0], hi[0]), y])
    # corner quarter disks
    corner = rng.integers(4)
    cx = lo[0] if corner in (0, 2) else hi[0]
    cy = lo[1] if corner in (0, 1) else hi[1]
    rho = r * math.sqrt(rng.random())
    base = {0: math.pi, 2: math.pi / 2, 1: 3 * math.pi / 2, 3: 0.0}[int(corner)]
    ang = base + rng.uniform(0, math.pi / 2)
    return np.array([cx + rho * math.cos(ang), cy + rho * math.sin(ang)])


def sample_boolean_config(
    model: BooleanModel,
    rect: BoxWindow,
    rng: np.random.Generator,
    r_split: Optional[float] = None,
) -> PointConfig:
    """Sample all grains whose support can meet ``rect``.

    Bounded laws: centers in rect padded by the support bound.  Unbounded
    laws: grains with radius <= r_split sampled on the r_split-padded
    window, plus the exact Poisson tail of larger grains touching the
    rectangle (size-biased radius, uniform center on the dilated rect).
    """
    grain = model.grain
    bound = grain.max_radius
    if bound is not None:
        padded = rect.pad(bound)
        n = rng.poisson(model.gamma * padded.volume)
        pts = padded.sample_uniform(rng, n)
        radii = grain.law.sample(rng, n)
        return PointConfig(padded, pts, {"radius": radii})

    law = grain.law
    if not isinstance(law, ParetoRadius):
        raise TypeError("unbounded sampling implemented for Pareto radii")
    if model.dim != 2 or grain.kind != "ball":
        raise NotImplementedError("unbounded grains: planar balls only")
    if r_split is None:
        raise ValueError("unbounded radius law needs r_split")

    # small grains: ordinary padded sampling, radii conditioned <= r_split
    padded = rect.pad(r_split)
    p_small = 1.0 - law.survival(r_split)
    n_small = rng.poisson(model.gamma * padded.volume * p_small)
    radii_small = np.empty(n_small)
    filled = 0
    while filled < n_small:  # rejection against the r_split cutoff
        cand = law.sample(rng, n_small - filled)
        cand = cand[cand <= r_split]
        radii_small[filled : filled + len(cand)] = cand
        filled += len(cand)
    pts_small = padded.sample_uniform(rng, n_small)

    # exact tail: grains with radius > r_split touching rect
    lo = np.asarray(rect.lo)
    hi = np.asarray(rect.hi)
    a, b = hi - lo
    t0 = law.tail_moment(0, r_split)
    t1 = law.tail_moment(1, r_split)
    t2 = law.tail_moment(2, r_split)
    comp_mass = model.gamma * np.array(
        [a * b * t0, 2.0 * (a + b) * t1, math.pi * t2]
    )
    mass = comp_mass.sum()
    n_big = rng.poisson(mass)
    pts_big = np.empty((n_big, 2))
    radii_big = np.empty(n_big)
    shape = law.shape
    cut = max(r_split, law.x_min)
    for i in range(n_big):
        j = rng.choice(3, p=comp_mass / mass)
        radii_big[i] = cut * rng.random() ** (-1.0 / (shape - j))
        pts_big[i] = _sample_rounded_rect(rng, lo, hi, radii_big[i])

    return PointConfig(
        padded,
        np.concatenate([pts_small, pts_big]),
        {"radius": np.concatenate([radii_small, radii_big])},
    )


def truncate_radii(
    config: PointConfig, model: BooleanModel, n: float, epsilon: float
) -> tuple[PointConfig, float]:
    """Drop grains with radius > n^(1-epsilon); return the analytic bound on
    the probability that the truncation changes anything on the window.

    The bound is gamma * integral over (r_n, inf) of vol(rect + B_r) Q(dr):
    the expected number of removed grains able to touch the window, which
    dominates P(f differs).  Requires 0 < epsilon < alpha/(2+alpha) where
    alpha is the declared heavy-tail moment margin.
    """
    law = model.grain.law
    if isinstance(law, ParetoRadius):
        alpha = law.shape - 2.0
        if alpha <= 0:
            raise ValueError("radius law lacks a finite 2+alpha moment")
        if not 0.0 < epsilon < alpha / (2.0 + alpha):
            raise ValueError("need 0 < epsilon < alpha/(2+alpha)")
    r_n = float(n) ** (1.0 - epsilon)
    radii = config.marks["radius"]
    kept = config.take(radii <= r_n)
    if law.bound is not None:
        return kept, 0.0 if law.bound <= r_n else _bounded_tail_bound()
    lo = np.asarray(config.window.lo)
    hi = np.asarray(config.window.hi)
    a, b = hi - lo
    bound = model.gamma * (
        a * b * law.tail_moment(0, r_n)
        + 2.0 * (a + b) * law.tail_moment(1, r_n)
        + math.pi * law.tail_moment(2, r_n)
    )
    return kept, float(bound)


def _bounded_tail_bound() -> float:
    raise ValueError("truncation radius below the bounded support is not a no-op")


# ---------------------------------------------------------------------------
# Boolean worlds (grain graph + optional raster layer)


class BooleanWorld:
    """Occupancy structure for one Boolean-model realization.

    Grains meeting ``rect`` are indexed; k=1 components live in a
    union-find over the grain intersection graph.
    """

    def __init__(self, config: PointConfig, model: BooleanModel, rect: BoxWindow):
        if model.grain.kind == "raster":
            raise ValueError("raster grains support raster-mode queries only")
        self.model = model
        self.rect = rect
        self.config = config
        pts = np.atleast_2d(config.points)
        if pts.size == 0:
            pts = pts.reshape(0, model.dim)
        radii = config.marks.get("radius")
        if radii is None:
            if config.size:
                raise ValueError("config lacks radius marks")
            radii = np.empty(0)
        keep = _grains_meeting_rect(pts, radii, rect, model.grain.kind)
        self.points = pts[keep]
        self.radii = np.asarray(radii)[keep]
        self.n = len(self.points)
        self._uf: Optional[UnionFind] = None
        self._raster_cache: dict[float, np.ndarray] = {}

    # -- intersection graph ------------------------------------------------

    def _pairs(self) -> np.ndarray:
        if self.n < 2:
            return np.empty((0, 2), dtype=int)
        bound = self.model.grain.max_radius
        r_ref = bound if bound is not None else float(np.quantile(self.radii, 0.99))
        tree = cKDTree(self.points)
        cand = tree.query_pairs(2.0 * r_ref, output_type="ndarray")
        big = np.flatnonzero(self.radii > r_ref)
        if len(big):
            r_max = float(self.radii.max())
            extra = []
            for i in big:
                for j in tree.query_ball_point(self.points[i], self.radii[i] + r_max):
                    if j != i:
                        extra.append((min(i, j), max(i, j)))
            if extra:
                cand = np.unique(
                    np.vstack([cand, np.array(extra, dtype=int)]), axis=0
                )
        if len(cand) == 0:
            return cand
        d = self.points[cand[:, 0]] - self.points[cand[:, 1]]
        rsum = self.radii[cand[:, 0]] + self.radii[cand[:, 1]]
        if self.model.grain.kind == "ball":
            hit = np.einsum("ij,ij->i", d, d) < rsum**2
        else:  # axis-aligned boxes: strict overlap in every axis
            hit = np.all(np.abs(d) < rsum[:, None], axis=1)
        return cand[hit]

    @property
    def uf(self) -> UnionFind:
        if self._uf is None:
            uf = UnionFind(self.n)
            for i, j in self._pairs():
                uf.union(int(i), int(j))
            self._uf = uf
        return self._uf

    # -- point queries -------------------------------------------------------

    def cover_count(self, x: np.ndarray) -> int:
        if self.n == 0:
            return 0
        x = np.asarray(x, dtype=float)
        d = self.points - x
        if self.model.grain.kind == "ball":
            inside = np.einsum("ij,ij->i", d, d) <= self.radii**2
        else:
            inside = np.all(np.abs(d) <= self.radii[:, None], axis=1)
        return int(np.count_nonzero(inside))

    def grains_covering(self, x: np.ndarray) -> np.ndarray:
        if self.n == 0:
            return np.empty(0, dtype=int)
        x = np.asarray(x, dtype=float)
        d = self.points - x
        if self.model.grain.kind == "ball":
            inside = np.einsum("ij,ij->i", d, d) <= self.radii**2
        else:
            inside = np.all(np.abs(d) <= self.radii[:, None], axis=1)
        return np.flatnonzero(inside)

    def grains_meeting_face(self, axis: int, coord: float) -> np.ndarray:
        """Grains intersecting the closed boundary face {x_axis = coord},
        clipped to the rect's extent in the other axes."""
        if self.n == 0:
            return np.empty(0, dtype=int)
        lo = np.asarray(self.rect.lo)
        hi = np.asarray(self.rect.hi)
        gap = np.zeros((self.n, self.model.dim))
        for ax in range(self.model.dim):
            if ax == axis:
                gap[:, ax] = np.abs(self.points[:, ax] - coord)
            else:
                gap[:, ax] = np.maximum(
                    0.0,
                    np.maximum(lo[ax] - self.points[:, ax], self.points[:, ax] - hi[ax]),
                )
        if self.model.grain.kind == "ball":
            hit = np.einsum("ij,ij->i", gap, gap) <= self.radii**2
        else:
            hit = np.all(gap <= self.radii[:, None], axis=1)
        return np.flatnonzero(hit)

    def grains_meeting_sphere(self, s: float, center=None) -> np.ndarray:
        """Grains intersecting the Euclidean sphere of radius s."""
        if self.n == 0:
            return np.empty(0, dtype=int)
        c = np.zeros(self.model.dim) if center is None else np.asarray(center)
        if self.model.grain.kind == "ball":
            dist = np.linalg.norm(self.points - c, axis=1)
            return np.flatnonzero(np.abs(dist - s) <= self.radii)
        # boxes intersect the sphere iff the nearest and farthest box points
        # straddle the radius
        offset = np.abs(self.points - c)
        near = np.linalg.norm(np.maximum(0.0, offset - self.radii[:, None]), axis=1)
        far = np.linalg.norm(offset + self.radii[:, None], axis=1)
        return np.flatnonzero((near <= s) & (s <= far))

    def grains_meeting_linf_box(self, half: float) -> np.ndarray:
        """Grains intersecting the closed box [-half, half]^d."""
        if self.n == 0:
            return np.empty(0, dtype=int)
        gap = np.maximum(0.0, np.abs(self.points) - half)
        if self.model.grain.kind == "ball":
            return np.flatnonzero(np.einsum("ij,ij->i", gap, gap) <= self.radii**2)
        return np.flatnonzero(np.all(gap <= self.radii[:, None], axis=1))

    def grains_leaving_linf_box(self, half: float) -> np.ndarray:
        """Grains meeting the complement of the open box (-half, half)^d.

        For both grain kinds the farthest l_inf coordinate of the grain is
        the center's plus the radius/half-side.
        """
        if self.n == 0:
            return np.empty(0, dtype=int)
        reach = np.max(np.abs(self.points), axis=1) + self.radii
        return np.flatnonzero(reach >= half)

    def connected(self, idx_a: np.ndarray, idx_b: np.ndarray) -> bool:
        if len(idx_a) == 0 or len(idx_b) == 0:
            return False
        ra = np.unique(self.uf.roots(idx_a))
        rb = np.unique(self.uf.roots(idx_b))
        return bool(len(np.intersect1d(ra, rb, assume_unique=True)) > 0)

    # -- raster layer --------------------------------------------------------

    def cover_raster(self, resolution: float) -> np.ndarray:
        """Coverage counts at cell centers of the rect grid."""
        if resolution in self._raster_cache:
            return self._raster_cache[resolution]
        counts = _paint_counts(
            self.points,
            self.radii,
            self.rect,
            resolution,
            self.model.grain.kind,
            self.model.grain,
        )
        self._raster_cache[resolution] = counts
        return counts

    def occupancy_raster(self, resolution: float) -> np.ndarray:
        return self.cover_raster(resolution) >= self.model.k


def _grains_meeting_rect(
    pts: np.ndarray, radii: np.ndarray, rect: BoxWindow, kind: str
) -> np.ndarray:
    if len(pts) == 0:
        return np.zeros(0, dtype=bool)
    lo = np.asarray(rect.lo)
    hi = np.asarray(rect.hi)
    gap = np.maximum(0.0, np.maximum(lo - pts, pts - hi))
    radii = np.asarray(radii)
    if kind == "ball":
        return np.einsum("ij,ij->i", gap, gap) <= radii**2
    return np.all(gap <= radii[:, None], axis=1)


def _cell_centers(rect: BoxWindow, h: float) -> tuple[np.ndarray, np.ndarray]:
    lo = np.asarray(rect.lo)
    hi = np.asarray(rect.hi)
    nx = max(1, int(round((hi[0] - lo[0]) / h)))
    ny = max(1, int(round((hi[1] - lo[1]) / h)))
    xs = lo[0] + (np.arange(nx) + 0.5) * h
    ys = lo[1] + (np.arange(ny) + 0.5) * h
    return xs, ys


def _paint_counts(pts, radii, rect, h, kind, grain: GrainSpec) -> np.ndarray:
    xs, ys = _cell_centers(rect, h)
    counts = np.zeros((len(xs), len(ys)), dtype=np.int32)
    lo = np.asarray(rect.lo)
    for g in range(len(pts)):
        c = pts[g]
        r = radii[g]
        if kind == "raster":
            _paste_stencil(counts, grain, c, rect, h)
            continue
        reach = r if kind == "ball" else r * math.sqrt(2.0)
        i0 = max(0, int((c[0] - reach - lo[0]) / h))
        i1 = min(len(xs), int((c[0] + reach - lo[0]) / h) + 1)
        j0 = max(0, int((c[1] - reach - lo[1]) / h))
        j1 = min(len(ys), int((c[1] + reach - lo[1]) / h) + 1)
        if i0 >= i1 or j0 >= j1:
            continue
        dx = xs[i0:i1, None] - c[0]
        dy = ys[None, j0:j1] - c[1]
        if kind == "ball":
            mask = dx * dx + dy * dy <= r * r
        else:
            mask = (np.abs(dx) <= r) & (np.abs(dy) <= r)
        counts[i0:i1, j0:j1] += mask
    return counts


def _paste_stencil(counts, grain: GrainSpec, c, rect, h) -> None:
    if abs(grain.stencil_cell - h) > 1e-12:
        raise ValueError("stencil cell size must match raster resolution")
    sx, sy = grain.stencil.shape
    lo = np.asarray(rect.lo)
    i0 = int(round((c[0] - lo[0]) / h - sx / 2))
    j0 = int(round((c[1] - lo[1]) / h - sy / 2))
    ia, ja = max(0, i0), max(0, j0)
    ib = min(counts.shape[0], i0 + sx)
    jb = min(counts.shape[1], j0 + sy)
    if ia >= ib or ja >= jb:
        return
    counts[ia:ib, ja:jb] += grain.stencil[ia - i0 : ib - i0, ja - j0 : jb - j0]


# ---------------------------------------------------------------------------
# Confetti worlds


def required_confetti_horizon(
    model: ConfettiModel, resolution: float, target: float = 1e-8, dim: int = 2
) -> float:
    """Smallest horizon with uncolored-cell bound exp(-a^d b1 b2 h) <= target.

    b_i is the probability that a grain of color i contains a ball of
    radius a*sqrt(d) around its center (so a grain landing anywhere in a
    raster cell covers the whole cell).
    """
    a = resolution
    guard = a * math.sqrt(dim)
    betas = []
    for spec in (model.black, model.white):
        law = spec.law
        scale = 1.0 if spec.kind == "ball" else 1.0  # box half-side >= guard too
        if isinstance(law, FixedRadius):
            beta = 1.0 if law.r * scale >= guard else 0.0
        elif isinstance(law, UniformRadius):
            beta = max(0.0, min(1.0, (law.hi - max(law.lo, guard)) / (law.hi - law.lo)))
        elif isinstance(law, ParetoRadius):
            beta = law.survival(guard)
        else:  # pragma: no cover
            raise TypeError("unsupported radius law for horizon rule")
        betas.append(beta)
    rate = a**dim * betas[0] * betas[1]
    if rate <= 0:
        raise ValueError("grains too small relative to the raster; no horizon rule")
    return math.log(1.0 / target) / rate


class ConfettiWorld:
    """First-arrival coloring of a planar raster; records the grains used."""

    def __init__(
        self,
        model: ConfettiModel,
        rect: BoxWindow,
        resolution: float,
        black: np.ndarray,
        config: PointConfig,
    ):
        self.model = model
        self.rect = rect
        self.resolution = resolution
        self.black = black  # bool (nx, ny)
        self.config = config


def _confetti_paint(
    best_time: np.ndarray,
    best_black: np.ndarray,
    pts: np.ndarray,
    times: np.ndarray,
    colors: np.ndarray,
    radii: np.ndarray,
    rect: BoxWindow,
    h: float,
    kinds: tuple[str, str],
) -> None:
    """Fold a batch of grains into the per-cell first-arrival table."""
    if len(pts) == 0:
        return
    xs, ys = _cell_centers(rect, h)
    nx, ny = len(xs), len(ys)
    lo = np.asarray(rect.lo)
    reach = radii * (1.0 if kinds == ("ball", "ball") else math.sqrt(2.0))
    k_max = int(np.ceil((reach.max() if len(reach) else 0.0) / h)) + 1
    ix = np.floor((pts[:, 0] - lo[0]) / h).astype(np.int32)
    iy = np.floor((pts[:, 1] - lo[1]) / h).astype(np.int32)
    offs = np.arange(-k_max, k_max + 1, dtype=np.int32)
    oi, oj = np.meshgrid(offs, offs, indexing="ij")
    oi = oi.ravel()
    oj = oj.ravel()
    # offset of the grain center from its cell's center, per grain
    sub_x = lo[0] + (ix + 0.5) * h - pts[:, 0]
    sub_y = lo[1] + (iy + 0.5) * h - pts[:, 1]
    dx = sub_x[:, None] + (oi * h)[None, :]
    dy = sub_y[:, None] + (oj * h)[None, :]
    if kinds[0] == "ball" and kinds[1] == "ball":
        covered = dx * dx + dy * dy <= (radii**2)[:, None]
    else:
        half = radii[:, None]
        ball_like = np.array([kinds[0] == "ball", kinds[1] == "ball"])
        is_ball = ball_like[colors][:, None]
        covered = np.where(
            is_ball,
            dx * dx + dy * dy <= (radii**2)[:, None],
            (np.abs(dx) <= half) & (np.abs(dy) <= half),
        )
    ci = ix[:, None] + oi[None, :]
    cj = iy[:, None] + oj[None, :]
    covered &= (ci >= 0) & (ci < nx) & (cj >= 0) & (cj < ny)
    g_idx, o_idx = np.nonzero(covered)
    flat = ci[g_idx, o_idx].astype(np.int64) * ny + cj[g_idx, o_idx]
    t = times[g_idx]
    np.minimum.at(best_time, flat, t)
    winner = t == best_time[flat]
    best_black[flat[winner]] = colors[g_idx[winner]] == 0


def _confetti_paint_cells(
    best_time: np.ndarray,
    best_black: np.ndarray,
    cell_ids: np.ndarray,
    cell_xy: np.ndarray,
    pts: np.ndarray,
    times: np.ndarray,
    colors: np.ndarray,
    radii: np.ndarray,
    kinds: tuple[str, str],
) -> None:
    """Cell-centric variant for a handful of still-uncolored cells."""
    if len(pts) == 0 or len(cell_ids) == 0:
        return
    dx = cell_xy[:, 0][:, None] - pts[None, :, 0]
    dy = cell_xy[:, 1][:, None] - pts[None, :, 1]
    if kinds[0] == "ball" and kinds[1] == "ball":
        covered = dx * dx + dy * dy <= (radii**2)[None, :]
    else:
        ball_like = np.array([kinds[0] == "ball", kinds[1] == "ball"])
        is_ball = ball_like[colors][None, :]
        covered = np.where(
            is_ball,
            dx * dx + dy * dy <= (radii**2)[None, :],
            (np.abs(dx) <= radii[None, :]) & (np.abs(dy) <= radii[None, :]),
        )
    t_mat = np.where(covered, times[None, :], np.inf)
    arg = np.argmin(t_mat, axis=1)
    t_best = t_mat[np.arange(len(cell_ids)), arg]
    better = t_best < best_time[cell_ids]
    ids = cell_ids[better]
    best_time[ids] = t_best[better]
    best_black[ids] = colors[arg[better]] == 0


def confetti_world_from_config(
    config: PointConfig,
    model: ConfettiModel,
    rect: BoxWindow,
    resolution: float,
) -> ConfettiWorld:
    """Deterministic repaint from an explicit grain record."""
    xs, ys = _cell_centers(rect, resolution)
    ncell = len(xs) * len(ys)
    best_time = np.full(ncell, np.inf)
    best_black = np.zeros(ncell, dtype=bool)
    kinds = (model.black.kind, model.white.kind)
    _confetti_paint(
        best_time,
        best_black,
        np.atleast_2d(config.points) if config.size else np.empty((0, 2)),
        config.marks.get("birth_time", np.empty(0)),
        config.marks.get("color", np.empty(0, dtype=np.uint8)).astype(int),
        config.marks.get("radius", np.empty(0)),
        rect,
        resolution,
        kinds,
    )
    if np.any(np.isinf(best_time)):
        needed = required_confetti_horizon(model, resolution)
        raise RuntimeError(
            f"uncolored cells remain; increase horizon to >= {needed:.3g}"
        )
    black = best_black.reshape(len(xs), len(ys))
    return ConfettiWorld(model, rect, resolution, black, config)


def sample_confetti_world(
    model: ConfettiModel,
    rect: BoxWindow,
    resolution: float,
    rng: np.random.Generator,
) -> ConfettiWorld:
    """Sample a confetti raster by first-arrival painting.

    Grains arrive in time order; painting stops once every cell is colored
    (later arrivals cannot change a first-arrival color), or fails with the
    required horizon if the declared horizon is exhausted first.
    """
    horizon = model.horizon
    if horizon is None:
        horizon = required_confetti_horizon(model, resolution)
    bounds = [s.max_radius for s in (model.black, model.white)]
    if any(b is None for b in bounds):
        raise ValueError("confetti grains must be bounded")
    pad = max(bounds)
    padded = rect.pad(pad)
    xs, ys = _cell_centers(rect, resolution)
    ncell = len(xs) * len(ys)
    best_time = np.full(ncell, np.inf)
    best_black = np.zeros(ncell, dtype=bool)
    kinds = (model.black.kind, model.white.kind)

    rate_pt = model.point_cover_rate()
    t_first = (math.log(ncell) - 2.0) / rate_pt if rate_pt > 0 else horizon
    t_first = min(horizon, max(t_first, 1.0 / max(rate_pt, 1e-9)))
    t_chunk = 4.0 / rate_pt if rate_pt > 0 else horizon
    lo = np.asarray(rect.lo)
    t_lo = 0.0
    first = True
    chunks: list[PointConfig] = []
    while t_lo < horizon:
        t_hi = min(horizon, t_lo + (t_first if first else t_chunk))
        n = rng.poisson(padded.volume * (t_hi - t_lo))
        pts = padded.sample_uniform(rng, n)
        times = rng.uniform(t_lo, t_hi, size=n)
        colors = (rng.random(n) >= model.p).astype(int)  # 0 = black
        r_black = model.black.law.sample(rng, n)
        r_white = model.white.law.sample(rng, n)
        radii = np.where(colors == 0, r_black, r_white)
        chunks.append(
            PointConfig(
                padded,
                pts,
                {
                    "birth_time": times,
                    "color": colors.astype(np.uint8),
                    "radius": radii,
                },
            )
        )
        if first:
            _confetti_paint(
                best_time, best_black, pts, times, colors, radii,
                rect, resolution, kinds,
            )
        else:
            # only a few cells remain: match grains against them directly
            remaining = np.flatnonzero(np.isinf(best_time))
            cell_xy = np.column_stack(
                [
                    lo[0] + (remaining // len(ys) + 0.5) * resolution,
                    lo[1] + (remaining % len(ys) + 0.5) * resolution,
                ]
            )
            _confetti_paint_cells(
                best_time, best_black, remaining, cell_xy,
                pts, times, colors, radii, kinds,
            )
        first = False
        t_lo = t_hi
        if not np.any(np.isinf(best_time)):
            break
    if np.any(np.isinf(best_time)):
        needed = required_confetti_horizon(model, resolution)
        raise RuntimeError(
            f"horizon {horizon:g} left uncolored cells; need >= {needed:.3g}"
        )
    config = chunks[0]
    for extra in chunks[1:]:
        config = PointConfig(
            padded,
            np.concatenate([config.points, extra.points]),
            {k: np.concatenate([config.marks[k], extra.marks[k]]) for k in config.marks},
        )
    black = best_black.reshape(len(xs), len(ys))
    return ConfettiWorld(model, rect, resolution, black, config)


# ---------------------------------------------------------------------------
# Events and queries


@dataclass(frozen=True)
class EventQuery:
    """Finite-window percolation event.

    kinds: "cross" (left-right crossing of the rect), "arm" (l_inf annulus
    crossing, needs r < s), "one_arm" (origin to the Euclidean sphere of
    radius s), "origin_to_infinity_proxy" (alias for one_arm at the largest
    s fitting the window; 0 <-> infinity itself is never evaluated).
    """

    kind: str
    r: float = 0.0
    s: float = 0.0

    def __post_init__(self):
        if self.kind not in ("cross", "arm", "one_arm", "origin_to_infinity_proxy"):
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.kind == "arm" and not self.r < self.s:
            raise ValueError("arm event needs r < s")


PercWorld = BooleanWorld | ConfettiWorld


def build_world(
    config: PointConfig,
    model: BooleanModel | ConfettiModel,
    rect: BoxWindow,
    resolution: Optional[float] = None,
) -> PercWorld:
    if isinstance(model, ConfettiModel):
        if resolution is None:
            raise ValueError("confetti worlds need a raster resolution")
        return confetti_world_from_config(config, model, rect, resolution)
    return BooleanWorld(config, model, rect)


def sample_boolean_world(
    model: BooleanModel,
    rect: BoxWindow,
    rng: np.random.Generator,
    r_split: Optional[float] = None,
) -> BooleanWorld:
    return BooleanWorld(sample_boolean_config(model, rect, rng, r_split), model, rect)


def is_k_covered(world: BooleanWorld, x: np.ndarray) -> bool:
    return world.cover_count(x) >= world.model.k


_ADJACENCY = {
    "four": None,
    "eight": np.ones((3, 3), dtype=int),
    # 4-neighbors plus the (+1,+1)/(-1,-1) diagonal pair: self-matching
    # (triangular-lattice) adjacency, invariant under transposition
    "tri": np.array([[1, 1, 0], [1, 1, 1], [0, 1, 1]], dtype=int),
}


def _raster_label(mask: np.ndarray, adjacency: str) -> tuple[np.ndarray, int]:
    return ndimage.label(mask, structure=_ADJACENCY[adjacency])


def _raster_crossing(mask: np.ndarray, axis: int, adjacency: str) -> bool:
    if mask.shape[axis] == 0 or not mask.any():
        return False
    labels, _ = _raster_label(mask, adjacency)
    first = labels.take(0, axis=axis)
    last = labels.take(-1, axis=axis)
    shared = np.intersect1d(first[first > 0], last[last > 0])
    return bool(len(shared) > 0)


def crossing(
    world: PercWorld,
    axis: int = 0,
    resolution: Optional[float] = None,
) -> bool:
    """Side-to-side crossing of the world's rectangle along ``axis``."""
    if isinstance(world, ConfettiWorld):
        return _raster_crossing(world.black, axis, "tri")
    if world.model.k == 1 and world.model.grain.kind in ("ball", "box"):
        rect = world.rect
        a = world.grains_meeting_face(axis, rect.lo[axis])
        b = world.grains_meeting_face(axis, rect.hi[axis])
        return world.connected(a, b)
    if resolution is None:
        resolution = _default_resolution(world.model)
    return _raster_crossing(world.occupancy_raster(resolution), axis, "eight")


def _default_resolution(model: BooleanModel) -> float:
    """Default raster cell: an eighth of the smallest grain radius r0."""
    law = model.grain.law
    if isinstance(law, FixedRadius):
        r0 = law.r
    elif isinstance(law, UniformRadius):
        r0 = law.lo if law.lo > 0 else law.hi / 2.0
    elif isinstance(law, ParetoRadius):
        r0 = law.x_min
    else:  # pragma: no cover
        raise ValueError("raster queries need an explicit resolution")
    return r0 / 8.0


def _require_fits(world: BooleanWorld, s: float) -> None:
    lo = np.asarray(world.rect.lo)
    hi = np.asarray(world.rect.hi)
    if np.any(lo > -s) or np.any(hi < s):
        raise ValueError(f"event radius {s} does not fit inside the world rect")


def one_arm_event(world: BooleanWorld, s: float) -> bool:
    """Origin connected to the Euclidean sphere of radius s (k=1 exact)."""
    _require_fits(world, s)
    if world.model.k == 1:
        a = world.grains_covering(np.zeros(world.model.dim))
        b = world.grains_meeting_sphere(s)
        return world.connected(a, b)
    h = _default_resolution(world.model)
    mask = world.occupancy_raster(h)
    labels, _ = _raster_label(mask, "eight")
    xs, ys = _cell_centers(world.rect, h)
    i0 = int(np.argmin(np.abs(xs)))
    j0 = int(np.argmin(np.abs(ys)))
    lab0 = labels[i0, j0]
    if lab0 == 0:
        return False
    rr = np.hypot(xs[:, None], ys[None, :])
    ring = np.abs(rr - s) <= h
    return bool(np.any(labels[ring] == lab0))


def arm_event(world: BooleanWorld, r: float, s: float) -> bool:
    """l_inf annulus crossing B_r^inf -> boundary of B_s^inf.

    Convention: the event holds automatically when s <= r.
    """
    if s <= r:
        return True
    _require_fits(world, s)
    if world.model.k == 1:
        a = world.grains_meeting_linf_box(r)
        b = world.grains_leaving_linf_box(s)
        return world.connected(a, b)
    h = _default_resolution(world.model)
    mask = world.occupancy_raster(h)
    labels, _ = _raster_label(mask, "eight")
    xs, ys = _cell_centers(world.rect, h)
    inner = (np.abs(xs)[:, None] <= r) & (np.abs(ys)[None, :] <= r)
    linf = np.maximum(np.abs(xs)[:, None], np.abs(ys)[None, :])
    outer = linf >= s
    la = np.unique(labels[inner & (labels > 0)])
    lb = np.unique(labels[outer & (labels > 0)])
    return bool(len(np.intersect1d(la, lb)) > 0)


def evaluate_event(world: PercWorld, query: EventQuery) -> bool:
    """Dispatch a finite-window event query on a built world."""
    if query.kind == "cross":
        return crossing(world)
    if isinstance(world, ConfettiWorld):
        raise NotImplementedError("arm queries on confetti use crossing proxies")
    if query.kind == "arm":
        return arm_event(world, query.r, query.s)
    if query.kind == "one_arm":
        return one_arm_event(world, query.s)
    # origin_to_infinity_proxy: one-arm at the largest radius fitting the rect
    lo = np.asarray(world.rect.lo)
    hi = np.asarray(world.rect.hi)
    s = float(min(np.min(-lo), np.min(hi)))
    return one_arm_event(world, s)


# ---------------------------------------------------------------------------
# Monte Carlo estimators


def _bernoulli_se(p_hat: float, n: int) -> float:
    return math.sqrt(max(p_hat * (1.0 - p_hat), 1e-12) / n)


def one_arm(
    model: BooleanModel,
    s: float,
    samples: int,
    rng_factory: Callable[[int], np.random.Generator],
) -> tuple[float, float]:
    """theta_s estimate: P(origin connected to the sphere of radius s)."""
    pad = model.grain.max_radius or 0.0
    rect = BoxWindow((-s - pad, -s - pad), (s + pad, s + pad))
    hits = 0
    for i in range(samples):
        world = sample_boolean_world(model, rect, rng_factory(i))
        hits += one_arm_event(world, s)
    p = hits / samples
    return p, _bernoulli_se(p, samples)


def arm_probability(
    model: BooleanModel,
    r: float,
    s: float,
    samples: int,
    rng_factory: Callable[[int], np.random.Generator],
) -> tuple[float, float]:
    if not r < s:
        raise ValueError("arm event needs r < s")
    pad = model.grain.max_radius or 0.0
    rect = BoxWindow((-s - pad, -s - pad), (s + pad, s + pad))
    hits = 0
    for i in range(samples):
        world = sample_boolean_world(model, rect, rng_factory(i))
        hits += arm_event(world, r, s)
    p = hits / samples
    return p, _bernoulli_se(p, samples)


def crossing_probability(
    model: BooleanModel | ConfettiModel,
    rect: BoxWindow,
    samples: int,
    rng_factory: Callable[[int], np.random.Generator],
    resolution: Optional[float] = None,
    r_split: Optional[float] = None,
) -> tuple[float, float]:
    hits = 0
    for i in range(samples):
        rng = rng_factory(i)
        if isinstance(model, ConfettiModel):
            world = sample_confetti_world(model, rect, resolution, rng)
        else:
            world = sample_boolean_world(model, rect, rng, r_split)
        hits += crossing(world, resolution=resolution)
    p = hits / samples
    return p, _bernoulli_se(p, samples)


@dataclass
class ThresholdScan:
    params: np.ndarray
    n: float
    estimates: np.ndarray
    ses: np.ndarray
    samples: int
    seed: int
    decay_slope: Optional[float] = None
    decay_r2: Optional[float] = None

    def to_csv(self) -> str:
        lines = ["param,n,estimate,se,samples,seed"]
        for p, e, s in zip(self.params, self.estimates, self.ses):
            lines.append(
                f"{p:.17g},{self.n:.17g},{e:.17g},{s:.17g},{self.samples},{self.seed}"
            )
        return "\n".join(lines) + "\n"


def threshold_scan(
    model: BooleanModel | ConfettiModel,
    param_grid: np.ndarray,
    n: float,
    samples: int,
    seed: int,
    event: str = "cross",
    resolution: Optional[float] = None,
) -> ThresholdScan:
    """Crossing probability (or theta_n) across a sorted parameter grid."""
    from .rng import stream

    param_grid = np.asarray(param_grid, dtype=float)
    if np.any(np.diff(param_grid) <= 0):
        raise ValueError("parameter grid must be strictly increasing")
    rect = BoxWindow((0.0, 0.0), (float(n), float(n)))
    est = np.empty(len(param_grid))
    ses = np.empty(len(param_grid))
    for j, p in enumerate(param_grid):
        m = model.with_p(p) if isinstance(model, ConfettiModel) else model.with_gamma(p)
        if event == "cross":
            e, s = crossing_probability(
                m, rect, samples, lambda i: stream(seed, j, i), resolution=resolution
            )
        elif event == "one_arm":
            e, s = one_arm(m, n, samples, lambda i: stream(seed, j, i))
        else:
            raise ValueError(f"unsupported scan event {event!r}")
        est[j] = e
        ses[j] = s
    return ThresholdScan(param_grid, n, est, ses, samples, seed)


def one_arm_decay_fit(
    model: BooleanModel,
    s_values: np.ndarray,
    samples: int,
    seed: int,
) -> dict:
    """Fit log theta_s ~ a + b*s by reusing max-reach distances.

    Per replica the maximal sphere radius reached from the origin is
    computed once; theta_s estimates for every s share the replicas.
    """
    from .rng import stream

    s_values = np.asarray(s_values, dtype=float)
    s_max = float(s_values.max())
    pad = model.grain.max_radius or 0.0
    rect = BoxWindow((-s_max - pad, -s_max - pad), (s_max + pad, s_max + pad))
    reach = np.zeros(samples)
    for i in range(samples):
        world = sample_boolean_world(model, rect, stream(seed, i))
        origin = world.grains_covering(np.zeros(world.model.dim))
        if len(origin) == 0:
            continue
        comp_roots = np.unique(world.uf.roots(origin))
        member = np.isin(world.uf.roots(np.arange(world.n)), comp_roots)
        dist = np.linalg.norm(world.points[member], axis=1) + world.radii[member]
        reach[i] = dist.max() if len(dist) else 0.0
    theta = np.array([(reach >= s).mean() for s in s_values])
    se = np.array([_bernoulli_se(t, samples) for t in theta])
    ok = theta > 0
    y = np.log(theta[ok])
    x = s_values[ok]
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 0.0
    return {
        "s": s_values,
        "theta": theta,
        "se": se,
        "slope": float(slope),
        "intercept": float(intercept),
        "r2": float(r2),
    }


def estimate_critical(
    prob_at: Callable[[float, int, int], tuple[float, float]],
    lo: float,
    hi: float,
    tolerance: float,
    base_samples: int = 200,
    max_rounds: int = 40,
) -> tuple[float, float]:
    """Stochastic bisection for the parameter with event probability 1/2.

    ``prob_at(param, samples, round_idx)`` returns (estimate, se).  Sample
    size grows when the estimate is statistically indistinguishable from
    1/2.  Returns (estimate, half-width CI combining bracket and noise).
    """
    p_lo, se_lo = prob_at(lo, base_samples, 0)
    p_hi, se_hi = prob_at(hi, base_samples, 1)
    if not (p_lo < 0.5 < p_hi):
        raise ValueError(
            f"invalid bracket: P({lo})={p_lo:.3f}, P({hi})={p_hi:.3f} must straddle 1/2"
        )
    round_idx = 2
    while hi - lo > tolerance and round_idx < max_rounds:
        mid = 0.5 * (lo + hi)
        samples = base_samples
        while True:
            p, se = prob_at(mid, samples, round_idx)
            round_idx += 1
            if abs(p - 0.5) > 2.0 * se or samples >= 16 * base_samples:
                break
            samples *= 2
        if p > 0.5:
            hi = mid
        else:
            lo = mid
    mid = 0.5 * (lo + hi)
    return mid, 0.5 * (hi - lo) + tolerance


def confetti_duality_check(world: ConfettiWorld) -> bool:
    """XOR of (black left-right crossing, white top-down crossing).

    Both colors use the self-matching triangular adjacency, so exactly one
    of the two crossings exists on every planar sample and the two colors
    remain exchangeable at p = 1/2.
    """
    black_lr = _raster_crossing(world.black, axis=0, adjacency="tri")
    white_td = _raster_crossing(~world.black, axis=1, adjacency="tri")
    return black_lr != white_td


def component_volume_proxy(
    world: PercWorld, origin: np.ndarray, resolution: Optional[float] = None
) -> float:
    """Raster area of the origin's occupied component, window-clipped."""
    origin = np.asarray(origin, dtype=float)
    if isinstance(world, ConfettiWorld):
        mask = world.black
        h = world.resolution
        rect = world.rect
    else:
        h = resolution or _default_resolution(world.model)
        mask = world.occupancy_raster(h)
        rect = world.rect
    xs, ys = _cell_centers(rect, h)
    i0 = int(np.clip(np.searchsorted(xs, origin[0]) - 0, 0, len(xs) - 1))
    i0 = int(np.argmin(np.abs(xs - origin[0])))
    j0 = int(np.argmin(np.abs(ys - origin[1])))
    if not mask[i0, j0]:
        return 0.0
    labels, _ = _raster_label(mask, "eight")
    return float(np.count_nonzero(labels == labels[i0, j0])) * h * h


def raster_to_text(mask: np.ndarray) -> str:
    """Plain text matrix dump (rows = y from top, '#' occupied)."""
    rows = []
    for j in range(mask.shape[1] - 1, -1, -1):
        rows.append("".join("#" if mask[i, j] else "." for i in range(mask.shape[0])))
    return "\n".join(rows) + "\n"
