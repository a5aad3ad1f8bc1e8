"""Executable stopping sets and continuous-time decision trees.

A stopping-set oracle answers "is x inside Z(mu)?".  The defining axiom --
Z(mu) is unchanged when everything outside Z(mu) is replaced by an
arbitrary configuration -- is verified empirically by
:func:`verify_stopping_axiom`; the distributional consequence (the region
outside Z(eta) can be resampled freely) by :func:`markov_property_check`.

CTDTs expose ``membership_at(t, x, mu)`` for an increasing family Z_t;
terminal sets double as stopping-set oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .percolation import BooleanModel, BooleanWorld
from .process import (
    BoxWindow,
    DiscreteWindow,
    PointConfig,
    ProcessSpec,
    superpose,
)

__all__ = [
    "StoppingSetOracle",
    "ConstantRegionSet",
    "BallGrowthCTDT",
    "ball_growth_ctdt",
    "ExplorationOracle",
    "ExplorationCTDT",
    "component_exploration",
    "LineSeed",
    "SphereSeed",
    "RandomizedStoppingSet",
    "randomize",
    "NonAttainableFixture",
    "nonattainable_fixture",
    "BrokenNearestPointOracle",
    "entry_time",
    "entry_time_table",
    "verify_stopping_axiom",
    "AxiomReport",
    "revealment",
    "RevealmentReport",
    "expected_revealed_points",
    "markov_property_check",
    "MarkovReport",
    "probe_grid",
    "restrict_to",
]


# ---------------------------------------------------------------------------
# Oracle interfaces


class StoppingSetOracle:
    """Base class: membership predicate Z(mu) evaluated at locations."""

    support_hint: Optional[BoxWindow] = None

    def contains(self, xs: np.ndarray, config: PointConfig) -> np.ndarray:
        raise NotImplementedError

    def lam_fraction(self, config: PointConfig, grid: np.ndarray) -> float:
        """Fraction of probe-grid points inside Z(config) (raster quadrature)."""
        return float(np.mean(self.contains(grid, config)))


def restrict_to(oracle: StoppingSetOracle, config: PointConfig) -> PointConfig:
    """Configuration restricted to Z(config)."""
    if config.size == 0:
        return config
    return config.take(oracle.contains(config.points, config))


class ConstantRegionSet(StoppingSetOracle):
    """Deterministic region; trivially a stopping set."""

    def __init__(self, region: Callable[[np.ndarray], np.ndarray], support=None):
        self.region = region
        self.support_hint = support

    def contains(self, xs, config):
        return np.asarray(self.region(np.asarray(xs)), dtype=bool)


class BrokenNearestPointOracle(StoppingSetOracle):
    """Deliberately broken: the OPEN ball around the origin with radius the
    distance to the nearest point of the configuration.

    The nearest point itself is outside the open ball, so replacing the
    outside by another configuration moves the radius: the axiom fails.
    """

    def __init__(self, support=None):
        self.support_hint = support

    def contains(self, xs, config):
        xs = np.atleast_2d(xs)
        if config.size == 0:
            return np.ones(len(xs), dtype=bool)
        d_star = float(np.linalg.norm(np.atleast_2d(config.points), axis=1).min())
        return np.linalg.norm(xs, axis=1) < d_star


# ---------------------------------------------------------------------------
# Ball-growth CTDT (empty-space functional)


class BallGrowthCTDT:
    """Z_t(mu) = closed ball B(x0, tau(mu) ^ t) where tau is the distance
    from x0 to the nearest configuration point inside the target region W."""

    def __init__(
        self,
        region: Callable[[np.ndarray], np.ndarray],
        x0: np.ndarray,
        support: Optional[BoxWindow] = None,
    ):
        self.region = region
        self.x0 = np.asarray(x0, dtype=float)
        self.support_hint = support

    def tau(self, config: PointConfig) -> float:
        if config.size == 0:
            return math.inf
        pts = np.atleast_2d(config.points)
        in_w = np.asarray(self.region(pts), dtype=bool)
        if not in_w.any():
            return math.inf
        return float(np.linalg.norm(pts[in_w] - self.x0, axis=1).min())

    def membership_at(self, t: float, xs: np.ndarray, config: PointConfig):
        xs = np.atleast_2d(xs)
        radius = min(self.tau(config), t)
        return np.linalg.norm(xs - self.x0, axis=1) <= radius

    def terminal(self) -> "BallGrowthTerminalSet":
        return BallGrowthTerminalSet(self)


class BallGrowthTerminalSet(StoppingSetOracle):
    def __init__(self, ctdt: BallGrowthCTDT):
        self.ctdt = ctdt
        self.support_hint = ctdt.support_hint

    def contains(self, xs, config):
        xs = np.atleast_2d(xs)
        return np.linalg.norm(xs - self.ctdt.x0, axis=1) <= self.ctdt.tau(config)


def ball_growth_ctdt(
    region: Callable[[np.ndarray], np.ndarray],
    x0,
    support: Optional[BoxWindow] = None,
) -> BallGrowthCTDT:
    return BallGrowthCTDT(region, x0, support)


# ---------------------------------------------------------------------------
# Component exploration (percolation stopping sets)


@dataclass(frozen=True)
class LineSeed:
    """Hyperplane section {x_axis = coord} clipped to the rect."""

    axis: int
    coord: float

    def distance(self, xs: np.ndarray) -> np.ndarray:
        return np.abs(np.atleast_2d(xs)[:, self.axis] - self.coord)

    def touching(self, world: BooleanWorld) -> np.ndarray:
        return world.grains_meeting_face(self.axis, self.coord)


@dataclass(frozen=True)
class SphereSeed:
    """Euclidean sphere of radius s around the origin."""

    s: float

    def distance(self, xs: np.ndarray) -> np.ndarray:
        return np.abs(np.linalg.norm(np.atleast_2d(xs), axis=1) - self.s)

    def touching(self, world: BooleanWorld) -> np.ndarray:
        return world.grains_meeting_sphere(self.s)


Seed = LineSeed | SphereSeed


def _explore_levels(world: BooleanWorld, seed: Seed) -> list[np.ndarray]:
    """Grain index sets S_1 c S_2 c ... grown round by round from the seed.

    Each round adds the grains intersecting the current revealed set; a
    fixed point must occur within (number of grains + 2) rounds.
    """
    seed_grains = seed.touching(world)
    levels: list[np.ndarray] = []
    if world.n == 0 or len(seed_grains) == 0:
        return levels
    adj: list[list[int]] = [[] for _ in range(world.n)]
    for i, j in world._pairs():
        adj[int(i)].append(int(j))
        adj[int(j)].append(int(i))
    member = np.zeros(world.n, dtype=bool)
    frontier = list(np.unique(seed_grains))
    for g in frontier:
        member[g] = True
    cap = world.n + 2
    rounds = 0
    while frontier:
        rounds += 1
        if rounds > cap:
            raise RuntimeError("exploration failed to reach a fixed point")
        levels.append(np.flatnonzero(member).copy())
        nxt = []
        for g in frontier:
            for h in adj[g]:
                if not member[h]:
                    member[h] = True
                    nxt.append(h)
        frontier = nxt
    return levels


class ExplorationOracle(StoppingSetOracle):
    """(S u seed) dilated by ``dilation``, with S the union of occupied
    components meeting the seed, rebuilt from the configuration on demand."""

    def __init__(
        self,
        model: BooleanModel,
        rect: BoxWindow,
        seed: Seed,
        dilation: Optional[float] = None,
    ):
        self.model = model
        self.rect = rect
        self.seed = seed
        r = model.grain.max_radius
        if dilation is None:
            if r is None:
                raise ValueError("unbounded grains need an explicit dilation")
            dilation = r
        self.dilation = float(dilation)
        self.support_hint = rect.pad(self.dilation)

    def _component(self, world: BooleanWorld) -> np.ndarray:
        levels = _explore_levels(world, self.seed)
        return levels[-1] if levels else np.empty(0, dtype=int)

    def contains(self, xs, config):
        xs = np.atleast_2d(xs)
        world = BooleanWorld(config, self.model, self.rect)
        out = self.seed.distance(xs) <= self.dilation
        comp = self._component(world)
        if len(comp):
            d = np.linalg.norm(
                xs[:, None, :] - world.points[None, comp, :], axis=2
            ) - world.radii[comp][None, :]
            out |= d.min(axis=1) <= self.dilation
        return out


class ExplorationCTDT:
    """Round-interpolated exploration: during round m the revealed set grows
    from (S_{m-1} u seed) + 2r to (S_m u seed) + 2r(t - m), cumulatively."""

    def __init__(self, model: BooleanModel, rect: BoxWindow, seed: Seed):
        r = model.grain.max_radius
        if r is None:
            raise ValueError("exploration CTDT needs bounded grains")
        self.model = model
        self.rect = rect
        self.seed = seed
        self.step = 2.0 * r
        self.support_hint = rect.pad(self.step)

    def _dist_to(self, xs, world, grains) -> np.ndarray:
        d = self.seed.distance(xs)
        if len(grains):
            dg = np.linalg.norm(
                xs[:, None, :] - world.points[None, grains, :], axis=2
            ) - world.radii[grains][None, :]
            d = np.minimum(d, dg.min(axis=1))
        return d

    def membership_at(self, t: float, xs: np.ndarray, config: PointConfig):
        xs = np.atleast_2d(xs)
        world = BooleanWorld(config, self.model, self.rect)
        levels = _explore_levels(world, self.seed)
        n_rounds = len(levels)
        m = int(math.floor(t))
        if m >= n_rounds:
            grains = levels[-1] if levels else np.empty(0, dtype=int)
            return self._dist_to(xs, world, grains) <= self.step
        prev = levels[m - 1] if m >= 1 else None
        out = np.zeros(len(xs), dtype=bool)
        if prev is not None:
            out |= self._dist_to(xs, world, prev) <= self.step
        out |= self._dist_to(xs, world, levels[m]) <= self.step * (t - m)
        return out

    def terminal(self) -> ExplorationOracle:
        return ExplorationOracle(self.model, self.rect, self.seed, self.step)


def component_exploration(
    model: BooleanModel,
    rect: BoxWindow,
    seed: Seed,
    dilation: Optional[float] = None,
) -> ExplorationOracle:
    return ExplorationOracle(model, rect, seed, dilation)


# ---------------------------------------------------------------------------
# Randomized stopping sets


class RandomizedStoppingSet:
    """Family Z^y with an independent randomization law for Y.

    Draws are explicit: ``draw(rng)`` returns y, ``member(y)`` the plain
    oracle, keeping every evaluation replayable.
    """

    def __init__(
        self,
        family: Callable[[object], StoppingSetOracle],
        law: Callable[[np.random.Generator], object],
        support: Optional[BoxWindow] = None,
    ):
        self.family = family
        self.law = law
        self.support_hint = support

    def draw(self, rng: np.random.Generator):
        return self.law(rng)

    def member(self, y) -> StoppingSetOracle:
        return self.family(y)

    def contains(self, xs, config, y):
        return self.family(y).contains(xs, config)


def randomize(
    family: Callable[[object], StoppingSetOracle],
    law: Callable[[np.random.Generator], object],
    support: Optional[BoxWindow] = None,
) -> RandomizedStoppingSet:
    return RandomizedStoppingSet(family, law, support)


# ---------------------------------------------------------------------------
# Non-attainable fixture (3-cell discrete space)


class NonAttainableFixture(StoppingSetOracle):
    """Stopping set on a 3-cell space that no continuous decision tree can
    attain; case table keyed by which cells are occupied."""

    def __init__(self, masses: tuple[float, float, float]):
        if len(masses) != 3 or any(m <= 0 for m in masses):
            raise ValueError("need three positive cell masses")
        self.masses = np.asarray(masses, dtype=float)
        self.window = DiscreteWindow(3)
        self.support_hint = None

    def cells_mask(self, counts: np.ndarray) -> np.ndarray:
        x1, x2, x3 = (bool(c > 0) for c in counts)
        if x1 == x2 == x3:
            return np.array([True, True, True])
        if x1 and not x2:
            return np.array([True, True, False])
        if not x1 and x3:
            return np.array([True, False, True])
        if x2 and not x3:
            return np.array([False, True, True])
        raise AssertionError("unreachable case")  # pragma: no cover

    def contains(self, xs, config):
        mask = self.cells_mask(config.counts())
        return mask[np.asarray(xs, dtype=int)]

    def lam_in_cells(self, counts: np.ndarray) -> np.ndarray:
        """lambda(C_i intersect Z) for each cell i."""
        return self.masses * self.cells_mask(counts)


def nonattainable_fixture(masses) -> NonAttainableFixture:
    return NonAttainableFixture(tuple(masses))


# ---------------------------------------------------------------------------
# Entry times


def entry_time(
    ctdt,
    x: np.ndarray,
    config: PointConfig,
    resolution: Optional[float] = None,
    t_max: float = 1.0,
    monotone_scan: int = 16,
) -> float:
    """inf{t : x in Z_t(mu)} by bisection on [0, t_max]; inf -> math.inf.

    Resolution defaults to 1e-6 * t_max.  A coarse scan guards against
    non-monotone membership curves.
    """
    if resolution is None:
        resolution = 1e-6 * t_max
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    x = np.atleast_2d(x)

    def member(t: float) -> bool:
        return bool(ctdt.membership_at(t, x, config)[0])

    if monotone_scan:
        grid = np.linspace(0.0, t_max, monotone_scan)
        vals = [member(t) for t in grid]
        if any(a and not b for a, b in zip(vals, vals[1:])):
            raise RuntimeError("non-monotone CTDT detected during bisection")
    if not member(t_max):
        return math.inf
    if member(0.0):
        return 0.0
    lo, hi = 0.0, t_max
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if member(mid):
            hi = mid
        else:
            lo = mid
    return hi


def entry_time_table(
    ctdt,
    probes: np.ndarray,
    config: PointConfig,
    resolution: Optional[float] = None,
    t_max: float = 1.0,
) -> np.ndarray:
    """Entry times at each probe location (math.inf where never entered).

    Consistency contract: membership_at(t, x, mu) iff the tabulated time is
    <= t, up to the bisection resolution.
    """
    probes = np.atleast_2d(probes)
    return np.array(
        [entry_time(ctdt, x, config, resolution, t_max) for x in probes]
    )


# ---------------------------------------------------------------------------
# Stopping-axiom verification


@dataclass
class AxiomReport:
    trials: int
    probes: int
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "probes": self.probes,
            "passed": self.passed,
            "failures": [
                {"trial": t, "probe": list(np.atleast_1d(p).astype(float))}
                for t, p in self.failures[:20]
            ],
            "failure_count": len(self.failures),
        }


def _probe_locations(process: ProcessSpec, count: int, rng) -> np.ndarray:
    if isinstance(process.window, DiscreteWindow):
        return np.arange(process.window.num_cells)
    return process.window.sample_uniform(rng, count)


def verify_stopping_axiom(
    oracle: StoppingSetOracle,
    process: ProcessSpec,
    trials: int,
    probes: int,
    rng: np.random.Generator,
) -> AxiomReport:
    """Replace everything outside Z(mu) by an independent configuration and
    re-check membership at probe locations; any flip is a counterexample."""
    report = AxiomReport(trials=trials, probes=probes)
    for trial in range(trials):
        mu = process.sample(rng)
        psi = process.sample(rng)
        inside = restrict_to(oracle, mu)
        if psi.size:
            outside_mask = ~oracle.contains(psi.points, mu)
            outside = psi.take(outside_mask)
        else:
            outside = psi
        composite = superpose(inside, outside)
        xs = _probe_locations(process, probes, rng)
        before = oracle.contains(xs, mu)
        after = oracle.contains(xs, composite)
        bad = np.flatnonzero(before != after)
        for b in bad:
            report.failures.append((trial, xs[b]))
    return report


# ---------------------------------------------------------------------------
# Revealment


@dataclass
class RevealmentReport:
    delta: float
    delta_se: float
    probes: np.ndarray
    probabilities: np.ndarray
    ses: np.ndarray
    samples: int
    grid_spacing: Optional[float]
    note: str = (
        "delta is a maximum over a finite probe grid and lower-bounds the "
        "supremum over locations; the grid spacing is reported above"
    )

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "delta_se": self.delta_se,
            "samples": self.samples,
            "grid_spacing": self.grid_spacing,
            "note": self.note,
            "probes": np.atleast_2d(self.probes).tolist(),
            "probabilities": self.probabilities.tolist(),
            "ses": self.ses.tolist(),
        }


def probe_grid(box: BoxWindow, spacing: float) -> np.ndarray:
    """Regular grid of cell centers covering the box."""
    axes = [
        lo + (np.arange(max(1, int(round((hi - lo) / spacing)))) + 0.5)
        * ((hi - lo) / max(1, int(round((hi - lo) / spacing))))
        for lo, hi in zip(box.lo, box.hi)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def revealment(
    oracle,
    process: ProcessSpec,
    probes: np.ndarray,
    samples: int,
    rng: np.random.Generator,
    grid_spacing: Optional[float] = None,
) -> RevealmentReport:
    """Empirical P(x in Z(eta)) per probe; delta is the grid maximum.

    Randomized oracles get a fresh randomization draw per sample.
    """
    probes = np.atleast_2d(probes) if not isinstance(
        process.window, DiscreteWindow
    ) else np.asarray(probes)
    counts = np.zeros(len(probes))
    randomized = isinstance(oracle, RandomizedStoppingSet)
    for _ in range(samples):
        eta = process.sample(rng)
        if randomized:
            y = oracle.draw(rng)
            counts += oracle.contains(probes, eta, y)
        else:
            counts += oracle.contains(probes, eta)
    p = counts / samples
    ses = np.sqrt(np.maximum(p * (1 - p), 1e-12) / samples)
    best = int(np.argmax(p))
    return RevealmentReport(
        delta=float(p[best]),
        delta_se=float(ses[best]),
        probes=probes,
        probabilities=p,
        ses=ses,
        samples=samples,
        grid_spacing=grid_spacing,
    )


def expected_revealed_points(
    oracle: StoppingSetOracle,
    process: ProcessSpec,
    samples: int,
    rng: np.random.Generator,
    quad_grid: Optional[np.ndarray] = None,
) -> dict:
    """Estimate E[eta(Z)] and E[lambda(Z)]; the two must agree.

    lambda(Z) uses raster quadrature over ``quad_grid`` for box windows and
    exact cell masses for discrete ones.
    """
    eta_counts = np.empty(samples)
    lam_vals = np.empty(samples)
    discrete = isinstance(process.window, DiscreteWindow)
    if not discrete and quad_grid is None:
        raise ValueError("box windows need a quadrature grid")
    if not discrete:
        cell_mass = (
            process.intensity.gamma * process.window.volume / len(quad_grid)
        )
    for i in range(samples):
        eta = process.sample(rng)
        if eta.size:
            eta_counts[i] = float(
                np.count_nonzero(oracle.contains(eta.points, eta))
            )
        else:
            eta_counts[i] = 0.0
        if discrete:
            lam_vals[i] = float(
                np.sum(
                    np.asarray(process.intensity.masses)
                    * oracle.contains(np.arange(process.window.num_cells), eta)
                )
            )
        else:
            lam_vals[i] = float(
                np.count_nonzero(oracle.contains(quad_grid, eta)) * cell_mass
            )
    e_eta, se_eta = float(eta_counts.mean()), float(
        eta_counts.std(ddof=1) / math.sqrt(samples)
    )
    e_lam, se_lam = float(lam_vals.mean()), float(
        lam_vals.std(ddof=1) / math.sqrt(samples)
    )
    return {
        "e_eta": e_eta,
        "e_eta_se": se_eta,
        "e_lam": e_lam,
        "e_lam_se": se_lam,
        "passed": abs(e_eta - e_lam) <= 3.0 * (se_eta + se_lam),
    }


# ---------------------------------------------------------------------------
# Markov property (two-sample tests)


@dataclass
class MarkovReport:
    names: list[str]
    p_values: list[float]
    level: float
    samples: int

    @property
    def passed(self) -> bool:
        cutoff = self.level / max(1, len(self.p_values))
        return all(p >= cutoff for p in self.p_values)

    def to_dict(self) -> dict:
        return {
            "names": self.names,
            "p_values": self.p_values,
            "level": self.level,
            "bonferroni_cutoff": self.level / max(1, len(self.p_values)),
            "samples": self.samples,
            "passed": self.passed,
        }


def markov_property_check(
    oracle: StoppingSetOracle,
    process: ProcessSpec,
    functionals: Sequence[tuple[str, Callable[[PointConfig], float]]],
    samples: int,
    rng: np.random.Generator,
    level: float = 0.01,
) -> MarkovReport:
    """Compare the laws of g(eta) and g(eta_Z + eta'_{X \\ Z}) with
    two-sample KS tests, Bonferroni-corrected across functionals."""
    vals_eta = np.empty((len(functionals), samples))
    vals_mix = np.empty((len(functionals), samples))
    for i in range(samples):
        eta = process.sample(rng)
        for j, (_, g) in enumerate(functionals):
            vals_eta[j, i] = g(eta)
        eta2 = process.sample(rng)
        prime = process.sample(rng)
        inside = restrict_to(oracle, eta2)
        if prime.size:
            outside = prime.take(~oracle.contains(prime.points, eta2))
        else:
            outside = prime
        mix = superpose(inside, outside)
        for j, (_, g) in enumerate(functionals):
            vals_mix[j, i] = g(mix)
    p_values = [
        float(stats.ks_2samp(vals_eta[j], vals_mix[j]).pvalue)
        for j in range(len(functionals))
    ]
    return MarkovReport(
        names=[name for name, _ in functionals],
        p_values=p_values,
        level=level,
        samples=samples,
    )
