"""Ornstein-Uhlenbeck resampling and the stationary free birth-death path.

``resample`` realizes the one-shot noise operator: survivors are kept with
probability exp(-t) and an independent Poisson((1-exp(-t)) lambda) layer is
added.  ``simulate_path`` realizes the same semigroup as an event-driven
Markov path: unit-rate exponential lifetimes, births at the total intensity
mass, stationary start.  Functional evaluation along a path happens only at
event times; there is no time discretization anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .process import PointConfig, ProcessSpec, superpose, thin

__all__ = [
    "resample",
    "BirthDeathPath",
    "simulate_path",
    "CovCurve",
    "covariance_curve",
    "noise_sensitivity_report",
    "noise_stability_bound",
    "exceptional_times",
    "critical_window_probe",
    "mehler_noise_bound",
]


def resample(
    config: PointConfig,
    t: float,
    process: ProcessSpec,
    rng: np.random.Generator,
    fresh: bool = False,
) -> PointConfig:
    """One Ornstein-Uhlenbeck step of size t (``fresh`` = the t = infinity
    flag: an independent sample)."""
    if fresh:
        return process.sample(rng)
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0.0:
        return config
    keep = math.exp(-t)
    survivors = thin(config, keep, rng)
    newcomers = process.scaled(1.0 - keep).sample(rng)
    return superpose(survivors, newcomers)


# ---------------------------------------------------------------------------
# Birth-death paths


@dataclass
class BirthDeathPath:
    """Event log of the free birth-death process on [0, horizon].

    ``events`` is time-ordered; each entry is (time, kind, point_id) with
    kind +1 for a birth and -1 for a death.  Point data lives in
    ``locations``/``marks`` indexed by point_id; ids below ``n_initial``
    are alive at time zero.
    """

    process: ProcessSpec
    horizon: float
    n_initial: int
    locations: np.ndarray
    marks: dict[str, np.ndarray]
    events: list[tuple[float, int, int]]

    def initial(self) -> PointConfig:
        return self._config(np.arange(self.n_initial))

    def _config(self, ids: np.ndarray) -> PointConfig:
        ids = np.asarray(ids, dtype=int)
        return PointConfig(
            self.process.window,
            self.locations[ids],
            {k: v[ids] for k, v in self.marks.items()},
        )

    def alive_at(self, t: float) -> PointConfig:
        alive = set(range(self.n_initial))
        for time, kind, pid in self.events:
            if time > t:
                break
            if kind > 0:
                alive.add(pid)
            else:
                alive.discard(pid)
        return self._config(sorted(alive))

    def iter_states(self):
        """Yield (event_time, config_after_event); starts with (0, initial)."""
        alive = set(range(self.n_initial))
        yield 0.0, self._config(sorted(alive))
        for time, kind, pid in self.events:
            if kind > 0:
                alive.add(pid)
            else:
                alive.discard(pid)
            yield time, self._config(sorted(alive))

    def to_csv(self) -> str:
        dim = 1 if self.locations.ndim == 1 else self.locations.shape[1]
        mark_names = sorted(self.marks)
        cols = ["time", "kind", "point_id"]
        cols += [f"x{i}" for i in range(dim)]
        cols += mark_names
        lines = [",".join(cols)]
        for time, kind, pid in self.events:
            loc = np.atleast_1d(self.locations[pid])
            row = [f"{time:.17g}", "birth" if kind > 0 else "death", str(pid)]
            row += [f"{v:.17g}" for v in loc]
            row += [f"{float(self.marks[k][pid]):.17g}" for k in mark_names]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def simulate_path(
    process: ProcessSpec, horizon: float, rng: np.random.Generator
) -> BirthDeathPath:
    """Stationary free birth-death path: Poisson(lambda) start, unit-rate
    exponential lifetimes, births at rate lambda(X) with fresh marks."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    mass = process.mass
    if not np.isfinite(mass):
        raise ValueError("path simulation needs finite intensity mass")

    initial = process.sample(rng)
    n0 = initial.size
    n_births = rng.poisson(mass * horizon)
    birth_times = np.sort(rng.uniform(0.0, horizon, size=n_births))
    born = process.sample_locations(rng, n_births)
    born_marks = (
        process.intensity.marks.sample(rng, n_births)
        if process.intensity.marks is not None
        else {}
    )

    locations = np.concatenate([initial.points, born]) if n0 or n_births else (
        initial.points
    )
    marks = {
        k: np.concatenate([initial.marks[k], born_marks[k]])
        for k in initial.marks
    }

    events: list[tuple[float, int, int]] = []
    death_initial = rng.exponential(1.0, size=n0)
    for pid in range(n0):
        if death_initial[pid] <= horizon:
            events.append((float(death_initial[pid]), -1, pid))
    lifetimes = rng.exponential(1.0, size=n_births)
    for j in range(n_births):
        pid = n0 + j
        events.append((float(birth_times[j]), +1, pid))
        d = float(birth_times[j] + lifetimes[j])
        if d <= horizon:
            events.append((d, -1, pid))
    events.sort(key=lambda e: e[0])
    return BirthDeathPath(
        process=process,
        horizon=horizon,
        n_initial=n0,
        locations=locations,
        marks=marks,
        events=events,
    )


# ---------------------------------------------------------------------------
# Covariance curves


def _mean_se(vals: np.ndarray) -> tuple[float, float]:
    vals = np.asarray(vals, dtype=float)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals)))


def _cov_se(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    prods = (a - a.mean()) * (b - b.mean())
    n = len(a)
    cov = float(prods.sum() / (n - 1))
    se = float(prods.std(ddof=1) / math.sqrt(n))
    return cov, se


@dataclass
class CovCurve:
    times: np.ndarray
    cov: np.ndarray
    se: np.ndarray
    samples: int

    def nonincreasing_within(self, k_se: float = 3.0) -> bool:
        jumps = np.diff(self.cov)
        tol = k_se * np.hypot(self.se[1:], self.se[:-1])
        return bool(np.all(jumps <= tol))

    def nonnegative_within(self, k_se: float = 3.0) -> bool:
        return bool(np.all(self.cov >= -k_se * self.se))

    def to_csv(self) -> str:
        lines = ["t,cov,se,samples"]
        for t, c, s in zip(self.times, self.cov, self.se):
            lines.append(f"{t:.17g},{c:.17g},{s:.17g},{self.samples}")
        return "\n".join(lines) + "\n"


def covariance_curve(
    f: Callable[[PointConfig], float],
    process: ProcessSpec,
    times: Sequence[float],
    samples: int,
    rng: np.random.Generator,
) -> CovCurve:
    """Paired estimates of Cov(f(eta), f(eta^t)) for each t."""
    times = np.asarray(sorted(times), dtype=float)
    base_vals = np.empty(samples)
    configs = []
    for i in range(samples):
        eta = process.sample(rng)
        configs.append(eta)
        base_vals[i] = f(eta)
    cov = np.empty(len(times))
    ses = np.empty(len(times))
    for j, t in enumerate(times):
        vals_t = np.empty(samples)
        for i in range(samples):
            vals_t[i] = f(resample(configs[i], t, process, rng))
        cov[j], ses[j] = _cov_se(base_vals, vals_t)
    return CovCurve(times, cov, ses, samples)


def mehler_noise_bound(c_bound: float, delta: float, t: float) -> float:
    """Revealment bound on Cov(f, f^t): C * delta * e^-t / (1-e^-t)^2."""
    if t <= 0:
        return math.inf
    q = math.exp(-t)
    return c_bound * delta * q / (1.0 - q) ** 2


def noise_sensitivity_report(
    entries: Sequence[dict],
    t: float,
    samples: int,
    rng_factory: Callable[[int], np.random.Generator],
) -> dict:
    """Covariance decay table over a functional family.

    Each entry: {"n", "process", "f"} plus optionally {"delta",
    "delta_se"} (a revealment estimate) to activate the Mehler-based
    noise bound at fixed t.  Returns rows plus a Kendall tau trend over n.
    """
    rows = []
    for idx, entry in enumerate(entries):
        rng = rng_factory(idx)
        process = entry["process"]
        f = entry["f"]
        base = np.empty(samples)
        vals_t = np.empty(samples)
        for i in range(samples):
            eta = process.sample(rng)
            base[i] = f(eta)
            vals_t[i] = f(resample(eta, t, process, rng))
        cov, cov_se = _cov_se(base, vals_t)
        ef2, ef2_se = _mean_se(base**2)
        row = {
            "n": entry["n"],
            "cov": cov,
            "cov_se": cov_se,
            "ef2": ef2,
            "ef2_se": ef2_se,
        }
        if "delta" in entry:
            bound = mehler_noise_bound(ef2 + 3 * ef2_se, entry["delta"], t)
            bound_slack = mehler_noise_bound(1.0, entry.get("delta_se", 0.0), t)
            row["bound"] = bound
            row["bound_ok"] = cov <= bound + 3.0 * (cov_se + bound_slack)
        rows.append(row)
    ns = [r["n"] for r in rows]
    covs = [r["cov"] for r in rows]
    tau = stats.kendalltau(ns, covs).statistic if len(rows) > 1 else float("nan")
    return {"t": t, "rows": rows, "kendall_tau": float(tau)}


def noise_stability_bound(
    f: Callable[[PointConfig], float],
    t: float,
    process: ProcessSpec,
    samples: int,
    rng: np.random.Generator,
) -> dict:
    """For plus-minus-one valued f: E[f f^t] >= exp(-t * sum E|D_x f|^2).

    Returns the paired estimate, the bound, and P(f != f^t).
    """
    mass = process.mass
    prod_vals = np.empty(samples)
    d2_vals = np.empty(samples)
    for i in range(samples):
        eta = process.sample(rng)
        v = f(eta)
        if v not in (-1.0, 1.0):
            raise ValueError("functional must take values in {-1, +1}")
        prod_vals[i] = v * f(resample(eta, t, process, rng))
        x = process.sample_locations(rng, 1)
        marks = (
            process.intensity.marks.sample(rng, 1)
            if process.intensity.marks is not None
            else None
        )
        eta2 = process.sample(rng)
        d2_vals[i] = mass * (f(eta2.add_points(x, marks)) - f(eta2)) ** 2
    corr, corr_se = _mean_se(prod_vals)
    energy, energy_se = _mean_se(d2_vals)
    bound = math.exp(-t * energy)
    bound_hi = math.exp(-t * max(0.0, energy - 3 * energy_se))
    return {
        "t": t,
        "corr": corr,
        "corr_se": corr_se,
        "p_flip": 0.5 * (1.0 - corr),
        "p_flip_se": 0.5 * corr_se,
        "energy": energy,
        "energy_se": energy_se,
        "bound": bound,
        "passed": corr >= bound - 3.0 * (corr_se + (bound_hi - bound)),
    }


def exceptional_times(
    path: BirthDeathPath, f: Callable[[PointConfig], float]
) -> list[float]:
    """Times where f flips along the path; exact w.r.t. the event log."""
    out: list[float] = []
    prev = None
    for time, config in path.iter_states():
        val = f(config)
        if prev is not None and val != prev:
            out.append(time)
        prev = val
    return out


def critical_window_probe(
    entries: Sequence[dict],
    samples: int,
    rng_factory: Callable[[int], np.random.Generator],
    monotone_checks: int = 25,
) -> list[dict]:
    """Means of increasing Boolean functionals at shifted intensities.

    Each entry: {"n", "process", "f", "c"}; the probe evaluates E[f] under
    the (1+c)- and (1-c)-scaled intensities.  Monotonicity of f is spot
    checked on sampled add-one pairs.
    """
    rows = []
    for idx, entry in enumerate(entries):
        rng = rng_factory(idx)
        process: ProcessSpec = entry["process"]
        f = entry["f"]
        c = float(entry["c"])
        for _ in range(monotone_checks):
            eta = process.sample(rng)
            x = process.sample_locations(rng, 1)
            marks = (
                process.intensity.marks.sample(rng, 1)
                if process.intensity.marks is not None
                else None
            )
            if f(eta.add_points(x, marks)) < f(eta):
                raise ValueError("functional is not increasing")
        row = {"n": entry["n"], "c": c}
        for label, factor in (("low", 1.0 - c), ("high", 1.0 + c)):
            scaled = process.scaled(factor)
            vals = np.empty(samples)
            for i in range(samples):
                vals[i] = f(scaled.sample(rng))
            row[label], row[f"{label}_se"] = _mean_se(vals)
        rows.append(row)
    return rows
