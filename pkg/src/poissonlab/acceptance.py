"""The acceptance suite: every desk-scale claim the package commits to.

Each criterion is a function returning a :class:`CriterionResult`; the
pytest wrapper and the command line runner both call these.  Seeds are
pinned, tolerances are written into the assertions here and nowhere else.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import stats

from . import chaos, dynamics
from .chaos import (
    DiscreteOracleSpace,
    chaos_weights_exact,
    chaos_weights_mehler,
    cond_moment_audit,
)
from .percolation import (
    BooleanModel,
    BooleanWorld,
    ConfettiModel,
    FixedRadius,
    GrainSpec,
    ParetoRadius,
    confetti_duality_check,
    crossing,
    crossing_probability,
    estimate_critical,
    one_arm_decay_fit,
    sample_boolean_config,
    sample_confetti_world,
    truncate_radii,
)
from .process import (
    BoxWindow,
    CellIntensity,
    DiscreteWindow,
    HomogeneousIntensity,
    ProcessSpec,
    RadiusMarks,
)
from .rng import stream
from .stopping import (
    ConstantRegionSet,
    LineSeed,
    SphereSeed,
    ball_growth_ctdt,
    component_exploration,
    markov_property_check,
    nonattainable_fixture,
    probe_grid,
    randomize,
    revealment,
    verify_stopping_axiom,
)

SEED = 20240831


@dataclass
class CriterionResult:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    elapsed: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name} ({self.elapsed:.1f}s)"


def _empty_space(area: float, pad: float = 0.15):
    """Window, process, disk region and functional for the empty-space
    problem with lambda(W) = area (planar Lebesgue intensity)."""
    r_w = math.sqrt(area / math.pi)
    half = r_w + pad
    window = BoxWindow((-half, -half), (half, half))
    process = ProcessSpec(HomogeneousIntensity(1.0), window)

    def region(p):
        return np.linalg.norm(np.atleast_2d(p), axis=1) <= r_w

    def f(cfg):
        return 1.0 if cfg.count_in(region) == 0 else 0.0

    return window, process, region, f


def criterion_1_empty_space_sharpness(samples: int = 100_000) -> CriterionResult:
    """Unit-disk empty-space functional: variance and the per-location OSSS
    integral both equal exp(-pi)(1 - exp(-pi)); the bound is sharp."""
    t0 = time.perf_counter()
    target = math.exp(-math.pi) * (1.0 - math.exp(-math.pi))
    window, process, region, f = _empty_space(math.pi)
    ctdt = ball_growth_ctdt(region, (0.0, 0.0), support=window)
    rep = chaos.osss_audit(
        f, ctdt, process, samples, stream(SEED, 1), binary=True,
        determination_checks=100,
    )
    var_hat = rep.lhs / 2.0
    var_se = rep.lhs_se / 2.0
    half_rhs = rep.rhs / 2.0
    half_rhs_se = rep.rhs_se / 2.0
    gap = abs(rep.rhs - rep.lhs)
    gap_tol = 0.02 * rep.lhs + 3.0 * (rep.lhs_se + rep.rhs_se)
    elapsed = time.perf_counter() - t0
    checks = {
        "var_matches": abs(var_hat - target) <= 3.0 * var_se,
        "osss_rhs_matches": abs(half_rhs - target) <= 3.0 * half_rhs_se,
        "sharp_within_2pct": gap <= gap_tol,
        "runtime_under_60s": elapsed < 60.0,
    }
    return CriterionResult(
        "1 empty-space sharpness",
        all(checks.values()),
        {
            "target": target,
            "var": var_hat,
            "var_se": var_se,
            "osss_half_rhs": half_rhs,
            "osss_half_rhs_se": half_rhs_se,
            "relative_gap": gap / rep.lhs,
            **checks,
        },
        elapsed,
    )


def criterion_2_poincare_suboptimal(samples: int = 60_000) -> CriterionResult:
    """lambda(W) = 4: Poincare right side 4 exp(-4), exact variance
    exp(-4)(1-exp(-4)); the OSSS integral is significantly smaller."""
    t0 = time.perf_counter()
    window, process, region, f = _empty_space(4.0)
    var_target = math.exp(-4.0) * (1.0 - math.exp(-4.0))
    rhs_target = 4.0 * math.exp(-4.0)
    poin = chaos.poincare_audit(f, process, samples, stream(SEED, 2))
    ctdt = ball_growth_ctdt(region, (0.0, 0.0), support=window)
    osss = chaos.osss_audit(
        f, ctdt, process, samples, stream(SEED, 3), binary=True,
        determination_checks=100,
    )
    half_rhs = osss.rhs / 2.0
    half_rhs_se = osss.rhs_se / 2.0
    checks = {
        "poincare_rhs_matches": abs(poin.rhs - rhs_target) <= 3.0 * poin.rhs_se,
        "variance_matches": abs(poin.lhs - var_target) <= 3.0 * poin.lhs_se,
        "osss_below_poincare": poin.rhs - half_rhs
        > 3.0 * (poin.rhs_se + half_rhs_se),
    }
    return CriterionResult(
        "2 Poincare suboptimality",
        all(checks.values()),
        {
            "poincare_rhs": poin.rhs,
            "poincare_rhs_se": poin.rhs_se,
            "rhs_target": rhs_target,
            "variance": poin.lhs,
            "variance_se": poin.lhs_se,
            "var_target": var_target,
            "osss_half_rhs": half_rhs,
            **checks,
        },
        time.perf_counter() - t0,
    )


def criterion_3_chaos_oracle() -> CriterionResult:
    """Exact enumeration on a 3-cell space reproduces the closed-form
    weights of the empty-indicator to 1e-10 and the second-moment identity."""
    t0 = time.perf_counter()
    masses = (0.5, 0.3, 0.2)
    lam_w = 0.8  # cells 0 and 1
    space = DiscreteOracleSpace(masses, tail_bound=1e-14)

    def f_counts(counts):
        counts = np.atleast_2d(counts)
        return ((counts[:, 0] + counts[:, 1]) == 0).astype(float)

    spec6 = chaos_weights_exact(f_counts, space, k_max=6)
    closed = np.array(
        [lam_w**k * math.exp(-2 * lam_w) / math.factorial(k) for k in range(1, 7)]
    )
    weight_err = float(np.max(np.abs(spec6.weights - closed)))
    spec_full = chaos_weights_exact(f_counts, space, k_max=14)
    identity_gap = abs(spec_full.second_moment_lhs() - spec_full.extras["ef2"])
    checks = {
        "weights_match_1e-10": weight_err <= 1e-10,
        "identity_1e-10": identity_gap <= 1e-10,
    }
    return CriterionResult(
        "3 chaos oracle equivalence",
        all(checks.values()),
        {
            "weight_err": weight_err,
            "identity_gap": identity_gap,
            "truncation_mass": space.truncation_mass,
            **checks,
        },
        time.perf_counter() - t0,
    )


def criterion_4_mehler_regression(samples: int = 25_000) -> CriterionResult:
    """Counting functional with lambda(B) = 2: pure first chaos W_1 = 2 and
    covariance curve 2 exp(-t)."""
    t0 = time.perf_counter()
    window = BoxWindow((0.0, 0.0), (1.0, 1.0))
    process = ProcessSpec(HomogeneousIntensity(2.0), window)
    f = lambda cfg: float(cfg.size)
    times = [0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0]
    spec = chaos_weights_mehler(
        f, process, times, samples, stream(SEED, 4), k_max=6
    )
    cov = spec.extras["cov"]
    cov_se = spec.extras["cov_se"]
    t_arr = spec.extras["times"]
    checks = {"w1_is_2": abs(spec.weights[0] - 2.0) <= 3.0 * spec.ses[0]}
    for k in range(2, 7):
        checks[f"w{k}_is_0"] = spec.weights[k - 1] <= 3.0 * spec.ses[k - 1]
    for t_check in (0.1, 0.5, 1.0):
        j = int(np.argmin(np.abs(t_arr - t_check)))
        checks[f"cov_at_{t_check}"] = (
            abs(cov[j] - 2.0 * math.exp(-t_check)) <= 3.0 * cov_se[j]
        )
    return CriterionResult(
        "4 Mehler regression",
        all(checks.values()),
        {
            "weights": spec.weights.tolist(),
            "ses": spec.ses.tolist(),
            "cov": cov.tolist(),
            **checks,
        },
        time.perf_counter() - t0,
    )


# -- percolation helpers ------------------------------------------------------

_RADIUS = 1.0


def _boolean_model(gamma: float) -> BooleanModel:
    return BooleanModel(gamma, GrainSpec("ball", FixedRadius(_RADIUS)), k=1)


def _crossing_setup(n: int, gamma: float):
    model = _boolean_model(gamma)
    rect = BoxWindow((0.0, 0.0), (float(n), float(n)))
    padded = rect.pad(_RADIUS)
    process = ProcessSpec(
        HomogeneousIntensity(gamma, RadiusMarks(FixedRadius(_RADIUS))), padded
    )

    def f(cfg):
        return 1.0 if crossing(BooleanWorld(cfg, model, rect)) else 0.0

    return model, rect, padded, process, f


@lru_cache(maxsize=None)
def critical_gamma(seed: int = SEED, n: int = 12) -> tuple[float, float]:
    """Bisection estimate of the crossing-probability-1/2 intensity."""
    rect = BoxWindow((0.0, 0.0), (float(n), float(n)))

    def prob_at(gamma, samples, ridx):
        return crossing_probability(
            _boolean_model(gamma), rect, samples, lambda i: stream(seed, 5, ridx, i)
        )

    return estimate_critical(prob_at, 0.2, 0.6, tolerance=0.02, base_samples=150)


def _line_revealment(n: int, gamma: float, samples: int, seed_path: tuple,
                     spacing: float = 0.5):
    model, rect, padded, process, _ = _crossing_setup(n, gamma)
    family = lambda s: component_exploration(model, rect, LineSeed(0, s))
    rz = randomize(family, lambda rng: float(rng.uniform(0.0, float(n))))
    grid = probe_grid(rect, spacing)
    return revealment(
        rz, process, grid, samples, stream(*seed_path), grid_spacing=spacing
    )


def criterion_5_schramm_steif(
    sizes=(10, 20, 40), mehler_samples=(2600, 2000, 1200),
    delta_samples=(600, 450, 320),
) -> CriterionResult:
    """Crossing functional at the estimated critical intensity: every chaos
    weight obeys W_k <= k delta_n E[f^2] (k <= 4) and delta_n decreases."""
    t0 = time.perf_counter()
    gamma, _ = critical_gamma()
    deltas = []
    details: dict = {"gamma": gamma, "per_n": []}
    ok = True
    for idx, n in enumerate(sizes):
        _, _, _, process, f = _crossing_setup(n, gamma)
        times = np.geomspace(0.08, 2.5, 9)
        spec = chaos_weights_mehler(
            f, process, times, mehler_samples[idx], stream(SEED, 6, idx), k_max=4
        )
        rev = _line_revealment(n, gamma, delta_samples[idx], (SEED, 7, idx))
        ef2 = spec.mean  # {0,1}-valued: E f^2 = E f
        ef2_se = spec.extras["mean_se"]
        audit = chaos.schramm_steif_audit(
            rev.delta, rev.delta_se, spec, ef2, ef2_se, k_max=4
        )
        ok &= audit.passed
        deltas.append((rev.delta, rev.delta_se))
        details["per_n"].append(
            {
                "n": n,
                "delta": rev.delta,
                "delta_se": rev.delta_se,
                "weights": spec.weights.tolist(),
                "weight_ses": spec.ses.tolist(),
                "ef2": ef2,
                "audit_passed": audit.passed,
            }
        )
    decreasing = all(
        deltas[i][0] - deltas[i + 1][0]
        > 0.0
        for i in range(len(deltas) - 1)
    )
    details["delta_strictly_decreasing"] = decreasing
    return CriterionResult(
        "5 Schramm-Steif audit",
        ok and decreasing,
        details,
        time.perf_counter() - t0,
    )


def criterion_6_conditional_moment() -> CriterionResult:
    """Exact conditional-moment bound on the 3-cell space with the
    non-attainable stopping set, k in {1, 2}."""
    t0 = time.perf_counter()
    masses = (0.5, 0.3, 0.2)
    space = DiscreteOracleSpace(masses, tail_bound=1e-14)
    fx = nonattainable_fixture(masses)
    u1 = np.array([1.0, -0.7, 0.4])
    u2 = np.array(
        [[0.8, -0.3, 0.1], [-0.3, 0.5, 0.6], [0.1, 0.6, -0.9]]
    )
    res1 = cond_moment_audit(u1, 1, fx.cells_mask, space)
    res2 = cond_moment_audit(u2, 2, fx.cells_mask, space)
    ok = res1["passed"] and res2["passed"]
    return CriterionResult(
        "6 conditional-moment bound",
        ok,
        {
            "k1_lhs": res1["lhs"],
            "k1_rhs": res1["rhs"],
            "k1_margin": res1["margin"],
            "k2_lhs": res2["lhs"],
            "k2_rhs": res2["rhs"],
            "k2_margin": res2["margin"],
            "truncation_mass": space.truncation_mass,
        },
        time.perf_counter() - t0,
    )


def criterion_7_confetti_duality(samples: int = 10_000) -> CriterionResult:
    """Symmetric planar confetti at p = 1/2, n = 10, h = r/10: crossing
    probability 1/2 and the per-sample duality XOR everywhere."""
    t0 = time.perf_counter()
    model = ConfettiModel(
        0.5,
        GrainSpec("ball", FixedRadius(_RADIUS)),
        GrainSpec("ball", FixedRadius(_RADIUS)),
    )
    rect = BoxWindow((0.0, 0.0), (10.0, 10.0))
    h = _RADIUS / 10.0
    hits = 0
    xor_ok = True
    for i in range(samples):
        world = sample_confetti_world(model, rect, h, stream(SEED, 8, i))
        hits += crossing(world)
        xor_ok &= confetti_duality_check(world)
    p_hat = hits / samples
    se = math.sqrt(p_hat * (1 - p_hat) / samples)
    checks = {
        "crossing_prob_half": abs(p_hat - 0.5) <= 3.0 * se,
        "duality_xor_all": bool(xor_ok),
    }
    return CriterionResult(
        "7 confetti self-duality",
        all(checks.values()),
        {"p_hat": p_hat, "se": se, "samples": samples, **checks},
        time.perf_counter() - t0,
    )


def _markov_functionals(region):
    return [
        ("total_count", lambda c: float(c.size)),
        ("count_region", lambda c: float(c.count_in(region))),
        (
            "count_right_half",
            lambda c: float(
                c.count_in(lambda p: np.atleast_2d(p)[:, 0] > 0.0)
            ),
        ),
        (
            "min_norm",
            lambda c: float(np.linalg.norm(np.atleast_2d(c.points), axis=1).min())
            if c.size
            else 99.0,
        ),
        (
            "straddle_band",
            lambda c: float(
                c.count_in(lambda p: np.abs(np.atleast_2d(p)[:, 1]) < 0.5)
            ),
        ),
    ]


def criterion_8_markov_property(samples: int = 2_500) -> CriterionResult:
    """KS two-sample tests (Bonferroni over 5 functionals) for the
    ball-growth terminal set and the line-exploration set."""
    t0 = time.perf_counter()
    window, process, region, _ = _empty_space(1.0)
    ball = ball_growth_ctdt(region, (0.0, 0.0), support=window).terminal()
    rep_ball = markov_property_check(
        ball, process, _markov_functionals(region), samples, stream(SEED, 9)
    )

    n = 6
    gamma = 0.36
    model, rect, padded, process2, _ = _crossing_setup(n, gamma)
    expl = component_exploration(model, rect, LineSeed(0, n / 2))
    mid = np.array([n / 2, n / 2])
    region2 = lambda p: np.linalg.norm(np.atleast_2d(p) - mid, axis=1) <= 1.5
    fns2 = [
        ("total_count", lambda c: float(c.size)),
        ("count_mid_disk", lambda c: float(c.count_in(region2))),
        (
            "count_left",
            lambda c: float(c.count_in(lambda p: np.atleast_2d(p)[:, 0] < n / 2)),
        ),
        (
            "count_band",
            lambda c: float(
                c.count_in(
                    lambda p: np.abs(np.atleast_2d(p)[:, 0] - n / 2) < 1.0
                )
            ),
        ),
        (
            "max_x",
            lambda c: float(np.atleast_2d(c.points)[:, 0].max()) if c.size else -1.0,
        ),
    ]
    rep_expl = markov_property_check(
        expl, process2, fns2, samples, stream(SEED, 10)
    )
    checks = {
        "ball_growth_passes": rep_ball.passed,
        "line_exploration_passes": rep_expl.passed,
    }
    return CriterionResult(
        "8 Markov property",
        all(checks.values()),
        {
            "ball_p_values": rep_ball.p_values,
            "exploration_p_values": rep_expl.p_values,
            "bonferroni_cutoff": 0.01 / 5,
            **checks,
        },
        time.perf_counter() - t0,
    )


def criterion_9_subcritical_decay(samples: int = 20_000) -> CriterionResult:
    """At half the estimated critical intensity, log theta_s is linear in s
    over s in {4,...,16} with negative slope and R^2 > 0.9."""
    t0 = time.perf_counter()
    gamma_c, _ = critical_gamma()
    model = _boolean_model(0.5 * gamma_c)
    fit = one_arm_decay_fit(model, np.arange(4, 17, 2), samples, seed=SEED + 11)
    checks = {"slope_negative": fit["slope"] < 0.0, "r2_above_0.9": fit["r2"] > 0.9}
    return CriterionResult(
        "9 sharp-threshold decay",
        all(checks.values()),
        {
            "gamma": 0.5 * gamma_c,
            "slope": fit["slope"],
            "r2": fit["r2"],
            "theta": fit["theta"].tolist(),
            **checks,
        },
        time.perf_counter() - t0,
    )


def criterion_10_noise_sensitivity(
    sizes=(8, 16, 32), seeds: int = 8, samples: int = 700, t: float = 0.2
) -> CriterionResult:
    """Critical crossing covariance at fixed t decreases with n (Kendall tau
    over seeds) and respects the revealment noise bound."""
    t0 = time.perf_counter()
    gamma, _ = critical_gamma()
    deltas = {}
    for idx, n in enumerate(sizes):
        rev = _line_revealment(n, gamma, 320, (SEED, 12, idx))
        deltas[n] = (rev.delta, rev.delta_se)
    pairs = []
    bound_ok = True
    rows = []
    for s_idx in range(seeds):
        for idx, n in enumerate(sizes):
            _, _, _, process, f = _crossing_setup(n, gamma)
            rng = stream(SEED, 13, s_idx, idx)
            base = np.empty(samples)
            shifted = np.empty(samples)
            for i in range(samples):
                eta = process.sample(rng)
                base[i] = f(eta)
                shifted[i] = f(dynamics.resample(eta, t, process, rng))
            prods = (base - base.mean()) * (shifted - shifted.mean())
            cov = float(prods.sum() / (samples - 1))
            cov_se = float(prods.std(ddof=1) / math.sqrt(samples))
            delta, delta_se = deltas[n]
            c_bound = 1.0  # valid sup of E[f_n^2] for indicator functionals
            bound = dynamics.mehler_noise_bound(c_bound, delta, t)
            slack = dynamics.mehler_noise_bound(c_bound, delta_se, t)
            this_ok = cov <= bound + 3.0 * (cov_se + slack)
            bound_ok &= this_ok
            pairs.append((n, cov))
            rows.append(
                {"seed": s_idx, "n": n, "cov": cov, "cov_se": cov_se,
                 "bound": bound, "bound_ok": this_ok}
            )
    tau = stats.kendalltau([p[0] for p in pairs], [p[1] for p in pairs]).statistic
    checks = {"kendall_tau_negative": tau < 0.0, "all_below_bound": bound_ok}
    return CriterionResult(
        "10 noise-sensitivity trend",
        all(checks.values()),
        {"kendall_tau": float(tau), "deltas": deltas, "rows": rows[:6], **checks},
        time.perf_counter() - t0,
    )


def criterion_11_truncation_bound(samples: int = 4_000) -> CriterionResult:
    """Pareto radii (2+alpha moment with alpha = 1): empirical disagreement
    between full and truncated crossing stays under the analytic bound."""
    t0 = time.perf_counter()
    n, eps = 32, 0.2
    law = ParetoRadius(0.5, 3.5)  # alpha = shape - 2 = 1.5 > 1 declared margin
    model = BooleanModel(0.4, GrainSpec("ball", law), k=1)
    rect = BoxWindow((0.0, 0.0), (float(n), float(n)))
    r_n = float(n) ** (1.0 - eps)
    flips = 0
    bound = 0.0
    for i in range(samples):
        cfg = sample_boolean_config(model, rect, stream(SEED, 14, i), r_split=r_n)
        trunc, bound = truncate_radii(cfg, model, n, eps)
        f_full = crossing(BooleanWorld(cfg, model, rect))
        f_trunc = crossing(BooleanWorld(trunc, model, rect))
        flips += f_full != f_trunc
    p_hat = flips / samples
    se = math.sqrt(max(p_hat * (1 - p_hat), 1e-12) / samples)
    passed = p_hat <= bound + 3.0 * se
    return CriterionResult(
        "11 truncation bound",
        passed,
        {
            "p_flip": p_hat,
            "se": se,
            "analytic_bound": bound,
            "r_n": r_n,
            "samples": samples,
        },
        time.perf_counter() - t0,
    )


def criterion_12_stopping_suite(trials: int = 10_000, probes: int = 200) -> CriterionResult:
    """Every shipped stopping set passes the axiom check with zero failures;
    the non-attainable fixture reproduces its case table and leaves each
    cell unrevealed with positive probability."""
    t0 = time.perf_counter()
    details: dict = {}
    ok = True

    window, process, region, _ = _empty_space(1.0)
    const = ConstantRegionSet(
        lambda p: np.atleast_2d(p)[:, 0] > 0.0, support=window
    )
    ball = ball_growth_ctdt(region, (0.0, 0.0), support=window).terminal()
    for sub, (name, oracle, proc) in enumerate(
        (
            ("constant", const, process),
            ("ball_growth_terminal", ball, process),
        )
    ):
        rep = verify_stopping_axiom(
            oracle, proc, trials, probes, stream(SEED, 15, sub)
        )
        details[f"{name}_failures"] = len(rep.failures)
        ok &= rep.passed

    n = 6
    model, rect, padded, process2, _ = _crossing_setup(n, 0.36)
    for sub, (name, seed_obj) in enumerate(
        (
            ("line_exploration", LineSeed(0, n / 2)),
            ("sphere_exploration", SphereSeed(1.5)),
        )
    ):
        rect_s = (
            rect
            if isinstance(seed_obj, LineSeed)
            else BoxWindow((-3.0, -3.0), (3.0, 3.0))
        )
        model_s, _, _, proc_s, _ = _crossing_setup(n, 0.36)
        if isinstance(seed_obj, SphereSeed):
            proc_s = ProcessSpec(process2.intensity, rect_s.pad(_RADIUS))
        expl = component_exploration(model_s, rect_s, seed_obj)
        rep = verify_stopping_axiom(
            expl, proc_s, trials, probes, stream(SEED, 16, sub)
        )
        details[f"{name}_failures"] = len(rep.failures)
        ok &= rep.passed

    masses = (0.5, 0.3, 0.2)
    fx = nonattainable_fixture(masses)
    dproc = ProcessSpec(CellIntensity(masses), DiscreteWindow(3))
    rep = verify_stopping_axiom(fx, dproc, trials, 3, stream(SEED, 17))
    details["fixture_failures"] = len(rep.failures)
    ok &= rep.passed

    # exact 4-case table
    table_ok = True
    expected = {
        (0, 0, 0): (1, 1, 1),
        (1, 1, 1): (1, 1, 1),
        (1, 0, 0): (1, 1, 0),
        (1, 0, 1): (1, 1, 0),
        (0, 0, 1): (1, 0, 1),
        (0, 1, 1): (1, 0, 1),
        (0, 1, 0): (0, 1, 1),
        (1, 1, 0): (0, 1, 1),
    }
    for occ, want in expected.items():
        got = tuple(int(b) for b in fx.cells_mask(np.array(occ)))
        table_ok &= got == want
    details["case_table_exact"] = table_ok
    ok &= table_ok

    # positive probability of missing each cell
    miss = np.zeros(3)
    rng = stream(SEED, 18)
    for _ in range(4000):
        eta = dproc.sample(rng)
        lam_in = fx.lam_in_cells(eta.counts())
        miss += lam_in == 0.0
    details["miss_rates"] = (miss / 4000).tolist()
    ok &= bool(np.all(miss > 0))

    return CriterionResult(
        "12 stopping-axiom suite",
        ok,
        details,
        time.perf_counter() - t0,
    )


ALL_CRITERIA = {
    "1": criterion_1_empty_space_sharpness,
    "2": criterion_2_poincare_suboptimal,
    "3": criterion_3_chaos_oracle,
    "4": criterion_4_mehler_regression,
    "5": criterion_5_schramm_steif,
    "6": criterion_6_conditional_moment,
    "7": criterion_7_confetti_duality,
    "8": criterion_8_markov_property,
    "9": criterion_9_subcritical_decay,
    "10": criterion_10_noise_sensitivity,
    "11": criterion_11_truncation_bound,
    "12": criterion_12_stopping_suite,
}


def run(names=None, workers: int = 1) -> list[CriterionResult]:
    names = list(names or ALL_CRITERIA)
    unknown = [n for n in names if n not in ALL_CRITERIA]
    if unknown:
        raise KeyError(f"unknown criteria: {unknown}")
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {n: pool.submit(_run_one, n) for n in names}
            return [futures[n].result() for n in names]
    return [_run_one(n) for n in names]


def _run_one(name: str) -> CriterionResult:
    return ALL_CRITERIA[name]()
