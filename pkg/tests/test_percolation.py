import math

import numpy as np
import pytest
from scipy import ndimage

from poissonlab.percolation import (
    BooleanModel,
    BooleanWorld,
    ConfettiModel,
    EventQuery,
    FixedRadius,
    GrainSpec,
    ParetoRadius,
    UniformRadius,
    UnionFind,
    arm_event,
    arm_probability,
    component_volume_proxy,
    confetti_duality_check,
    confetti_world_from_config,
    crossing,
    crossing_probability,
    estimate_critical,
    evaluate_event,
    is_k_covered,
    one_arm,
    one_arm_decay_fit,
    one_arm_event,
    raster_to_text,
    required_confetti_horizon,
    sample_boolean_config,
    sample_boolean_world,
    sample_confetti_world,
    threshold_scan,
    truncate_radii,
)
from poissonlab.process import BoxWindow, PointConfig
from poissonlab.rng import stream

DISK1 = GrainSpec("ball", FixedRadius(1.0))


def world_from(points, radii, model, rect):
    cfg = PointConfig(
        rect.pad(model.grain.max_radius or 0.0),
        np.asarray(points, dtype=float),
        {"radius": np.asarray(radii, dtype=float)},
    )
    return BooleanWorld(cfg, model, rect)


# -- union-find ------------------------------------------------------------------


def test_union_find_basics():
    uf = UnionFind(5)
    uf.union(0, 1)
    uf.union(3, 4)
    assert uf.find(0) == uf.find(1)
    assert uf.find(0) != uf.find(3)
    uf.union(1, 3)
    assert uf.find(4) == uf.find(0)


# -- world construction ------------------------------------------------------------


def test_two_overlapping_balls_one_component():
    model = BooleanModel(1.0, DISK1, k=1)
    rect = BoxWindow((0.0, 0.0), (3.0, 1.0))
    w = world_from([[0.5, 0.5], [2.0, 0.5]], [1.0, 1.0], model, rect)
    assert w.uf.find(0) == w.uf.find(1)
    far = world_from([[0.0, 0.5], [2.5, 0.5]], [1.0, 1.0], model, rect)
    assert far.uf.find(0) != far.uf.find(1)


def test_k2_lens_raster_single_component():
    model = BooleanModel(1.0, DISK1, k=2)
    rect = BoxWindow((0.0, 0.0), (3.0, 1.0))
    apart = world_from([[0.4, 0.5], [2.6, 0.5]], [1.0, 1.0], model, rect)
    assert not apart.occupancy_raster(0.05).any()  # disjoint: nothing 2-covered
    # distance 1.5: the doubly covered region is a lens, one raster component
    w2 = world_from([[0.75, 0.5], [2.25, 0.5]], [1.0, 1.0], model, rect)
    occ2 = w2.occupancy_raster(0.05)
    labels, num = ndimage.label(occ2, structure=np.ones((3, 3)))
    assert num == 1


def test_is_k_covered():
    model = BooleanModel(1.0, DISK1, k=2)
    rect = BoxWindow((0.0, 0.0), (3.0, 1.0))
    w = world_from([[1.0, 0.5], [1.8, 0.5]], [1.0, 1.0], model, rect)
    assert is_k_covered(w, np.array([1.4, 0.5]))
    assert not is_k_covered(w, np.array([0.05, 0.5]))
    empty = world_from(np.empty((0, 2)), [], model, rect)
    assert not is_k_covered(empty, np.array([0.5, 0.5]))


def test_confetti_first_arrival_rule():
    model = ConfettiModel(0.5, DISK1, DISK1, horizon=50.0)
    rect = BoxWindow((0.0, 0.0), (1.0, 1.0))
    cfg = PointConfig(
        rect.pad(1.0),
        np.array([[0.5, 0.5], [0.5, 0.5]]),
        {
            "birth_time": np.array([1.0, 2.0]),
            "color": np.array([0, 1], dtype=np.uint8),
            "radius": np.array([1.0, 1.0]),
        },
    )
    assert confetti_world_from_config(cfg, model, rect, 0.1).black.all()
    swapped = PointConfig(
        rect.pad(1.0),
        np.array([[0.5, 0.5], [0.5, 0.5]]),
        {
            "birth_time": np.array([2.0, 1.0]),
            "color": np.array([0, 1], dtype=np.uint8),
            "radius": np.array([1.0, 1.0]),
        },
    )
    assert not confetti_world_from_config(swapped, model, rect, 0.1).black.any()


def test_confetti_uncovered_raises_with_required_horizon():
    model = ConfettiModel(0.5, DISK1, DISK1, horizon=1e-6)
    rect = BoxWindow((0.0, 0.0), (4.0, 4.0))
    with pytest.raises(RuntimeError, match="horizon"):
        sample_confetti_world(model, rect, 0.25, stream(401))
    assert required_confetti_horizon(model, 0.25) > 0


# -- crossing ------------------------------------------------------------------------


def test_crossing_examples():
    model = BooleanModel(1.0, DISK1, k=1)
    rect = BoxWindow((0.0, 0.0), (3.0, 1.0))
    empty = world_from(np.empty((0, 2)), [], model, rect)
    assert not crossing(empty)
    huge = BooleanModel(1.0, GrainSpec("ball", FixedRadius(5.0)), k=1)
    assert crossing(world_from([[1.5, 0.5]], [5.0], huge, rect))
    chain = world_from(
        [[0.0, 0.5], [1.5, 0.5], [3.0, 0.5]], [1.0, 1.0, 1.0], model, rect
    )
    assert crossing(chain)
    broken = world_from([[0.0, 0.5], [3.0, 0.5]], [1.0, 1.0], model, rect)
    assert not crossing(broken)
    # brute-force raster verification of both fixtures
    from poissonlab.percolation import _raster_crossing

    assert _raster_crossing(chain.occupancy_raster(0.05), 0, "eight")
    assert not _raster_crossing(broken.occupancy_raster(0.05), 0, "eight")


def _matched_routes(world, model, pad_rect, h):
    """Crossing by the grain graph and by the raster, with identical grain
    sets and boundary conventions (coverage of the rect's edge columns)."""
    from poissonlab.percolation import _cell_centers

    w = BooleanWorld(world.config, model, pad_rect)
    xs, ys = _cell_centers(world.rect, h)
    la, lb = set(), set()
    for y in ys:
        for g in w.grains_covering(np.array([xs[0], y])):
            la.add(w.uf.find(int(g)))
        for g in w.grains_covering(np.array([xs[-1], y])):
            lb.add(w.uf.find(int(g)))
    exact = len(la & lb) > 0
    occ = w.occupancy_raster(h)
    labels, _ = ndimage.label(occ, structure=np.ones((3, 3)))
    off = int(round((world.rect.lo[0] - pad_rect.lo[0]) / h))
    first = labels[off, off:-off]
    last = labels[-off - 1, off:-off]
    raster = len(np.intersect1d(first[first > 0], last[last > 0])) > 0
    return w, exact, raster


def test_k1_graph_matches_fine_raster_on_500_worlds():
    # Union-find over the grain intersection graph vs fine-raster labeling
    # (h = r/20).  Residual disagreements must be raster-resolution
    # artifacts: a sub-resolution gap between distinct graph components,
    # and refining the raster must resolve at least half of them.
    model = BooleanModel(0.45, DISK1, k=1)
    rect = BoxWindow((0.0, 0.0), (5.0, 5.0))
    pad_rect = rect.pad(1.0)
    h = 1.0 / 20.0
    mismatched = []
    for i in range(500):
        world = sample_boolean_world(model, rect, stream(402, i))
        w, exact, raster = _matched_routes(world, model, pad_rect, h)
        if exact != raster:
            mismatched.append((i, w))
    assert len(mismatched) <= 10  # >= 98% agreement
    still = 0
    for i, w in mismatched:
        roots = np.array([w.uf.find(j) for j in range(w.n)])
        gaps = [
            np.linalg.norm(w.points[a] - w.points[b]) - w.radii[a] - w.radii[b]
            for a in range(w.n)
            for b in range(a + 1, w.n)
            if roots[a] != roots[b]
        ]
        assert min(gaps) < 1.5 * h  # attributable to raster resolution
        world = sample_boolean_world(model, rect, stream(402, i))
        _, exact, raster = _matched_routes(world, model, pad_rect, h / 4.0)
        still += exact != raster
    assert still <= len(mismatched) // 2


def test_crossing_monotone_under_thinning():
    from poissonlab.process import thin

    model = BooleanModel(0.5, DISK1, k=1)
    rect = BoxWindow((0.0, 0.0), (6.0, 6.0))
    for i in range(120):
        cfg = sample_boolean_config(model, rect, stream(403, i))
        sub = thin(cfg, 0.7, stream(404, i))
        full = crossing(BooleanWorld(cfg, model, rect))
        thinned = crossing(BooleanWorld(sub, model, rect))
        assert not (thinned and not full)


def test_scaling_covariance():
    # doubling lengths (window and radius) while dividing gamma by 2^d
    base = BooleanModel(0.5, DISK1, k=1)
    rect1 = BoxWindow((0.0, 0.0), (6.0, 6.0))
    scaled = BooleanModel(0.125, GrainSpec("ball", FixedRadius(2.0)), k=1)
    rect2 = BoxWindow((0.0, 0.0), (12.0, 12.0))
    p1, s1 = crossing_probability(base, rect1, 900, lambda i: stream(405, i))
    p2, s2 = crossing_probability(scaled, rect2, 900, lambda i: stream(406, i))
    assert abs(p1 - p2) <= 3 * (s1 + s2)


# -- arm / one-arm events --------------------------------------------------------------


def test_arm_event_validation_and_convention():
    model = BooleanModel(0.3, DISK1, k=1)
    rect = BoxWindow((-5.0, -5.0), (5.0, 5.0))
    w = sample_boolean_world(model, rect, stream(407))
    assert arm_event(w, 2.0, 1.0)  # s <= r convention: event holds
    with pytest.raises(ValueError):
        one_arm_event(w, 50.0)  # sphere does not fit the world
    with pytest.raises(ValueError):
        arm_probability(model, 2.0, 1.0, 10, lambda i: stream(408, i))
    with pytest.raises(ValueError):
        EventQuery("arm", r=2.0, s=1.0)
    with pytest.raises(ValueError):
        EventQuery("nonsense")


def test_theta_small_gamma_vanishes():
    model = BooleanModel(0.01, DISK1, k=1)
    est, se = one_arm(model, 4.0, 400, lambda i: stream(409, i))
    assert est <= 0.05


def test_harris_ordering_spot_check():
    # P(Arm_{r,s}) <= theta_{s-r} / b_r within Monte Carlo error, where b_r
    # is the probability that the sphere of radius 2r is covered and
    # connected to the origin.
    model = BooleanModel(0.5, DISK1, k=1)
    r, s = 1.0, 5.0
    arm, arm_se = arm_probability(model, r, s, 800, lambda i: stream(410, i))
    theta, theta_se = one_arm(model, s - r, 800, lambda i: stream(411, i))
    b, b_se = _b_r(model, r, 800)
    bound = theta / max(b - 3 * b_se, 1e-3)
    assert arm <= bound + 3 * (arm_se + theta_se)


def _b_r(model, r, samples):
    rect = BoxWindow((-2 * r - 1, -2 * r - 1), (2 * r + 1, 2 * r + 1))
    angles = np.linspace(0, 2 * math.pi, 64, endpoint=False)
    ring = 2 * r * np.column_stack([np.cos(angles), np.sin(angles)])
    hits = 0
    for i in range(samples):
        w = sample_boolean_world(model, rect, stream(412, i))
        covered = all(w.cover_count(p) >= 1 for p in ring)
        hits += covered and one_arm_event(w, 2 * r)
    p = hits / samples
    return p, math.sqrt(max(p * (1 - p), 1e-9) / samples)


def test_evaluate_event_dispatch():
    model = BooleanModel(0.6, DISK1, k=1)
    rect = BoxWindow((-4.0, -4.0), (4.0, 4.0))
    w = sample_boolean_world(model, rect, stream(413))
    assert evaluate_event(w, EventQuery("one_arm", s=3.0)) == one_arm_event(w, 3.0)
    assert evaluate_event(w, EventQuery("arm", r=1.0, s=3.0)) == arm_event(w, 1.0, 3.0)
    assert evaluate_event(w, EventQuery("origin_to_infinity_proxy")) == one_arm_event(
        w, 4.0
    )


# -- scans and critical estimation --------------------------------------------------------


def test_threshold_scan_monotone_and_csv():
    model = BooleanModel(1.0, DISK1, k=1)
    scan = threshold_scan(model, np.linspace(0.2, 0.6, 5), 8.0, 150, seed=414)
    assert np.all(scan.estimates >= 0) and np.all(scan.estimates <= 1)
    jumps = np.diff(scan.estimates)
    tol = 3 * np.hypot(scan.ses[1:], scan.ses[:-1])
    assert np.all(jumps >= -tol)
    csv = scan.to_csv()
    assert csv.splitlines()[0] == "param,n,estimate,se,samples,seed"
    assert len(csv.strip().splitlines()) == 6
    with pytest.raises(ValueError):
        threshold_scan(model, np.array([0.5, 0.4]), 8.0, 10, seed=1)


def test_one_arm_decay_fit_quality():
    model = BooleanModel(0.17, DISK1, k=1)
    fit = one_arm_decay_fit(model, np.array([3, 5, 7, 9]), 6000, seed=415)
    assert fit["slope"] < 0
    assert fit["r2"] > 0.9


def test_estimate_critical_self_consistency():
    model = BooleanModel(1.0, DISK1, k=1)

    def prob_at_n(n):
        rect = BoxWindow((0.0, 0.0), (float(n), float(n)))

        def prob(gamma, samples, ridx):
            return crossing_probability(
                model.with_gamma(gamma), rect, samples,
                lambda i: stream(416, n, ridx, i),
            )

        return prob

    est10, ci10 = estimate_critical(prob_at_n(10), 0.2, 0.6, 0.03, base_samples=120)
    est20, ci20 = estimate_critical(prob_at_n(20), 0.2, 0.6, 0.03, base_samples=120)
    assert abs(est10 - est20) <= ci10 + ci20


def test_estimate_critical_invalid_bracket():
    def flat(p, samples, ridx):
        return 0.9, 0.01

    with pytest.raises(ValueError):
        estimate_critical(flat, 0.1, 0.9, 0.05)


# -- confetti -----------------------------------------------------------------------------


def test_confetti_duality_holds_on_samples():
    model = ConfettiModel(0.5, DISK1, DISK1)
    rect = BoxWindow((0.0, 0.0), (6.0, 6.0))
    for j, p in enumerate((0.3, 0.5, 0.7)):
        m = model.with_p(p)
        for i in range(60):
            w = sample_confetti_world(m, rect, 0.125, stream(417, j, i))
            assert confetti_duality_check(w)


def test_confetti_black_increasing():
    model = ConfettiModel(0.5, DISK1, DISK1)
    rect = BoxWindow((0.0, 0.0), (6.0, 6.0))
    rng = stream(418)
    for i in range(150):
        w = sample_confetti_world(model, rect, 0.125, stream(419, i))
        base = crossing(w)
        x = rect.pad(1.0).sample_uniform(rng, 1)[0]
        t = float(rng.uniform(0.0, 2.0))
        for color, check in ((0, "never_destroys"), (1, "never_creates")):
            cfg = w.config
            extra = PointConfig(
                cfg.window,
                np.vstack([cfg.points, x]),
                {
                    "birth_time": np.append(cfg.marks["birth_time"], t),
                    "color": np.append(cfg.marks["color"], np.uint8(color)),
                    "radius": np.append(cfg.marks["radius"], 1.0),
                },
            )
            w2 = confetti_world_from_config(extra, model, rect, 0.125)
            got = crossing(w2)
            if color == 0:
                assert got >= base  # adding black never destroys
            else:
                assert got <= base  # adding white never creates


def test_confetti_repaint_matches_sampled():
    model = ConfettiModel(0.4, DISK1, DISK1)
    rect = BoxWindow((0.0, 0.0), (5.0, 5.0))
    for i in range(40):
        w = sample_confetti_world(model, rect, 0.1, stream(420, i))
        w2 = confetti_world_from_config(w.config, model, rect, 0.1)
        assert np.array_equal(w.black, w2.black)


# -- heavy tails ----------------------------------------------------------------------------


def test_truncate_radii_bounds_and_validation():
    law = ParetoRadius(0.5, 3.5)
    model = BooleanModel(0.4, GrainSpec("ball", law), k=1)
    rect = BoxWindow((0.0, 0.0), (16.0, 16.0))
    cfg = sample_boolean_config(model, rect, stream(421), r_split=16.0**0.8)
    kept, bound = truncate_radii(cfg, model, 16, 0.2)
    assert bound > 0
    assert np.all(kept.marks["radius"] <= 16.0**0.8)
    with pytest.raises(ValueError):
        truncate_radii(cfg, model, 16, 0.9)  # epsilon above alpha/(2+alpha)
    # n -> infinity: bound vanishes
    big_rect = BoxWindow((0.0, 0.0), (1e6, 1e6))
    cfg_small = PointConfig(big_rect, np.empty((0, 2)), {"radius": np.empty(0)})
    _, tail = truncate_radii(cfg_small, model, 1e6, 0.2)
    assert tail / 1e12 < 1e-12  # vanishing relative to window area


def test_truncate_bounded_noop():
    model = BooleanModel(0.5, GrainSpec("ball", UniformRadius(0.2, 0.8)), k=1)
    rect = BoxWindow((0.0, 0.0), (8.0, 8.0))
    cfg = sample_boolean_config(model, rect, stream(422))
    kept, bound = truncate_radii(cfg, model, 8, 0.2)  # r_n = 8^0.8 > 0.8
    assert bound == 0.0 and kept.size == cfg.size


def test_pareto_tail_sampler_consistency():
    # the exact tail sampler produces big grains at the Mecke rate
    law = ParetoRadius(0.5, 3.5)
    model = BooleanModel(0.4, GrainSpec("ball", law), k=1)
    rect = BoxWindow((0.0, 0.0), (10.0, 10.0))
    r_split = 3.0
    counts = []
    for i in range(4000):
        cfg = sample_boolean_config(model, rect, stream(423, i), r_split=r_split)
        counts.append(int(np.count_nonzero(cfg.marks["radius"] > r_split)))
    t0 = law.tail_moment(0, r_split)
    t1 = law.tail_moment(1, r_split)
    t2 = law.tail_moment(2, r_split)
    expected = model.gamma * (100 * t0 + 2 * 20 * t1 + math.pi * t2)
    mean = np.mean(counts)
    se = np.std(counts) / math.sqrt(len(counts))
    assert abs(mean - expected) <= 3 * se + 1e-3


# -- component volume -------------------------------------------------------------------------


def test_component_volume_proxy():
    model = BooleanModel(1.0, DISK1, k=1)
    rect = BoxWindow((-2.0, -2.0), (2.0, 2.0))
    empty = world_from(np.empty((0, 2)), [], model, rect)
    assert component_volume_proxy(empty, np.zeros(2), resolution=0.05) == 0.0
    single = world_from([[0.0, 0.0]], [1.0], model, rect)
    area = component_volume_proxy(single, np.zeros(2), resolution=0.05)
    assert abs(area - math.pi) <= 2 * 0.05 * 2 * math.pi
    # sub vs supercritical contrast at matched window
    sub = BooleanModel(0.15, DISK1, k=1)
    sup = BooleanModel(0.9, DISK1, k=1)
    rect2 = BoxWindow((-6.0, -6.0), (6.0, 6.0))
    vols = {}
    for name, m, seed in (("sub", sub, 424), ("sup", sup, 425)):
        v = [
            component_volume_proxy(
                sample_boolean_world(m, rect2, stream(seed, i)),
                np.zeros(2),
                resolution=0.2,
            )
            for i in range(150)
        ]
        vols[name] = np.mean(v)
    assert vols["sub"] * 5 < vols["sup"]


def test_raster_to_text():
    mask = np.zeros((3, 2), dtype=bool)
    mask[0, 0] = True
    txt = raster_to_text(mask)
    assert txt == "...\n#..\n"
