"""Reproducible experiment driver.

Subcommands: sample, stopping, chaos, dynamics, perc, plot, acceptance,
run.  All randomness funnels through --seed; outputs are deterministic
given (arguments, seed) and carry a header with the resolved parameters
and package version.  Environment: POISSONLAB_OUTDIR prefixes relative
output paths, POISSONLAB_WORKERS sets the acceptance worker count.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, acceptance, chaos, dynamics, fixtures, svgplot
from .percolation import (
    BooleanWorld,
    BoxWindow,
    confetti_duality_check,
    crossing,
    crossing_probability,
    estimate_critical,
    sample_confetti_world,
    threshold_scan,
)
from .process import ProcessSpec, config_to_csv
from .rng import stream
from .stopping import (
    BrokenNearestPointOracle,
    LineSeed,
    ball_growth_ctdt,
    component_exploration,
    nonattainable_fixture,
    probe_grid,
    randomize,
    revealment,
    verify_stopping_axiom,
)


def _outpath(path: str) -> Path:
    base = os.environ.get("POISSONLAB_OUTDIR", "")
    p = Path(path)
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _header(args: dict) -> str:
    payload = json.dumps(
        {k: v for k, v in sorted(args.items()) if v is not None}, sort_keys=True
    )
    return f"# poissonlab {__version__} {payload}\n"


def _write(path: str, text: str, header: dict | None = None) -> None:
    target = _outpath(path)
    body = (_header(header) if header is not None else "") + text
    target.write_text(body)
    print(f"wrote {target}")


# ---------------------------------------------------------------------------


def cmd_sample(args) -> int:
    fx = fixtures.get(args.fixture)
    if fx["kind"] != "sample":
        raise SystemExit(f"fixture {args.fixture!r} is not a sampling fixture")
    process = fixtures.sample_process(fx)
    config = process.sample(stream(args.seed))
    _write(args.output, config_to_csv(config), {"fixture": args.fixture, "seed": args.seed})
    return 0


def cmd_stopping_audit(args) -> int:
    fx = fixtures.get(args.fixture)
    seed = args.seed
    report: dict = {"fixture": args.fixture, "seed": seed}
    if args.fixture in ("ball-growth", "broken-nearest"):
        window, process, region, _ = fixtures.empty_space_setup(fx["area"])
        oracle = (
            ball_growth_ctdt(region, (0.0, 0.0), support=window).terminal()
            if args.fixture == "ball-growth"
            else BrokenNearestPointOracle(support=window)
        )
        grid = probe_grid(window, 0.1)
        axiom = verify_stopping_axiom(
            oracle, process, args.trials, args.probes, stream(seed, 0)
        )
        rev = revealment(oracle, process, grid, args.samples, stream(seed, 1), 0.1)
        report["axiom"] = axiom.to_dict()
        report["revealment"] = {"delta": rev.delta, "delta_se": rev.delta_se}
    elif args.fixture == "line-exploration":
        n, gamma = fx["n"], fx["gamma"]
        model = fixtures.boolean_model({"radius": 1.0}, gamma)
        rect = BoxWindow((0.0, 0.0), (float(n), float(n)))
        from .process import HomogeneousIntensity, RadiusMarks
        from .percolation import FixedRadius

        process = ProcessSpec(
            HomogeneousIntensity(gamma, RadiusMarks(FixedRadius(1.0))),
            rect.pad(1.0),
        )
        oracle = component_exploration(model, rect, LineSeed(0, n / 2))
        axiom = verify_stopping_axiom(
            oracle, process, args.trials, args.probes, stream(seed, 0)
        )
        family = lambda s: component_exploration(model, rect, LineSeed(0, s))
        rz = randomize(family, lambda rng: float(rng.uniform(0.0, float(n))))
        rev = revealment(
            rz, process, probe_grid(rect, 0.5), args.samples, stream(seed, 1), 0.5
        )
        report["axiom"] = axiom.to_dict()
        report["revealment"] = {"delta": rev.delta, "delta_se": rev.delta_se}
    elif args.fixture == "nonattainable":
        from .process import CellIntensity, DiscreteWindow

        masses = tuple(fx["masses"])
        oracle = nonattainable_fixture(masses)
        process = ProcessSpec(CellIntensity(masses), DiscreteWindow(3))
        axiom = verify_stopping_axiom(
            oracle, process, args.trials, 3, stream(seed, 0)
        )
        report["axiom"] = axiom.to_dict()
    else:
        raise SystemExit(f"fixture {args.fixture!r} is not a stopping fixture")
    _write(args.output, json.dumps(report, indent=2, sort_keys=True), None)
    return 0 if report["axiom"]["passed"] == (args.fixture != "broken-nearest") else 1


def cmd_chaos_audit(args) -> int:
    fx = fixtures.get(args.fixture)
    seed = args.seed
    name = args.fixture
    if name in ("poincare-empty-space", "osss-empty-space", "sqrt-osss-empty-space"):
        window, process, region, f = fixtures.empty_space_setup(fx["area"])
        ctdt = ball_growth_ctdt(region, (0.0, 0.0), support=window)
        if name == "poincare-empty-space":
            rep = chaos.poincare_audit(f, process, args.samples, stream(seed, 0))
        elif name == "osss-empty-space":
            rep = chaos.osss_audit(
                f, ctdt, process, args.samples, stream(seed, 0), binary=True
            )
        else:
            rev = revealment(
                ctdt.terminal(), process, probe_grid(window, 0.1),
                max(200, args.samples // 10), stream(seed, 1), 0.1,
            )
            rep = chaos.sqrt_osss_audit(
                f, rev.delta, rev.delta_se, process, args.samples, stream(seed, 0)
            )
        payload = rep.to_dict()
    elif name == "mehler-count":
        from .process import BoxWindow, HomogeneousIntensity

        window = BoxWindow((0.0, 0.0), (1.0, 1.0))
        process = ProcessSpec(HomogeneousIntensity(fx["mass"]), window)
        spec = chaos.chaos_weights_mehler(
            lambda c: float(c.size),
            process,
            [0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0],
            args.samples,
            stream(seed, 0),
            k_max=6,
        )
        payload = spec.to_dict()
    elif name == "chaos-3cell-exact":
        masses = tuple(fx["masses"])
        space = chaos.DiscreteOracleSpace(masses, tail_bound=1e-14)

        def f_counts(counts):
            counts = np.atleast_2d(counts)
            return ((counts[:, 0] + counts[:, 1]) == 0).astype(float)

        spec = chaos.chaos_weights_exact(f_counts, space, k_max=8)
        payload = spec.to_dict()
    elif name == "cond-moment-nonattainable":
        masses = tuple(fx["masses"])
        space = chaos.DiscreteOracleSpace(masses, tail_bound=1e-14)
        fxo = nonattainable_fixture(masses)
        u1 = np.array([1.0, -0.7, 0.4])
        payload = chaos.cond_moment_audit(u1, 1, fxo.cells_mask, space)
    else:
        raise SystemExit(f"fixture {name!r} is not a chaos fixture")
    _write(
        args.output,
        json.dumps(payload, indent=2, sort_keys=True, default=float),
        None,
    )
    passed = payload.get("passed", True)
    print(f"{name}: {'pass' if passed else 'FAIL'}")
    return 0 if passed else 1


def cmd_dynamics_run(args) -> int:
    fx = fixtures.get(args.fixture)
    if fx["kind"] != "dynamics":
        raise SystemExit(f"fixture {args.fixture!r} is not a dynamics fixture")
    window = fx["window"] if "window" in fx else [0, 0, fx["n"], fx["n"]]
    process = fixtures.sample_process({"gamma": fx["gamma"], "window": window})
    path = dynamics.simulate_path(process, fx["horizon"], stream(args.seed))
    _write(args.output, path.to_csv(), {"fixture": args.fixture, "seed": args.seed})
    return 0


def cmd_dynamics_exceptional(args) -> int:
    fx = fixtures.get(args.fixture)
    if args.fixture == "crossing-exceptional":
        n = fx["n"]
        model = fixtures.boolean_model({"radius": 1.0}, fx["gamma"])
        rect = BoxWindow((0.0, 0.0), (float(n), float(n)))
        from .process import HomogeneousIntensity, RadiusMarks
        from .percolation import FixedRadius

        process = ProcessSpec(
            HomogeneousIntensity(fx["gamma"], RadiusMarks(FixedRadius(1.0))),
            rect.pad(1.0),
        )
        f = lambda cfg: 1.0 if crossing(BooleanWorld(cfg, model, rect)) else 0.0
    else:
        process = fixtures.sample_process(fx)
        f = lambda cfg: float(cfg.size % 2)
    path = dynamics.simulate_path(process, fx["horizon"], stream(args.seed))
    times = dynamics.exceptional_times(path, f)
    text = "time\n" + "".join(f"{t:.17g}\n" for t in times)
    _write(args.output, text, {"fixture": args.fixture, "seed": args.seed})
    print(f"{len(times)} exceptional times on [0, {fx['horizon']}]")
    return 0


def _parse_grid(spec: str) -> np.ndarray:
    lo, hi, num = spec.split(":")
    return np.linspace(float(lo), float(hi), int(num))


def cmd_perc_scan(args) -> int:
    fx = fixtures.get(args.model)
    grid = _parse_grid(args.grid)
    if fx["model"] == "confetti":
        model = fixtures.confetti_model(fx, 0.5)
        resolution = fx.get("radius", 1.0) / 8.0
    else:
        model = fixtures.boolean_model(fx, grid[0])
        resolution = None
    scan = threshold_scan(
        model, grid, args.n, args.samples, args.seed,
        event=args.event, resolution=resolution,
    )
    _write(
        args.output,
        scan.to_csv(),
        {"model": args.model, "n": args.n, "event": args.event, "seed": args.seed},
    )
    return 0


def cmd_perc_critical(args) -> int:
    fx = fixtures.get(args.model)
    rect = BoxWindow((0.0, 0.0), (float(args.n), float(args.n)))
    if fx["model"] == "confetti":
        resolution = fx.get("radius", 1.0) / 8.0

        def prob_at(p, samples, ridx):
            return crossing_probability(
                fixtures.confetti_model(fx, p), rect, samples,
                lambda i: stream(args.seed, ridx, i), resolution=resolution,
            )

        lo, hi = 0.3, 0.7
    else:

        def prob_at(g, samples, ridx):
            return crossing_probability(
                fixtures.boolean_model(fx, g), rect, samples,
                lambda i: stream(args.seed, ridx, i),
            )

        lo, hi = args.lo, args.hi
    est, ci = estimate_critical(
        prob_at, lo, hi, tolerance=args.tolerance, base_samples=args.samples
    )
    payload = {
        "model": args.model, "n": args.n, "estimate": est, "ci": ci,
        "seed": args.seed,
    }
    _write(args.output, json.dumps(payload, indent=2, sort_keys=True), None)
    print(f"critical estimate {est:.4f} +- {ci:.4f}")
    return 0


def cmd_perc_duality(args) -> int:
    fx = fixtures.get(args.model)
    if fx["model"] != "confetti":
        raise SystemExit("duality check applies to confetti fixtures")
    model = fixtures.confetti_model(fx, args.p)
    rect = BoxWindow((0.0, 0.0), (float(args.n), float(args.n)))
    h = fx.get("radius", 1.0) / 10.0
    bad = 0
    hits = 0
    for i in range(args.samples):
        world = sample_confetti_world(model, rect, h, stream(args.seed, i))
        hits += crossing(world)
        bad += not confetti_duality_check(world)
    payload = {
        "model": args.model, "p": args.p, "n": args.n, "samples": args.samples,
        "crossing_rate": hits / args.samples, "xor_violations": bad,
        "seed": args.seed,
    }
    _write(args.output, json.dumps(payload, indent=2, sort_keys=True), None)
    print(f"duality XOR violations: {bad}/{args.samples}")
    return 0 if bad == 0 else 1


def cmd_plot(args) -> int:
    text = Path(args.csv).read_text()
    rows = [
        ln.split(",")
        for ln in text.strip().splitlines()
        if ln and not ln.startswith("#")
    ]
    header, data = rows[0], rows[1:]
    if not data:
        raise SystemExit("empty CSV: nothing to plot")
    cols = {name: [float(r[j]) for r in data] for j, name in enumerate(header)}
    if args.kind == "threshold":
        if not {"param", "estimate", "se"} <= set(cols):
            raise SystemExit("threshold plot needs columns param,estimate,se")
        svg = svgplot.line_plot(
            [{"x": cols["param"], "y": cols["estimate"], "err": cols["se"],
              "label": "estimate"}],
            xlabel="parameter", ylabel="probability", title="threshold scan",
        )
    elif args.kind == "covariance":
        if not {"t", "cov"} <= set(cols):
            raise SystemExit("covariance plot needs columns t,cov")
        svg = svgplot.line_plot(
            [{"x": cols["t"], "y": cols["cov"], "err": cols.get("se"),
              "label": "cov"}],
            xlabel="t", ylabel="covariance", title="covariance decay", log_y=True,
        )
    else:
        raise SystemExit(f"unknown plot kind {args.kind!r}")
    _write(args.output, svg, None)
    return 0


def cmd_acceptance(args) -> int:
    names = None if args.which == "all" else [args.which]
    workers = args.workers or int(os.environ.get("POISSONLAB_WORKERS", "1"))
    try:
        results = acceptance.run(names, workers=workers)
    except KeyError as exc:
        raise SystemExit(str(exc))
    for res in results:
        print(res.line())
    summary = {
        "version": __version__,
        "passed": all(r.passed for r in results),
        "criteria": [
            {"name": r.name, "passed": r.passed, "elapsed": r.elapsed}
            for r in results
        ],
    }
    if args.output:
        _write(args.output, json.dumps(summary, indent=2, sort_keys=True), None)
    return 0 if summary["passed"] else 1


def cmd_run(args) -> int:
    cfg = json.loads(Path(args.config).read_text())
    required = {"version", "experiment", "params"}
    missing = required - set(cfg)
    if missing:
        raise SystemExit(f"config schema violation: missing keys {sorted(missing)}")
    if cfg["version"] != 1:
        raise SystemExit(f"unsupported config version {cfg['version']!r}")
    experiment = cfg["experiment"]
    params = dict(cfg["params"])
    params.setdefault("seed", cfg.get("seed", 0))
    argv = [experiment]
    for key, val in params.items():
        argv += [f"--{key.replace('_', '-')}", str(val)]
    return main(argv)


# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="poissonlab", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw a configuration, write CSV")
    p.add_argument("--fixture", default="poisson-square")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", "-o", default="sample.csv")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("stopping", help="stopping-set audits")
    ssub = p.add_subparsers(dest="subcommand", required=True)
    pa = ssub.add_parser("audit")
    pa.add_argument("--fixture", default="ball-growth")
    pa.add_argument("--trials", type=int, default=2000)
    pa.add_argument("--probes", type=int, default=100)
    pa.add_argument("--samples", type=int, default=500)
    pa.add_argument("--seed", type=int, default=0)
    pa.add_argument("--output", "-o", default="stopping_audit.json")
    pa.set_defaults(func=cmd_stopping_audit)

    p = sub.add_parser("chaos", help="inequality and spectrum audits")
    csub = p.add_subparsers(dest="subcommand", required=True)
    pa = csub.add_parser("audit")
    pa.add_argument("--fixture", default="osss-empty-space")
    pa.add_argument("--samples", type=int, default=20000)
    pa.add_argument("--seed", type=int, default=0)
    pa.add_argument("--output", "-o", default="chaos_audit.json")
    pa.set_defaults(func=cmd_chaos_audit)

    p = sub.add_parser("dynamics", help="birth-death paths")
    dsub = p.add_subparsers(dest="subcommand", required=True)
    pa = dsub.add_parser("run")
    pa.add_argument("--fixture", default="birth-death-small")
    pa.add_argument("--seed", type=int, default=0)
    pa.add_argument("--output", "-o", default="path.csv")
    pa.set_defaults(func=cmd_dynamics_run)
    pa = dsub.add_parser("exceptional")
    pa.add_argument("--fixture", default="crossing-exceptional")
    pa.add_argument("--seed", type=int, default=0)
    pa.add_argument("--output", "-o", default="exceptional.csv")
    pa.set_defaults(func=cmd_dynamics_exceptional)

    p = sub.add_parser("perc", help="percolation experiments")
    psub = p.add_subparsers(dest="subcommand", required=True)
    pa = psub.add_parser("scan")
    pa.add_argument("--model", default="boolean-k1")
    pa.add_argument("--grid", default="0.2:0.6:9", help="lo:hi:num")
    pa.add_argument("--n", type=float, default=10.0)
    pa.add_argument("--event", default="cross", choices=["cross", "one_arm"])
    pa.add_argument("--samples", type=int, default=200)
    pa.add_argument("--seed", type=int, default=0)
    pa.add_argument("--output", "-o", default="scan.csv")
    pa.set_defaults(func=cmd_perc_scan)
    pa = psub.add_parser("critical")
    pa.add_argument("--model", default="boolean-k1")
    pa.add_argument("--n", type=float, default=10.0)
    pa.add_argument("--lo", type=float, default=0.2)
    pa.add_argument("--hi", type=float, default=0.6)
    pa.add_argument("--tolerance", type=float, default=0.02)
    pa.add_argument("--samples", type=int, default=150)
    pa.add_argument("--seed", type=int, default=0)
    pa.add_argument("--output", "-o", default="critical.json")
    pa.set_defaults(func=cmd_perc_critical)
    pa = psub.add_parser("duality")
    pa.add_argument("--model", default="confetti-symmetric")
    pa.add_argument("--p", type=float, default=0.5)
    pa.add_argument("--n", type=float, default=10.0)
    pa.add_argument("--samples", type=int, default=200)
    pa.add_argument("--seed", type=int, default=0)
    pa.add_argument("--output", "-o", default="duality.json")
    pa.set_defaults(func=cmd_perc_duality)

    p = sub.add_parser("plot", help="render a result CSV to static SVG")
    p.add_argument("--csv", required=True)
    p.add_argument("--kind", default="threshold", choices=["threshold", "covariance"])
    p.add_argument("--output", "-o", default="plot.svg")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("acceptance", help="run the acceptance suite")
    p.add_argument("which", nargs="?", default="all")
    p.add_argument("--workers", type=int, default=0)
    p.add_argument("--output", "-o", default=None)
    p.set_defaults(func=cmd_acceptance)

    p = sub.add_parser("run", help="execute a JSON experiment config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_run)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
