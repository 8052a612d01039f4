"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 scenario too large, 4 no threshold
(no violation at efficiency 1), 5 a regression target missed its tolerance.

Every command writes a run manifest (JSON) recording its argv, resolved
configuration and output files; ``replay`` re-runs a manifest.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

from scipy.optimize import minimize_scalar

from . import __version__
from . import constructions as cons
from . import reproduce
from .bell import (
    BellExpression,
    DetectionFamily,
    ScenarioTooLarge,
    build_ch,
    build_i4422,
    build_inn22,
    evaluate,
    local_bound,
)
from .quantum import correlation_table, schmidt_from_epsilon
from .solver import (
    FamilySpec,
    OptimizerConfig,
    maximize_over_settings,
    maximize_over_state_and_settings,
    sweep_epsilon,
    threshold_efficiency,
)

EXIT_OK, EXIT_USAGE, EXIT_TOO_LARGE, EXIT_NO_THRESHOLD, EXIT_REGRESSION = 0, 2, 3, 4, 5

log = logging.getLogger("quditbell")


class UsageError(Exception):
    pass


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _num(value: float) -> str:
    return f"{value + 0.0:.10g}"


def _expression(args) -> BellExpression:
    if args.file:
        try:
            return BellExpression.from_json(json.loads(Path(args.file).read_text()))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read expression from {args.file}: {exc}") from exc
    if args.name == "inn22":
        return build_inn22(args.n)
    if args.name == "ch":
        return build_ch()
    if args.name == "i4422":
        return build_i4422()
    raise UsageError("give an expression name (inn22, ch, i4422) or --file")


def _family(name: str, n: int) -> tuple[DetectionFamily, int]:
    if name == "ch":
        return DetectionFamily(build_ch(), "symmetric"), 2
    if name == "i4422":
        return DetectionFamily(build_i4422(), "symmetric"), 4
    return DetectionFamily(build_inn22(n), "asymmetric"), n


def _config(args, dim: int, **extra) -> OptimizerConfig:
    overrides = dict(seed=args.seed, **extra)
    if args.restarts is not None:
        overrides["restarts"] = args.restarts
    cfg = OptimizerConfig.for_dim(dim, **overrides)
    args.optimizer = cfg.to_json()
    return cfg


def cmd_bound(args) -> tuple[int, list[Path]]:
    expr = _expression(args)
    value, strategy = local_bound(expr)
    print(_num(value))
    print(strategy)
    outputs = []
    if args.out:
        doc = {"expression": expr.to_json(), "localBound": value,
               "strategy": {"outA": list(strategy.out_a), "outB": list(strategy.out_b)}}
        outputs.append(_write(Path(args.out), _dump(doc)))
    return EXIT_OK, outputs


def _default_epsilon(args, dim: int) -> float:
    if args.epsilon is not None:
        return args.epsilon
    if args.family == "inn22" and args.q0sq is not None:
        return cons.optimal_epsilon(dim, math.sqrt(args.q0sq))
    return 1.0 / math.sqrt(dim)


def _closed_form(args, dim: int):
    if args.family == "inn22":
        if args.q0sq is None:
            raise UsageError("--closed-form for inn22 needs --q0sq")
        return cons.inn22_construction(dim, math.sqrt(args.q0sq), args.p)
    eps = _default_epsilon(args, dim)
    if args.family == "ch":
        if math.isclose(eps, 1 / math.sqrt(2), abs_tol=1e-3):
            return cons.eberhard_maxent(args.p)
        return cons.eberhard_partial(eps, args.p)
    if math.isclose(eps, 0.5, abs_tol=1e-9):
        return cons.i4422_maxent(args.p)
    return cons.i4422_small_epsilon(eps, args.p)


def cmd_threshold(args) -> tuple[int, list[Path]]:
    if not 0.0 <= args.p < 1.0:
        raise UsageError("--p must lie in [0, 1)")
    family, dim = _family(args.family, args.n)
    if args.construction or args.closed_form:
        c = cons.construction(args.construction, args.p) if args.construction else _closed_form(args, dim)
        cfg = _config(args, c.dim, bracket_width=1e-8)
        result = threshold_efficiency(c.family, c.state, cfg=cfg, settings=(c.settings_a, c.settings_b))
        eps, dim = float(c.state.lam[-1]), c.dim
    else:
        eps = _default_epsilon(args, dim)
        if not 0.0 < eps <= 1.0:
            raise UsageError("--epsilon must lie in (0, 1]")
        state = schmidt_from_epsilon(dim, eps, args.p)
        result = threshold_efficiency(family, state, cfg=_config(args, dim))
    out = Path(args.out or f"threshold.{args.format}")
    if args.format == "csv":
        eta = "" if result.eta is None else f"{result.eta:.6f}"
        text = "family,n,epsilon,p,eta,value\n"
        text += f"{args.family},{dim},{eps:.6f},{args.p:.6f},{eta},{result.value_at_eta:.6f}\n"
    else:
        text = _dump({"family": args.family, "n": dim, "epsilon": eps, "p": args.p, **result.to_json()})
    _write(out, text)
    if not result.found:
        print("no violation at efficiency 1")
        return EXIT_NO_THRESHOLD, [out]
    print(f"{result.eta:.4f}")
    return EXIT_OK, [out]


def cmd_sweep(args) -> tuple[int, list[Path]]:
    family, dim = _family(args.family, args.n)
    try:
        grid = [float(e) for e in args.grid.split(",")]
    except ValueError as exc:
        raise UsageError(f"bad --grid: {exc}") from exc
    spec = FamilySpec(args.family, family, dim)
    points = sweep_epsilon(spec, grid, args.p, _config(args, dim))
    out = Path(args.out or "sweep.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    reproduce.write_epsilon_csv(out, points)
    for pt in points:
        print(f"{pt.epsilon:.6f} {'none' if pt.eta is None else f'{pt.eta:.4f}'}")
    return EXIT_OK, [out]


def cmd_evaluate(args) -> tuple[int, list[Path]]:
    c = cons.construction(args.construction, args.p)
    if not 0.0 < args.eta <= 1.0:
        raise UsageError("--eta must lie in (0, 1]")
    table = c.table()
    value = evaluate(c.family.at(args.eta), table)
    print(_num(value))
    doc = {"construction": c.name, "eta": args.eta, "p": args.p, "value": value, "table": table.to_json()}
    out = _write(Path(args.out or "evaluate.json"), _dump(doc))
    return EXIT_OK, [out]


def cmd_maximize(args) -> tuple[int, list[Path]]:
    family, dim = _family(args.family, args.n)
    if not 0.0 < args.eta <= 1.0:
        raise UsageError("--eta must lie in (0, 1]")
    expr = family.at(args.eta)
    if args.epsilon is None:
        result = maximize_over_state_and_settings(expr, dim, _config(args, dim, optimize_state=True), noise=args.p)
    else:
        result = maximize_over_settings(expr, schmidt_from_epsilon(dim, args.epsilon, args.p), _config(args, dim))
    print(_num(result.value))
    doc = {"family": args.family, "eta": args.eta, "value": result.value, "state": result.state.to_json(),
           "settingsA": result.settings_a.to_json(), "settingsB": result.settings_b.to_json()}
    out = _write(Path(args.out or "maximize.json"), _dump(doc))
    return EXIT_OK, [out]


def _qutrit_construction(eta_b: float):
    """Asymmetric qutrit construction with q0 chosen to maximize the closed-form value."""
    if eta_b <= 1 / 3:
        return None
    res = minimize_scalar(lambda q: -cons.asymmetric_value_closed_form(3, q, eta_b),
                          bounds=(math.sqrt(1 / (3 * eta_b)), 1.0), method="bounded",
                          options={"xatol": 1e-10})
    return cons.inn22_construction(3, float(res.x))


def cmd_witness(args) -> tuple[int, list[Path]]:
    if not 0.0 < args.etab <= 1.0:
        raise UsageError("--etab must lie in (0, 1]")
    family = DetectionFamily(build_inn22(3), "asymmetric")
    expr = family.at(args.etab)
    restarts = args.restarts if args.restarts is not None else 1000
    cfg = OptimizerConfig(restarts=restarts, seed=args.seed, optimize_state=True)
    args.optimizer = cfg.to_json()
    qubit = maximize_over_state_and_settings(expr, 2, cfg)
    c = _qutrit_construction(args.etab)
    qutrit = None if c is None else evaluate(expr, c.table())
    consistent = qubit.value <= 1e-6 and qutrit is not None and qutrit > 0
    print(f"qubit max: {_num(qubit.value)}")
    if c is None:
        print("qutrit construction: none (efficiency at or below 1/3)")
    else:
        print(f"qutrit construction {c.name}: {_num(qutrit)}")
    print("witness-consistent" if consistent else "not witness-consistent")
    doc = {"etaB": args.etab, "restarts": restarts, "qubitMax": qubit.value,
           "qubitState": qubit.state.to_json(), "qubitSettingsA": qubit.settings_a.to_json(),
           "qubitSettingsB": qubit.settings_b.to_json(),
           "qutritConstruction": None if c is None else c.name, "qutritValue": qutrit,
           "witnessConsistent": consistent}
    out = _write(Path(args.out or "witness.json"), _dump(doc))
    return EXIT_OK, [out]


def cmd_reproduce(args) -> tuple[int, list[Path]]:
    outdir = Path(args.out or "reproduce")
    outdir.mkdir(parents=True, exist_ok=True)
    if args.target == "thresholds":
        checks, outputs = reproduce.thresholds(), []
    else:
        dim = {"fig1": 3, "fig2": 4, "fig3": 4}[args.target]
        restarts = args.restarts if args.restarts is not None else (8 if args.quick else None)
        overrides = {"seed": args.seed}
        if restarts is not None:
            overrides["restarts"] = restarts
        if args.target == "fig3":
            # the outer epsilon search runs many inner thresholds; keep each small
            overrides.setdefault("restarts", 8)
            overrides["pool_size"] = 4
        cfg = OptimizerConfig.for_dim(dim, **overrides)
        args.optimizer = cfg.to_json()
        checks, outputs = reproduce.TARGETS[args.target](outdir, cfg, quick=args.quick)
    lines = [f"regression table v{reproduce.REGRESSION_VERSION} -- {args.target}"]
    lines += [c.row() for c in checks]
    summary = _write(outdir / f"{args.target}_summary.txt", "\n".join(lines) + "\n")
    print("\n".join(lines))
    failed = [c for c in checks if not c.passed]
    return (EXIT_REGRESSION if failed else EXIT_OK), outputs + [summary]


def cmd_replay(args) -> tuple[int, list[Path]]:
    try:
        manifest = json.loads(Path(args.manifest_file).read_text())
        argv = list(manifest["argv"])
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read manifest {args.manifest_file}: {exc}") from exc
    if argv and argv[0] == "replay":
        raise UsageError("refusing to replay a replay manifest")
    return _run(build_parser().parse_args(argv), argv)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quditbell", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_help="output file"):
        p.add_argument("--out", help=out_help)
        p.add_argument("--manifest", help="run manifest path (default: <out>.manifest.json)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--restarts", type=int)

    p = sub.add_parser("bound", help="exact local bound by enumeration")
    p.add_argument("name", nargs="?", choices=["inn22", "ch", "i4422"])
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--file", help="expression JSON {nA, nB, cJoint, cA, cB, constant}")
    common(p)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("threshold", help="threshold detection efficiency")
    p.add_argument("family", nargs="?", choices=["ch", "inn22", "i4422"], default="ch")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--q0sq", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--p", type=float, default=0.0, help="white-noise weight")
    p.add_argument("--closed-form", action="store_true", help="use the explicit construction, no optimization")
    p.add_argument("--construction", help="named construction, e.g. 'i4422-smalleps(0.001)'")
    p.add_argument("--format", choices=["csv", "json"], default="json")
    common(p)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("sweep", help="optimized threshold along an epsilon grid (CSV)")
    p.add_argument("family", choices=["ch", "inn22", "i4422"])
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--grid", required=True, help="comma-separated epsilon values")
    p.add_argument("--p", type=float, default=0.0)
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("evaluate", help="value of a named construction at a given efficiency")
    p.add_argument("construction")
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--p", type=float, default=0.0)
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("maximize", help="best value of an efficiency-modified expression")
    p.add_argument("family", choices=["ch", "inn22", "i4422"])
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, help="fix the state (default: optimize it)")
    p.add_argument("--p", type=float, default=0.0)
    common(p)
    p.set_defaults(func=cmd_maximize)

    p = sub.add_parser("witness", help="qubit-restricted check of I_3322 at a given efficiency")
    p.add_argument("--etab", type=float, required=True)
    common(p)
    p.set_defaults(func=cmd_witness)

    p = sub.add_parser("reproduce", help="regenerate reference numbers and figure data")
    p.add_argument("target", choices=["thresholds", "fig1", "fig2", "fig3"])
    p.add_argument("--quick", action="store_true", help="coarser grids and fewer restarts")
    common(p, out_help="output directory (default: reproduce/)")
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("replay", help="re-run a manifest")
    p.add_argument("manifest_file")
    p.add_argument("--manifest", help="where to write the new manifest")
    p.set_defaults(func=cmd_replay, out=None)
    return parser


def _manifest_path(args, outputs: list[Path]) -> Path:
    if getattr(args, "manifest", None):
        return Path(args.manifest)
    if args.command == "reproduce":
        return Path(args.out or "reproduce") / f"{args.target}.manifest.json"
    if outputs:
        return outputs[0].with_name(outputs[0].name + ".manifest.json")
    return Path(f"{args.command}.manifest.json")


def _run(args, argv: list[str]) -> tuple[int, list[Path]]:
    start = time.perf_counter()
    try:
        code, outputs = args.func(args)
    except ScenarioTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TOO_LARGE, []
    except (UsageError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE, []
    if args.command != "replay":
        config = {k: v for k, v in vars(args).items() if k not in ("func", "manifest")}
        manifest = {
            "command": args.command,
            "argv": argv,
            "config": config,
            "seed": getattr(args, "seed", None),
            "version": __version__,
            "outputs": [str(p) for p in outputs],
            "durationSeconds": round(time.perf_counter() - start, 3),
        }
        _write(_manifest_path(args, outputs), _dump(manifest))
    return code, outputs


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    # a manifest path is where this run is recorded, not part of what it computes
    replay_argv = _strip_option(argv, "--manifest")
    code, _ = _run(args, replay_argv)
    return code


def _strip_option(argv: list[str], option: str) -> list[str]:
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == option:
            skip = True
            continue
        if a.startswith(option + "="):
            continue
        out.append(a)
    return out


if __name__ == "__main__":
    sys.exit(main())
