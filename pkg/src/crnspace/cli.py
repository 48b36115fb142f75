"""Command line interface.

Exit codes: 0 success, 1 analysis obstruction (Partial verdict, rejected
balance point, oracle violation), 2 input error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .decomposition import DEFAULT_STATE_CAP
from .io import CrnParseError, NetworkFile, read_network
from .model import AssumptionViolated, conservation_data, validate_support_rule
from .report import PipelineOptions, run_pipeline, to_json

EXIT_OK, EXIT_OBSTRUCTION, EXIT_INPUT = 0, 1, 2


def _box(text: str | None) -> tuple[int, ...] | None:
    if text is None:
        return None
    try:
        values = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid box {text!r}; expected comma-separated integers") from None
    if any(v < 0 for v in values):
        raise argparse.ArgumentTypeError("box bounds must be nonnegative")
    return values


def _load(path: str) -> NetworkFile:
    return read_network(path)


def _emit(data, out: str | None) -> None:
    text = data if isinstance(data, str) else to_json(data)
    if out and out != "-":
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _options(args, **extra) -> PipelineOptions:
    return PipelineOptions(
        max_bounded_states=args.max_bounded_states,
        coeff_cap=args.coeff_cap,
        **extra,
    )


def cmd_validate(args) -> int:
    nf = _load(args.file)
    net = nf.network
    rep = validate_support_rule(net, sample_budget=args.samples, strict=False)
    cd = conservation_data(net, nf.x0)
    print(f"{net.d} species, {net.K} reactions, {cd.n} conservation relations")
    print(f"support rule: {'ok' if rep.ok else 'VIOLATED'} ({rep.checked} states checked)")
    for k, x, detail in rep.violations:
        print(f"  reaction {k + 1} at {x}: {detail}")
    return EXIT_OK if rep.ok else EXIT_INPUT


def _summary(report: dict) -> str:
    lines = []
    if "error" in report:
        return f"error [{report['error']['code']}]: {report['error']['message']}"
    c = report["classification"]
    lines.append(f"bounded: {' '.join(c['bounded']) or '-'}")
    lines.append(f"free: {' '.join(c['free']) or '-'}")
    lines.append(f"restricted: {' '.join(c['restricted']) or '-'}")
    lines.append(f"sigma: {tuple(c['sigma'])}")
    dec = report["decomposed"]
    lines.append(f"|E_b| = {dec['bounded_state_count']}")
    for m in dec["map"]:
        lines.append(f"  {m}")
    return "\n".join(lines)


def cmd_decompose(args) -> int:
    report = run_pipeline(_load(args.file), _options(args))
    if args.json:
        keep = ("schema_version", "network", "conservation", "classification", "decomposed", "error")
        _emit({k: report[k] for k in keep if k in report}, args.json)
    else:
        print(_summary(report))
    return EXIT_INPUT if "error" in report else EXIT_OK


def _print_certs(report: dict) -> None:
    for c in report.get("certificates", []):
        ss = c["state_set"]
        print(f"certificate: {ss['description']}  (unique in slab: {c['unique_in_slab']})")
    print(f"verdict: {report.get('verdict')}")
    for o in report.get("obstructions", []):
        print(f"  obstruction: {o}")


def cmd_irreducible(args) -> int:
    report = run_pipeline(_load(args.file), _options(args, oracle_box=args.oracle_box))
    if args.json:
        _emit(report, args.json)
    else:
        if "error" in report:
            print(_summary(report))
            return EXIT_INPUT
        _print_certs(report)
        if "oracle" in report:
            orc = report["oracle"]
            for v in orc["certificates"]:
                print(f"oracle: certificate A={v['A']} {v['status']} {v['detail']}".rstrip())
            if "classes" in orc:
                print(f"oracle: {len(orc['classes'])} non-transient classes in box {tuple(orc['box'])}")
                for cl in orc["classes"]:
                    print(f"  {cl['status']}: size {cl['size']}, e.g. {cl['sample'][:3]}")
    if "error" in report:
        return EXIT_INPUT
    return EXIT_OK if report["verdict"] == "Complete" else EXIT_OBSTRUCTION


def cmd_stationary(args) -> int:
    report = run_pipeline(_load(args.file), _options(args, stationary=args.r))
    if "error" in report:
        print(_summary(report))
        return EXIT_INPUT
    st = report["stationary"]
    if args.json:
        _emit(st, args.json)
    else:
        print(f"status: {st['status']}")
        if "r" in st:
            print("r = " + ", ".join(f"{n}={v}" for n, v in st["r"].items()))
            for d in st.get("distributions", []):
                print(f"  class A={d['A']}: {d}")
    return EXIT_OK if st["status"] == "ComplexBalanced" else EXIT_OBSTRUCTION


def cmd_simulate(args) -> int:
    from . import simulation as sim

    nf = _load(args.file)
    net = nf.network
    if args.sssa:
        if not nf.fast:
            print("error: --sssa needs a 'fast' directive in the network file", file=sys.stderr)
            return EXIT_INPUT
        part = sim.fast_slow_partition(net, nf.fast, nf.slow or None)
        provider = sim.ToxinFastProvider(net, part, args.tail_tol)
        if args.traj == 1:
            tr = sim.sssa_simulate(net, part, provider, nf.x0, args.t, args.seed, record=True)
            _emit(tr.to_lines(), args.out)
        else:
            res = sim.sssa_simulate(net, part, provider, nf.x0, args.t, args.seed, n_traj=args.traj)
            _emit(_ensemble_json(res, [f"slow{j + 1}" for j in range(part.L.shape[0])], "ssSSA"), args.out)
        return EXIT_OK
    if args.traj == 1:
        tr = sim.ssa_simulate(net, nf.x0, args.t, args.seed)
        _emit(tr.to_lines(), args.out)
    else:
        res = sim.ssa_ensemble(net, nf.x0, args.t, args.seed, args.traj, threads=args.threads)
        _emit(_ensemble_json(res, list(net.species), "SSA"), args.out)
    return EXIT_OK


def _ensemble_json(res, names, method: str) -> dict:
    return {
        "method": method,
        "seed": res.seed,
        "t_final": res.t_final,
        "trajectories": int(len(res.events)),
        "mean_events": float(res.events.mean()),
        "mean": {n: res.mean(j) for j, n in enumerate(names)},
        "ci95": {n: list(res.confidence_interval(j)) for j, n in enumerate(names)} if len(res.events) > 1 else {},
    }


def cmd_verify(args) -> int:
    report = run_pipeline(_load(args.file), _options(args, oracle_box=args.box, verify=True))
    if "error" in report:
        print(_summary(report))
        return EXIT_INPUT
    statuses = [v["status"] for v in report["oracle"]["certificates"]]
    if args.json:
        _emit(report["oracle"], args.json)
    else:
        for v in report["oracle"]["certificates"]:
            print(f"A={v['A']}: {v['status']} {v['detail']}".rstrip())
    return EXIT_OBSTRUCTION if "Violation" in statuses else EXIT_OK


def cmd_report(args) -> int:
    opts = _options(args, stationary=args.r, oracle_box=args.oracle_box, verify=args.verify)
    report = run_pipeline(_load(args.file), opts)
    _emit(report, args.json)
    if "error" in report:
        return EXIT_INPUT
    return EXIT_OK if report["verdict"] == "Complete" else EXIT_OBSTRUCTION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crnspace", description="State-space analysis of stochastic reaction networks.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("file", help="network file (.crn) or the name of a bundled network")
    common.add_argument("--max-bounded-states", type=int, default=DEFAULT_STATE_CAP)
    common.add_argument("--coeff-cap", type=int, default=64)
    common.add_argument("--tail-tol", type=float, default=1e-12)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--json", metavar="OUT", help="write JSON to OUT ('-' for stdout)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="parse and check the propensity support rule")
    p.add_argument("--samples", type=int, default=1000)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("decompose", parents=[common], help="bounded/free/restricted split and affine map")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("irreducible", parents=[common], help="certify irreducible state-spaces")
    p.add_argument("--oracle-box", type=_box, help="cross-check on a box, e.g. 40 or 1,1,8,8")
    p.set_defaults(func=cmd_irreducible)

    p = sub.add_parser("stationary", parents=[common], help="complex balance and product-form laws")
    p.add_argument("--r", choices=("from-file", "solve"), default="from-file")
    p.set_defaults(func=cmd_stationary)

    p = sub.add_parser("simulate", parents=[common], help="exact SSA or slow-scale SSA")
    p.add_argument("--t", type=float, required=True, help="final time")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--traj", type=int, default=1)
    p.add_argument("--sssa", action="store_true", help="simulate slow reactions with averaged rates")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", parents=[common], help="oracle check of every certificate")
    p.add_argument("--box", type=_box, help="per-coordinate bounds (default: derived from x0)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", parents=[common], help="full pipeline as JSON")
    p.add_argument("--r", choices=("from-file", "solve"), default=None)
    p.add_argument("--oracle-box", type=_box)
    p.add_argument("--verify", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (CrnParseError, FileNotFoundError, AssumptionViolated, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
