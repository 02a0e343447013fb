"""Command line front end: ``eua <subcommand>``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .harness import (
    SENSITIVITY_PARAMS,
    default_suite_doc,
    dump_json,
    evaluate_suite,
    exact_document,
    generate_case_set,
    greedy_document,
    load_manifest,
    load_params,
    read_json,
    reference_documents,
    sensitivity,
    sensitivity_csv,
    solve_runs,
    worker_count,
    write_evaluation,
    write_json,
)
from .instance import InstanceError, load_instance
from .oracle import DEFAULT_NODE_BUDGET


def _emit(doc, out: Path | None, name: str) -> None:
    if out is None:
        sys.stdout.write(dump_json(doc))
    else:
        write_json(out / name, doc)


def cmd_generate(args) -> int:
    suite = read_json(args.config) if args.config else default_suite_doc()
    if args.seed is not None:
        suite = {**suite, "seed": args.seed}
    if args.n_cases is not None:
        suite = {k: v for k, v in suite.items() if k != "groups"}
        suite["n_cases"] = args.n_cases
    manifest = generate_case_set(suite, args.out)
    print(f"wrote {len(manifest['cases'])} cases to {args.out}")
    return 0


def cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    config = load_params(args.params)
    runs = solve_runs(inst, config, args.seed, args.repeats, with_trace=args.trace)
    out = Path(args.out) if args.out else None
    stem = Path(args.instance).stem
    for k, (doc, trace) in enumerate(runs):
        _emit(doc, out, f"{stem}_r{k}.json")
        if trace is not None:
            _emit(trace, out, f"{stem}_r{k}.trace.json")
    return 0


def cmd_oracle(args) -> int:
    inst = load_instance(args.instance)
    doc = exact_document(inst, args.node_budget)
    _emit(doc, Path(args.out) if args.out else None, f"{Path(args.instance).stem}_exact.json")
    if not doc["optimal"]:
        print("node budget exhausted; reported allocation is the incumbent", file=sys.stderr)
        return 3
    return 0


def cmd_greedy(args) -> int:
    inst = load_instance(args.instance)
    _emit(greedy_document(inst), Path(args.out) if args.out else None, f"{Path(args.instance).stem}_greedy.json")
    return 0


def cmd_evaluate(args) -> int:
    _, cases = load_manifest(args.manifest)
    config = load_params(args.params)
    report, raw = evaluate_suite(cases, config, repeats=args.repeats, seed=args.seed,
                                 pg_threshold=args.pg_threshold, workers=worker_count(args.workers),
                                 node_budget=args.node_budget)
    if args.out:
        write_evaluation(args.out, report, raw)
    print(report.console_summary())
    return 0 if report.passed else 1


def cmd_sensitivity(args) -> int:
    _, cases = load_manifest(args.manifest)
    config = load_params(args.params)
    workers = worker_count(args.workers)
    refs = reference_documents(cases, workers=workers)
    rows = sensitivity(cases, config, args.param, args.values, repeats=args.repeats, seed=args.seed,
                       workers=workers, references=refs)
    text = sensitivity_csv(rows)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"sensitivity_{args.param}.csv").write_text(text, encoding="utf-8")
        write_json(out / f"sensitivity_{args.param}.json", rows)
    sys.stdout.write(text)
    return 0


def _values(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eua", description="BCPNN attractor solver for edge user allocation")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a reproducible case set")
    g.add_argument("--config", help="suite description (JSON); the pinned suite when omitted")
    g.add_argument("--seed", type=int, help="override the suite seed")
    g.add_argument("--n-cases", type=int, help="split N cases half distributed, half centralized")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    def params_flags(sp):
        sp.add_argument("--params", help="solver parameter file (JSON); shipped defaults when omitted")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--repeats", type=int, default=1)
        sp.add_argument("--out", help="output directory; stdout when omitted")

    s = sub.add_parser("solve", help="run the attractor solver on one instance")
    s.add_argument("instance")
    params_flags(s)
    s.add_argument("--trace", action="store_true", help="also write the per-timestep score trace")
    s.set_defaults(func=cmd_solve)

    o = sub.add_parser("oracle", help="exact optimum by branch-and-bound")
    o.add_argument("instance")
    o.add_argument("--node-budget", type=int, default=DEFAULT_NODE_BUDGET)
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle)

    gr = sub.add_parser("greedy", help="greedy packing baseline")
    gr.add_argument("instance")
    gr.add_argument("--out")
    gr.set_defaults(func=cmd_greedy)

    e = sub.add_parser("evaluate", help="solver vs exact reference over a case set")
    e.add_argument("manifest")
    params_flags(e)
    e.set_defaults(repeats=5)
    e.add_argument("--pg-threshold", type=float, default=20.0)
    e.add_argument("--workers", type=int, help="worker processes (env EUA_WORKERS, default 1)")
    e.add_argument("--node-budget", type=int, default=DEFAULT_NODE_BUDGET)
    e.set_defaults(func=cmd_evaluate)

    se = sub.add_parser("sensitivity", help="PG over a grid of one heuristic weight")
    se.add_argument("manifest")
    se.add_argument("--param", choices=SENSITIVITY_PARAMS, required=True)
    se.add_argument("--values", type=_values, required=True, help="comma-separated values")
    params_flags(se)
    se.set_defaults(repeats=5)
    se.add_argument("--workers", type=int)
    se.set_defaults(func=cmd_sensitivity)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InstanceError, ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
