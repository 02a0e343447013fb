"""Batch evaluation: case sets, result documents, suite reports and sensitivity grids.

Seeds are derived with :class:`numpy.random.SeedSequence` spawn keys, so every
run can be re-derived in isolation:

    case seed  = derive_seed(suite_seed, case_index)          (generation)
    run seed   = derive_seed(root_seed, case_index, repeat)   (evaluation)
    run seed   = derive_seed(root_seed, repeat)               (single-instance solve)
    b0 stream  = SeedSequence(run_seed, spawn_key=(b0_index,))
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable

import numpy as np

from .generator import GeneratorConfig, generate_instance
from .instance import Allocation, EvalResult, Instance, dc_ratio, load_instance, render_instance
from .oracle import BudgetExhausted, DEFAULT_NODE_BUDGET, exact_solve, greedy_solve, performance_gap
from .solver import SolverConfig, SolveTrace, chosen_b0, solve

RESULT_FORMAT = "eua-result/1"
TRACE_FORMAT = "eua-trace/1"
MANIFEST_FORMAT = "eua-caseset/1"
REPORT_FORMAT = "eua-report/1"


def derive_seed(root: int, *path: int) -> int:
    return int(np.random.SeedSequence(root, spawn_key=tuple(path)).generate_state(1)[0])


def dump_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_json(doc), encoding="utf-8")


def read_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def worker_count(requested: int | None = None) -> int:
    if requested is None:
        env = os.environ.get("EUA_WORKERS")
        requested = int(env) if env else 1
    return max(1, requested)


# ---------------------------------------------------------------------------
# parameters


def default_params_doc() -> dict:
    text = resources.files("bcpnn_eua").joinpath("data/default_params.json").read_text()
    return json.loads(text)


def default_suite_doc() -> dict:
    text = resources.files("bcpnn_eua").joinpath("data/suite.json").read_text()
    return json.loads(text)


def load_params(path=None) -> SolverConfig:
    """Solver configuration from a parameter file; shipped defaults when ``path`` is None."""
    if path is None:
        return SolverConfig.from_dict(default_params_doc())
    return SolverConfig.from_dict(read_json(path))


# ---------------------------------------------------------------------------
# case sets

GROUP_DEFAULTS = {
    "distributed": {"n_u": [8, 12], "n_s": [3, 5], "r": [0.5, 1.0]},
    "centralized": {"n_u": [10, 15], "n_s": [3, 5], "r": [0.8, 1.5]},
}


def _groups(suite: dict) -> list[dict]:
    if "groups" in suite:
        return suite["groups"]
    n = int(suite.get("n_cases", 30))
    n_dist = (n + 1) // 2
    groups = [{"kind": "distributed", "n_cases": n_dist}, {"kind": "centralized", "n_cases": n - n_dist}]
    return [g for g in groups if g["n_cases"] > 0]


def case_configs(suite: dict) -> list[tuple[GeneratorConfig, int]]:
    """Expand a suite description into per-case generator configs and seeds."""
    seed = int(suite.get("seed", 0))
    out = []
    idx = 0
    for group in _groups(suite):
        kind = group["kind"]
        grp = {**GROUP_DEFAULTS[kind], **group}
        extra = dict(grp.get("generator", {}))
        for _ in range(int(grp["n_cases"])):
            case_seed = derive_seed(seed, idx)
            rng = np.random.default_rng(case_seed)
            n_u = int(rng.integers(grp["n_u"][0], grp["n_u"][1] + 1))
            n_s = int(rng.integers(grp["n_s"][0], grp["n_s"][1] + 1))
            r = tuple(float(round(x, 3)) for x in rng.uniform(grp["r"][0], grp["r"][1], size=2))
            cfg = GeneratorConfig(n_u=n_u, n_s=n_s, kind=kind, r_target=r,
                                  name=f"case{idx + 1:02d}", **extra)
            out.append((cfg, case_seed))
            idx += 1
    return out


def generate_case_set(suite: dict, out_dir) -> dict:
    """Write one instance file per case plus ``manifest.json``; returns the manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cases = []
    for cfg, case_seed in case_configs(suite):
        inst = generate_instance(cfg, case_seed)
        fname = f"{cfg.name}.json"
        (out_dir / fname).write_text(render_instance(inst), encoding="utf-8")
        cases.append({"id": cfg.name, "file": fname, "kind": cfg.kind, "seed": case_seed,
                      "generator": cfg.to_dict()})
    manifest = {"format": MANIFEST_FORMAT, "suite": suite, "cases": cases}
    write_json(out_dir / "manifest.json", manifest)
    return manifest


def load_manifest(path) -> tuple[dict, list[tuple[str, str, Instance]]]:
    path = Path(path)
    manifest = read_json(path)
    if manifest.get("format") != MANIFEST_FORMAT:
        raise ValueError(f"{path} is not a case-set manifest")
    cases = []
    for entry in manifest["cases"]:
        inst = load_instance(path.parent / entry["file"])
        cases.append((entry["id"], entry["kind"], inst))
    return manifest, cases


# ---------------------------------------------------------------------------
# result documents


def _assignment_ids(instance: Instance, allocation: Allocation) -> list:
    return [None if a is None else instance.servers[a].id for a in allocation.assignment]


def result_document(instance: Instance, allocation: Allocation, ev: EvalResult, *, solver: str,
                    seed: int | None = None, config: SolverConfig | None = None,
                    trace: SolveTrace | None = None, optimal: bool | None = None,
                    nodes: int | None = None) -> dict:
    doc = {
        "format": RESULT_FORMAT,
        "solver": solver,
        "instance": instance.name,
        "n_u": instance.n_u,
        "n_s": instance.n_s,
        "seed": seed,
        "params": config.to_dict() if config is not None else None,
        "assignment": _assignment_ids(instance, allocation),
        "allocated_users": ev.allocated_users,
        "servers_used": ev.servers_used,
        "feasible": ev.feasible,
        "score": ev.score,
        "optimal": optimal,
    }
    if nodes is not None:
        doc["nodes_explored"] = nodes
    if trace is not None:
        doc["chosen_b0"] = chosen_b0(trace)
        doc["b0_runs"] = [
            {"b0": r.b0, "termination": r.termination, "steps": r.steps, "best_score": r.best_score}
            for r in trace.runs
        ]
        doc["total_timesteps"] = trace.total_timesteps
    return doc


def trace_document(instance: Instance, seed: int, trace: SolveTrace) -> dict:
    return {
        "format": TRACE_FORMAT,
        "instance": instance.name,
        "seed": seed,
        "runs": [
            {
                "b0": r.b0,
                "termination": r.termination,
                "timestep": [rec.timestep for rec in r.records],
                "raw_score": [rec.raw_score for rec in r.records],
                "repaired_score": [rec.repaired_score for rec in r.records],
            }
            for r in trace.runs
        ],
    }


def solve_document(instance: Instance, config: SolverConfig, seed: int, with_trace: bool = False):
    cfg = replace(config, seed=seed)
    allocation, ev, trace = solve(instance, cfg)
    doc = result_document(instance, allocation, ev, solver="bcpnn", seed=seed, config=cfg,
                          trace=trace, optimal=False)
    return doc, (trace_document(instance, seed, trace) if with_trace else None)


def exact_document(instance: Instance, node_budget: int = DEFAULT_NODE_BUDGET) -> dict:
    from .instance import evaluate_allocation

    try:
        res = exact_solve(instance, node_budget)
    except BudgetExhausted as exc:
        res = exc.incumbent
    ev = evaluate_allocation(instance, res.allocation)
    return result_document(instance, res.allocation, ev, solver="exact", optimal=res.optimal,
                           nodes=res.nodes_explored)


def greedy_document(instance: Instance) -> dict:
    from .instance import evaluate_allocation

    res = greedy_solve(instance)
    ev = evaluate_allocation(instance, res.allocation)
    return result_document(instance, res.allocation, ev, solver="greedy", optimal=False,
                           nodes=res.nodes_explored)


def solve_runs(instance: Instance, config: SolverConfig, seed: int, repeats: int,
               with_trace: bool = False) -> list[tuple[dict, dict | None]]:
    return [solve_document(instance, config, derive_seed(seed, k), with_trace) for k in range(repeats)]


# ---------------------------------------------------------------------------
# suite evaluation


@dataclass
class CaseReport:
    case_id: str
    kind: str
    n_u: int
    n_s: int
    dc_ratio: tuple[float, float]
    scores: list[float]
    reference_score: float | None
    greedy_score: float
    pgs: list[float] | None
    timesteps: list[int]
    stable_b0_runs: int
    total_b0_runs: int
    run_files: list[str] = field(default_factory=list)

    @property
    def mean_score(self) -> float:
        return float(np.mean(self.scores))

    @property
    def std_score(self) -> float:
        return float(np.std(self.scores))

    @property
    def pg_mean(self) -> float | None:
        return None if self.pgs is None else float(np.mean(self.pgs))

    @property
    def pg_std(self) -> float | None:
        return None if self.pgs is None else float(np.std(self.pgs))

    def to_dict(self) -> dict:
        return {
            "case": self.case_id, "kind": self.kind, "n_u": self.n_u, "n_s": self.n_s,
            "dc_ratio": list(self.dc_ratio), "scores": self.scores,
            "mean_score": self.mean_score, "std_score": self.std_score,
            "reference_score": self.reference_score, "greedy_score": self.greedy_score,
            "pgs": self.pgs, "pg_mean": self.pg_mean, "pg_std": self.pg_std,
            "timesteps": self.timesteps, "stable_b0_runs": self.stable_b0_runs,
            "total_b0_runs": self.total_b0_runs, "run_files": self.run_files,
        }


@dataclass
class SuiteReport:
    cases: list[CaseReport]
    pg_threshold: float
    repeats: int
    seed: int
    params: dict
    skipped: list[str] = field(default_factory=list)

    @property
    def scored(self) -> list[CaseReport]:
        return [c for c in self.cases if c.pgs is not None]

    @property
    def undefined_pg(self) -> list[str]:
        return [c.case_id for c in self.cases if c.pgs is None]

    def mean_pg(self, kind: str | None = None) -> float | None:
        rows = [c.pg_mean for c in self.scored if kind is None or c.kind == kind]
        return float(np.mean(rows)) if rows else None

    def sem_pg(self, kind: str | None = None) -> float | None:
        rows = [c.pg_mean for c in self.scored if kind is None or c.kind == kind]
        if len(rows) < 2:
            return None
        return float(np.std(rows, ddof=1) / math.sqrt(len(rows)))

    @property
    def pearson_r(self) -> float | None:
        rows = [(c.mean_score, c.reference_score) for c in self.cases if c.reference_score is not None]
        if len(rows) < 2:
            return None
        x, y = np.array(rows).T
        if np.std(x) == 0 or np.std(y) == 0:
            return None
        return float(np.corrcoef(x, y)[0, 1])

    @property
    def stable_fraction(self) -> float:
        total = sum(c.total_b0_runs for c in self.cases)
        return sum(c.stable_b0_runs for c in self.cases) / total if total else 0.0

    @property
    def passed(self) -> bool:
        m = self.mean_pg()
        return m is not None and m <= self.pg_threshold and not self.skipped

    def to_dict(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "seed": self.seed,
            "repeats": self.repeats,
            "pg_threshold": self.pg_threshold,
            "params": self.params,
            "cases": [c.to_dict() for c in self.cases],
            "mean_pg": self.mean_pg(),
            "mean_pg_by_kind": {k: self.mean_pg(k) for k in ("distributed", "centralized")},
            "undefined_pg": self.undefined_pg,
            "skipped": self.skipped,
            "partial": bool(self.skipped),
            "pearson_r": self.pearson_r,
            "stable_fraction": self.stable_fraction,
            "mean_model_score": float(np.mean([c.mean_score for c in self.cases])) if self.cases else None,
            "mean_greedy_score": float(np.mean([c.greedy_score for c in self.cases])) if self.cases else None,
            "passed": self.passed,
        }

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["case", "kind", "n_u", "n_s", "r_core", "r_ram", "mean_score", "std_score",
                    "reference_score", "greedy_score", "pg_mean", "pg_std", "mean_timesteps"])
        for c in self.cases:
            w.writerow([c.case_id, c.kind, c.n_u, c.n_s, c.dc_ratio[0], c.dc_ratio[1], c.mean_score,
                        c.std_score, c.reference_score, c.greedy_score,
                        "" if c.pg_mean is None else c.pg_mean, "" if c.pg_std is None else c.pg_std,
                        float(np.mean(c.timesteps))])
        return buf.getvalue()

    def console_summary(self) -> str:
        def fmt(v, spec=".2f"):
            return "n/a" if v is None else format(v, spec)
        lines = [
            f"cases: {len(self.cases)} scored, {len(self.undefined_pg)} undefined PG, {len(self.skipped)} skipped",
            f"mean PG: {fmt(self.mean_pg())}%  (distributed {fmt(self.mean_pg('distributed'))}%, "
            f"centralized {fmt(self.mean_pg('centralized'))}%)",
            f"Pearson r (model vs reference): {fmt(self.pearson_r, '.4f')}",
            f"b0 runs terminated by stability: {self.stable_fraction:.1%}",
            f"threshold {self.pg_threshold:g}%: {'PASS' if self.passed else 'FAIL'}",
        ]
        return "\n".join(lines)


def _solve_task(args):
    inst, config, seed = args
    return solve_document(inst, config, seed)[0]


def _exact_task(args):
    inst, node_budget = args
    return exact_document(inst, node_budget)


def _map(fn, tasks: list, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=1))


def reference_documents(cases: list[tuple[str, str, Instance]], node_budget: int = DEFAULT_NODE_BUDGET,
                        workers: int = 1) -> dict[str, dict]:
    docs = _map(_exact_task, [(inst, node_budget) for _, _, inst in cases], workers)
    return {cid: doc for (cid, _, _), doc in zip(cases, docs)}


def build_report(cases: list[tuple[str, str, Instance]], runs: dict[str, list[dict]],
                 references: dict[str, dict], greedy: dict[str, dict], *, pg_threshold: float,
                 repeats: int, seed: int, params: dict,
                 run_files: dict[str, list[str]] | None = None) -> SuiteReport:
    """Assemble a suite report purely from result documents."""
    rows, skipped = [], []
    for cid, kind, inst in cases:
        ref_doc = references[cid]
        if not ref_doc["optimal"]:
            skipped.append(cid)
            continue
        ref = ref_doc["score"]
        scores = [d["score"] for d in runs[cid]]
        pgs = [performance_gap(s, ref) for s in scores]
        r = dc_ratio(inst)
        rows.append(CaseReport(
            case_id=cid, kind=kind, n_u=inst.n_u, n_s=inst.n_s, dc_ratio=(r.core, r.ram),
            scores=scores, reference_score=ref, greedy_score=greedy[cid]["score"],
            pgs=None if any(p is None for p in pgs) else pgs,
            timesteps=[d["total_timesteps"] for d in runs[cid]],
            stable_b0_runs=sum(b["termination"] == "stable" for d in runs[cid] for b in d["b0_runs"]),
            total_b0_runs=sum(len(d["b0_runs"]) for d in runs[cid]),
            run_files=(run_files or {}).get(cid, []),
        ))
    return SuiteReport(rows, pg_threshold, repeats, seed, params, skipped)


def evaluate_suite(cases: list[tuple[str, str, Instance]], config: SolverConfig, *, repeats: int = 5,
                   seed: int = 0, pg_threshold: float = 20.0, workers: int = 1,
                   references: dict[str, dict] | None = None,
                   node_budget: int = DEFAULT_NODE_BUDGET) -> tuple[SuiteReport, dict]:
    """Run the exact reference and ``repeats`` solver runs on every case.

    Returns the report and the raw documents (``runs``, ``references``,
    ``greedy``) it was built from.
    """
    if references is None:
        references = reference_documents(cases, node_budget, workers)
    greedy = {cid: greedy_document(inst) for cid, _, inst in cases}
    tasks, keys = [], []
    for idx, (cid, _, inst) in enumerate(cases):
        for k in range(repeats):
            tasks.append((inst, config, derive_seed(seed, idx, k)))
            keys.append(cid)
    docs = _map(_solve_task, tasks, workers)
    runs: dict[str, list[dict]] = {cid: [] for cid, _, _ in cases}
    for cid, doc in zip(keys, docs):
        runs[cid].append(doc)
    run_files = {cid: [f"runs/{cid}_r{k}.json" for k in range(repeats)] for cid, _, _ in cases}
    report = build_report(cases, runs, references, greedy, pg_threshold=pg_threshold, repeats=repeats,
                          seed=seed, params=config.to_dict(), run_files=run_files)
    return report, {"runs": runs, "references": references, "greedy": greedy}


def write_evaluation(out_dir, report: SuiteReport, raw: dict) -> None:
    out_dir = Path(out_dir)
    for cid, docs in raw["runs"].items():
        for k, doc in enumerate(docs):
            write_json(out_dir / "runs" / f"{cid}_r{k}.json", doc)
    for cid, doc in raw["references"].items():
        write_json(out_dir / "reference" / f"{cid}.json", doc)
    for cid, doc in raw["greedy"].items():
        write_json(out_dir / "greedy" / f"{cid}.json", doc)
    write_json(out_dir / "report.json", report.to_dict())
    (out_dir / "summary.csv").write_text(report.summary_csv(), encoding="utf-8")


def rebuild_report(out_dir, cases: list[tuple[str, str, Instance]]) -> SuiteReport:
    """Regenerate a report from the documents written by :func:`write_evaluation`."""
    out_dir = Path(out_dir)
    old = read_json(out_dir / "report.json")
    runs, run_files = {}, {}
    for cid, _, _ in cases:
        files = sorted((out_dir / "runs").glob(f"{cid}_r*.json"), key=lambda p: int(p.stem.rsplit("_r", 1)[1]))
        runs[cid] = [read_json(p) for p in files]
        run_files[cid] = [f"runs/{p.name}" for p in files]
    references = {cid: read_json(out_dir / "reference" / f"{cid}.json") for cid, _, _ in cases}
    greedy = {cid: read_json(out_dir / "greedy" / f"{cid}.json") for cid, _, _ in cases}
    return build_report(cases, runs, references, greedy, pg_threshold=old["pg_threshold"],
                        repeats=old["repeats"], seed=old["seed"], params=old["params"], run_files=run_files)


# ---------------------------------------------------------------------------
# sensitivity

SENSITIVITY_PARAMS = ("k1", "k2", "k3")


def sensitivity(cases: list[tuple[str, str, Instance]], config: SolverConfig, param: str,
                values: Iterable[float], *, repeats: int = 5, seed: int = 0, workers: int = 1,
                pg_threshold: float = 20.0, references: dict[str, dict] | None = None) -> list[dict]:
    """PG per value of one heuristic weight, everything else held fixed."""
    if param not in SENSITIVITY_PARAMS:
        raise ValueError(f"sensitivity parameter must be one of {SENSITIVITY_PARAMS}, got {param!r}")
    if references is None:
        references = reference_documents(cases, workers=workers)
    rows = []
    for value in values:
        cfg = replace(config, heuristics=replace(config.heuristics, **{param: float(value)}))
        report, _ = evaluate_suite(cases, cfg, repeats=repeats, seed=seed, pg_threshold=pg_threshold,
                                   workers=workers, references=references)
        rows.append({
            "param": param,
            "value": float(value),
            "pg_mean": report.mean_pg(),
            "pg_distributed": report.mean_pg("distributed"),
            "pg_centralized": report.mean_pg("centralized"),
            "sem_distributed": report.sem_pg("distributed"),
            "sem_centralized": report.sem_pg("centralized"),
        })
    return rows


def sensitivity_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    cols = ["param", "value", "pg_mean", "pg_distributed", "pg_centralized", "sem_distributed", "sem_centralized"]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow(["" if r[c] is None else r[c] for c in cols])
    return buf.getvalue()
