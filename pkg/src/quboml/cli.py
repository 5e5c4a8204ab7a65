"""Command-line entry point: ``quboml {features,instances,cluster,sweep,solve}``.

Every command writes ``result.json`` (or ``sweep.csv``) plus ``manifest.json``
into ``--out``. Result files hold no wall-clock values unless ``--timing`` is
given, so reruns with the same seed are byte-identical; timings always go to
the manifest.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import sys
import time
from pathlib import Path

import numpy as np

from quboml.annealing import AnnealConfig, simulated_anneal
from quboml.errors import QuboMLError
from quboml.io import (
    MARGIN_SUBSTITUTION,
    SWAP_POLISH,
    RunManifest,
    dumps,
    parse_embeddings,
    parse_letor,
    write_json,
)
from quboml.qubo import BinaryQuadraticProblem


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _fractions(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _k_range(text: str) -> range:
    try:
        lo, hi = (int(v) for v in text.split("-"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError("expected LO-HI") from exc
    return range(lo, hi + 1)


def _add_anneal(p: argparse.ArgumentParser) -> None:
    p.add_argument("--reads", type=int, default=100)
    p.add_argument("--sweeps", type=int, default=1000)
    p.add_argument("--beta-hot", type=float)
    p.add_argument("--beta-cold", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, help="worker cap (default: $QUBOML_THREADS or 1)")
    p.add_argument("--timing", action="store_true", help="include wall times in the result file")


def _add_selection(p: argparse.ArgumentParser) -> None:
    p.add_argument("--no-repair", action="store_true", help="report infeasible samples as-is")
    p.add_argument("--no-polish", action="store_true", help="skip the swap-descent polish")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="quboml", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    f = sub.add_parser("features", help="QUBO feature selection on a LETOR file")
    f.add_argument("--data", required=True)
    f.add_argument("--importance", choices=["mi", "pfi"], default="mi")
    f.add_argument("--redundancy", choices=["cmi", "cpfi"], default="cmi")
    f.add_argument("--k", type=int, required=True)
    f.add_argument("--lambda", dest="lam", type=float)
    f.add_argument("--bins", type=int, default=10)
    f.add_argument("--redundancy-weight", type=float, default=1.0)
    f.add_argument("--validate", action="store_true", help="report held-out nDCG@10 of a ridge ranker")
    f.add_argument("--out", required=True)
    _add_anneal(f)
    _add_selection(f)

    i = sub.add_parser("instances", help="QUBO instance selection on JSONL embeddings")
    i.add_argument("--data", required=True)
    i.add_argument("--method", choices=["bcos", "svc", "instance_deletion"], default="bcos")
    i.add_argument("--retain", type=float, default=0.75)
    i.add_argument("--batch-size", type=int, default=80)
    i.add_argument("--penalty", type=float)
    i.add_argument("--out", required=True)
    _add_anneal(i)
    _add_selection(i)

    c = sub.add_parser("cluster", help="k-medoids candidates refined by the medoid QUBO")
    c.add_argument("--docs", required=True)
    c.add_argument("--queries")
    group = c.add_mutually_exclusive_group(required=True)
    group.add_argument("--k", type=int)
    group.add_argument("--k-range", type=_k_range, help="LO-HI, chosen by silhouette/DBI")
    c.add_argument("--candidates", help="JSON list of doc ids to use as the candidate pool")
    c.add_argument("--depth", type=int, default=10)
    c.add_argument("--projection", action="store_true", help="also write projection.csv (2 PCs)")
    c.add_argument("--out", required=True)
    _add_anneal(c)

    s = sub.add_parser("sweep", help="F1 across retain fractions and selection methods")
    s.add_argument("--data", required=True)
    s.add_argument("--fractions", type=_fractions, default=[0.5, 0.75, 1.0])
    s.add_argument("--methods", default="bcos,svc,instance_deletion,random")
    s.add_argument("--folds", type=int, default=5)
    s.add_argument("--batch-size", type=int, default=80)
    s.add_argument("--out", required=True)
    _add_anneal(s)

    v = sub.add_parser("solve", help="anneal a problem JSON and emit a sample set")
    v.add_argument("--problem", required=True)
    v.add_argument("--out", help="output directory (default: print to stdout)")
    _add_anneal(v)
    return parser


def _cfg(args) -> AnnealConfig:
    try:
        return AnnealConfig(args.reads, args.sweeps, args.beta_hot, args.beta_cold, args.seed, args.threads)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _config_snapshot(args) -> dict:
    snap = {}
    for key, val in sorted(vars(args).items()):
        if isinstance(val, range):
            val = [val.start, val.stop - 1]
        snap[key] = val
    return snap


def _require_file(path: str) -> None:
    if not Path(path).is_file():
        raise FileNotFoundError(f"input file not found: {path}")


def _outdir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_features(args, manifest: RunManifest) -> None:
    from quboml.features import FeatureQuboSpec, select_features
    from quboml.learners import fit_ridge
    from quboml.metrics import mean_ndcg_by_query

    _require_file(args.data)
    manifest.add_input(args.data)
    ds = parse_letor(args.data)
    spec = FeatureQuboSpec(args.importance, args.redundancy, args.k, args.lam, args.bins, args.redundancy_weight)
    t0 = time.perf_counter()
    sel = select_features(ds, spec, _cfg(args), repair=not args.no_repair, polish=not args.no_polish)
    report = sel.to_dict()
    report["feature_id_base"] = 1
    if args.validate:
        qids = list(dict.fromkeys(ds.query_ids.tolist()))
        order = np.random.default_rng(args.seed).permutation(len(qids))
        held = {qids[i] for i in order[: max(1, len(qids) // 4)]}
        test = np.array([q in held for q in ds.query_ids.tolist()])
        train = ~test if (~test).any() else test
        cols = sel.selected
        m = fit_ridge(ds.rows[train][:, cols], ds.labels[train])
        report["ndcg10_validation"] = mean_ndcg_by_query(
            m.predict(ds.rows[test][:, cols]), ds.labels[test], ds.query_ids[test])
    manifest.timing_ms.update(sel.timings_ms)
    manifest.timing_ms["eval_ms"] = (time.perf_counter() - t0) * 1e3 - sum(sel.timings_ms.values())
    if args.timing:
        report["solver_time_ms"] = sel.timings_ms["solve_ms"]
    if not args.no_polish:
        manifest.deviations.append(SWAP_POLISH)
    if args.importance == "pfi" or args.redundancy == "cpfi":
        manifest.deviations.append("ridge ranker substituted for gradient-boosted models in PFI/CPFI")
    write_json(_outdir(args.out) / "result.json", report)


def cmd_instances(args, manifest: RunManifest) -> None:
    from quboml.instances import InstanceSpec, select_instances

    _require_file(args.data)
    manifest.add_input(args.data)
    corpus = parse_embeddings(args.data).corpus
    spec = InstanceSpec(args.method, args.retain, args.batch_size, args.penalty)
    sel = select_instances(corpus, spec, _cfg(args), repair=not args.no_repair, polish=not args.no_polish)
    report = sel.to_dict()
    if args.timing:
        report["solver_time_ms"] = sel.timings_ms["solve_ms"]
    manifest.timing_ms.update(sel.timings_ms)
    if args.method == "svc":
        manifest.deviations.append(MARGIN_SUBSTITUTION)
    if not args.no_polish:
        manifest.deviations.append(SWAP_POLISH)
    write_json(_outdir(args.out) / "result.json", report)


def cmd_cluster(args, manifest: RunManifest) -> None:
    from quboml.clustering import MedoidCandidates, auto_k, cluster_pipeline

    _require_file(args.docs)
    manifest.add_input(args.docs)
    docs = parse_embeddings(args.docs).corpus
    P = docs.vectors
    index = {d: i for i, d in enumerate(docs.ids)}
    qvecs = relevant = None
    if args.queries:
        _require_file(args.queries)
        manifest.add_input(args.queries)
        q = parse_embeddings(args.queries)
        qvecs = q.corpus.vectors
        rel_ids = q.relevant_ids or [[] for _ in range(len(q.corpus))]
        relevant = [{index[r] for r in rels if r in index} for rels in rel_ids]
    candidates = None
    if args.candidates:
        _require_file(args.candidates)
        manifest.add_input(args.candidates)
        try:
            ids = json.loads(Path(args.candidates).read_text())
            candidates = MedoidCandidates(tuple(sorted(index[str(d)] for d in ids)), len(ids))
        except (KeyError, json.JSONDecodeError, TypeError) as exc:
            raise QuboMLError(f"bad candidate list: {exc}") from exc
    k = args.k
    if k is None:
        k = auto_k(P, args.k_range, args.seed)
    res = cluster_pipeline(P, k, _cfg(args), candidates, qvecs, relevant, args.depth)
    report = res.to_dict(docs.ids)
    if args.timing:
        report["solver_time_ms"] = res.timings_ms["solve_ms"]
    manifest.timing_ms.update(res.timings_ms)
    manifest.deviations.append(SWAP_POLISH)
    out = _outdir(args.out)
    write_json(out / "result.json", report)
    if args.projection:
        centered = P - P.mean(axis=0)
        _, _, vt = np.linalg.svd(centered, full_matrices=False)
        proj = centered @ vt[:2].T
        if proj.shape[1] < 2:
            proj = np.hstack([proj, np.zeros((len(P), 2 - proj.shape[1]))])
        with open(out / "projection.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "pc1", "pc2", "medoid_id"])
            for i, d in enumerate(docs.ids):
                w.writerow([d, f"{proj[i, 0]:.10g}", f"{proj[i, 1]:.10g}", docs.ids[int(res.assignments[i])]])


def cmd_sweep(args, manifest: RunManifest) -> None:
    from quboml.instances import reduction_sweep

    _require_file(args.data)
    manifest.add_input(args.data)
    corpus = parse_embeddings(args.data).corpus
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    bad = set(methods) - {"bcos", "svc", "instance_deletion", "random"}
    if bad:
        raise UsageError(f"unknown methods: {sorted(bad)}")
    t0 = time.perf_counter()
    rows = reduction_sweep(corpus, args.fractions, methods, args.folds, args.batch_size, _cfg(args))
    manifest.timing_ms["eval_ms"] = (time.perf_counter() - t0) * 1e3
    manifest.deviations += [MARGIN_SUBSTITUTION, SWAP_POLISH]
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["fraction", "method", "f1_mean", "f1_std"])
    for r in rows:
        w.writerow([f"{r['fraction']:g}", r["method"], f"{r['f1_mean']:.6f}", f"{r['f1_std']:.6f}"])
    (_outdir(args.out) / "sweep.csv").write_text(buf.getvalue())


def cmd_solve(args, manifest: RunManifest):
    _require_file(args.problem)
    manifest.add_input(args.problem)
    try:
        problem = BinaryQuadraticProblem.from_dict(json.loads(Path(args.problem).read_text()))
    except json.JSONDecodeError as exc:
        raise QuboMLError(f"{args.problem}: invalid JSON: {exc}") from exc
    ss = simulated_anneal(problem, _cfg(args))
    manifest.timing_ms["solve_ms"] = ss.solve_time_ms
    text = dumps(ss.to_dict(include_timing=args.timing))
    if args.out:
        (_outdir(args.out) / "sampleset.json").write_text(text)
    else:
        sys.stdout.write(text)


COMMANDS = {
    "features": cmd_features,
    "instances": cmd_instances,
    "cluster": cmd_cluster,
    "sweep": cmd_sweep,
    "solve": cmd_solve,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("missing subcommand; choose from " + ", ".join(COMMANDS))
        _cfg(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    manifest = RunManifest(args.command, _config_snapshot(args), args.seed)
    try:
        COMMANDS[args.command](args, manifest)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (OSError, QuboMLError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if getattr(args, "out", None):
        write_json(Path(args.out) / "manifest.json", manifest.to_dict())
    else:
        # stdout carries the result; the manifest goes to stderr
        sys.stderr.write(dumps(manifest.to_dict()))
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
