"""Command-line entry point: ``congruent <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import arith, data, descent, frobenius, lfunction, stats
from .errors import CongruentError

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2


@dataclass(frozen=True)
class RunConfig:
    command: str
    max: int
    classes: Optional[List[int]]
    seed: Optional[int]
    workers: int
    inp: Optional[str]
    out: Optional[str]
    format: str
    tol: float
    depth_bump: int
    timestamp: bool

    @property
    def class_key(self) -> stats.ClassKey:
        return stats.ClassKey.of(*self.classes) if self.classes else stats.ALL


def _classes(text: str) -> List[int]:
    try:
        out = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad class list {text!r}")
    if any(h not in (1, 2, 3, 5, 6, 7) for h in out):
        raise argparse.ArgumentTypeError("classes must be square-free residues mod 8")
    return out


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--max", type=int, default=10_000, help="bound X on D")
    common.add_argument("--class", dest="classes", type=_classes, default=None, help="residues mod 8, e.g. 1,3")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    common.add_argument("--in", dest="inp", default=None)
    common.add_argument("--out", default=None)
    common.add_argument("--format", choices=("csv", "json"), default="json")
    common.add_argument("--tol", type=float, default=1e-10)
    common.add_argument("--depth-bump", type=int, default=0, help="extra p-adic lifting depth in the descent")
    common.add_argument("--no-timestamp", action="store_true")

    p = argparse.ArgumentParser(prog="congruent", description="Arithmetic statistics of y^2 = x^3 - D^2 x.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("sieve", parents=[common], help="square-free D and residue-class sizes")
    sp = sub.add_parser("selmer", parents=[common], help="s(D) and congruence status per D -> curves.csv")
    sp.add_argument("--height", type=int, default=200, help="point-search height for certification")
    sp.add_argument("--chunk", type=int, default=2000)
    sp.add_argument("--no-resume", action="store_true")
    tp = sub.add_parser("traces", parents=[common], help="Frobenius traces and their averages")
    tp.add_argument("--primes", type=int, default=1000)
    tp.add_argument("--averages", action="store_true", help="emit per-class averages instead of raw traces")
    tp.add_argument("--normalize", action="store_true")
    tp.add_argument("--family", choices=sorted(frobenius.FAMILIES), default="quadratic")
    tp.add_argument("--index", type=int, default=None, help="decay curve of f_X at this prime index")
    stp = sub.add_parser("stats", parents=[common], help="distribution tables from curves.csv")
    stp.add_argument(
        "--table", choices=("hb-pmf", "trailing", "average", "moments", "pr", "delaunay", "error"), default="hb-pmf"
    )
    stp.add_argument("--rank", choices=sorted(stats.RANK_FIELDS), default="s2")
    gp = sub.add_parser("goldfeld", parents=[common], help="rank 0/1 proportions and chi-square")
    gp.add_argument("--counts", type=int, nargs=2, default=None, metavar=("N0", "N1"))
    gp.add_argument("--rank", choices=("mw", "analytic"), default="mw")
    gp.add_argument("--resample", type=float, default=None, help="Bernoulli inclusion probability")
    gp.add_argument("--trials", type=int, default=2500)
    sub.add_parser("bsd", parents=[common], help="period, L(1), Tamagawa product, normalized BSD -> bsd.csv")
    mp = sub.add_parser("ml", parents=[common], help="train and evaluate a classifier")
    mp.add_argument("--features", choices=("residues", "bsd", "selmer", "traces"), default="residues")
    mp.add_argument("--model", choices=("logistic", "tree"), default="logistic")
    mp.add_argument("--primes", type=int, default=1000)
    sub.add_parser("pca", parents=[common], help="project BSD parameters onto two principal components")
    ip = sub.add_parser("ingest", parents=[common], help="ingest an external CSV and validate against curves")
    ip.add_argument("--schema", default=None, help="plain-text schema file")
    ip.add_argument("--curves", default=None, help="curves.csv to merge with")
    ip.add_argument("--threshold", type=float, default=0.001)
    sub.add_parser("verify", parents=[common], help="cross-validation suites; nonzero exit on any violation")
    return p


def _config(ns: argparse.Namespace) -> RunConfig:
    return RunConfig(
        command=ns.command,
        max=ns.max,
        classes=ns.classes,
        seed=ns.seed,
        workers=max(1, ns.workers),
        inp=ns.inp,
        out=ns.out,
        format=ns.format,
        tol=ns.tol,
        depth_bump=ns.depth_bump,
        timestamp=not ns.no_timestamp,
    )


def _stamp(cfg: RunConfig) -> List[str]:
    if not cfg.timestamp:
        return []
    return [f"generated {datetime.now(timezone.utc).strftime('%Y-%m-%dT%H:%M:%SZ')}"]


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return None if np.isnan(obj) else float(obj)
    if isinstance(obj, float) and obj != obj:
        return None
    return obj


def _emit(cfg: RunConfig, payload: Dict[str, Any], rows: Optional[Sequence[Sequence[Any]]] = None, header=()) -> None:
    """Write JSON (or CSV rows when --format csv and rows are given) to --out or stdout."""
    if cfg.format == "csv" and rows is not None:
        lines = [f"# {s}" for s in _stamp(cfg)]
        lines.append(",".join(header))
        lines += [",".join(data.format_value(v) for v in r) for r in rows]
        text = "\r\n".join(lines) + "\r\n"
    else:
        body = dict(payload)
        if cfg.timestamp:
            body = {"generated": _stamp(cfg)[0].split(" ", 1)[1], **body}
        text = json.dumps(_jsonable(body), indent=2, sort_keys=False) + "\n"
    if cfg.out:
        with open(cfg.out, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _need_input(cfg: RunConfig) -> str:
    if not cfg.inp:
        raise SystemExit(_usage(f"{cfg.command} needs --in"))
    return cfg.inp


def _usage(message: str) -> int:
    sys.stderr.write(f"congruent: error: {message}\n")
    return EXIT_USAGE


# ---------------------------------------------------------------------------
# subcommands


def cmd_sieve(cfg: RunConfig, ns) -> int:
    table = arith.default_table(cfg.max)
    Ds = arith.enumerate_squarefree(cfg.max, table)
    sizes = {h: int(np.sum(Ds % 8 == h)) for h in (1, 2, 3, 5, 6, 7)}
    if cfg.classes:
        Ds = Ds[np.isin(Ds % 8, cfg.classes)]
    _emit(
        cfg,
        {"X": cfg.max, "count": int(len(Ds)), "class_sizes": sizes},
        rows=[(int(D), int(D % 8)) for D in Ds],
        header=("D", "residue8"),
    )
    return EXIT_OK


def cmd_selmer(cfg: RunConfig, ns) -> int:
    out = cfg.out or "curves.csv"
    opts = data.GenerateOptions(search_height=ns.height, chunk_size=ns.chunk, workers=cfg.workers)
    if cfg.depth_bump:
        # depth changes only affect the oracle; run it for every D so the bump is exercised
        return _selmer_oracle_run(cfg, out)
    n = data.generate_to_csv(cfg.max, out, opts, resume=not ns.no_resume, preamble=_stamp(cfg))
    sys.stderr.write(f"wrote {n} records to {out}\n")
    return EXIT_OK


def _selmer_oracle_run(cfg: RunConfig, out: str) -> int:
    recs = []
    for D in arith.enumerate_squarefree(cfg.max).tolist():
        g = descent.selmer_rank_oracle(D, depth_bump=cfg.depth_bump)
        recs.append(data.CurveRecord(D, D % 8, D % 16, D % 32, arith.factor(D).omega, g.s, descent.ORACLE, None))
    data.save_records(recs, out, data.CURVE_COLUMNS, _stamp(cfg))
    return EXIT_OK


def cmd_traces(cfg: RunConfig, ns) -> int:
    table = arith.default_table(max(cfg.max, 10_000))
    if ns.index is not None:
        family = frobenius.FAMILIES[ns.family]
        Xs = sorted({int(x) for x in np.unique(np.geomspace(10, cfg.max, 12).astype(int))})
        curve = frobenius.decay_curve(ns.index, Xs, family, table)
        _emit(cfg, {"index": ns.index, "family": ns.family, "decay": curve}, rows=curve, header=("X", "value"))
        return EXIT_OK
    if ns.averages:
        primes = [int(p) for p in table.first_primes(ns.primes)]
        avg = frobenius.class_averages(cfg.max, primes, ns.normalize, table)
        rows = sorted((p, cls, v) for (cls, p), v in avg.items())
        _emit(cfg, {"averages": [dict(prime=p, cls=c, value=v) for p, c, v in rows]}, rows, ("prime", "class", "value"))
        return EXIT_OK
    out = cfg.out or "traces.csv"
    Ds = arith.enumerate_squarefree(cfg.max, table)
    if cfg.classes:
        Ds = Ds[np.isin(Ds % 8, cfg.classes)]
    data.write_traces(out, Ds.tolist(), ns.primes, table, _stamp(cfg))
    return EXIT_OK


def _load(cfg: RunConfig, required=data.CURVE_COLUMNS) -> List[data.CurveRecord]:
    return data.load_records(_need_input(cfg), required)


def cmd_stats(cfg: RunConfig, ns) -> int:
    key = cfg.class_key
    t = ns.table
    if t in ("pr", "delaunay"):
        if t == "pr":
            rows = [(d, stats.pr_pmf(d)) for d in range(0, 11)]
            _emit(cfg, {"table": t, "pmf": dict(rows)}, rows, ("d", "probability"))
        else:
            rows = [(p, r, n, stats.delaunay_pmf(p, r, n)) for p in (2, 3) for r in (0, 1) for n in range(0, 6)]
            _emit(cfg, {"table": t, "rows": rows}, rows, ("p", "rank", "n", "probability"))
        return EXIT_OK
    recs = _load(cfg)
    if t == "error":
        h = cfg.classes[0] if cfg.classes else 1
        grid = [x for x in np.geomspace(100, cfg.max, 10).tolist() if x > np.e]
        series = stats.error_normalization(recs, 1, h, grid)
        _emit(cfg, {"table": t, "k": 1, "h": h, "series": series}, series, ("X", "normalized_error"))
        return EXIT_OK
    rep = stats.empirical_distribution(recs, ns.rank, key)
    payload: Dict[str, Any] = {"table": t, "class": rep.key, "size": rep.size, "counts": rep.counts}
    theo = rep.theoretical
    rows: List[Sequence[Any]] = []
    if t == "hb-pmf":
        rs = sorted(set(rep.pmf) | set(theo.get("pmf", {})))
        rows = [(r, rep.pmf.get(r, 0.0), theo.get("pmf", {}).get(r)) for r in rs]
        payload["pmf"] = {"empirical": rep.pmf, "theoretical": theo.get("pmf", {})}
        payload["theoretical_mass"] = sum(theo.get("pmf", {}).values())
    elif t == "trailing":
        rs = sorted(set(rep.trailing) | set(theo.get("trailing", {})))
        rows = [(r, rep.trailing.get(r, 0.0), theo.get("trailing", {}).get(r)) for r in rs]
        payload["trailing"] = {"empirical": rep.trailing, "theoretical": theo.get("trailing", {})}
    elif t == "average":
        rows = [(rep.key, rep.average, theo.get("average"))]
        payload["average"] = {"empirical": rep.average, "theoretical": theo.get("average")}
        payload["discrepancies"] = stats.average_rank_discrepancies()
    elif t == "moments":
        rows = [(k, v, theo.get("moments", {}).get(k)) for k, v in rep.moments.items()]
        payload["moments"] = {"empirical": rep.moments, "theoretical": theo.get("moments", {})}
        payload["discrepancies"] = stats.moment_constant_discrepancies()
    _emit(cfg, payload, rows, ("key", "empirical", "theoretical"))
    return EXIT_OK


def cmd_goldfeld(cfg: RunConfig, ns) -> int:
    if ns.counts:
        res = stats.chi_square(ns.counts)
        _emit(cfg, {"n0": ns.counts[0], "n1": ns.counts[1], "chi_square": asdict(res)})
        return EXIT_OK
    recs = _load(cfg, ("D",))
    rep = stats.goldfeld_report(recs, ns.rank)
    payload = rep.to_dict()
    if ns.resample is not None:
        if cfg.seed is None:
            return _usage("--resample needs --seed")
        rs = stats.bernoulli_resample(recs, ns.resample, ns.trials, cfg.seed, ns.rank)
        payload["resample"] = {"mean": rs.mean, "min": rs.min, "max": rs.max, "empty_trials": rs.empty_trials}
    _emit(cfg, payload, rep.running, ("D", "prop_rank0", "prop_rank1"))
    return EXIT_OK


def cmd_bsd(cfg: RunConfig, ns) -> int:
    out = cfg.out or "bsd.csv"
    table = arith.default_table(cfg.max)
    recs = []
    for D in arith.enumerate_squarefree(cfg.max, table).tolist():
        if cfg.classes and D % 8 not in cfg.classes:
            continue
        b = lfunction.normalized_bsd(D, cfg.tol, table=table)
        recs.append(
            data.CurveRecord(
                D, D % 8, D % 16, D % 32, arith.factor(D, table).omega, None, None, None,
                omega_period=b.omega, l1=b.l1, tamagawa=b.tamagawa, normalized_bsd=b.normalized, l_bsd_odd=b.l_bsd_odd,
            )
        )
    data.write_bsd(out, recs, _stamp(cfg))
    return EXIT_OK


def cmd_ml(cfg: RunConfig, ns) -> int:
    from .learn import build_features, evaluate, train_logistic, train_tree

    if cfg.seed is None:
        return _usage("ml needs --seed")
    recs = _load(cfg, ("D",))
    ds = build_features(recs, ns.features, seed=cfg.seed, n_primes=ns.primes)
    model = train_logistic(ds, seed=cfg.seed) if ns.model == "logistic" else train_tree(ds)
    rep = evaluate(model, ds)
    if cfg.format == "csv":
        text = rep.to_text(f"{ns.model} on {ns.features} features") + "\n"
        if cfg.out:
            with open(cfg.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    payload = {"model": ns.model, "features": ns.features, "train": len(ds.train_idx), "test": len(ds.test_idx)}
    payload["note"] = "only logistic regression and a Gini decision tree are available; ensembles are not implemented"
    _emit(cfg, {**payload, **rep.to_dict()})
    return EXIT_OK


def cmd_pca(cfg: RunConfig, ns) -> int:
    from .learn import pca

    recs = [r for r in _load(cfg, ("D",)) if r.omega_period is not None and r.l1 is not None]
    cols = ("torsion", "regulator", "l1", "omega_period", "tamagawa")
    have = [c for c in cols if c == "torsion" or all(getattr(r, c) is not None for r in recs)]
    M = np.array([[4.0 if c == "torsion" else float(getattr(r, c)) for c in have] for r in recs])
    # constant columns carry no variance and only pin the mean
    varying = [i for i in range(M.shape[1]) if np.ptp(M[:, i]) > 0]
    res = pca(M[:, varying], min(2, len(varying)))
    rows = []
    for r, z in zip(recs, res.projected):
        rows.append((r.D, float(z[0]), float(z[1]) if len(z) > 1 else 0.0, r.mw_rank, r.s2, r.status, r.residue8))
    header = ("D", "pc1", "pc2", "mw_rank", "s2", "status", "residue8")
    if cfg.format == "json":
        _emit(cfg, {"features": [have[i] for i in varying], "explained_variance": res.explained_variance, "total_variance": res.total_variance})
    else:
        _emit(cfg, {}, rows, header)
    return EXIT_OK


def cmd_ingest(cfg: RunConfig, ns) -> int:
    schema = data.IngestSchema.load(ns.schema) if ns.schema else data.DEFAULT_SCHEMA
    ing = data.ingest_csv(_need_input(cfg), schema, ns.threshold)
    payload: Dict[str, Any] = {"ingest": ing.report()}
    if ns.curves:
        merged = data.merge_and_validate(data.load_records(ns.curves), ing)
        payload["overlap"] = merged.overlap
        payload["violations"] = merged.report.to_dict()
        if cfg.out:
            data.save_records(merged.records, cfg.out, data.ALL_COLUMNS, _stamp(cfg))
        sys.stdout.write(json.dumps(_jsonable(payload), indent=2) + "\n")
        return EXIT_OK if merged.report.ok else EXIT_VIOLATION
    sys.stdout.write(json.dumps(_jsonable(payload), indent=2) + "\n")
    return EXIT_OK


def run_verify(X: int, depth_bump: int = 0, trace_prime_bound: int = 1000) -> Dict[str, List]:
    """Cross-checks over D <= X; returns violations by suite (all empty on a correct build)."""
    table = arith.default_table(max(X, trace_prime_bound, 10_000))
    Ds = arith.enumerate_squarefree(X, table).tolist()
    v: Dict[str, List] = {"oracle_vs_matrix": [], "cm_vs_bruteforce": [], "parity": [], "hasse": [], "period_scaling": []}
    for D in Ds:
        if D % 2:
            o = descent.selmer_rank_oracle(D, table=table, depth_bump=depth_bump).s
            m = descent.monsky_rank(D, table)
            if o != m:
                v["oracle_vs_matrix"].append({"D": D, "oracle": o, "matrix": m})
        s, _ = descent.selmer_rank(D, table)
        if s % 2 != stats.selmer_parity(D):
            v["parity"].append({"D": D, "s": s})
        if abs(lfunction.real_period(D) * D**0.5 / lfunction.real_period(1) - 1) > 1e-9:
            v["period_scaling"].append(D)
    primes = [int(p) for p in table.primes if 2 < p <= trace_prime_bound]
    for D in range(1, 51):
        if not arith.is_squarefree(D, table):
            continue
        for p in primes:
            if (2 * D) % p == 0:
                continue
            a = frobenius.ap_twist(D, p)
            if a != frobenius.ap_bruteforce(-D * D, 0, p):
                v["cm_vs_bruteforce"].append({"D": D, "p": p})
            if a * a > 4 * p:
                v["hasse"].append({"D": D, "p": p})
    return v


def cmd_verify(cfg: RunConfig, ns) -> int:
    v = run_verify(cfg.max, cfg.depth_bump)
    bad = {k: x for k, x in v.items() if x}
    payload = {"X": cfg.max, "ok": not bad, "checked": sorted(v), "violations": bad}
    _emit(cfg, payload)
    return EXIT_VIOLATION if bad else EXIT_OK


COMMANDS = {
    "sieve": cmd_sieve,
    "selmer": cmd_selmer,
    "traces": cmd_traces,
    "stats": cmd_stats,
    "goldfeld": cmd_goldfeld,
    "bsd": cmd_bsd,
    "ml": cmd_ml,
    "pca": cmd_pca,
    "ingest": cmd_ingest,
    "verify": cmd_verify,
}


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    parser = _parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    cfg = _config(ns)
    if cfg.max < 1:
        return _usage("--max must be positive")
    try:
        return COMMANDS[cfg.command](cfg, ns)
    except SystemExit as exc:
        return int(exc.code or 0)
    except CongruentError as exc:
        sys.stdout.write(json.dumps({"ok": False, "error": type(exc).__name__, "message": str(exc)}, indent=2) + "\n")
        return EXIT_VIOLATION


def main() -> None:
    sys.exit(dispatch())
