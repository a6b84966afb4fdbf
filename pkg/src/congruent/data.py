"""Curve records: generation, CSV persistence, ingestion of external columns and validation."""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .arith import PrimeTable, default_table, enumerate_squarefree, factor
from .descent import certify_from_rank, selmer_rank
from .errors import CapacityError, ConfigurationError, DataError, SchemaError
from .frobenius import ap_twist
from .lfunction import normalized_bsd
from .stats import selmer_parity

CURVE_COLUMNS = ("D", "residue8", "residue16", "residue32", "omega", "s2", "s2_method", "status")
BSD_COLUMNS = ("D", "omega_period", "l1", "tamagawa", "normalized_bsd", "l_bsd_odd")
INGESTED_COLUMNS = (
    "mw_rank",
    "sel3_dim",
    "analytic_rank",
    "regulator",
    "analytic_sha",
    "modular_degree_val2",
    "root_number",
)


@dataclass(frozen=True)
class CurveRecord:
    D: int
    residue8: int
    residue16: int
    residue32: int
    omega: int
    s2: Optional[int]
    s2_method: Optional[str]
    status: Optional[str]
    mw_rank: Optional[int] = None
    sel3_dim: Optional[int] = None
    analytic_rank: Optional[int] = None
    regulator: Optional[float] = None
    analytic_sha: Optional[float] = None
    modular_degree_val2: Optional[int] = None
    root_number: Optional[int] = None
    omega_period: Optional[float] = None
    l1: Optional[float] = None
    tamagawa: Optional[int] = None
    normalized_bsd: Optional[float] = None
    l_bsd_odd: Optional[bool] = None


_TYPES: Dict[str, type] = {
    "D": int,
    "residue8": int,
    "residue16": int,
    "residue32": int,
    "omega": int,
    "s2": int,
    "s2_method": str,
    "status": str,
    "mw_rank": int,
    "sel3_dim": int,
    "analytic_rank": int,
    "regulator": float,
    "analytic_sha": float,
    "modular_degree_val2": int,
    "root_number": int,
    "omega_period": float,
    "l1": float,
    "tamagawa": int,
    "normalized_bsd": float,
    "l_bsd_odd": bool,
}
ALL_COLUMNS = tuple(f.name for f in fields(CurveRecord))


# ---------------------------------------------------------------------------
# text formatting


def format_value(v: Any) -> str:
    """Exact text for integers, 17 significant digits for reals, empty for missing."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def parse_value(text: str, kind: type) -> Any:
    text = text.strip()
    if text == "":
        return None
    if kind is bool:
        low = text.lower()
        if low in ("true", "1"):
            return True
        if low in ("false", "0"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    return text


# ---------------------------------------------------------------------------
# generation


@dataclass(frozen=True)
class GenerateOptions:
    certify: bool = True
    search_height: int = 200
    torsor_bound: int = 0
    lfunction: bool = False
    lfunction_tol: float = 1e-8
    chunk_size: int = 2000
    workers: int = 1
    time_budget: Optional[float] = None  # seconds per call before checkpointing


def make_record(D: int, options: GenerateOptions = GenerateOptions(), table: Optional[PrimeTable] = None) -> CurveRecord:
    f = factor(D, table)
    if not f.squarefree:
        raise DataError(f"{D} is not square-free")
    s, method = selmer_rank(D, table)
    status = None
    if options.certify:
        status = certify_from_rank(D, s, options.search_height, options.torsor_bound, table).status.value
    rec = CurveRecord(D, D % 8, D % 16, D % 32, f.omega, s, method, status)
    if options.lfunction:
        b = normalized_bsd(D, options.lfunction_tol, table=table)
        rec = replace(
            rec, omega_period=b.omega, l1=b.l1, tamagawa=b.tamagawa, normalized_bsd=b.normalized, l_bsd_odd=b.l_bsd_odd
        )
    return rec


def _chunk_worker(args: Tuple[Sequence[int], GenerateOptions]) -> List[CurveRecord]:
    Ds, options = args
    table = default_table(int(max(Ds)) if len(Ds) else 10)
    return [make_record(int(D), options, table) for D in Ds]


def _chunks(Ds: np.ndarray, size: int) -> List[np.ndarray]:
    return [Ds[i : i + size] for i in range(0, len(Ds), size)]


def _chunk_results(chunks: List[np.ndarray], options: GenerateOptions, table: PrimeTable):
    """(chunk, records) pairs in chunk order, computed serially or by a process pool."""
    if options.workers <= 1:
        for c in chunks:
            yield c, [make_record(int(D), options, table) for D in c]
        return
    pool = ProcessPoolExecutor(max_workers=options.workers)
    try:
        # map keeps submission order, so output order is deterministic
        for c, out in zip(chunks, pool.map(_chunk_worker, [(c.tolist(), options) for c in chunks])):
            yield c, out
    finally:
        pool.shutdown(wait=True, cancel_futures=True)


def generate_records(
    X: int, options: GenerateOptions = GenerateOptions(), start: int = 1, table: Optional[PrimeTable] = None
) -> Iterator[CurveRecord]:
    """One record per square-free start <= D <= X, in increasing D."""
    table = table or default_table(X)
    Ds = enumerate_squarefree(X, table)
    Ds = Ds[Ds >= start]
    for _, recs in _chunk_results(_chunks(Ds, options.chunk_size), options, table):
        yield from recs


class BudgetExceeded(CapacityError):
    def __init__(self, message: str, resume_token: Dict[str, Any]):
        super().__init__(message)
        self.resume_token = resume_token


def _checkpoint_path(path: str) -> str:
    return path + ".ckpt"


def generate_to_csv(
    X: int,
    path: str,
    options: GenerateOptions = GenerateOptions(),
    columns: Sequence[str] = CURVE_COLUMNS,
    resume: bool = True,
    table: Optional[PrimeTable] = None,
    preamble: Sequence[str] = (),
) -> int:
    """Write records to ``path`` chunk by chunk, checkpointing after each chunk.

    When ``options.time_budget`` runs out the partial file is left in place
    together with a checkpoint, and :class:`BudgetExceeded` carries the
    resume token; calling again with ``resume=True`` continues from it and
    produces the same bytes as an uninterrupted run.  Returns the number of
    records written in total.
    """
    table = table or default_table(X)
    ckpt = _checkpoint_path(path)
    start, written, offset = 1, 0, None
    if resume and os.path.exists(ckpt):
        with open(ckpt) as fh:
            token = json.load(fh)
        if token["X"] != X or token["columns"] != list(columns):
            raise ConfigurationError("checkpoint belongs to a different run")
        start, written, offset = token["next_D"], token["written"], token["offset"]
    Ds = enumerate_squarefree(X, table)
    Ds = Ds[Ds >= start]
    began = time.monotonic()
    mode = "r+" if offset is not None else "w"
    with open(path, mode, newline="", encoding="utf-8") as fh:
        if offset is None:
            _write_preamble(fh, preamble)
            fh.write(",".join(columns) + "\r\n")
        else:
            fh.seek(offset)
            fh.truncate()
        w = csv.writer(fh, lineterminator="\r\n")
        chunks = _chunks(Ds, options.chunk_size)
        results = _chunk_results(chunks, options, table)
        for i, (c, recs) in enumerate(results):
            for r in recs:
                w.writerow([format_value(getattr(r, col)) for col in columns])
            written += len(recs)
            fh.flush()
            token = {"X": X, "columns": list(columns), "next_D": int(c[-1]) + 1, "written": written, "offset": fh.tell()}
            with open(ckpt, "w") as ck:
                json.dump(token, ck)
            over = options.time_budget is not None and time.monotonic() - began > options.time_budget
            if over and i + 1 < len(chunks):
                results.close()
                raise BudgetExceeded(f"time budget exhausted after D={int(c[-1])}", token)
    os.remove(ckpt)
    return written


# ---------------------------------------------------------------------------
# persistence


def _data_lines(fh):
    """Lines of a CSV file minus ``#`` comment lines (used for provenance headers)."""
    return (line for line in fh if not line.startswith("#"))


def _write_preamble(fh, preamble: Sequence[str]) -> None:
    for line in preamble:
        fh.write(f"# {line}\r\n")


def save_records(
    records: Iterable[CurveRecord], path: str, columns: Sequence[str] = ALL_COLUMNS, preamble: Sequence[str] = ()
) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        _write_preamble(fh, preamble)
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(columns)
        for r in records:
            w.writerow([format_value(getattr(r, c)) for c in columns])


def load_records(path: str, required: Sequence[str] = CURVE_COLUMNS) -> List[CurveRecord]:
    """Read records back; residues and omega are derived from D when their columns are absent."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(_data_lines(fh))
        header = reader.fieldnames or []
        missing = [c for c in tuple(required) + ("D",) if c not in header]
        if missing:
            raise SchemaError(f"{path} lacks columns {sorted(set(missing))}")
        out = []
        for row in reader:
            kw: Dict[str, Any] = {c: parse_value(row[c], _TYPES[c]) for c in header if c in _TYPES}
            D = kw["D"]
            kw.setdefault("residue8", D % 8)
            kw.setdefault("residue16", D % 16)
            kw.setdefault("residue32", D % 32)
            if "omega" not in kw:
                kw["omega"] = factor(D).omega
            for c in ("s2", "s2_method", "status"):
                kw.setdefault(c, None)
            out.append(CurveRecord(**kw))
    return out


def write_traces(
    path: str, Ds: Iterable[int], k: int, table: Optional[PrimeTable] = None, preamble: Sequence[str] = ()
) -> None:
    """traces.csv: D followed by a_p at the first k primes (columns named by prime index)."""
    table = table or default_table()
    primes = [int(p) for p in table.first_primes(k)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        _write_preamble(fh, preamble)
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["D"] + [f"p{i}" for i in range(1, k + 1)])
        for D in Ds:
            w.writerow([D] + [ap_twist(int(D), p) for p in primes])


def write_bsd(path: str, records: Iterable[CurveRecord], preamble: Sequence[str] = ()) -> None:
    save_records(records, path, BSD_COLUMNS, preamble)


# ---------------------------------------------------------------------------
# ingestion


@dataclass(frozen=True)
class IngestColumn:
    field: str
    source: str
    kind: type
    sentinels: Tuple[str, ...] = ()


@dataclass(frozen=True)
class IngestSchema:
    """Maps source CSV columns onto record fields.

    Text form, one column per line (``#`` starts a comment)::

        D        D       int
        mw_rank  rank    int   -1
    """

    columns: Tuple[IngestColumn, ...]

    def __post_init__(self):
        names = [c.field for c in self.columns]
        if "D" not in names:
            raise SchemaError("ingest schema must map the D column")
        unknown = [n for n in names if n not in _TYPES]
        if unknown:
            raise SchemaError(f"unknown target fields {unknown}")

    @classmethod
    def parse(cls, text: str) -> "IngestSchema":
        kinds = {"int": int, "float": float, "str": str, "bool": bool}
        cols = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) < 3 or parts[2] not in kinds:
                raise SchemaError(f"schema line {lineno}: expected 'field source type [sentinels...]'")
            cols.append(IngestColumn(parts[0], parts[1], kinds[parts[2]], tuple(parts[3:])))
        return cls(tuple(cols))

    @classmethod
    def load(cls, path: str) -> "IngestSchema":
        with open(path, encoding="utf-8") as fh:
            return cls.parse(fh.read())


DEFAULT_SCHEMA = IngestSchema(
    (
        IngestColumn("D", "D", int),
        IngestColumn("mw_rank", "rank", int, ("-1",)),
    )
)


@dataclass
class IngestResult:
    values: Dict[int, Dict[str, Any]]
    rows: int
    errors: List[Tuple[int, str]] = field(default_factory=list)
    duplicates: int = 0

    def report(self) -> Dict[str, Any]:
        return {"rows": self.rows, "accepted": len(self.values), "duplicates": self.duplicates, "errors": self.errors}


def ingest_csv(path: str, schema: IngestSchema = DEFAULT_SCHEMA, error_threshold: float = 0.001) -> IngestResult:
    """Typed columns keyed by D; sentinels become missing and the last duplicate wins.

    Malformed rows are skipped and listed; the file is rejected when their
    share exceeds ``error_threshold``.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(_data_lines(fh))
        header = reader.fieldnames or []
        absent = [c.source for c in schema.columns if c.source not in header]
        if absent:
            raise SchemaError(f"{path} lacks columns {absent}")
        result = IngestResult({}, 0)
        for row in reader:
            result.rows += 1
            line = reader.line_num
            try:
                vals: Dict[str, Any] = {}
                for c in schema.columns:
                    raw = (row[c.source] or "").strip()
                    vals[c.field] = None if raw in c.sentinels else parse_value(raw, c.kind)
                D = vals.pop("D")
                if D is None or D < 1:
                    raise ValueError("D must be a positive integer")
            except (ValueError, TypeError) as exc:
                result.errors.append((line, str(exc)))
                continue
            if D in result.values:
                result.duplicates += 1
            result.values[D] = vals
    if result.rows and len(result.errors) / result.rows > error_threshold:
        raise DataError(
            f"{len(result.errors)} of {result.rows} rows in {path} are malformed "
            f"(threshold {error_threshold:.2%}); first: {result.errors[0]}"
        )
    return result


# ---------------------------------------------------------------------------
# merge and validation


@dataclass
class ValidationReport:
    parity: List[int] = field(default_factory=list)
    rank_bound: List[int] = field(default_factory=list)
    sha_odd: List[int] = field(default_factory=list)
    not_squarefree: List[int] = field(default_factory=list)
    bad_residue: List[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not any(asdict(self).values())

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["counts"] = {k: len(v) for k, v in asdict(self).items()}
        return d


def validate_records(records: Iterable[CurveRecord], table: Optional[PrimeTable] = None) -> ValidationReport:
    rep = ValidationReport()
    for r in records:
        valid_class = r.residue8 in (1, 2, 3, 5, 6, 7) and r.residue8 == r.D % 8
        if not valid_class:
            rep.bad_residue.append(r.D)
        if not factor(r.D, table).squarefree:
            rep.not_squarefree.append(r.D)
        if valid_class and r.s2 is not None and r.s2 % 2 != selmer_parity(r.D):
            rep.parity.append(r.D)
        if r.s2 is not None and r.mw_rank is not None:
            if r.mw_rank > r.s2:
                rep.rank_bound.append(r.D)
            elif (r.s2 - r.mw_rank) % 2:
                rep.sha_odd.append(r.D)
        if r.sel3_dim is not None and r.mw_rank is not None and (r.sel3_dim - r.mw_rank) % 2:
            rep.sha_odd.append(r.D)
    return rep


@dataclass
class ValidatedDataset:
    records: List[CurveRecord]
    report: ValidationReport
    overlap: int


def merge_and_validate(
    records: Iterable[CurveRecord], ingested: IngestResult, table: Optional[PrimeTable] = None
) -> ValidatedDataset:
    """Join ingested columns onto records by D and list every rule violation."""
    merged, overlap = [], 0
    for r in records:
        extra = ingested.values.get(r.D)
        if extra is not None:
            overlap += 1
            r = replace(r, **{k: v for k, v in extra.items() if k in ALL_COLUMNS})
        merged.append(r)
    if ingested.values and overlap == 0:
        raise ConfigurationError("ingested data shares no D with the records")
    return ValidatedDataset(merged, validate_records(merged, table), overlap)

