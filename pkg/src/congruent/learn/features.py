"""Feature matrices and balanced train/test splits built from curve records."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

from ..arith import PrimeTable, default_table
from ..errors import DataError, DomainError, SchemaError
from ..frobenius import ap_twist
from ..stats import record_field

GROUPS = ("residues", "bsd", "selmer", "traces")
TORSION_ORDER = 4

_COLUMNS = {
    "residues": ("residue16", "residue32", "omega", "residue8"),
    "bsd": ("regulator", "tamagawa", "torsion", "omega_period", "l1"),
    "selmer": ("s2", "sel3_dim", "modular_degree_val2"),
}


@dataclass(frozen=True)
class LabeledDataset:
    X: np.ndarray
    y: np.ndarray
    ids: np.ndarray
    feature_names: Tuple[str, ...]
    train_idx: np.ndarray
    test_idx: np.ndarray

    @property
    def X_train(self) -> np.ndarray:
        return self.X[self.train_idx]

    @property
    def y_train(self) -> np.ndarray:
        return self.y[self.train_idx]

    @property
    def X_test(self) -> np.ndarray:
        return self.X[self.test_idx]

    @property
    def y_test(self) -> np.ndarray:
        return self.y[self.test_idx]


def congruence_label(record: Any) -> Optional[int]:
    """1 if congruent, 0 if not, None when neither certified nor ingested."""
    status = str(record_field(record, "status") or "")
    if status.endswith("NONCONGRUENT_CERTIFIED"):
        return 0
    if status.endswith("CONGRUENT_CERTIFIED"):
        return 1
    rank = _optional(record, "mw_rank")
    if rank is not None:
        return int(rank > 0)
    return None


def _optional(record: Any, name: str):
    try:
        return record_field(record, name)
    except SchemaError:
        return None


def _row(record: Any, group: str, primes: Sequence[int]) -> Optional[List[float]]:
    D = int(record_field(record, "D"))
    if group == "traces":
        return [float(ap_twist(D, p)) for p in primes]
    row = []
    for name in _COLUMNS[group]:
        if name == "torsion":
            v = TORSION_ORDER
        else:
            v = record_field(record, name)
        if v is None:
            return None
        row.append(float(v))
    return row


def feature_names(group: str, primes: Sequence[int] = ()) -> Tuple[str, ...]:
    if group == "traces":
        return tuple(f"a_{p}" for p in primes)
    return _COLUMNS[group]


def balanced_split(y: np.ndarray, seed: int, test_fraction: float = 0.2) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Subsample the majority class to the minority size, then split each class 80/20.

    Returns (kept indices, train positions, test positions), positions relative to ``kept``.
    """
    rng = np.random.default_rng(seed)
    pos = np.nonzero(y == 1)[0]
    neg = np.nonzero(y == 0)[0]
    n = min(len(pos), len(neg))
    if n == 0:
        raise DataError("one label class is empty; cannot balance")
    pos = np.sort(rng.choice(pos, n, replace=False))
    neg = np.sort(rng.choice(neg, n, replace=False))
    kept = np.concatenate([neg, pos])
    n_test = int(round(n * test_fraction))
    train, test = [], []
    for offset in (0, n):
        perm = rng.permutation(n) + offset
        test.append(perm[:n_test])
        train.append(perm[n_test:])
    return kept, np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def build_features(
    records: Sequence[Any],
    group: str,
    seed: int = 0,
    test_fraction: float = 0.2,
    n_primes: int = 1000,
    table: Optional[PrimeTable] = None,
) -> LabeledDataset:
    """Balanced labelled dataset for one of the feature groups in GROUPS."""
    if group not in GROUPS:
        raise DomainError(f"unknown feature group {group!r}; choose from {GROUPS}")
    primes: Sequence[int] = ()
    if group == "traces":
        table = table or default_table()
        primes = [int(p) for p in table.first_primes(n_primes)]
    else:
        # fail early if a required column is absent from the whole record set
        for name in _COLUMNS[group]:
            if name != "torsion" and all(_optional(r, name) is None for r in records):
                raise SchemaError(f"column {name!r} is missing for feature group {group!r}")
    rows, labels, ids = [], [], []
    for rec in records:
        label = congruence_label(rec)
        if label is None:
            continue
        row = _row(rec, group, primes)
        if row is None:
            continue
        rows.append(row)
        labels.append(label)
        ids.append(int(record_field(rec, "D")))
    if not rows:
        raise DataError("no labelled records carry the requested features")
    X = np.asarray(rows, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    kept, train, test = balanced_split(y, seed, test_fraction)
    return LabeledDataset(
        X[kept], y[kept], np.asarray(ids, dtype=np.int64)[kept], feature_names(group, primes), train, test
    )
