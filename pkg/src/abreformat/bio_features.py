"""Developability descriptors (PSH, PNC, PPC, SFvCSP) and mean imputation."""

from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass
from typing import IO, Optional, Sequence

import numpy as np

BIO_COLUMNS = ("psh", "pnc", "ppc", "sfvcsp")


@dataclass(frozen=True)
class BiophysRow:
    psh: Optional[float] = None
    pnc: Optional[float] = None
    ppc: Optional[float] = None
    sfvcsp: Optional[float] = None

    def __post_init__(self):
        for v in astuple(self):
            if v is not None and not math.isfinite(v):
                raise ValueError("biophysical descriptors must be finite when present")

    def as_array(self) -> np.ndarray:
        return np.array([np.nan if v is None else v for v in astuple(self)], dtype=float)


def rows_to_matrix(rows: Sequence[BiophysRow] | np.ndarray) -> np.ndarray:
    """Stack rows into an (n, 4) array with NaN marking missing cells."""
    if isinstance(rows, np.ndarray):
        return rows.astype(float, copy=False)
    if not rows:
        return np.empty((0, len(BIO_COLUMNS)))
    return np.vstack([r.as_array() for r in rows])


def fit_imputer(train_rows: Sequence[BiophysRow] | np.ndarray) -> np.ndarray:
    """Per-column means over present values of the training rows."""
    X = rows_to_matrix(train_rows)
    present = ~np.isnan(X)
    counts = present.sum(axis=0)
    if X.shape[0] == 0 or np.any(counts == 0):
        empty = [BIO_COLUMNS[j] for j in range(X.shape[1]) if X.shape[0] == 0 or counts[j] == 0]
        raise ValueError(f"no training values for column(s): {', '.join(empty)}")
    return np.where(present, X, 0.0).sum(axis=0) / counts


def impute(rows: Sequence[BiophysRow] | np.ndarray, means: np.ndarray) -> np.ndarray:
    X = rows_to_matrix(rows).copy()
    missing = np.isnan(X)
    X[missing] = np.broadcast_to(means, X.shape)[missing]
    return X


def read_biophys(fh: IO[str]) -> dict[str, BiophysRow]:
    """Read ``sig_key,psh,pnc,ppc,sfvcsp``; empty cells are missing."""
    reader = csv.DictReader(fh)
    needed = ("sig_key",) + BIO_COLUMNS
    if reader.fieldnames is None or any(c not in reader.fieldnames for c in needed):
        raise ValueError(f"biophysical file needs columns {', '.join(needed)}")
    out = {}
    for row in reader:
        vals = [row[c].strip() for c in BIO_COLUMNS]
        out[row["sig_key"].strip()] = BiophysRow(*(float(v) if v else None for v in vals))
    return out


def write_biophys(rows: dict[str, BiophysRow], fh: IO[str]) -> None:
    fh.write("sig_key," + ",".join(BIO_COLUMNS) + "\n")
    for key, r in rows.items():
        cells = ["" if v is None else repr(float(v)) for v in astuple(r)]
        fh.write(key + "," + ",".join(cells) + "\n")
