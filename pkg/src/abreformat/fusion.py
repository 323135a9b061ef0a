"""Modality blocks, ablation masks and train-fitted standardization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np


class Modality(str, Enum):
    SEQ = "SEQ"
    STRUCT = "STRUCT"
    RMSD = "RMSD"
    BIO = "BIO"


MODALITY_ORDER = (Modality.SEQ, Modality.STRUCT, Modality.RMSD, Modality.BIO)
CONTINUOUS = frozenset({Modality.STRUCT, Modality.RMSD, Modality.BIO})


@dataclass(frozen=True)
class ModalityMask:
    flags: frozenset[Modality]

    def __post_init__(self):
        if not self.flags:
            raise ValueError("a modality mask needs at least one modality")

    @classmethod
    def of(cls, *mods: Modality | str) -> "ModalityMask":
        return cls(frozenset(Modality(m.upper()) if isinstance(m, str) else m for m in mods))

    @classmethod
    def parse(cls, text: str) -> "ModalityMask":
        return cls.of(*(t for t in text.replace("+", ",").split(",") if t.strip()))

    @property
    def ordered(self) -> list[Modality]:
        return [m for m in MODALITY_ORDER if m in self.flags]

    @property
    def name(self) -> str:
        return "+".join(m.value.lower() for m in self.ordered)

    def __str__(self) -> str:
        return self.name


SEQ_ONLY = ModalityMask.of("seq")
MULTIMODAL = ModalityMask.of("seq", "struct", "rmsd", "bio")
ABLATION_MASKS = tuple(
    ModalityMask.of(*m)
    for m in (
        ("seq",),
        ("struct",),
        ("rmsd",),
        ("seq", "struct"),
        ("seq", "rmsd"),
        ("struct", "rmsd"),
        ("seq", "struct", "rmsd"),
    )
)


@dataclass
class FeatureBlock:
    """Column-labelled matrix for one modality, rows aligned to a signature list."""

    name: str
    values: np.ndarray
    columns: list[str]
    row_ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != len(self.columns):
            raise ValueError(f"block {self.name}: values/columns shape mismatch")
        if self.row_ids and len(self.row_ids) != self.values.shape[0]:
            raise ValueError(f"block {self.name}: row ids do not match rows")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def take(self, idx) -> "FeatureBlock":
        ids = [self.row_ids[i] for i in idx] if self.row_ids else []
        return FeatureBlock(self.name, self.values[idx], self.columns, ids)

    def with_values(self, values: np.ndarray) -> "FeatureBlock":
        return FeatureBlock(self.name, values, self.columns, self.row_ids)

    def save(self, stem) -> None:
        """Row-major ``<stem>.npy`` plus ``<stem>.columns.json`` sidecar."""
        stem = Path(stem)
        np.save(stem.with_suffix(".npy"), np.ascontiguousarray(self.values))
        meta = {"name": self.name, "columns": self.columns, "row_ids": self.row_ids}
        stem.with_suffix(".columns.json").write_text(json.dumps(meta))

    @classmethod
    def load(cls, stem) -> "FeatureBlock":
        stem = Path(stem)
        meta = json.loads(stem.with_suffix(".columns.json").read_text())
        values = np.load(stem.with_suffix(".npy"))
        return cls(meta["name"], values, meta["columns"], meta["row_ids"])


@dataclass
class DesignMatrix:
    values: np.ndarray
    columns: list[tuple[str, int]]  # (modality, index within block)
    slices: dict[Modality, slice]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def continuous_columns(self) -> np.ndarray:
        cols = [np.arange(s.start, s.stop) for m, s in self.slices.items() if m in CONTINUOUS]
        return np.concatenate(cols) if cols else np.array([], dtype=int)


def assemble(blocks: Mapping[Modality, FeatureBlock], mask: ModalityMask) -> DesignMatrix:
    """Concatenate enabled blocks in the fixed order SEQ, STRUCT, RMSD, BIO."""
    mods = mask.ordered
    missing = [m.value for m in mods if m not in blocks]
    if missing:
        raise KeyError(f"missing feature block(s): {', '.join(missing)}")
    n = {blocks[m].n_rows for m in mods}
    if len(n) != 1:
        raise ValueError(f"feature blocks disagree on row count: {sorted(n)}")
    ids = [tuple(blocks[m].row_ids) for m in mods if blocks[m].row_ids]
    if len(set(ids)) > 1:
        raise ValueError("feature blocks disagree on row order")
    parts, columns, slices, start = [], [], {}, 0
    for m in mods:
        b = blocks[m]
        parts.append(b.values)
        columns.extend((m.value, j) for j in range(b.values.shape[1]))
        slices[m] = slice(start, start + b.values.shape[1])
        start += b.values.shape[1]
    X = np.hstack(parts) if len(parts) > 1 else parts[0].copy()
    if not np.all(np.isfinite(X)):
        raise ValueError("design matrix contains non-finite entries (impute first)")
    return DesignMatrix(X, columns, slices)


@dataclass(frozen=True)
class Scaler:
    columns: np.ndarray
    mean: np.ndarray
    std: np.ndarray

    def transform(self, X: np.ndarray) -> np.ndarray:
        out = np.array(X, dtype=float, copy=True)
        if len(self.columns) == 0:
            return out
        safe = np.where(self.std > 0, self.std, 1.0)
        z = (out[:, self.columns] - self.mean) / safe
        out[:, self.columns] = np.where(self.std > 0, z, 0.0)
        return out


def fit_scaler(X_train: np.ndarray, continuous_cols: Sequence[int] | np.ndarray) -> Scaler:
    cols = np.asarray(continuous_cols, dtype=int)
    sub = X_train[:, cols]
    mean, std = sub.mean(axis=0), sub.std(axis=0)
    # a constant column can come out with std ~1e-16 from rounding in the mean
    std = np.where(std <= 1e-12 * np.maximum(np.abs(mean), 1.0), 0.0, std)
    return Scaler(cols, mean, std)


def fit_apply_scaler(
    X_train: np.ndarray,
    X_other: Optional[np.ndarray | Iterable[np.ndarray]],
    continuous_cols: Sequence[int] | np.ndarray,
):
    """Z-score the continuous columns with training mean and population std.

    Columns that are constant in training map to zero everywhere. Returns
    ``(train_scaled, other_scaled, scaler)``; ``other_scaled`` mirrors the
    type of ``X_other`` (array, list of arrays or ``None``).
    """
    scaler = fit_scaler(X_train, continuous_cols)
    if X_other is None:
        other = None
    elif isinstance(X_other, np.ndarray):
        other = scaler.transform(X_other)
    else:
        other = [scaler.transform(x) for x in X_other]
    return scaler.transform(X_train), other, scaler
