"""Sequence features: AHo-aligned one-hot encodings and pooled embeddings."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .dataset import AMINO_ACIDS, Orientation

ALIGNED_LENGTH = 152
GAP = len(AMINO_ACIDS)  # index of the gap symbol
ALPHABET_SIZE = len(AMINO_ACIDS) + 1
ORIENTATIONS = (Orientation.VH_VL, Orientation.VL_VH)
_AA_INDEX = {aa: i for i, aa in enumerate(AMINO_ACIDS)}


@dataclass(frozen=True)
class AlignedChain:
    positions: np.ndarray  # int codes, GAP for empty slots
    source_len: int

    def __post_init__(self):
        if self.positions.shape != (ALIGNED_LENGTH,):
            raise ValueError("aligned chain must have exactly 152 positions")
        if int(np.sum(self.positions != GAP)) != self.source_len:
            raise ValueError("non-gap count does not match source length")

    def to_string(self) -> str:
        return "".join("-" if c == GAP else AMINO_ACIDS[c] for c in self.positions)


PositionMap = Sequence[tuple[int, int]]


def validate_position_map(position_map: PositionMap, seq_len: int) -> None:
    res = [r for r, _ in position_map]
    aho = [a for _, a in position_map]
    if len(set(aho)) != len(aho):
        raise ValueError("position map collision: duplicate AHo position")
    if sorted(res) != list(range(1, seq_len + 1)):
        raise ValueError("position map must assign every residue 1..len exactly once")
    if any(not 1 <= a <= ALIGNED_LENGTH for a in aho):
        raise ValueError("AHo position outside [1, 152]")
    pairs = sorted(position_map)
    if any(b[1] <= a[1] for a, b in zip(pairs, pairs[1:])):
        raise ValueError("position map is not order-preserving")


def align_chain(seq: str, position_map: Optional[PositionMap] = None) -> AlignedChain:
    """Place ``seq`` on the 152-slot AHo grid.

    Without a map the sequence is left-justified and padded with gaps.
    Map entries are 1-based ``(residue_index, aho_position)`` pairs.
    """
    if len(seq) > ALIGNED_LENGTH:
        raise ValueError(f"sequence of length {len(seq)} exceeds {ALIGNED_LENGTH}")
    codes = np.array([_AA_INDEX[c] for c in seq], dtype=np.int64)
    out = np.full(ALIGNED_LENGTH, GAP, dtype=np.int64)
    if position_map is None:
        out[: len(seq)] = codes
    else:
        validate_position_map(position_map, len(seq))
        for res, aho in position_map:
            out[aho - 1] = codes[res - 1]
    return AlignedChain(out, len(seq))


def read_position_map(path) -> list[tuple[int, int]]:
    """Two integer columns per line: residue index, AHo position."""
    pairs = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        a, b = line.replace(",", " ").split()
        pairs.append((int(a), int(b)))
    return pairs


def write_position_map(position_map: PositionMap, path) -> None:
    Path(path).write_text("".join(f"{r} {a}\n" for r, a in position_map))


def sequence_dim(n_linkers: int) -> int:
    return 2 * ALIGNED_LENGTH * ALPHABET_SIZE + len(ORIENTATIONS) + n_linkers


def one_hot_features(
    vh: AlignedChain,
    vl: AlignedChain,
    orientation: Orientation | str,
    linker_id: str,
    linker_vocab: Sequence[str],
) -> np.ndarray:
    """Layout: VH 152x21, VL 152x21, orientation (2), linker (len(vocab))."""
    if linker_id not in linker_vocab:
        raise ValueError(f"unknown linker {linker_id!r}; vocabulary is fixed at fit time")
    block = ALIGNED_LENGTH * ALPHABET_SIZE
    x = np.zeros(sequence_dim(len(linker_vocab)))
    rows = np.arange(ALIGNED_LENGTH) * ALPHABET_SIZE
    x[rows + vh.positions] = 1.0
    x[block + rows + vl.positions] = 1.0
    x[2 * block + ORIENTATIONS.index(Orientation(orientation))] = 1.0
    x[2 * block + 2 + list(linker_vocab).index(linker_id)] = 1.0
    return x


def sequence_columns(linker_vocab: Sequence[str]) -> list[str]:
    cols = []
    for chain in ("VH", "VL"):
        for pos in range(1, ALIGNED_LENGTH + 1):
            cols += [f"{chain}{pos}_{a}" for a in AMINO_ACIDS] + [f"{chain}{pos}_-"]
    cols += [f"orient_{o.value}" for o in ORIENTATIONS]
    cols += [f"linker_{l}" for l in linker_vocab]
    return cols


# ---------------------------------------------------------------------------
# pretrained embeddings


@dataclass(frozen=True)
class EmbeddingMatrix:
    values: np.ndarray
    chain_id: str

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


def pool_embedding(m: EmbeddingMatrix | np.ndarray) -> np.ndarray:
    values = m.values if isinstance(m, EmbeddingMatrix) else np.asarray(m, dtype=float)
    if values.ndim != 2 or values.shape[0] == 0:
        raise ValueError("embedding matrix is empty")
    if not np.all(np.isfinite(values)):
        raise ValueError("embedding contains non-finite values")
    return values.mean(axis=0)


def _parse_header(line: str) -> tuple[str, int, int]:
    chain, rows, cols = (t.strip() for t in line.split(","))
    if chain not in ("VH", "VL"):
        raise ValueError(f"bad chain id {chain!r}")
    return chain, int(rows), int(cols)


def read_embedding(path) -> EmbeddingMatrix:
    """Read a residue-embedding file.

    The first line is ``chain_id,rows,cols``. Text files follow it with the
    row-major values (whitespace or comma separated); ``.bin`` files follow it
    with little-endian float64 data.
    """
    path = Path(path)
    raw = path.read_bytes()
    nl = raw.index(b"\n")
    chain, rows, cols = _parse_header(raw[:nl].decode())
    body = raw[nl + 1 :]
    if path.suffix == ".bin":
        values = np.frombuffer(body, dtype="<f8").copy()
    else:
        values = np.array(body.decode().replace(",", " ").split(), dtype=float)
    if values.size != rows * cols:
        raise ValueError(f"{path}: expected {rows * cols} values, found {values.size}")
    return EmbeddingMatrix(values.reshape(rows, cols), chain)


def write_embedding(m: EmbeddingMatrix, path) -> None:
    path = Path(path)
    header = f"{m.chain_id},{m.rows},{m.cols}\n".encode()
    if path.suffix == ".bin":
        path.write_bytes(header + np.ascontiguousarray(m.values, dtype="<f8").tobytes())
    else:
        lines = "\n".join(" ".join(repr(float(v)) for v in row) for row in m.values)
        path.write_bytes(header + lines.encode() + b"\n")
