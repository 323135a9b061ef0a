"""Structure features from paired parental-IgG / scFv C-alpha traces."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .seq_features import ALIGNED_LENGTH

CHAINS = ("VH", "VL")
SOURCES = ("PARENTAL_IGG", "SCFV")
N_CHANNELS = 8
FLAT_DIM = len(CHAINS) * ALIGNED_LENGTH * N_CHANNELS


class SuperpositionError(ValueError):
    pass


@dataclass(frozen=True)
class DomainStructure:
    chain_id: str
    source: str
    positions: np.ndarray  # 1-based AHo positions, strictly increasing
    coords: np.ndarray  # (n, 3) Angstrom

    def __post_init__(self):
        pos = np.asarray(self.positions)
        if self.coords.shape != (len(pos), 3):
            raise ValueError("coords must be (n, 3) matching positions")
        if len(pos) and (pos.min() < 1 or pos.max() > ALIGNED_LENGTH):
            raise ValueError("AHo positions must lie in [1, 152]")
        if np.any(np.diff(pos) <= 0):
            raise ValueError("AHo positions must be strictly increasing")
        if not np.all(np.isfinite(self.coords)):
            raise ValueError("non-finite coordinates")


def read_structure(path) -> dict[str, DomainStructure]:
    """Read ``chain_id,source,aho_position,x,y,z`` lines; returns chain -> domain.

    A header line is optional.
    """
    rows: dict[tuple[str, str], list[tuple[int, float, float, float]]] = {}
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].startswith("#") or rec[0] == "chain_id":
                continue
            chain, source, pos, x, y, z = (t.strip() for t in rec)
            if chain not in CHAINS or source not in SOURCES:
                raise ValueError(f"{path}: bad chain/source {chain!r}/{source!r}")
            rows.setdefault((chain, source), []).append((int(pos), float(x), float(y), float(z)))
    out = {}
    for (chain, source), items in rows.items():
        if chain in out:
            raise ValueError(f"{path}: chain {chain} present for more than one source")
        items.sort()
        arr = np.array(items, dtype=float)
        out[chain] = DomainStructure(chain, source, arr[:, 0].astype(int), arr[:, 1:])
    return out


def write_structure(domains: list[DomainStructure], path) -> None:
    with open(path, "w") as fh:
        fh.write("chain_id,source,aho_position,x,y,z\n")
        for d in domains:
            for p, (x, y, z) in zip(d.positions, d.coords):
                fh.write(f"{d.chain_id},{d.source},{int(p)},{x:.4f},{y:.4f},{z:.4f}\n")


def kabsch_superpose(P: np.ndarray, Q: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Optimal proper rigid transform mapping ``P`` onto ``Q``.

    Returns ``(R, t, rmsd)`` such that ``P @ R.T + t`` best matches ``Q`` in
    the least-squares sense, with ``det(R) = +1``.

    Raises
    ------
    SuperpositionError
        For fewer than three points or (near-)collinear point sets.
    """
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if P.shape != Q.shape or P.ndim != 2 or P.shape[1] != 3:
        raise SuperpositionError("point sets must both be (n, 3)")
    if len(P) < 3:
        raise SuperpositionError("need at least 3 points")
    p0, q0 = P.mean(axis=0), Q.mean(axis=0)
    Pc, Qc = P - p0, Q - q0
    for X in (Pc, Qc):
        s = np.linalg.svd(X, compute_uv=False)
        if s[0] == 0 or s[1] <= 1e-10 * s[0]:
            raise SuperpositionError("degenerate (collinear) point set")
    H = Pc.T @ Qc
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T)) or 1.0
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    t = q0 - R @ p0
    resid = Pc @ R.T - Qc
    rmsd = float(np.sqrt(np.sum(resid * resid) / len(P)))
    return R, t, rmsd


def _shared(a: DomainStructure, b: DomainStructure) -> tuple[np.ndarray, np.ndarray]:
    _, ia, ib = np.intersect1d(a.positions, b.positions, return_indices=True)
    return ia, ib


def domain_rmsd(parental: DomainStructure, scfv: DomainStructure) -> float:
    """C-alpha RMSD after superposing ``scfv`` onto ``parental`` over shared positions."""
    ip, is_ = _shared(parental, scfv)
    if len(ip) < 3:
        raise SuperpositionError(f"only {len(ip)} shared positions")
    return kabsch_superpose(scfv.coords[is_], parental.coords[ip])[2]


@dataclass(frozen=True)
class StructPairFeatures:
    rmsd_vh: float
    rmsd_vl: float
    per_residue: np.ndarray  # (2, 152, 8)

    def flat(self) -> np.ndarray:
        return self.per_residue.reshape(-1)

    def sequence_tensor(self) -> np.ndarray:
        """(304, 8) positions-by-channels view, VH positions first."""
        return self.per_residue.reshape(len(CHAINS) * ALIGNED_LENGTH, N_CHANNELS)


def _chain_channels(parental: DomainStructure, scfv: DomainStructure) -> tuple[np.ndarray, float]:
    ip, is_ = _shared(parental, scfv)
    if len(ip) < 3:
        raise SuperpositionError(f"{parental.chain_id}: only {len(ip)} shared positions")
    R, t, rmsd = kabsch_superpose(scfv.coords[is_], parental.coords[ip])
    moved = scfv.coords @ R.T + t
    # both traces share the parental centroid so coordinate differences survive centering
    center = parental.coords.mean(axis=0)
    out = np.zeros((ALIGNED_LENGTH, N_CHANNELS))
    out[:, 6:] = 1.0
    out[parental.positions - 1, 0:3] = parental.coords - center
    out[parental.positions - 1, 6] = 0.0
    out[scfv.positions - 1, 3:6] = moved - center
    out[scfv.positions - 1, 7] = 0.0
    return out, rmsd


def per_residue_features(
    parental_vh: DomainStructure,
    parental_vl: DomainStructure,
    scfv_vh: DomainStructure,
    scfv_vl: DomainStructure,
) -> StructPairFeatures:
    """Per-chain superposition followed by the 8-channel per-position encoding.

    Channels: parental xyz, superposed scFv xyz, parental-gap, scFv-gap.
    Absent positions carry zero coordinates and a gap flag of 1.
    """
    vh, rmsd_vh = _chain_channels(parental_vh, scfv_vh)
    vl, rmsd_vl = _chain_channels(parental_vl, scfv_vl)
    return StructPairFeatures(rmsd_vh, rmsd_vl, np.stack([vh, vl]))


def pair_features_from_files(parental_path, scfv_path) -> StructPairFeatures:
    par = read_structure(parental_path)
    scf = read_structure(scfv_path)
    for chain in CHAINS:
        if chain not in par:
            raise ValueError(f"{parental_path}: missing chain {chain}")
        if chain not in scf:
            raise ValueError(f"{scfv_path}: missing chain {chain}")
    return per_residue_features(par["VH"], par["VL"], scf["VH"], scf["VL"])


def struct_columns() -> list[str]:
    names = ("par_x", "par_y", "par_z", "scfv_x", "scfv_y", "scfv_z", "par_gap", "scfv_gap")
    return [f"{c}{p}_{n}" for c in CHAINS for p in range(1, ALIGNED_LENGTH + 1) for n in names]


def structure_paths(structure_dir, sig_id: str) -> tuple[Path, Path]:
    d = Path(structure_dir)
    return d / f"{sig_id}.parental.csv", d / f"{sig_id}.scfv.csv"
