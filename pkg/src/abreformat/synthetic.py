"""Synthetic reformatting datasets with planted family structure.

Each parental family has its own backbone VH/VL pair, a random baseline
effect and a sign that decides whether global deformation helps or hurts
yield inside that family. Members are point-mutated copies drawn from a
small family-specific pool of mutation sites, combined with a linker and a
domain orientation.

The latent log-yield of member ``m`` in family ``f`` is::

    z = b_f + w_loc * a_m + s_f * w_glob * d_m + w_seq * q_m
        + linker_m + orient_m + w_bio * c_m + noise

``a_m`` is a local displacement of a few hotspot residues along fixed
global directions (visible only in per-residue coordinates), ``d_m`` a
smooth global bend per chain that dominates RMSD, ``q_m`` a sequence-only mutation
effect and ``c_m`` the standardized VH/VL charge product. A fixed share
of the variance of ``a_m`` is explained by the member's mutations. Because only
``a_m`` has a family-independent meaning in coordinate space, per-residue
structure carries signal that transfers to unseen families while sequence
identity and RMSD do not.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .bio_features import BiophysRow, write_biophys
from .dataset import (
    AMINO_ACIDS,
    Orientation,
    ReformatRecord,
    SignatureSet,
    aggregate_by_signature,
    sequence_id,
    signature_id,
    write_records,
)
from .seq_features import ALIGNED_LENGTH, EmbeddingMatrix, write_embedding, write_position_map
from .struct_features import DomainStructure, structure_paths, write_structure

HYDROPHOBIC = set("AILMFWVY")
RESIDUE_CHARGE = {"D": -1.0, "E": -1.0, "K": 1.0, "R": 1.0, "H": 0.1}
_AA = np.array(list(AMINO_ACIDS))


@dataclass(frozen=True)
class GenConfig:
    """Generator settings. Weights act on a latent log-yield scale."""

    n_families: int = 50
    per_family: tuple[int, int] = (10, 50)
    n_signatures: Optional[int] = None  # exact total; sizes are rebalanced within bounds
    mutation_rate: float = 0.02
    target_fail_rate: float = 0.409
    structure_signal_weight: float = 0.5  # global (RMSD-visible) term, sign-flipped per family
    local_signal_weight: float = 1.4  # per-residue hotspot term, same sign everywhere
    family_sign_flip_prob: float = 0.5
    local_sequence_share: float = 0.8  # variance share of the local term set by mutations
    hotspot_shift: float = 1.5  # Angstrom displacement per unit of the local term
    family_effect_std: float = 1.0
    sequence_weight: float = 0.5
    bio_weight: float = 0.3
    noise_std: float = 0.3
    n_hotspots: int = 6
    n_linkers: int = 8
    n_campaigns: int = 7
    replicate_prob: float = 0.1
    replicate_noise: float = 0.05
    missing_bio_rate: float = 0.05
    embedding_dim: int = 0  # 0 disables residue embeddings
    seed: int = 0

    def __post_init__(self):
        for name in ("mutation_rate", "target_fail_rate", "family_sign_flip_prob", "local_sequence_share",
                     "replicate_prob", "missing_bio_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        lo, hi = self.per_family
        if lo < 3 or hi < lo:
            raise ValueError("per_family must satisfy 3 <= min <= max")
        if self.n_families < 1:
            raise ValueError("need at least one family")
        if self.n_signatures is not None and not lo * self.n_families <= self.n_signatures <= hi * self.n_families:
            raise ValueError("n_signatures is incompatible with per_family bounds")
        if not 1 <= self.n_linkers <= 26:
            raise ValueError("n_linkers must lie in [1, 26]")
        if self.noise_std < 0 or self.family_effect_std < 0:
            raise ValueError("standard deviations must be non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["per_family"] = list(self.per_family)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GenConfig":
        d = dict(d)
        if "per_family" in d:
            d["per_family"] = tuple(d["per_family"])
        return cls(**d)


@dataclass
class SyntheticDataset:
    records: list[ReformatRecord]
    structures: dict[str, tuple[list[DomainStructure], list[DomainStructure]]]
    biophys: dict[str, BiophysRow]
    position_maps: dict[str, list[tuple[int, int]]]
    manifest: dict
    embeddings: dict[str, EmbeddingMatrix] = field(default_factory=dict)

    def signatures(self) -> SignatureSet:
        return aggregate_by_signature(self.records)

    def write(self, out_dir) -> Path:
        """Write records, structures, descriptors, position maps and manifest."""
        out = Path(out_dir)
        for sub in ("structures", "position_maps"):
            (out / sub).mkdir(parents=True, exist_ok=True)
        with open(out / "records.csv", "w") as fh:
            write_records(self.records, fh)
        with open(out / "biophys.csv", "w") as fh:
            write_biophys(self.biophys, fh)
        for sig_id, (par, scf) in self.structures.items():
            p_path, s_path = structure_paths(out / "structures", sig_id)
            write_structure(par, p_path)
            write_structure(scf, s_path)
        for seq, pmap in self.position_maps.items():
            write_position_map(pmap, out / "position_maps" / f"{sequence_id(seq)}.txt")
        if self.embeddings:
            (out / "embeddings").mkdir(exist_ok=True)
            for seq, m in self.embeddings.items():
                write_embedding(m, out / "embeddings" / f"{sequence_id(seq)}.bin")
        (out / "manifest.json").write_text(json.dumps(self.manifest, indent=1, sort_keys=True))
        return out


# ---------------------------------------------------------------------------
# geometry


def _rotation(rng) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def _backbone(chain: int) -> np.ndarray:
    """Helix-like C-alpha trace on the 152-slot grid, wound on a slow superhelix."""
    p = np.arange(1, ALIGNED_LENGTH + 1, dtype=float)
    theta = np.deg2rad(100.0) * p
    phi = 2 * np.pi * p / ALIGNED_LENGTH
    big = 12.0
    x = big * np.cos(phi) + 2.3 * np.cos(theta)
    y = big * np.sin(phi) + 2.3 * np.sin(theta)
    z = 0.45 * p + 1.5 * np.sin(3 * phi)
    xyz = np.stack([x, y, z], axis=1)
    return xyz + np.array([30.0 * chain, 0.0, 0.0])


def _bend_field(chain: int) -> np.ndarray:
    """Smooth unit-scale displacement field used for the global deformation."""
    u = np.linspace(0.0, 1.0, ALIGNED_LENGTH)
    f = np.stack([np.sin(np.pi * u), np.cos(2 * np.pi * u), np.sin(3 * np.pi * u + chain)], axis=1)
    return f / np.sqrt(np.mean(np.sum(f * f, axis=1)))


# ---------------------------------------------------------------------------
# generation


def _family_sizes(cfg: GenConfig, rng) -> np.ndarray:
    lo, hi = cfg.per_family
    sizes = rng.integers(lo, hi + 1, size=cfg.n_families)
    if cfg.n_signatures is None:
        return sizes
    while sizes.sum() != cfg.n_signatures:
        step = 1 if sizes.sum() < cfg.n_signatures else -1
        ok = np.flatnonzero((sizes < hi) if step > 0 else (sizes > lo))
        sizes[rng.choice(ok)] += step
    return sizes


def _chain_length(rng, mean, sd, lo, hi) -> int:
    return int(np.clip(round(rng.normal(mean, sd)), lo, hi))


def _position_map(rng, length: int, hotspots: np.ndarray) -> list[tuple[int, int]]:
    rest = np.setdiff1d(np.arange(1, ALIGNED_LENGTH + 1), hotspots)
    extra = rng.choice(rest, size=length - len(hotspots), replace=False)
    aho = np.sort(np.concatenate([hotspots, extra]))
    return [(i + 1, int(a)) for i, a in enumerate(aho)]


def _descriptors(vh: str, vl: str) -> np.ndarray:
    """Noise-free (psh, pnc, ppc, sfvcsp) computed from composition."""
    both = vh + vl
    psh = sum(c in HYDROPHOBIC for c in both) / len(both)
    pnc = float(sum(c in "DE" for c in both))
    ppc = float(sum(c in "KR" for c in both))
    q = lambda s: sum(RESIDUE_CHARGE.get(c, 0.0) for c in s)  # noqa: E731
    return np.array([psh, pnc, ppc, q(vh) * q(vl)])


def _standardize(v: np.ndarray) -> np.ndarray:
    sd = v.std()
    return (v - v.mean()) / sd if sd > 0 else np.zeros_like(v)


def generate(cfg: GenConfig) -> SyntheticDataset:
    """Draw a dataset; identical configs give identical datasets."""
    rng = np.random.default_rng(cfg.seed)
    sizes = _family_sizes(cfg, rng)
    linkers = [f"L{k + 1}" for k in range(cfg.n_linkers)]
    linker_eff = rng.normal(0.0, 0.2, size=cfg.n_linkers)
    orient_eff = {Orientation.VH_VL: 0.1, Orientation.VL_VH: -0.1}

    hot = [np.sort(rng.choice(np.arange(20, 131), size=cfg.n_hotspots, replace=False))
           for _ in range(2)]
    hot_dir = [np.array([v / np.linalg.norm(v) for v in rng.normal(size=(cfg.n_hotspots, 3))])
               for _ in range(2)]
    backbones = [_backbone(c) for c in range(2)]
    bends = [_bend_field(c) for c in range(2)]
    local_field = []
    for c in range(2):
        fld = np.zeros((ALIGNED_LENGTH, 3))
        for h, u in zip(hot[c], hot_dir[c]):
            fld[h - 1] += cfg.hotspot_shift * u
            for nb in (h - 2, h):  # neighbours, 0-based
                if 0 <= nb < ALIGNED_LENGTH:
                    fld[nb] += cfg.hotspot_shift / 3 * u
        local_field.append(fld)
    emb_proj = rng.normal(size=(len(AMINO_ACIDS), cfg.embedding_dim)) if cfg.embedding_dim else None

    members = []  # per-member latent pieces and sequences
    families = []
    position_maps: dict[str, list[tuple[int, int]]] = {}
    for f, n_f in enumerate(sizes):
        fam = f"F{f + 1:03d}"
        lengths = (_chain_length(rng, 118.9, 4.8, 100, 140), _chain_length(rng, 108.1, 2.2, 98, 120))
        seqs = ["".join(rng.choice(_AA, size=L)) for L in lengths]
        pmaps = [_position_map(rng, L, hot[c]) for c, L in enumerate(lengths)]
        aho = [np.array([a for _, a in pm]) for pm in pmaps]
        jitter = [rng.normal(0.0, 0.5, size=(ALIGNED_LENGTH, 3)) for _ in range(2)]
        n_sites = int(round(2 * cfg.mutation_rate * sum(lengths)))
        flat = rng.choice(sum(lengths), size=n_sites, replace=False) if n_sites else np.array([], int)
        sites = [(0, int(i)) if i < lengths[0] else (1, int(i - lengths[0])) for i in flat]
        alt = [str(rng.choice([a for a in AMINO_ACIDS if a != seqs[c][i]])) for c, i in sites]
        e_struct = rng.normal(size=n_sites)
        e_seq = rng.normal(size=n_sites)
        fam_info = {
            "family": fam,
            "campaign": f"C{int(rng.integers(cfg.n_campaigns)) + 1}",
            "effect": float(rng.normal(0.0, cfg.family_effect_std)),
            "sign": -1 if rng.random() < cfg.family_sign_flip_prob else 1,
            "vh_len": lengths[0],
            "vl_len": lengths[1],
            "n_sites": n_sites,
        }
        families.append(fam_info)

        seen = set()
        for _ in range(n_f):
            for _attempt in range(1000):
                x = (rng.random(n_sites) < 0.5).astype(int)
                li = int(rng.integers(cfg.n_linkers))
                ori = Orientation.VH_VL if rng.random() < 0.5 else Orientation.VL_VH
                key = (tuple(x), li, ori)
                if key not in seen:
                    break
            else:
                raise ValueError(
                    f"family {fam}: cannot draw {n_f} distinct members; raise mutation_rate"
                )
            seen.add(key)
            chains = [list(seqs[0]), list(seqs[1])]
            for k in np.flatnonzero(x):
                c, i = sites[k]
                chains[c][i] = alt[k]
            vh, vl = "".join(chains[0]), "".join(chains[1])
            for s, pm in ((vh, pmaps[0]), (vl, pmaps[1])):
                position_maps[s] = pm
            centred = 2.0 * (x - 0.5)
            mut_struct = float(centred @ e_struct / math.sqrt(n_sites)) if n_sites else 0.0
            mut_seq = float(centred @ e_seq / math.sqrt(n_sites)) if n_sites else 0.0
            rho = cfg.local_sequence_share
            a = math.sqrt(rho) * mut_struct + math.sqrt(1 - rho) * float(rng.normal())
            if n_sites == 0:
                a = float(rng.normal())
            members.append({
                "family_idx": f,
                "vh": vh,
                "vl": vl,
                "linker": li,
                "orientation": ori,
                "a": a,
                "d": rng.lognormal(0.0, 0.5, size=2),
                "q": mut_seq,
                "aho": aho,
                "jitter": jitter,
                "noise": float(rng.normal(0.0, cfg.noise_std)),
            })

    desc = np.array([_descriptors(m["vh"], m["vl"]) for m in members])
    charge = _standardize(desc[:, 3])
    d_std = _standardize(np.array([m["d"].sum() for m in members]))
    parts = {
        "family": np.array([families[m["family_idx"]]["effect"] for m in members]),
        "local": cfg.local_signal_weight * np.array([m["a"] for m in members]),
        "global": cfg.structure_signal_weight
        * np.array([families[m["family_idx"]]["sign"] for m in members]) * d_std,
        "sequence": cfg.sequence_weight * np.array([m["q"] for m in members]),
        "linker": np.array([linker_eff[m["linker"]] for m in members]),
        "orientation": np.array([orient_eff[m["orientation"]] for m in members]),
        "bio": cfg.bio_weight * charge,
        "noise": np.array([m["noise"] for m in members]),
    }
    z = sum(parts.values())
    log_scale = 1.0 / max(z.std(), 1e-12)
    mu = math.log(15.0)
    planted = np.exp(mu + log_scale * z)
    threshold = float(np.quantile(planted, cfg.target_fail_rate))

    records, structures, biophys = [], {}, {}
    embeddings: dict[str, EmbeddingMatrix] = {}
    per_sig = []
    for j, m in enumerate(members):
        fam = families[m["family_idx"]]
        ori = m["orientation"]
        key = (m["vh"], m["vl"], linkers[m["linker"]], ori.value)
        sid = signature_id(key)
        n_rep = 1 + int(rng.random() < cfg.replicate_prob)
        rep_factor = np.exp(rng.normal(0.0, cfg.replicate_noise, size=n_rep)) if n_rep > 1 else np.ones(1)
        purity_logit = 2.2 + 0.8 * log_scale * z[j] + rng.normal(0.0, 0.5)
        purity = float(np.clip(100.0 / (1.0 + math.exp(-purity_logit)), 0.0, 100.0))
        for r, fac in enumerate(rep_factor):
            y_rec = float(planted[j] * fac)
            records.append(ReformatRecord(
                record_id=f"{sid}-{r}",
                vh_seq=m["vh"],
                vl_seq=m["vl"],
                linker_id=linkers[m["linker"]],
                orientation=ori,
                parental_family=fam["family"],
                campaign=fam["campaign"],
                qc_pass=int(y_rec > threshold),
                yield_ng_per_ul=y_rec,
                sec_main_peak_pct=purity,
            ))

        par_doms, scf_doms = [], []
        R, t = _rotation(rng), rng.normal(0.0, 10.0, size=3)
        for c, name in enumerate(("VH", "VL")):
            pos = m["aho"][c]
            base = backbones[c][pos - 1] + m["jitter"][c][pos - 1]
            par = base + rng.normal(0.0, 0.05, size=base.shape)
            scf = (
                par
                + m["d"][c] * bends[c][pos - 1]
                + m["a"] * local_field[c][pos - 1]
                + rng.normal(0.0, 0.05, size=base.shape)
            )
            par_doms.append(DomainStructure(name, "PARENTAL_IGG", pos, par))
            scf_doms.append(DomainStructure(name, "SCFV", pos, scf @ R.T + t))
        structures[sid] = (par_doms, scf_doms)

        noisy = desc[j] * np.array([1.0, 1.0, 1.0, 1.0]) + rng.normal(0.0, [0.01, 0.5, 0.5, 2.0])
        cells = [None if rng.random() < cfg.missing_bio_rate else float(v) for v in noisy]
        biophys["|".join(key)] = BiophysRow(*cells)

        if emb_proj is not None:
            for s, chain in ((m["vh"], "VH"), (m["vl"], "VL")):
                if s not in embeddings:
                    codes = np.array([AMINO_ACIDS.index(ch) for ch in s])
                    emb = emb_proj[codes] + 0.1 * rng.normal(size=(len(s), cfg.embedding_dim))
                    embeddings[s] = EmbeddingMatrix(emb, chain)

        per_sig.append({
            "sig_id": sid,
            "family": fam["family"],
            "a": m["a"],
            "d_vh": float(m["d"][0]),
            "d_vl": float(m["d"][1]),
            **{f"z_{k}": float(v[j]) for k, v in parts.items()},
            "planted_yield": float(planted[j]),
        })

    manifest = {
        "config": cfg.to_dict(),
        "threshold": threshold,
        "log_mu": mu,
        "log_scale": log_scale,
        "linkers": linkers,
        "linker_effects": linker_eff.tolist(),
        "orientation_effects": {k.value: v for k, v in orient_eff.items()},
        "hotspots": {"VH": hot[0].tolist(), "VL": hot[1].tolist()},
        "hotspot_directions": {"VH": hot_dir[0].tolist(), "VL": hot_dir[1].tolist()},
        "families": families,
        "signatures": per_sig,
        "label_rule": "qc_pass = yield_ng_per_ul > threshold, per record",
    }
    return SyntheticDataset(records, structures, biophys, position_maps, manifest, embeddings)


def relabel_from_manifest(records: list[ReformatRecord], manifest: dict) -> list[int]:
    """Recompute every record's QC label from its yield and the planted threshold."""
    thr = manifest["threshold"]
    return [int(r.yield_ng_per_ul > thr) for r in records]


def planted_yield(manifest: dict) -> np.ndarray:
    """Planted yields rebuilt from the stored latent components."""
    sig = manifest["signatures"]
    z = np.array([math.fsum(s[k] for k in s if k.startswith("z_")) for s in sig])
    return np.exp(manifest["log_mu"] + manifest["log_scale"] * z)


# ---------------------------------------------------------------------------
# summary


def _target_stats(values) -> Optional[dict]:
    v = np.array([x for x in values if x is not None], dtype=float)
    if len(v) == 0:
        return None
    return {"n": int(len(v)), "mean": float(v.mean()), "std": float(v.std()),
            "min": float(v.min()), "max": float(v.max())}


def stats_report(sigs: SignatureSet) -> dict:
    """Dataset summary: size, families, per-target moments and class balance."""
    if len(sigs) == 0:
        raise ValueError("empty dataset")
    qc = [s.qc_label for s in sigs if s.qc_label is not None]
    sec = [s.sec_label for s in sigs if s.sec_label is not None]
    vh = np.array([len(s.vh_seq) for s in sigs], dtype=float)
    vl = np.array([len(s.vl_seq) for s in sigs], dtype=float)
    return {
        "n": len(sigs),
        "n_families": len(sigs.family_index),
        "n_linkers": len({s.linker_id for s in sigs}),
        "n_orientations": len({s.orientation for s in sigs}),
        "vh_length": {"mean": float(vh.mean()), "std": float(vh.std())},
        "vl_length": {"mean": float(vl.mean()), "std": float(vl.std())},
        "yield": _target_stats([s.yield_mean for s in sigs]),
        "sec_purity": _target_stats([s.sec_mean for s in sigs]),
        "qc_fail_rate": (qc.count(0) / len(qc)) if qc else None,
        "qc_pass_rate": (qc.count(1) / len(qc)) if qc else None,
        "sec_pass_rate": (sum(sec) / len(sec)) if sec else None,
    }


def format_stats(report: dict) -> str:
    buf = io.StringIO()
    buf.write(f"signatures       {report['n']}\n")
    buf.write(f"families         {report['n_families']}\n")
    buf.write(f"linkers          {report['n_linkers']}, orientations {report['n_orientations']}\n")
    buf.write(f"VH length        {report['vh_length']['mean']:.1f} ± {report['vh_length']['std']:.1f}\n")
    buf.write(f"VL length        {report['vl_length']['mean']:.1f} ± {report['vl_length']['std']:.1f}\n")
    y = report["yield"]
    if y:
        buf.write(f"yield (ng/uL)    {y['mean']:.2f} ± {y['std']:.2f}  range {y['min']:.2f}-{y['max']:.2f}\n")
    if report["qc_fail_rate"] is not None:
        buf.write(f"QC fail / pass   {100 * report['qc_fail_rate']:.1f}% / {100 * report['qc_pass_rate']:.1f}%\n")
    if report["sec_pass_rate"] is not None:
        buf.write(f"SEC >= 90%       {100 * report['sec_pass_rate']:.1f}%\n")
    return buf.getvalue()
