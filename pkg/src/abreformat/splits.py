"""Train/validation/test partitioning under the three deployment scenarios.

* ``SIGNATURE``: every family is spread over all partitions, each signature
  lives in exactly one partition.
* ``PARENTAL_FAMILY``: whole families are held out (zero-shot on new families).
* ``TARGET_FAMILY``: one family is the target; a small batch of it joins the
  training data and the rest is split into validation and test.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .dataset import SignatureSet

DEFAULT_RATIOS = (0.6, 0.1, 0.3)
DEFAULT_VAL_TEST = (0.25, 0.75)
DEFAULT_BATCH_SIZE = 32
MIN_FAMILY_FOR_SPREAD = 3


class Scheme(str, Enum):
    SIGNATURE = "SIGNATURE"
    PARENTAL_FAMILY = "PARENTAL_FAMILY"
    TARGET_FAMILY = "TARGET_FAMILY"

    @classmethod
    def parse(cls, name: str) -> "Scheme":
        aliases = {
            "signature": cls.SIGNATURE,
            "scfv": cls.SIGNATURE,
            "family": cls.PARENTAL_FAMILY,
            "parental": cls.PARENTAL_FAMILY,
            "parental_family": cls.PARENTAL_FAMILY,
            "target": cls.TARGET_FAMILY,
            "target_family": cls.TARGET_FAMILY,
        }
        key = name.strip().lower()
        if key in aliases:
            return aliases[key]
        return cls(name.strip().upper())


@dataclass(frozen=True)
class SplitPlan:
    scheme: Scheme
    fold_seed: int
    train: tuple[int, ...]
    val: tuple[int, ...]
    test: tuple[int, ...]
    target_family: Optional[str] = None
    batch_size: Optional[int] = None

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.val), len(self.test)

    def partition(self, name: str) -> tuple[int, ...]:
        if name not in ("train", "val", "test"):
            raise KeyError(name)
        return getattr(self, name)

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme.value,
            "fold_seed": self.fold_seed,
            "train": list(self.train),
            "val": list(self.val),
            "test": list(self.test),
            "target_family": self.target_family,
            "batch_size": self.batch_size,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SplitPlan":
        return cls(
            scheme=Scheme(d["scheme"]),
            fold_seed=int(d["fold_seed"]),
            train=tuple(d["train"]),
            val=tuple(d["val"]),
            test=tuple(d["test"]),
            target_family=d.get("target_family"),
            batch_size=d.get("batch_size"),
        )


def _check_ratios(ratios: Sequence[float], n: int = 3) -> np.ndarray:
    r = np.asarray(ratios, dtype=float)
    if r.shape != (n,) or np.any(r < 0) or abs(r.sum() - 1.0) > 1e-9:
        raise ValueError(f"ratios must be {n} non-negative numbers summing to 1, got {ratios}")
    return r


def _largest_remainder(total: int, ratios: np.ndarray) -> np.ndarray:
    ideal = total * ratios
    counts = np.floor(ideal).astype(int)
    order = np.argsort(-(ideal - counts), kind="stable")
    for k in order[: total - counts.sum()]:
        counts[k] += 1
    return counts


def _plan(scheme, seed, parts, **kw) -> SplitPlan:
    train, val, test = (tuple(sorted(int(i) for i in p)) for p in parts)
    return SplitPlan(scheme, seed, train, val, test, **kw)


def signature_split(
    sigs: SignatureSet, ratios: Sequence[float] = DEFAULT_RATIOS, seed: int = 0
) -> SplitPlan:
    """Family-stratified random split of signatures.

    Families with at least three members contribute at least one signature to
    each partition; smaller families go entirely to training. Beyond that
    floor, each family's members go one at a time to the open partition (one
    still below its global target) where the family is furthest below its own
    share, so overall sizes hit the global targets whenever the floors allow.
    """
    r = _check_ratios(ratios)
    if len(sigs) < 10:
        raise ValueError(f"signature split needs at least 10 signatures, got {len(sigs)}")
    rng = np.random.default_rng(seed)

    families = sorted(sigs.family_index)
    members: dict[str, np.ndarray] = {}
    counts: dict[str, np.ndarray] = {}
    small: list[int] = []
    for fam in families:
        idx = np.array(sigs.family_index[fam])
        if len(idx) < MIN_FAMILY_FOR_SPREAD:
            small.extend(idx.tolist())
            continue
        members[fam] = rng.permutation(idx)
        counts[fam] = np.ones(3, dtype=int)  # presence floor; the top-up tracks proportions

    n_spread = sum(len(m) for m in members.values())
    deficit = _largest_remainder(n_spread, r) - sum(counts.values(), np.zeros(3, dtype=int))
    for fam in rng.permutation(np.array(list(members), dtype=object)):
        c = counts[fam]
        n_f = len(members[fam])
        for _ in range(n_f - c.sum()):
            local = n_f * r - c
            open_ = deficit > 0
            score = np.where(open_, local, -np.inf) if open_.any() else local
            k = int(np.argmax(score))
            c[k] += 1
            deficit[k] -= 1

    parts: list[list[int]] = [list(small), [], []]
    for fam, perm in members.items():
        c = counts[fam]
        parts[0].extend(perm[: c[0]])
        parts[1].extend(perm[c[0] : c[0] + c[1]])
        parts[2].extend(perm[c[0] + c[1] :])
    return _plan(Scheme.SIGNATURE, seed, parts)


def parental_family_split(
    sigs: SignatureSet, ratios: Sequence[float] = DEFAULT_RATIOS, seed: int = 0
) -> SplitPlan:
    """Hold out whole parental families.

    Families are shuffled, stably sorted largest first, and each is assigned to
    the partition with the largest remaining signature-count deficit. When the
    remaining families are only just enough to fill the still-empty partitions,
    they go to those partitions, so every partition receives a family.
    """
    r = _check_ratios(ratios)
    families = sorted(sigs.family_index)
    if len(families) < 3:
        raise ValueError(f"family split needs at least 3 families, got {len(families)}")
    rng = np.random.default_rng(seed)
    shuffled = [families[i] for i in rng.permutation(len(families))]
    ordered = sorted(shuffled, key=lambda f: -len(sigs.family_index[f]))

    target = len(sigs) * r
    filled = np.zeros(3)
    n_fams = np.zeros(3, dtype=int)
    parts: list[list[int]] = [[], [], []]
    for pos, fam in enumerate(ordered):
        deficit = target - filled
        empty = n_fams == 0
        remaining = len(ordered) - pos
        if empty.any() and remaining <= empty.sum():
            deficit = np.where(empty, deficit, -np.inf)
        k = int(np.argmax(deficit))
        parts[k].extend(sigs.family_index[fam])
        filled[k] += len(sigs.family_index[fam])
        n_fams[k] += 1
    return _plan(Scheme.PARENTAL_FAMILY, seed, parts)


def target_family_split(
    sigs: SignatureSet,
    target_family: str,
    batch_size: int = DEFAULT_BATCH_SIZE,
    val_test_ratio: Sequence[float] = DEFAULT_VAL_TEST,
    seed: int = 0,
) -> SplitPlan:
    """Few-shot split: all other families plus ``batch_size`` target members train."""
    vt = _check_ratios(val_test_ratio, n=2)
    if target_family not in sigs.family_index:
        raise ValueError(f"unknown target family {target_family!r}")
    if batch_size < 1:
        raise ValueError("batch_size must be positive")
    members = np.array(sigs.family_index[target_family])
    if batch_size >= len(members):
        raise ValueError(
            f"batch_size {batch_size} must be smaller than target family size {len(members)}"
        )
    rng = np.random.default_rng(seed)
    perm = rng.permutation(members)
    rest = perm[batch_size:]
    n_val = int(math.floor(len(rest) * vt[0] + 0.5))
    others = [i for f, idx in sigs.family_index.items() if f != target_family for i in idx]
    parts = [others + perm[:batch_size].tolist(), rest[:n_val].tolist(), rest[n_val:].tolist()]
    return _plan(
        Scheme.TARGET_FAMILY, seed, parts, target_family=target_family, batch_size=batch_size
    )


def make_split(
    scheme: Scheme,
    sigs: SignatureSet,
    seed: int,
    ratios: Sequence[float] = DEFAULT_RATIOS,
    target_family: Optional[str] = None,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> SplitPlan:
    scheme = Scheme(scheme)
    if scheme is Scheme.SIGNATURE:
        return signature_split(sigs, ratios, seed)
    if scheme is Scheme.PARENTAL_FAMILY:
        return parental_family_split(sigs, ratios, seed)
    if target_family is None:
        raise ValueError("target-family split requires a target family")
    return target_family_split(sigs, target_family, batch_size, seed=seed)


def make_folds(
    scheme: Scheme,
    sigs: SignatureSet,
    n_folds: int = 10,
    base_seed: int = 0,
    **kwargs,
) -> list[SplitPlan]:
    """Independent repeated splits; fold ``k`` is seeded with ``base_seed + k``."""
    if n_folds < 1:
        raise ValueError("n_folds must be >= 1")
    return [make_split(scheme, sigs, base_seed + k, **kwargs) for k in range(n_folds)]


def largest_family(sigs: SignatureSet) -> str:
    return min(sigs.family_index, key=lambda f: (-len(sigs.family_index[f]), f))


def check_plan(plan: SplitPlan, sigs: SignatureSet) -> None:
    """Raise ``AssertionError`` if ``plan`` violates its scheme's invariants."""
    tr, va, te = (set(p) for p in (plan.train, plan.val, plan.test))
    assert not (tr & va or tr & te or va & te), "partition overlap"
    assert all(0 <= i < len(sigs) for i in tr | va | te), "index out of range"
    keys = [{sigs[i].sig_key for i in p} for p in (tr, va, te)]
    assert not (keys[0] & keys[1] or keys[0] & keys[2] or keys[1] & keys[2]), "sig_key leak"
    if plan.scheme is Scheme.PARENTAL_FAMILY:
        fams = [{sigs[i].parental_family for i in p} for p in (tr, va, te)]
        assert not (fams[0] & fams[1] or fams[0] & fams[2] or fams[1] & fams[2]), "family leak"
    if plan.scheme is Scheme.TARGET_FAMILY:
        tf = plan.target_family
        assert all(sigs[i].parental_family == tf for i in va | te), "non-target in val/test"
        n_target_train = sum(sigs[i].parental_family == tf for i in tr)
        assert n_target_train == plan.batch_size, "wrong target batch in train"


def save_folds(plans: list[SplitPlan], path, **meta) -> None:
    with open(path, "w") as fh:
        json.dump({**meta, "folds": [p.to_dict() for p in plans]}, fh, indent=1)


def load_folds(path) -> tuple[list[SplitPlan], dict]:
    with open(path) as fh:
        data = json.load(fh)
    plans = [SplitPlan.from_dict(d) for d in data.pop("folds")]
    return plans, data
