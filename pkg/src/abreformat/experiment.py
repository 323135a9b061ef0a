"""Feature extraction over a signature set and per-fold model evaluation.

A fold takes the raw modality blocks, imputes and standardizes them with
training rows only, fits one model and scores the test partition.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from . import linear, neural
from .bio_features import BIO_COLUMNS, BiophysRow, fit_imputer, impute, read_biophys, rows_to_matrix
from .dataset import SignatureSet, sequence_id
from .fusion import (
    FeatureBlock,
    Modality,
    ModalityMask,
    assemble,
    fit_apply_scaler,
)
from .metrics import accuracy, auprc, auroc, pearson, spearman
from .seq_features import (
    ALIGNED_LENGTH,
    ALPHABET_SIZE,
    align_chain,
    one_hot_features,
    pool_embedding,
    read_embedding,
    read_position_map,
    sequence_columns,
)
from .splits import SplitPlan
from .struct_features import (
    CHAINS,
    N_CHANNELS,
    pair_features_from_files,
    struct_columns,
    structure_paths,
)

TASKS = ("qc", "yield", "sec")
MODEL_KINDS = ("logistic", "linear", "mlp", "cnn")
FAIL_CLASS = 0  # failure detection treats the failing class as positive


# ---------------------------------------------------------------------------
# featurization


def _aligned(seq: str, map_dir: Optional[Path]):
    if map_dir is not None:
        p = map_dir / f"{sequence_id(seq)}.txt"
        if p.exists():
            return align_chain(seq, read_position_map(p))
    return align_chain(seq)


def sequence_block(
    sigs: SignatureSet, linker_vocab: Optional[Sequence[str]] = None, position_map_dir=None
) -> FeatureBlock:
    """One-hot block; position maps are looked up by sequence hash when available."""
    vocab = sorted({s.linker_id for s in sigs}) if linker_vocab is None else list(linker_vocab)
    map_dir = Path(position_map_dir) if position_map_dir else None
    cache: dict[str, object] = {}

    def chain(seq):
        if seq not in cache:
            cache[seq] = _aligned(seq, map_dir)
        return cache[seq]

    rows = [
        one_hot_features(chain(s.vh_seq), chain(s.vl_seq), s.orientation, s.linker_id, vocab)
        for s in sigs
    ]
    values = np.vstack(rows) if rows else np.empty((0, len(sequence_columns(vocab))))
    return FeatureBlock("SEQ", values, sequence_columns(vocab), [s.sig_id for s in sigs])


def structure_blocks(sigs: SignatureSet, structure_dir) -> tuple[FeatureBlock, FeatureBlock]:
    """Per-residue STRUCT block and the two-column RMSD block."""
    flat, rmsd = [], []
    for s in sigs:
        par, scf = structure_paths(structure_dir, s.sig_id)
        for p in (par, scf):
            if not p.exists():
                raise FileNotFoundError(f"missing structure file {p}")
        f = pair_features_from_files(par, scf)
        flat.append(f.flat())
        rmsd.append((f.rmsd_vh, f.rmsd_vl))
    ids = [s.sig_id for s in sigs]
    return (
        FeatureBlock("STRUCT", np.vstack(flat), struct_columns(), ids),
        FeatureBlock("RMSD", np.asarray(rmsd, dtype=float), ["rmsd_vh", "rmsd_vl"], ids),
    )


def bio_block(sigs: SignatureSet, biophys: Mapping[str, BiophysRow]) -> FeatureBlock:
    """Raw descriptors with NaN for missing cells; imputation happens per fold."""
    missing = BiophysRow()
    rows = [biophys.get("|".join(s.sig_key), missing) for s in sigs]
    return FeatureBlock("BIO", rows_to_matrix(rows), list(BIO_COLUMNS), [s.sig_id for s in sigs])


def embedding_block(sigs: SignatureSet, embedding_dir) -> FeatureBlock:
    """Concatenated mean-pooled VH and VL embeddings, files named by sequence hash."""
    d = Path(embedding_dir)

    def pooled(seq):
        for suffix in (".bin", ".txt"):
            p = d / f"{sequence_id(seq)}{suffix}"
            if p.exists():
                return pool_embedding(read_embedding(p))
        raise FileNotFoundError(f"no embedding for sequence {sequence_id(seq)} in {d}")

    rows = [np.concatenate([pooled(s.vh_seq), pooled(s.vl_seq)]) for s in sigs]
    X = np.vstack(rows)
    half = X.shape[1] // 2
    cols = [f"VH_emb{j}" for j in range(half)] + [f"VL_emb{j}" for j in range(half)]
    return FeatureBlock("EMB", X, cols, [s.sig_id for s in sigs])


@dataclass
class FeatureSet:
    """Raw modality blocks aligned to one signature set, plus optional embeddings."""

    blocks: dict[Modality, FeatureBlock]
    embeddings: Optional[FeatureBlock] = None

    @classmethod
    def build(
        cls,
        sigs: SignatureSet,
        structure_dir=None,
        biophys: Optional[Mapping[str, BiophysRow]] = None,
        position_map_dir=None,
        embedding_dir=None,
        linker_vocab=None,
    ) -> "FeatureSet":
        blocks = {Modality.SEQ: sequence_block(sigs, linker_vocab, position_map_dir)}
        if structure_dir is not None:
            blocks[Modality.STRUCT], blocks[Modality.RMSD] = structure_blocks(sigs, structure_dir)
        if biophys is not None:
            blocks[Modality.BIO] = bio_block(sigs, biophys)
        emb = embedding_block(sigs, embedding_dir) if embedding_dir is not None else None
        return cls(blocks, emb)

    @classmethod
    def from_data_dir(cls, sigs: SignatureSet, data_dir) -> "FeatureSet":
        """Build from a dataset directory laid out like the synthetic generator's output.

        Optional parts (structures/, biophys.csv, position_maps/, embeddings/)
        are used when present.
        """
        d = Path(data_dir)
        opt = lambda name: d / name if (d / name).exists() else None  # noqa: E731
        biophys = None
        if opt("biophys.csv") is not None:
            with open(d / "biophys.csv") as fh:
                biophys = read_biophys(fh)
        return cls.build(sigs, opt("structures"), biophys, opt("position_maps"), opt("embeddings"))


# ---------------------------------------------------------------------------
# targets


def task_targets(sigs: SignatureSet, task: str) -> tuple[np.ndarray, np.ndarray]:
    """Target vector and a mask of rows where the target is present."""
    if task not in TASKS:
        raise ValueError(f"task must be one of {TASKS}")
    attr = {"qc": "qc_label", "yield": "yield_mean", "sec": "sec_label"}[task]
    vals = [getattr(s, attr) for s in sigs]
    present = np.array([v is not None for v in vals])
    y = np.array([np.nan if v is None else float(v) for v in vals])
    return y, present


def is_classification(task: str) -> bool:
    return task in ("qc", "sec")


# ---------------------------------------------------------------------------
# models


@dataclass(frozen=True)
class ModelSpec:
    """Model family plus its hyperparameters.

    Linear models default to the selected grid cells: logistic L2 with
    ``C = 10`` and linear L2 with ``C = 0.01``.
    """

    kind: str = "logistic"
    C: float = 10.0
    penalty: str = "L2"
    mlp: neural.MlpConfig = field(default_factory=neural.MlpConfig)
    cnn: neural.CnnConfig = field(default_factory=lambda: neural.CNN_CLASSIFY_DEFAULT)
    use_embeddings: bool = False

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"model must be one of {MODEL_KINDS}")

    @classmethod
    def default_for(cls, kind: str, task: str, **kw) -> "ModelSpec":
        classify = is_classification(task)
        if kind in ("logistic", "linear"):
            kind = "logistic" if classify else "linear"
            kw.setdefault("C", 10.0 if classify else 0.01)
        mode = "classify" if classify else "regress"
        kw.setdefault("mlp", neural.MlpConfig(task=mode))
        base = neural.CNN_CLASSIFY_DEFAULT if classify else neural.CNN_REGRESS_DEFAULT
        kw.setdefault("cnn", base)
        return cls(kind=kind, **kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        return d


def _cnn_tensor(X: np.ndarray, slices, mask: ModalityMask) -> np.ndarray:
    """Per-position channels for the CNN: one-hot residues and structure channels."""
    n, L = X.shape[0], len(CHAINS) * ALIGNED_LENGTH
    parts = []
    if Modality.SEQ in mask.flags:
        s = slices[Modality.SEQ]
        parts.append(X[:, s.start : s.start + L * ALPHABET_SIZE].reshape(n, L, ALPHABET_SIZE))
    if Modality.STRUCT in mask.flags:
        s = slices[Modality.STRUCT]
        parts.append(X[:, s].reshape(n, L, N_CHANNELS))
    if not parts:
        raise ValueError("the CNN needs a per-residue modality (seq or struct)")
    return np.concatenate(parts, axis=2)


@dataclass
class FoldDesign:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    y_train: np.ndarray
    y_val: np.ndarray
    y_test: np.ndarray
    test_rows: np.ndarray
    slices: dict


def fold_design(
    features: FeatureSet,
    mask: ModalityMask,
    plan: SplitPlan,
    y: np.ndarray,
    present: np.ndarray,
    use_embeddings: bool = False,
) -> FoldDesign:
    """Impute BIO and standardize continuous columns using training rows only."""
    idx = [np.array([i for i in plan.partition(p) if present[i]], dtype=int)
           for p in ("train", "val", "test")]
    if use_embeddings:
        if features.embeddings is None:
            raise FileNotFoundError("embedding block requested but not available")
        E = features.embeddings.values
        cont = np.arange(E.shape[1])
        tr, (va, te), _ = fit_apply_scaler(E[idx[0]], [E[idx[1]], E[idx[2]]], cont)
        return FoldDesign(tr, va, te, y[idx[0]], y[idx[1]], y[idx[2]], idx[2], {})

    blocks = dict(features.blocks)
    if Modality.BIO in mask.flags and Modality.BIO in blocks:
        raw = blocks[Modality.BIO].values
        blocks[Modality.BIO] = blocks[Modality.BIO].with_values(impute(raw, fit_imputer(raw[idx[0]])))
    dm = assemble({m: blocks[m] for m in mask.ordered if m in blocks}, mask)
    cont = dm.continuous_columns()
    tr, (va, te), _ = fit_apply_scaler(dm.values[idx[0]], [dm.values[idx[1]], dm.values[idx[2]]], cont)
    return FoldDesign(tr, va, te, y[idx[0]], y[idx[1]], y[idx[2]], idx[2], dm.slices)


def fit_predict(spec: ModelSpec, design: FoldDesign, mask: ModalityMask, task: str, seed: int):
    """Fit on train (val for early stopping) and return test scores and the model.

    Classification scores are pass probabilities; regression scores are
    predicted targets.
    """
    classify = is_classification(task)
    if spec.kind in ("logistic", "linear"):
        cfg = linear.LinearConfig(
            task=linear.Task.CLASSIFY if classify else linear.Task.REGRESS,
            penalty=spec.penalty,
            inverse_reg_C=spec.C,
        )
        model = linear.fit(design.train, design.y_train, cfg)
        pred = linear.predict_proba if classify else linear.predict_value
        return pred(model, design.test), model

    mode = "classify" if classify else "regress"
    if spec.kind == "mlp":
        cfg = neural.MlpConfig(**{**asdict(spec.mlp), "task": mode, "seed": seed})
        model, _ = neural.mlp_fit(design.train, design.y_train, cfg, design.val, design.y_val)
        Xte = design.test
    else:
        cfg = neural.CnnConfig(**{**asdict(spec.cnn), "task": mode, "seed": seed})
        to3 = lambda X: _cnn_tensor(X, design.slices, mask)  # noqa: E731
        model, _ = neural.cnn1d_fit(to3(design.train), design.y_train, cfg,
                                    to3(design.val), design.y_val)
        Xte = to3(design.test)
    scores = model.predict_proba(Xte) if classify else model.predict_value(Xte)
    return scores, model


def score_fold(scores: np.ndarray, y_test: np.ndarray, task: str) -> dict[str, float]:
    """Test metrics for one fold; undefined metrics are left out of the result.

    Classification reports the failing class as positive: the score is
    ``1 - p_pass``. Accuracy thresholds the pass probability at 0.5.
    """
    out: dict[str, float] = {}
    if is_classification(task):
        fail_score = 1.0 - scores
        if len(np.unique(y_test)) == 2:
            out["auroc"] = auroc(fail_score, y_test, positive_class=FAIL_CLASS)
            out["auprc"] = auprc(fail_score, y_test, positive_class=FAIL_CLASS)
        if len(y_test):
            out["accuracy"] = accuracy((scores >= 0.5).astype(float), y_test)
        return out
    try:
        out["pearson"] = pearson(scores, y_test)
        out["spearman"] = spearman(scores, y_test)
    except ValueError:
        pass
    return out


@dataclass
class FoldResult:
    fold_seed: int
    metrics: dict[str, float]
    test_rows: list[int]
    scores: list[float]


def run_fold(
    features: FeatureSet,
    sigs: SignatureSet,
    mask: ModalityMask,
    plan: SplitPlan,
    spec: ModelSpec,
    task: str = "qc",
) -> FoldResult:
    y, present = task_targets(sigs, task)
    design = fold_design(features, mask, plan, y, present, spec.use_embeddings)
    scores, _ = fit_predict(spec, design, mask, task, plan.fold_seed)
    if not np.all(np.isfinite(scores)):
        raise linear.NumericalError("model produced non-finite predictions")
    return FoldResult(
        plan.fold_seed,
        score_fold(scores, design.y_test, task),
        design.test_rows.tolist(),
        [float(s) for s in scores],
    )


def metric_names(task: str) -> tuple[str, ...]:
    return ("auroc", "auprc", "accuracy") if is_classification(task) else ("pearson", "spearman")


def run_folds(features, sigs, mask, plans, spec, task="qc") -> list[FoldResult]:
    return [run_fold(features, sigs, mask, p, spec, task) for p in plans]


def mean_metric(results: Sequence[FoldResult], name: str) -> float:
    vals = [r.metrics[name] for r in results if name in r.metrics]
    return math.fsum(vals) / len(vals) if vals else float("nan")
