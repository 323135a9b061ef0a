"""Fold aggregation, modality ablations, per-family RMSD analysis and report tables.

The metric primitives live in :mod:`abreformat.metrics` and are re-exported
here so callers can import everything evaluation-related from one place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .dataset import SignatureSet
from .experiment import FeatureSet, FoldResult, ModelSpec, metric_names, run_folds
from .fusion import ABLATION_MASKS, MULTIMODAL, SEQ_ONLY, Modality, ModalityMask
from .metrics import (  # noqa: F401  (re-exported)
    Confusion,
    accuracy,
    auprc,
    auroc,
    confusion_metrics,
    pearson,
    screening_efficiency,
    spearman,
)
from .splits import Scheme, SplitPlan, make_folds


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    std: float
    values: tuple[float, ...]

    def format(self, scale: float = 100.0, digits: int = 1) -> str:
        return f"{self.mean * scale:.{digits}f} ± {self.std * scale:.{digits}f}"


@dataclass
class FoldReport:
    """Per-metric mean, population std and the per-fold values they came from."""

    metrics: dict[str, MetricSummary] = field(default_factory=dict)
    n_dropped: dict[str, int] = field(default_factory=dict)

    def __getitem__(self, name: str) -> MetricSummary:
        return self.metrics[name]

    def to_dict(self) -> dict:
        return {
            "metrics": {
                k: {"mean": v.mean, "std": v.std, "values": list(v.values)}
                for k, v in self.metrics.items()
            },
            "n_dropped": dict(self.n_dropped),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FoldReport":
        m = {k: MetricSummary(v["mean"], v["std"], tuple(v["values"])) for k, v in d["metrics"].items()}
        return cls(m, dict(d.get("n_dropped", {})))


def aggregate_folds(values: Sequence[float]) -> MetricSummary:
    """Arithmetic mean and population standard deviation over folds."""
    v = [float(x) for x in values]
    if not v:
        raise ValueError("need at least one fold")
    mean = math.fsum(v) / len(v)
    var = math.fsum((x - mean) ** 2 for x in v) / len(v)
    return MetricSummary(mean, math.sqrt(var), tuple(v))


def report_from_results(results: Sequence[FoldResult], names: Sequence[str]) -> FoldReport:
    """Aggregate fold results; folds where a metric is undefined are counted, not averaged."""
    rep = FoldReport()
    for name in names:
        vals = [r.metrics[name] for r in results if name in r.metrics]
        rep.n_dropped[name] = len(results) - len(vals)
        if vals:
            rep.metrics[name] = aggregate_folds(vals)
    return rep


# ---------------------------------------------------------------------------
# ablation


def ablation_run(
    features: FeatureSet,
    sigs: SignatureSet,
    plans: Sequence[SplitPlan],
    masks: Sequence[ModalityMask] = ABLATION_MASKS,
    spec: Optional[ModelSpec] = None,
    task: str = "qc",
) -> dict[str, FoldReport]:
    """One fold report per modality configuration, all on the same folds.

    ``masks`` must be exactly the seven combinations of seq, struct and rmsd.
    """
    if len(masks) != len(ABLATION_MASKS) or set(masks) != set(ABLATION_MASKS):
        raise ValueError("ablation needs exactly the seven seq/struct/rmsd configurations")
    spec = spec or ModelSpec.default_for("logistic", task)
    names = metric_names(task)
    out = {}
    for mask in ABLATION_MASKS:  # canonical row order
        results = run_folds(features, sigs, mask, plans, spec, task)
        out[mask.name] = report_from_results(results, names)
    return out


def modality_gap(
    features: FeatureSet,
    sigs: SignatureSet,
    schemes: Sequence[Scheme] = (Scheme.PARENTAL_FAMILY, Scheme.SIGNATURE),
    n_folds: int = 10,
    base_seed: int = 0,
    masks: Sequence[ModalityMask] = (SEQ_ONLY, MULTIMODAL),
    spec: Optional[ModelSpec] = None,
    task: str = "qc",
) -> dict[tuple[str, str], FoldReport]:
    """Fold reports keyed by ``(scheme, mask name)`` for each scheme and mask.

    Every mask under a scheme is scored on the same folds, so differences
    between masks are paired.
    """
    spec = spec or ModelSpec.default_for("logistic", task)
    names = metric_names(task)
    out = {}
    for scheme in schemes:
        plans = make_folds(scheme, sigs, n_folds, base_seed)
        for mask in masks:
            out[scheme.value, mask.name] = report_from_results(
                run_folds(features, sigs, mask, plans, spec, task), names)
    return out


# ---------------------------------------------------------------------------
# per-family structure analysis


@dataclass(frozen=True)
class FamilyCorrelation:
    family: str
    n: int
    r_vh: Optional[float]
    r_vl: Optional[float]
    r_sum: Optional[float]


def _safe_pearson(x, y) -> Optional[float]:
    try:
        return pearson(x, y)
    except ValueError:
        return None


def family_rmsd_yield_report(
    sigs: SignatureSet,
    rmsd: np.ndarray,
    yields: Optional[Sequence[float]] = None,
    min_n: int = 3,
) -> tuple[list[FamilyCorrelation], list[str]]:
    """Within-family Pearson r between yield and VH, VL and VH+VL RMSD.

    Parameters
    ----------
    sigs : SignatureSet
    rmsd : ndarray, shape (n, 2)
        Columns are VH and VL RMSD, rows aligned with ``sigs``.
    yields : sequence of float, optional
        Defaults to the signatures' mean yields; missing yields are skipped.

    Returns
    -------
    rows : list of FamilyCorrelation
        Sorted by decreasing ``|r_sum|``; undefined correlations are ``None``
        and sort last.
    notes : list of str
        One line per skipped family.
    """
    rmsd = np.asarray(rmsd, dtype=float)
    if rmsd.shape != (len(sigs), 2):
        raise ValueError("rmsd must have shape (n_signatures, 2)")
    y = np.array([np.nan if v is None else v for v in (
        yields if yields is not None else [s.yield_mean for s in sigs]
    )], dtype=float)
    rows, notes = [], []
    for fam in sigs.families:
        idx = [i for i in sigs.family_index[fam] if np.isfinite(y[i])]
        if len(idx) < min_n:
            notes.append(f"{fam}: skipped (n={len(idx)} < {min_n})")
            continue
        yy, vh, vl = y[idx], rmsd[idx, 0], rmsd[idx, 1]
        rows.append(FamilyCorrelation(
            fam, len(idx), _safe_pearson(vh, yy), _safe_pearson(vl, yy), _safe_pearson(vh + vl, yy)
        ))
    rows.sort(key=lambda r: (r.r_sum is None, -abs(r.r_sum or 0.0), r.family))
    return rows, notes


# ---------------------------------------------------------------------------
# tables


def format_reports(
    rows: Mapping[str, FoldReport], names: Sequence[str], fmt: str = "table", label: str = "config"
) -> str:
    """Render ``{row label: FoldReport}`` as an aligned table or as TSV.

    Table cells read ``mean ± std`` in percent; TSV carries raw means and
    standard deviations in separate columns.
    """
    if fmt == "tsv":
        head = [label] + [f"{n}_{s}" for n in names for s in ("mean", "std")] + ["n_folds"]
        lines = ["\t".join(head)]
        for key, rep in rows.items():
            cells = [key]
            for n in names:
                m = rep.metrics.get(n)
                cells += [repr(m.mean), repr(m.std)] if m else ["", ""]
            k = max((len(m.values) for m in rep.metrics.values()), default=0)
            lines.append("\t".join(cells + [str(k)]))
        return "\n".join(lines) + "\n"
    if fmt != "table":
        raise ValueError("format must be 'table' or 'tsv'")
    body = [[key] + [rep.metrics[n].format() if n in rep.metrics else "n/a" for n in names]
            for key, rep in rows.items()]
    head = [label] + list(names)
    widths = [max(len(r[j]) for r in [head] + body) for j in range(len(head))]
    fmt_row = lambda r: "  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip()  # noqa: E731
    sep = "  ".join("-" * w for w in widths)
    return "\n".join([fmt_row(head), sep] + [fmt_row(r) for r in body]) + "\n"


def format_family_report(rows: Sequence[FamilyCorrelation]) -> str:
    f = lambda r: "n/a" if r is None else f"{r:+.3f}"  # noqa: E731
    lines = ["family\tn\tr_vh\tr_vl\tr_sum"]
    lines += [f"{r.family}\t{r.n}\t{f(r.r_vh)}\t{f(r.r_vl)}\t{f(r.r_sum)}" for r in rows]
    return "\n".join(lines) + "\n"


def rmsd_matrix(features: FeatureSet) -> np.ndarray:
    return features.blocks[Modality.RMSD].values
