"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the PASS/FAIL lines are
written straight to the terminal even when output capture is on.
"""

import math
import time

import numpy as np
import pytest
import torch

from abreformat.cli import EXIT_OK, main
from abreformat.dataset import AMINO_ACIDS, aggregate_by_signature
from abreformat.evaluation import ablation_run, modality_gap
from abreformat.experiment import FeatureSet
from abreformat.fusion import ABLATION_MASKS, MULTIMODAL, SEQ_ONLY
from abreformat.linear import LinearConfig, fit_linear, fit_logistic
from abreformat.metrics import Confusion, auprc, auroc, confusion_metrics, screening_efficiency
from abreformat.neural import CnnConfig, MlpConfig, _loss_fn, build_cnn, build_mlp, grad_check
from abreformat.splits import Scheme, make_folds, make_split
from abreformat.struct_features import kabsch_superpose
from abreformat.synthetic import GenConfig, generate
from conftest import record
from oracles import auprc_thresholds, auroc_pairs, kabsch_grid, random_rotation, ridge_lstsq


@pytest.fixture
def verdict(capsys):
    """Print ``[criterion k] PASS|FAIL detail`` and fail the test on FAIL."""

    def emit(k, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {k}] {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return emit


# 1 -------------------------------------------------------------------------


def test_criterion_1_metric_oracles(verdict):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    mismatches = 0
    done = 0
    while done < 500:
        n = int(rng.integers(2, 13))
        y = rng.integers(0, 2, size=n)
        if y.min() == y.max():
            continue
        s = rng.integers(0, 5, size=n) / 4.0 if done % 2 else rng.random(n)  # half with ties
        s, y = s.tolist(), y.tolist()
        mismatches += auroc(s, y) != auroc_pairs(s, y)
        mismatches += auprc(s, y) != auprc_thresholds(s, y)
        done += 1
    dt = time.perf_counter() - t0
    verdict(1, mismatches == 0 and dt < 5.0, f"500 instances, {mismatches} mismatches, {dt:.2f}s")


# 2 -------------------------------------------------------------------------


def test_criterion_2_case_study_identity(verdict):
    c = Confusion(tp=34, fp=5, fn=0, tn=16)
    m = confusion_metrics(c)
    g = screening_efficiency(c, 0.618)
    ok = (
        abs(m["precision"] - 0.872) <= 1e-3
        and m["recall"] == 1.0
        and abs(m["accuracy"] - 0.909) <= 1e-3
        and abs(g["abs_gain"] - 0.254) <= 1e-3
        and abs(g["mult_gain"] - 1.41) <= 1e-2
    )
    verdict(2, ok, f"precision {m['precision']:.4f} recall {m['recall']:.3f} accuracy {m['accuracy']:.4f} "
                   f"abs_gain {g['abs_gain']:+.4f} mult_gain {g['mult_gain']:.4f}")


# 3 -------------------------------------------------------------------------


def test_criterion_3_kabsch(verdict):
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    worst_rigid = worst_sym = 0.0
    for _ in range(1000):
        n = int(rng.integers(3, 161))
        P = rng.normal(size=(n, 3)) * rng.uniform(1, 20)
        Q = P @ random_rotation(rng).T + rng.normal(scale=50, size=3)
        worst_rigid = max(worst_rigid, kabsch_superpose(P, Q)[2])
        Qn = Q + rng.normal(size=(n, 3))
        worst_sym = max(worst_sym, abs(kabsch_superpose(P, Qn)[2] - kabsch_superpose(Qn, P)[2]))
    grid_ok = 0
    for case in range(20):
        P = rng.normal(size=(4, 3)) * 5
        Q = P @ random_rotation(rng).T + rng.normal(size=3) + rng.normal(scale=0.1, size=(4, 3))
        k, g = kabsch_superpose(P, Q)[2], kabsch_grid(P, Q)
        # each Euler angle is within half a final step of the optimum
        resolution = 0.002 * math.sqrt(3) * np.abs(P - P.mean(axis=0)).max()
        grid_ok += (k <= g + 1e-12) and (g - k <= resolution)
    dt = time.perf_counter() - t0
    ok = worst_rigid <= 1e-8 and worst_sym <= 1e-9 and grid_ok == 20 and dt < 10.0
    verdict(3, ok, f"max rigid rmsd {worst_rigid:.2e}, max asymmetry {worst_sym:.2e}, "
                   f"grid agreement {grid_ok}/20, {dt:.2f}s")


# 4 -------------------------------------------------------------------------


def test_criterion_4_convex_solvers(verdict):
    rng = np.random.default_rng(4)
    worst_ridge = 0.0
    for _ in range(100):
        n, d = int(rng.integers(2, 11)), int(rng.integers(1, 11))
        C = float(10 ** rng.uniform(-2, 1))
        X, y = rng.normal(size=(n, d)), rng.normal(size=n)
        m = fit_linear(X, y, LinearConfig(task="REGRESS", penalty="L2", inverse_reg_C=C))
        worst_ridge = max(worst_ridge, float(np.max(np.abs(m.weights - ridge_lstsq(X, y, C)))))

    X = rng.normal(size=(200, 20))
    y = (X @ rng.normal(size=20) + rng.normal(size=200) > 0).astype(float)
    l2 = fit_logistic(X, y, LinearConfig(task="CLASSIFY", penalty="L2", inverse_reg_C=10.0))
    l1 = fit_logistic(X, y, LinearConfig(task="CLASSIFY", penalty="L1", inverse_reg_C=1e-6))
    max_l1 = float(np.max(np.abs(l1.coef)))
    ok = worst_ridge <= 1e-6 and l2.final_grad_norm <= 1e-6 and max_l1 <= 1e-3
    verdict(4, ok, f"ridge max dev {worst_ridge:.2e}, logistic L2 grad norm {l2.final_grad_norm:.2e}, "
                   f"L1 max |w| {max_l1:.2e}")


# 5 -------------------------------------------------------------------------


def test_criterion_5_neural_grad_checks(verdict):
    rng = np.random.default_rng(5)
    torch.manual_seed(5)
    mlp = build_mlp(30, MlpConfig(hidden_dim=32))
    X, y = rng.normal(size=(16, 30)), (rng.random(16) > 0.5).astype(float)
    e_mlp = grad_check(mlp, _loss_fn("classify"), (X, y), n_params=200, seed=0)
    cnn = build_cnn(8, CnnConfig(n_layers=3, rep_dim=16, expansion=2.0))
    Xc, yc = rng.normal(size=(6, 60, 8)), rng.normal(size=6)
    e_cnn = grad_check(cnn, _loss_fn("regress"), (Xc, yc), n_params=200, seed=0)
    verdict(5, e_mlp <= 1e-5 and e_cnn <= 1e-5,
            f"200 params each, max rel err MLP {e_mlp:.2e}, CNN {e_cnn:.2e}")


# 6 -------------------------------------------------------------------------


def _split_corpus():
    rng = np.random.default_rng(6)
    recs = []
    for f, size in enumerate([60, 45, 40, 30, 25, 20, 15, 12, 10, 8]):
        for k in range(size):
            recs.append(record(len(recs), vh="".join(rng.choice(list(AMINO_ACIDS), 14)),
                               family=f"F{f}", linker=f"L{k % 4}"))
    return aggregate_by_signature(recs)


def test_criterion_6_split_invariants(verdict):
    sigs = _split_corpus()
    n = len(sigs)
    fam = np.array([s.parental_family for s in sigs])
    bad = {"overlap": 0, "coverage": 0, "family_leak": 0, "batch": 0}
    for seed in range(1000):
        for scheme in Scheme:
            plan = make_split(scheme, sigs, seed, target_family="F0", batch_size=32)
            parts = [np.asarray(p, dtype=int) for p in (plan.train, plan.val, plan.test)]
            allidx = np.concatenate(parts)
            bad["overlap"] += len(np.unique(allidx)) != len(allidx)
            bad["coverage"] += len(allidx) != n
            if scheme is Scheme.PARENTAL_FAMILY:
                f = [set(fam[p]) for p in parts]
                bad["family_leak"] += bool(f[0] & f[1] or f[0] & f[2] or f[1] & f[2])
            if scheme is Scheme.TARGET_FAMILY:
                bad["batch"] += int(np.sum(fam[parts[0]] == "F0")) != 32
                bad["family_leak"] += bool(np.any(fam[parts[1]] != "F0") or np.any(fam[parts[2]] != "F0"))
    verdict(6, not any(bad.values()), f"3000 splits, violations {bad}")


# 7 and 8 -------------------------------------------------------------------


def _benchmark(tmp_path_factory, **kw):
    ds = generate(GenConfig(n_families=50, n_signatures=1500, seed=0, **kw))
    d = tmp_path_factory.mktemp("bench")
    ds.write(d)
    sigs = ds.signatures()
    return sigs, FeatureSet.from_data_dir(sigs, d)


@pytest.mark.slow
def test_criterion_7_family_split_gap(verdict, tmp_path_factory):
    t0 = time.perf_counter()
    sigs, features = _benchmark(tmp_path_factory)
    rep = modality_gap(features, sigs, n_folds=10, base_seed=0)
    gap = {s: rep[s, MULTIMODAL.name]["auroc"].mean - rep[s, SEQ_ONLY.name]["auroc"].mean
           for s in ("PARENTAL_FAMILY", "SIGNATURE")}
    dt = time.perf_counter() - t0
    ok = gap["PARENTAL_FAMILY"] >= 0.10 and gap["SIGNATURE"] < gap["PARENTAL_FAMILY"] and dt < 300
    verdict(7, ok, f"{len(sigs)} signatures, 50 families, 10 folds; AUROC gap family "
                   f"{100 * gap['PARENTAL_FAMILY']:+.1f} pts, signature {100 * gap['SIGNATURE']:+.1f} pts, "
                   f"{dt:.0f}s")


@pytest.mark.slow
def test_criterion_8_ablation_mechanism(verdict, tmp_path_factory):
    # only the per-residue structure signal is planted; global RMSD cannot see it
    sigs, features = _benchmark(tmp_path_factory, structure_signal_weight=0.0)
    plans = make_folds(Scheme.SIGNATURE, sigs, 10, 0)
    table = ablation_run(features, sigs, plans)
    a = {k: v["auroc"].mean for k, v in table.items()}
    singles = [m.name for m in ABLATION_MASKS if len(m.flags) == 1]
    ok = all(a["seq+struct"] >= a[s] for s in singles) and a["rmsd"] <= 0.6
    verdict(8, ok, "mean AUROC " + ", ".join(f"{k} {100 * v:.1f}" for k, v in a.items()))


# 9 -------------------------------------------------------------------------


def _cli_run(root, monkeypatch):
    root.mkdir()
    monkeypatch.chdir(root)
    common = ["--work", "work", "--folds", "3", "--seed", "11"]
    steps = [
        ["gen", "--out", "data", "--n-signatures", "400", "--n-families", "16", "--seed", "11"],
        ["featurize", "--data", "data", *common],
        ["split", *common],
        ["train", "--name", "lin", *common],
        ["eval", "--name", "lin", *common],
        ["train", "--name", "mlp", "--model", "mlp", *common],
        ["eval", "--name", "mlp", "--model", "mlp", *common],
    ]
    codes = [main(s) for s in steps]
    reports = {p.name: p.read_bytes() for p in sorted((root / "work" / "reports").glob("*.json"))}
    return codes, reports


@pytest.mark.slow
def test_criterion_9_end_to_end_determinism(verdict, tmp_path, monkeypatch):
    codes_a, rep_a = _cli_run(tmp_path / "a", monkeypatch)
    codes_b, rep_b = _cli_run(tmp_path / "b", monkeypatch)
    ok = (set(codes_a + codes_b) == {EXIT_OK} and len(rep_a) == 2 and rep_a == rep_b)
    verdict(9, ok, f"reports {sorted(rep_a)} bit-identical across two runs: {rep_a == rep_b}")
