import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abreformat.splits import (
    Scheme,
    check_plan,
    largest_family,
    load_folds,
    make_folds,
    make_split,
    parental_family_split,
    save_folds,
    signature_split,
    target_family_split,
)
from conftest import random_sigset


def families_of(sigs, part):
    return {sigs[i].parental_family for i in part}


def greedy_family_oracle(sizes, ratios):
    """Hand-run of largest-first assignment to the partition with the largest deficit."""
    target = np.array(ratios) * sum(sizes)
    filled = np.zeros(3)
    out = [[], [], []]
    for s in sorted(sizes, reverse=True):
        k = int(np.argmax(target - filled))
        out[k].append(s)
        filled[k] += s
    return [sorted(p, reverse=True) for p in out]


def test_signature_split_single_family_exact(rng):
    sigs = random_sigset(rng, [10])
    assert signature_split(sigs, seed=3).sizes == (6, 1, 3)


def test_signature_split_deterministic(rng):
    sigs = random_sigset(rng, [10, 7, 5])
    assert signature_split(sigs, seed=9) == signature_split(sigs, seed=9)


def test_small_family_goes_to_train(rng):
    sigs = random_sigset(rng, [2, 10])
    plan = signature_split(sigs, seed=0)
    small = sigs.family_index["F00"]
    assert set(small) <= set(plan.train)


def test_three_equal_families():
    sigs = random_sigset(np.random.default_rng(0), [10, 10, 10])
    plan = parental_family_split(sigs, seed=4)
    assert plan.sizes == (10, 10, 10)
    assert all(len(families_of(sigs, p)) == 1 for p in (plan.train, plan.val, plan.test))


def test_greedy_family_assignment_matches_oracle():
    sizes = [40, 30, 20, 5, 5]
    sigs = random_sigset(np.random.default_rng(1), sizes)
    plan = parental_family_split(sigs, seed=0)
    got = [sorted((len(sigs.family_index[f]) for f in families_of(sigs, p)), reverse=True)
           for p in (plan.train, plan.val, plan.test)]
    assert got == greedy_family_oracle(sizes, (0.6, 0.1, 0.3)) == [[40, 20], [5, 5], [30]]
    assert plan.sizes == (60, 10, 30)


def test_family_split_needs_three_families(rng):
    with pytest.raises(ValueError):
        parental_family_split(random_sigset(rng, [10, 10]))


def test_target_family_sizes(rng):
    sigs = random_sigset(rng, [40, 12, 9])
    plan = target_family_split(sigs, "F00", batch_size=8, seed=2)
    target = set(sigs.family_index["F00"])
    assert len(plan.val) == 8 and len(plan.test) == 24
    assert len(set(plan.train) & target) == 8
    assert set(plan.train) - target == set(sigs.family_index["F01"] + sigs.family_index["F02"])


def test_target_batch_equal_to_family_errors(rng):
    sigs = random_sigset(rng, [8, 5, 5])
    with pytest.raises(ValueError):
        target_family_split(sigs, "F00", batch_size=8)


def test_make_folds_distinct_seeds_and_deterministic(rng):
    sigs = random_sigset(rng, [12, 9, 8, 6])
    folds = make_folds(Scheme.SIGNATURE, sigs, 10, base_seed=5)
    assert [p.fold_seed for p in folds] == list(range(5, 15))
    assert folds == make_folds(Scheme.SIGNATURE, sigs, 10, base_seed=5)
    assert len(make_folds(Scheme.SIGNATURE, sigs, 1)) == 1
    with pytest.raises(ValueError):
        make_folds(Scheme.SIGNATURE, sigs, 0)


def test_fold_file_roundtrip(tmp_path, rng):
    sigs = random_sigset(rng, [30, 8])
    folds = make_folds(Scheme.TARGET_FAMILY, sigs, 3, target_family=largest_family(sigs), batch_size=4)
    save_folds(folds, tmp_path / "f.json", config_hash="abc")
    back, meta = load_folds(tmp_path / "f.json")
    assert back == folds and meta == {"config_hash": "abc"}


def test_scheme_aliases():
    assert Scheme.parse("family") is Scheme.PARENTAL_FAMILY
    assert Scheme.parse("SIGNATURE") is Scheme.SIGNATURE
    assert Scheme.parse("target") is Scheme.TARGET_FAMILY
    with pytest.raises(ValueError):
        Scheme.parse("random")


# -- properties -------------------------------------------------------------

family_sizes = st.lists(st.integers(1, 25), min_size=3, max_size=12).filter(lambda s: sum(s) >= 10)


@settings(max_examples=60, deadline=None)
@given(family_sizes, st.integers(0, 2**31 - 1))
def test_every_scheme_is_a_valid_partition(sizes, seed):
    sigs = random_sigset(np.random.default_rng(seed), sizes)
    plans = [signature_split(sigs, seed=seed), parental_family_split(sigs, seed=seed)]
    fam = largest_family(sigs)
    if len(sigs.family_index[fam]) > 2:
        plans.append(target_family_split(sigs, fam, batch_size=2, seed=seed))
    for plan in plans:
        check_plan(plan, sigs)
        assert sorted(plan.train + plan.val + plan.test) == list(range(len(sigs)))
    fam_sets = [families_of(sigs, p) for p in (plans[1].train, plans[1].val, plans[1].test)]
    assert all(fam_sets) and not (fam_sets[0] & fam_sets[1] or fam_sets[0] & fam_sets[2]
                                  or fam_sets[1] & fam_sets[2])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(3, 60), min_size=1, max_size=15)
       .filter(lambda s: sum(s) >= 10 and len(s) <= 0.1 * sum(s)),
       st.integers(0, 2**31 - 1))
def test_signature_split_sizes_track_targets(sizes, seed):
    # one member per partition per family must fit inside the smallest target
    sigs = random_sigset(np.random.default_rng(seed), sizes)
    plan = signature_split(sigs, seed=seed)
    target = len(sigs) * np.array([0.6, 0.1, 0.3])
    assert np.all(np.abs(np.array(plan.sizes) - target) <= 1.0)
    for fam, idx in sigs.family_index.items():
        for part in (plan.train, plan.val, plan.test):
            assert set(idx) & set(part), f"{fam} missing from a partition"


@settings(max_examples=40, deadline=None)
@given(family_sizes, st.integers(0, 1000))
def test_same_seed_same_plan(sizes, seed):
    sigs = random_sigset(np.random.default_rng(0), sizes)
    for scheme in (Scheme.SIGNATURE, Scheme.PARENTAL_FAMILY):
        assert make_split(scheme, sigs, seed) == make_split(scheme, sigs, seed)
