import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abreformat.splits import Scheme, make_split
from abreformat.tuning import (
    CNN_SPACE,
    LINEAR_GRID,
    MLP_GRID,
    Choice,
    PartitionAccessError,
    PartitionView,
    Range,
    SearchSpace,
    grid_search,
    random_search,
    read_trial_log,
    views,
)
from conftest import random_sigset


@pytest.fixture
def tv():
    return PartitionView("train", np.zeros((3, 2)), np.zeros(3)), PartitionView("val", np.ones((2, 2)), np.ones(2))


def test_linear_grid_has_eight_cells(tv):
    calls = []
    res = grid_search(LINEAR_GRID, lambda p, tr, va: calls.append(p) or p["C"], *tv)
    assert len(calls) == 8
    assert res.best_params["C"] == 10.0 and res.best_params["penalty"] == "L1"


def test_mlp_grid_size():
    assert len(MLP_GRID.grid()) == 3 * 3 * 2 * 2 * 2


def test_single_cell(tv):
    res = grid_search(SearchSpace({"a": Choice((7,))}), lambda p, tr, va: 0.3, *tv)
    assert res.best_params == {"a": 7} and res.best_score == 0.3


def test_tie_goes_to_first(tv):
    space = SearchSpace({"a": Choice((1, 2, 3))})
    res = grid_search(space, lambda p, tr, va: 0.5 if p["a"] in (2, 3) else 0.1, *tv)
    assert res.best_params == {"a": 2}


def test_minimize_and_nan(tv):
    space = SearchSpace({"a": Choice((1, 2, 3))})
    res = grid_search(space, lambda p, tr, va: math.nan if p["a"] == 1 else p["a"], *tv, maximize=False)
    assert res.best_params == {"a": 2}


def test_single_random_trial(tv):
    res = random_search(CNN_SPACE, lambda p, tr, va: 1.0, *tv, n_trials=1, seed=3)
    assert len(res.trials) == 1 and res.best_params == res.trials[0].params


def test_random_search_deterministic_and_in_range(tv):
    a = random_search(CNN_SPACE, lambda p, tr, va: p["lr"], *tv, n_trials=50, seed=11)
    b = random_search(CNN_SPACE, lambda p, tr, va: p["lr"], *tv, n_trials=50, seed=11)
    assert [t.params for t in a.trials] == [t.params for t in b.trials]
    for t in a.trials:
        assert 1e-4 <= t.params["lr"] <= 1e-2
        assert 1 <= t.params["n_layers"] <= 5 and isinstance(t.params["n_layers"], int)
        assert 10 <= t.params["epochs"] <= 50


def test_grid_requires_finite_space():
    with pytest.raises(ValueError):
        CNN_SPACE.grid()


def test_test_partition_is_guarded():
    v = PartitionView("test", np.zeros((2, 2)), np.zeros(2))
    with pytest.raises(PartitionAccessError):
        v.X
    with pytest.raises(PartitionAccessError):
        grid_search(LINEAR_GRID, lambda p, tr, va: 0.0, PartitionView("train", 0, 0), v)


def test_objective_never_sees_test_rows(rng):
    sigs = random_sigset(rng, [20, 15, 10])
    plan = make_split(Scheme.SIGNATURE, sigs, 0)
    X = np.arange(len(sigs), dtype=float)[:, None]
    vw = views(X, X[:, 0], plan)
    seen = set()

    def objective(p, tr, va):
        seen.update(tr.X[:, 0].astype(int).tolist())
        seen.update(va.X[:, 0].astype(int).tolist())
        return 0.0

    grid_search(LINEAR_GRID, objective, vw["train"], vw["val"])
    assert seen == set(plan.train) | set(plan.val)
    assert not seen & set(plan.test)
    with pytest.raises(PartitionAccessError):
        vw["test"].y


def test_trial_log(tmp_path, tv):
    res = grid_search(LINEAR_GRID, lambda p, tr, va: p["C"], *tv, log_path=tmp_path / "t.jsonl")
    assert read_trial_log(tmp_path / "t.jsonl") == res.trials


def test_space_from_dict():
    s = SearchSpace.from_dict({"C": [0.1, 1.0], "lr": {"lo": 1e-4, "hi": 1e-2, "scale": "log"}})
    assert isinstance(s.params["C"], Choice) and isinstance(s.params["lr"], Range)
    with pytest.raises(ValueError):
        Range(1.0, 0.5)
    with pytest.raises(ValueError):
        Range(0.0, 1.0, scale="log")


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=12), st.booleans())
def test_best_equals_extreme_of_log(scores, maximize):
    tv = PartitionView("train", 0, 0), PartitionView("val", 0, 0)
    space = SearchSpace({"i": Choice(tuple(range(len(scores))))})
    res = grid_search(space, lambda p, tr, va: scores[p["i"]], *tv, maximize=maximize)
    logged = [t.score for t in res.trials]
    assert res.best_score == (max(logged) if maximize else min(logged))
    assert res.best_params["i"] == logged.index(res.best_score)
