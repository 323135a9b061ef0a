"""Grid search and seeded random search, selecting on a validation metric.

Evaluation callbacks receive :class:`PartitionView` handles tagged with
their partition; a view tagged ``test`` refuses to hand out its rows, so a
search cannot touch test data by accident.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, Union

import numpy as np


class PartitionAccessError(RuntimeError):
    pass


@dataclass(frozen=True)
class PartitionView:
    """Rows of one partition; ``X``/``y`` raise for the test partition."""

    tag: str
    _X: Any
    _y: Any

    @property
    def X(self):
        self._guard()
        return self._X

    @property
    def y(self):
        self._guard()
        return self._y

    def _guard(self):
        if self.tag == "test":
            raise PartitionAccessError("hyperparameter search may not read test rows")


@dataclass(frozen=True)
class Choice:
    values: tuple

    def __post_init__(self):
        if len(self.values) == 0:
            raise ValueError("a choice needs at least one value")

    def sample(self, rng: np.random.Generator):
        return self.values[int(rng.integers(len(self.values)))]


@dataclass(frozen=True)
class Range:
    lo: float
    hi: float
    scale: str = "linear"  # or "log"
    integer: bool = False

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("range needs lo < hi")
        if self.scale not in ("linear", "log"):
            raise ValueError("scale must be 'linear' or 'log'")
        if self.scale == "log" and self.lo <= 0:
            raise ValueError("log-scaled range needs lo > 0")

    def sample(self, rng: np.random.Generator):
        if self.scale == "log":
            v = math.exp(rng.uniform(math.log(self.lo), math.log(self.hi)))
        else:
            v = rng.uniform(self.lo, self.hi)
        if self.integer:
            return int(min(max(round(v), math.ceil(self.lo)), math.floor(self.hi)))
        return float(min(max(v, self.lo), self.hi))


Param = Union[Choice, Range]


@dataclass(frozen=True)
class SearchSpace:
    params: Mapping[str, Param]

    def __post_init__(self):
        if not self.params:
            raise ValueError("empty search space")

    @property
    def names(self) -> list[str]:
        return sorted(self.params)

    def is_finite(self) -> bool:
        return all(isinstance(p, Choice) for p in self.params.values())

    def grid(self) -> list[dict]:
        """Cartesian product, parameters sorted by name, values in declared order."""
        if not self.is_finite():
            raise ValueError("grid search needs finite choices for every parameter")
        names = self.names
        return [dict(zip(names, combo))
                for combo in itertools.product(*(self.params[n].values for n in names))]

    def sample(self, rng: np.random.Generator) -> dict:
        return {n: self.params[n].sample(rng) for n in self.names}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "SearchSpace":
        """Build from ``{name: [values]}`` or ``{name: {"lo", "hi", "scale", "integer"}}``."""
        params: dict[str, Param] = {}
        for name, spec in d.items():
            if isinstance(spec, Mapping):
                params[name] = Range(float(spec["lo"]), float(spec["hi"]),
                                     spec.get("scale", "linear"), bool(spec.get("integer", False)))
            else:
                params[name] = Choice(tuple(spec))
        return cls(params)


# search spaces used for the final model selection
LINEAR_GRID = SearchSpace({"C": Choice((0.01, 0.1, 1.0, 10.0)), "penalty": Choice(("L1", "L2"))})
MLP_GRID = SearchSpace({
    "hidden_dim": Choice((64, 128, 256)),
    "dropout": Choice((0.1, 0.2, 0.3)),
    "lr": Choice((1e-3, 1e-4)),
    "batch_size": Choice((32, 64)),
    "linear_head": Choice((True, False)),
})
CNN_SPACE = SearchSpace({
    "n_layers": Range(1, 5, integer=True),
    "rep_dim": Choice((16, 32, 64, 128)),
    "expansion": Range(1.0, 4.0),
    "batch_norm": Choice((False, True)),
    "lr": Range(1e-4, 1e-2, scale="log"),
    "batch_size": Choice((16, 32, 64)),
    "epochs": Range(10, 50, integer=True),
})
DEFAULT_TRIALS = 50


@dataclass
class Trial:
    index: int
    params: dict
    score: float

    def to_dict(self) -> dict:
        return {"index": self.index, "params": self.params, "score": self.score}


@dataclass
class SearchResult:
    best_params: dict
    best_score: float
    trials: list[Trial] = field(default_factory=list)


Objective = Callable[[dict, PartitionView, PartitionView], float]


def _better(a: float, b: float, maximize: bool) -> bool:
    if math.isnan(a):
        return False
    if math.isnan(b):
        return True
    return a > b if maximize else a < b


def _log(trial: Trial, log_path) -> None:
    if log_path is not None:
        with open(log_path, "a") as fh:
            fh.write(json.dumps(trial.to_dict(), sort_keys=True) + "\n")


def _run(configs, objective, train, val, maximize, log_path) -> SearchResult:
    if val.tag == "test" or train.tag == "test":
        raise PartitionAccessError("search partitions must be train and val")
    trials, best = [], None
    for i, params in enumerate(configs):
        score = float(objective(params, train, val))
        t = Trial(i, params, score)
        trials.append(t)
        _log(t, log_path)
        if best is None or _better(score, best.score, maximize):  # strict: ties keep the first
            best = t
    return SearchResult(dict(best.params), best.score, trials)


def grid_search(
    space: SearchSpace,
    objective: Objective,
    train: PartitionView,
    val: PartitionView,
    maximize: bool = True,
    log_path: Optional[Path] = None,
) -> SearchResult:
    """Evaluate every grid cell; ties go to the first cell in enumeration order."""
    return _run(space.grid(), objective, train, val, maximize, log_path)


def random_search(
    space: SearchSpace,
    objective: Objective,
    train: PartitionView,
    val: PartitionView,
    n_trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    maximize: bool = True,
    log_path: Optional[Path] = None,
) -> SearchResult:
    """Independent draws from ``space``; the sequence is fixed by ``seed``."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    rng = np.random.default_rng(seed)
    configs = [space.sample(rng) for _ in range(n_trials)]
    return _run(configs, objective, train, val, maximize, log_path)


def read_trial_log(path) -> list[Trial]:
    with open(path) as fh:
        return [Trial(**json.loads(line)) for line in fh if line.strip()]


def views(X, y, plan) -> dict[str, PartitionView]:
    """Partition-tagged views for a split plan (row indices into ``X``/``y``)."""
    return {name: PartitionView(name, X[list(plan.partition(name))], y[list(plan.partition(name))])
            for name in ("train", "val", "test")}
