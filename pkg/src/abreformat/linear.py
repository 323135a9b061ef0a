"""Penalized logistic and least-squares regression.

Both models minimize a mean loss plus ``penalty(w) / (C * n)``, where
``penalty`` is ``||w||_2^2`` (L2) or ``||w||_1`` (L1) and the intercept is
never penalized. ``C`` is an inverse regularization strength, so larger ``C``
means weaker regularization.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Optional

import numpy as np
from scipy import linalg, optimize
from scipy.special import expit


class Task(str, Enum):
    CLASSIFY = "CLASSIFY"
    REGRESS = "REGRESS"


class Penalty(str, Enum):
    L1 = "L1"
    L2 = "L2"
    NONE = "NONE"


class NumericalError(RuntimeError):
    pass


@dataclass(frozen=True)
class LinearConfig:
    task: Task = Task.CLASSIFY
    penalty: Penalty = Penalty.L2
    inverse_reg_C: float = 1.0
    max_iter: int = 10_000
    tol: float = 1e-6
    fit_intercept: bool = True

    def __post_init__(self):
        if not isinstance(self.task, Task):
            object.__setattr__(self, "task", Task(self.task.upper()))
        if not isinstance(self.penalty, Penalty):
            object.__setattr__(self, "penalty", Penalty(self.penalty.upper()))
        if not self.inverse_reg_C > 0:
            raise ValueError("C must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["task"] = self.task.value
        d["penalty"] = self.penalty.value
        return d


@dataclass
class LinearModel:
    weights: np.ndarray  # coefficients followed by the intercept
    config: LinearConfig
    converged: bool
    final_grad_norm: float
    n_iter: int = 0
    trace: list[float] = field(default_factory=list)

    @property
    def coef(self) -> np.ndarray:
        return self.weights[:-1]

    @property
    def intercept(self) -> float:
        return float(self.weights[-1])

    def to_dict(self) -> dict:
        return {
            "kind": "linear",
            "config": self.config.to_dict(),
            "weights": self.weights.tolist(),
            "converged": self.converged,
            "final_grad_norm": self.final_grad_norm,
            "n_iter": self.n_iter,
            "trace": self.trace,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        return cls(
            weights=np.asarray(d["weights"], dtype=float),
            config=LinearConfig(**d["config"]),
            converged=bool(d["converged"]),
            final_grad_norm=float(d["final_grad_norm"]),
            n_iter=int(d.get("n_iter", 0)),
            trace=list(d.get("trace", [])),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "LinearModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# objectives


def _lam(config: LinearConfig, n: int) -> float:
    return 0.0 if config.penalty is Penalty.NONE else 1.0 / (config.inverse_reg_C * n)


def _margin(theta, X):
    return X @ theta[:-1] + theta[-1]


def _loss_grad(theta, X, y, task: Task):
    """Mean data loss and its gradient with respect to (w, b)."""
    n = len(y)
    m = _margin(theta, X)
    if task is Task.CLASSIFY:
        loss = float(np.mean(np.logaddexp(0.0, m) - y * m))
        r = (expit(m) - y) / n
    else:
        res = m - y
        loss = float(np.mean(res * res))
        r = 2.0 * res / n
    return loss, np.r_[X.T @ r, r.sum()]


def _penalty(w, config, n):
    lam = _lam(config, n)
    if config.penalty is Penalty.L1:
        return lam * float(np.abs(w).sum())
    return lam * float(w @ w)


def objective(weights: np.ndarray, X: np.ndarray, y: np.ndarray, config: LinearConfig) -> float:
    """Penalized training objective at ``weights`` (coefficients then intercept)."""
    loss, _ = _loss_grad(weights, X, y, config.task)
    return loss + _penalty(weights[:-1], config, len(y))


def smooth_gradient(weights, X, y, config: LinearConfig) -> np.ndarray:
    """Gradient of the objective for L2/NONE; of the data loss only for L1."""
    _, g = _loss_grad(weights, X, y, config.task)
    if config.penalty is Penalty.L2:
        g[:-1] += 2.0 * _lam(config, len(y)) * weights[:-1]
    if not config.fit_intercept:
        g[-1] = 0.0
    return g


def optimality_residual(weights, X, y, config: LinearConfig) -> float:
    """Distance of zero from the (sub)gradient of the objective, max-norm for L1."""
    g = smooth_gradient(weights, X, y, config)
    if config.penalty is not Penalty.L1:
        return float(np.linalg.norm(g))
    lam = _lam(config, len(y))
    w, gw = weights[:-1], g[:-1]
    viol = np.where(w != 0, np.abs(gw + lam * np.sign(w)), np.maximum(np.abs(gw) - lam, 0.0))
    return float(max(viol.max(initial=0.0), abs(g[-1])))


# ---------------------------------------------------------------------------
# solvers


def _validate(X, y, classify: bool):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError("X must be (n, d) and y must be (n,)")
    if X.shape[0] < 2:
        raise ValueError("need at least 2 samples")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite values in X or y")
    if classify:
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("classification labels must be 0/1")
        if len(np.unique(y)) < 2:
            raise ValueError("both classes must be present")
    return X, y


def _row_space(X) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal row-space coordinates of ``X``: ``X = F @ V.T`` with ``F = U S``.

    Returns ``F`` and ``U / S`` (so that ``V @ beta = X.T @ (U / S) @ beta``).
    Directions with singular value below 1e-6 of the largest are dropped;
    the caller checks optimality in the full space.
    """
    s2, U = linalg.eigh(X @ X.T)
    keep = s2 > (1e-12 * s2.max() if s2.max() > 0 else np.inf)
    s = np.sqrt(s2[keep])
    U = U[:, keep]
    return U * s, U / s


def _newton(X, y, config: LinearConfig) -> LinearModel:
    """Trust-region Newton-CG for the smooth (L2 / unpenalized) problems.

    With more features than samples the optimal coefficients lie in the row
    space of ``X`` (stationarity gives ``w = -X' r / (2 lam n)``), so the
    problem is solved in those at most ``n`` coordinates and mapped back.
    The squared-norm penalty is unchanged by the orthonormal change of basis.
    """
    n, d = X.shape
    if d > n:
        F, back = _row_space(X)
        inner = replace(config, tol=config.tol / 10)
        reduced = _newton(F, y, inner)
        w = X.T @ (back @ reduced.coef)
        theta = np.r_[w, reduced.intercept]
        gnorm = optimality_residual(theta, X, y, config)
        return LinearModel(theta, config, gnorm <= config.tol, gnorm, reduced.n_iter, reduced.trace)

    lam = _lam(config, n)
    classify = config.task is Task.CLASSIFY
    trace: list[float] = []

    def fun(theta):
        f = objective(theta, X, y, config)
        return f, smooth_gradient(theta, X, y, config)

    def hessp(theta, v):
        Xv = X @ v[:-1] + v[-1]
        if classify:
            p = expit(_margin(theta, X))
            Xv = Xv * p * (1.0 - p)
        else:
            Xv = 2.0 * Xv
        Xv /= n
        out = np.r_[X.T @ Xv, Xv.sum()]
        out[:-1] += 2.0 * lam * v[:-1]
        if not config.fit_intercept:
            out[-1] = v[-1]
        return out

    theta0 = np.zeros(d + 1)
    if config.fit_intercept:
        ybar = y.mean()
        theta0[-1] = math.log(ybar / (1 - ybar)) if classify else ybar
    res = optimize.minimize(
        fun,
        theta0,
        jac=True,
        hessp=hessp,
        method="trust-ncg",
        callback=lambda th: trace.append(objective(th, X, y, config)),
        options={"gtol": config.tol, "maxiter": config.max_iter},
    )
    theta = res.x
    if not config.fit_intercept:
        theta[-1] = 0.0
    gnorm = optimality_residual(theta, X, y, config)
    return LinearModel(theta, config, gnorm <= config.tol, gnorm, int(res.nit), _thin(trace))


def _soft(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _fista(X, y, config: LinearConfig) -> LinearModel:
    """Accelerated proximal gradient with backtracking and adaptive restart."""
    n, d = X.shape
    lam = _lam(config, n)
    task = config.task

    def f_and_g(theta):
        loss, g = _loss_grad(theta, X, y, task)
        if not config.fit_intercept:
            g[-1] = 0.0
        return loss, g

    def prox(theta, step):
        out = theta.copy()
        out[:-1] = _soft(theta[:-1], lam * step)
        return out

    x = np.zeros(d + 1)
    if config.fit_intercept:
        ybar = y.mean()
        if task is Task.CLASSIFY:
            x[-1] = math.log(ybar / (1 - ybar))
        else:
            x[-1] = ybar
    z, t, L = x.copy(), 1.0, 1.0
    trace: list[float] = []
    F_prev = objective(x, X, y, config)
    resid = optimality_residual(x, X, y, config)
    it = 0
    while resid > config.tol and it < config.max_iter:
        it += 1
        fz, gz = f_and_g(z)
        while True:
            x_new = prox(z - gz / L, 1.0 / L)
            diff = x_new - z
            f_new, _ = f_and_g(x_new)
            if f_new <= fz + gz @ diff + 0.5 * L * (diff @ diff) + 1e-12 * abs(fz):
                break
            L *= 2.0
        F_new = f_new + lam * float(np.abs(x_new[:-1]).sum())
        if F_new > F_prev:
            z, t = x.copy(), 1.0  # restart momentum
            continue
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        z = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, t, F_prev = x_new, t_new, F_new
        L = max(L * 0.9, 1e-12)
        trace.append(F_new)
        if it % 10 == 0 or it == config.max_iter:
            resid = optimality_residual(x, X, y, config)
    resid = optimality_residual(x, X, y, config)
    return LinearModel(x, config, resid <= config.tol, resid, it, _thin(trace))


def _ridge_closed_form(X, y, config: LinearConfig) -> LinearModel:
    n, d = X.shape
    if config.fit_intercept:
        xm, ym = X.mean(axis=0), y.mean()
    else:
        xm, ym = np.zeros(d), 0.0
    Xc, yc = X - xm, y - ym
    ridge = 1.0 / config.inverse_reg_C  # stationarity: (Xc'Xc + I/C) w = Xc'yc
    if d <= n:
        w = linalg.solve(Xc.T @ Xc + ridge * np.eye(d), Xc.T @ yc, assume_a="pos")
    else:
        w = Xc.T @ linalg.solve(Xc @ Xc.T + ridge * np.eye(n), yc, assume_a="pos")
    theta = np.r_[w, ym - xm @ w]
    g = optimality_residual(theta, X, y, config)
    return LinearModel(theta, config, g <= config.tol, g, 1, [objective(theta, X, y, config)])


def _least_squares(X, y, config: LinearConfig) -> LinearModel:
    A = np.hstack([X, np.ones((len(y), 1))]) if config.fit_intercept else X
    sol, *_ = np.linalg.lstsq(A, y, rcond=None)
    theta = sol if config.fit_intercept else np.r_[sol, 0.0]
    g = optimality_residual(theta, X, y, config)
    return LinearModel(theta, config, g <= config.tol, g, 1, [objective(theta, X, y, config)])


def _thin(trace: list[float], keep: int = 200) -> list[float]:
    if len(trace) <= keep:
        return [float(v) for v in trace]
    idx = np.unique(np.linspace(0, len(trace) - 1, keep).astype(int))
    return [float(trace[i]) for i in idx]


def _finish(model: LinearModel) -> LinearModel:
    if not np.all(np.isfinite(model.weights)):
        raise NumericalError("solver produced non-finite weights")
    return model


def fit_logistic(X, y, config: Optional[LinearConfig] = None) -> LinearModel:
    config = config or LinearConfig()
    if config.task is not Task.CLASSIFY:
        raise ValueError("fit_logistic needs a CLASSIFY config")
    X, y = _validate(X, y, classify=True)
    if config.penalty is Penalty.L1:
        return _finish(_fista(X, y, config))
    return _finish(_newton(X, y, config))


def fit_linear(X, y, config: Optional[LinearConfig] = None) -> LinearModel:
    config = config or LinearConfig(task=Task.REGRESS)
    if config.task is not Task.REGRESS:
        raise ValueError("fit_linear needs a REGRESS config")
    X, y = _validate(X, y, classify=False)
    if config.penalty is Penalty.L2:
        return _finish(_ridge_closed_form(X, y, config))
    if config.penalty is Penalty.NONE:
        return _finish(_least_squares(X, y, config))
    return _finish(_fista(X, y, config))


def fit(X, y, config: LinearConfig) -> LinearModel:
    return fit_logistic(X, y, config) if config.task is Task.CLASSIFY else fit_linear(X, y, config)


def _check_dim(model: LinearModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != len(model.weights) - 1:
        raise ValueError(f"expected {len(model.weights) - 1} features, got shape {X.shape}")
    return X


def predict_value(model: LinearModel, X) -> np.ndarray:
    X = _check_dim(model, X)
    return X @ model.coef + model.intercept


def predict_proba(model: LinearModel, X) -> np.ndarray:
    return expit(predict_value(model, X))
