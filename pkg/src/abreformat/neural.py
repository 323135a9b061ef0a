"""MLP on pooled embeddings and dilated 1-D CNN on per-residue structure tensors.

Everything runs in float64 on CPU. Training uses AdamW with early stopping
on validation loss; the best-validation weights are restored at the end.
"""

from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np
import torch
from torch import nn

from .linear import NumericalError

DTYPE = torch.float64
ADAMW_BETAS = (0.9, 0.999)
ADAMW_EPS = 1e-8
WEIGHT_DECAY = 0.01
KERNEL_SIZE = 3


@dataclass(frozen=True)
class MlpConfig:
    hidden_dim: int = 128
    dropout: float = 0.2
    lr: float = 1e-4
    batch_size: int = 32
    linear_head: bool = True
    max_epochs: int = 200
    patience: int = 10
    seed: int = 0
    task: str = "classify"
    weight_decay: float = WEIGHT_DECAY


@dataclass(frozen=True)
class CnnConfig:
    n_layers: int = 5
    rep_dim: int = 32
    expansion: float = 1.4
    batch_norm: bool = False
    lr: float = 3.8e-4
    batch_size: int = 32
    epochs: int = 13
    seed: int = 0
    task: str = "classify"
    patience: int = 10
    weight_decay: float = WEIGHT_DECAY

    def __post_init__(self):
        if not 1 <= self.n_layers <= 5:
            raise ValueError("n_layers must lie in [1, 5]")
        if self.rep_dim not in (16, 32, 64, 128):
            raise ValueError("rep_dim must be one of 16, 32, 64, 128")
        if not 1.0 <= self.expansion <= 4.0:
            raise ValueError("expansion must lie in [1.0, 4.0]")
        if not 1e-4 <= self.lr <= 1e-2:
            raise ValueError("lr must lie in [1e-4, 1e-2]")
        if self.batch_size not in (16, 32, 64):
            raise ValueError("batch_size must be one of 16, 32, 64")
        if not 10 <= self.epochs <= 50:
            raise ValueError("epochs must lie in [10, 50]")

    @property
    def dilations(self) -> list[int]:
        return [2**i for i in range(self.n_layers)]


# final choices for the 1-D CNN
CNN_CLASSIFY_DEFAULT = CnnConfig(
    n_layers=5, rep_dim=32, expansion=1.4, batch_norm=False, lr=3.8e-4, batch_size=32, epochs=13
)
CNN_REGRESS_DEFAULT = CnnConfig(
    n_layers=1, rep_dim=16, expansion=2.7, batch_norm=False, lr=1.8e-4, batch_size=32, epochs=10,
    task="regress",
)


@dataclass
class TrainTrace:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = -1
    stopped_epoch: int = -1


class MLP(nn.Module):
    def __init__(self, in_dim: int, hidden_dim: int, dropout: float, linear_head: bool = True):
        super().__init__()
        self.body = nn.Sequential(
            nn.Linear(in_dim, hidden_dim),
            nn.ReLU(),
            nn.Dropout(dropout),
            nn.Linear(hidden_dim, hidden_dim),
            nn.ReLU(),
            nn.Dropout(dropout),
        )
        if linear_head:
            self.head = nn.Linear(hidden_dim, 1)
        else:
            half = max(hidden_dim // 2, 1)
            self.head = nn.Sequential(nn.Linear(hidden_dim, half), nn.ReLU(), nn.Linear(half, 1))

    def forward(self, x):
        return self.head(self.body(x)).squeeze(-1)


class DilatedCNN(nn.Module):
    """Stem conv, dilated convs, global mean pool, linear head.

    Input is ``(batch, positions, channels)``.
    """

    def __init__(self, in_channels: int, config: CnnConfig):
        super().__init__()
        width = int(round(config.rep_dim * config.expansion))
        layers: list[nn.Module] = []
        c_in = in_channels
        for i, dil in enumerate(config.dilations):
            c_out = config.rep_dim if i == 0 else width
            layers.append(nn.Conv1d(c_in, c_out, KERNEL_SIZE, dilation=dil, padding=dil))
            if config.batch_norm:
                layers.append(nn.BatchNorm1d(c_out))
            layers.append(nn.ReLU())
            c_in = c_out
        self.convs = nn.Sequential(*layers)
        self.head = nn.Linear(c_in, 1)

    def forward(self, x):
        h = self.convs(x.transpose(1, 2))
        return self.head(h.mean(dim=2)).squeeze(-1)


def _loss_fn(task: str) -> nn.Module:
    return nn.BCEWithLogitsLoss() if task.startswith("class") else nn.MSELoss()


def _tensor(a) -> torch.Tensor:
    return torch.as_tensor(np.asarray(a, dtype=np.float64), dtype=DTYPE)


@torch.no_grad()
def _eval_loss(model, loss_fn, X, y) -> float:
    model.eval()
    return float(loss_fn(model(X), y))


def _train(
    model: nn.Module,
    X, y, X_val, y_val,
    task: str, lr: float, batch_size: int, max_epochs: int, patience: int,
    weight_decay: float, generator: torch.Generator,
) -> TrainTrace:
    loss_fn = _loss_fn(task)
    opt = torch.optim.AdamW(
        model.parameters(), lr=lr, betas=ADAMW_BETAS, eps=ADAMW_EPS, weight_decay=weight_decay
    )
    Xt, yt, Xv, yv = _tensor(X), _tensor(y), _tensor(X_val), _tensor(y_val)
    if len(Xv) == 0:
        raise ValueError("validation set must be non-empty")
    trace = TrainTrace()
    best_state, best_val = None, math.inf
    n = len(Xt)
    for epoch in range(max_epochs):
        model.train()
        perm = torch.randperm(n, generator=generator)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = perm[start : start + batch_size]
            opt.zero_grad()
            loss = loss_fn(model(Xt[idx]), yt[idx])
            if not torch.isfinite(loss):
                raise NumericalError(f"non-finite training loss at epoch {epoch}")
            loss.backward()
            opt.step()
            total += float(loss.detach()) * len(idx)
        val = _eval_loss(model, loss_fn, Xv, yv)
        if not math.isfinite(val):
            raise NumericalError(f"non-finite validation loss at epoch {epoch}")
        trace.train_loss.append(total / n)
        trace.val_loss.append(val)
        trace.stopped_epoch = epoch
        if val < best_val:
            best_val, trace.best_epoch = val, epoch
            best_state = copy.deepcopy(model.state_dict())
        elif epoch - trace.best_epoch > patience:
            break
    model.load_state_dict(best_state)
    model.eval()
    return trace


@dataclass
class NeuralModel:
    kind: str  # "mlp" or "cnn"
    config: MlpConfig | CnnConfig
    in_shape: tuple[int, ...]
    module: nn.Module
    trace: TrainTrace

    @torch.no_grad()
    def predict_raw(self, X) -> np.ndarray:
        self.module.eval()
        return self.module(_tensor(X)).numpy()

    def predict_proba(self, X) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.predict_raw(X)))

    def predict_value(self, X) -> np.ndarray:
        return self.predict_raw(X)

    def save(self, path) -> None:
        torch.save(
            {
                "kind": self.kind,
                "config": asdict(self.config),
                "in_shape": list(self.in_shape),
                "state_dict": self.module.state_dict(),
                "trace": asdict(self.trace),
            },
            path,
        )

    @classmethod
    def load(cls, path) -> "NeuralModel":
        blob = torch.load(path, weights_only=False)
        if blob["kind"] == "mlp":
            cfg = MlpConfig(**blob["config"])
            module = build_mlp(blob["in_shape"][0], cfg)
        else:
            cfg = CnnConfig(**blob["config"])
            module = build_cnn(blob["in_shape"][-1], cfg)
        module.load_state_dict(blob["state_dict"])
        module.eval()
        return cls(blob["kind"], cfg, tuple(blob["in_shape"]), module, TrainTrace(**blob["trace"]))


def build_mlp(in_dim: int, config: MlpConfig) -> MLP:
    return MLP(in_dim, config.hidden_dim, config.dropout, config.linear_head).to(DTYPE)


def build_cnn(in_channels: int, config: CnnConfig) -> DilatedCNN:
    return DilatedCNN(in_channels, config).to(DTYPE)


def _check_targets(y, task):
    y = np.asarray(y, dtype=float)
    if task.startswith("class") and len(np.unique(y)) < 2:
        raise ValueError("both classes must be present in training labels")
    return y


def mlp_fit(X, y, config: MlpConfig, X_val, y_val) -> tuple[NeuralModel, TrainTrace]:
    """Fit the two-hidden-layer MLP on concatenated pooled VH/VL embeddings."""
    X = np.asarray(X, dtype=float)
    y = _check_targets(y, config.task)
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        module = build_mlp(X.shape[1], config)
        gen = torch.Generator().manual_seed(config.seed)
        trace = _train(
            module, X, y, X_val, y_val, config.task, config.lr, config.batch_size,
            config.max_epochs, config.patience, config.weight_decay, gen,
        )
    return NeuralModel("mlp", config, (X.shape[1],), module, trace), trace


def cnn1d_fit(X, y, config: CnnConfig, X_val, y_val) -> tuple[NeuralModel, TrainTrace]:
    """Fit the dilated CNN on ``(n, positions, channels)`` tensors."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 3:
        raise ValueError("CNN input must be (n, positions, channels)")
    y = _check_targets(y, config.task)
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        module = build_cnn(X.shape[2], config)
        gen = torch.Generator().manual_seed(config.seed)
        trace = _train(
            module, X, y, X_val, y_val, config.task, config.lr, config.batch_size,
            config.epochs, config.patience, config.weight_decay, gen,
        )
    return NeuralModel("cnn", config, tuple(X.shape[1:]), module, trace), trace


def _relu_patterns(model: nn.Module):
    """Forward hooks recording the sign pattern entering every ReLU."""
    patterns: list[torch.Tensor] = []
    hooks = [
        m.register_forward_hook(lambda mod, inp, out: patterns.append(inp[0] > 0))
        for m in model.modules()
        if isinstance(m, nn.ReLU)
    ]
    return patterns, hooks


def grad_check(
    model: nn.Module,
    loss_fn: Callable[[torch.Tensor, torch.Tensor], torch.Tensor],
    sample: tuple,
    eps: float = 1e-4,
    n_params: int = 100,
    seed: int = 0,
    return_skipped: bool = False,
    floor: float = 1e-6,
):
    """Max relative error between autograd and central finite differences.

    Scalar parameters are drawn at random across all tensors until
    ``n_params`` have been compared. A draw whose +/-eps perturbation flips
    the sign of any ReLU input straddles a kink, where the loss is not
    differentiable; such draws are skipped. The relative error is
    ``|a - n| / max(|a| + |n|, floor)``.

    Step size trades truncation (O(h^2)) against rounding in the loss
    (O(1e-16 / h)). With h = 1e-4 both sit near 1e-12 absolute for the
    losses used here; at h = 1e-5 rounding alone reaches ~1e-11 and gradients
    near ``floor`` can no longer be resolved to 1e-5.
    """
    X, y = (_tensor(a) for a in sample)
    model.eval()
    model.zero_grad()
    patterns, hooks = _relu_patterns(model)
    try:
        loss_fn(model(X), y).backward()
        base = list(patterns)
        params = [p for p in model.parameters() if p.requires_grad]
        sizes = np.array([p.numel() for p in params])
        offsets = np.r_[0, np.cumsum(sizes)]
        rng = np.random.default_rng(seed)
        order = rng.permutation(int(sizes.sum()))
        worst, checked, skipped = 0.0, 0, 0
        with torch.no_grad():
            for k in order:
                if checked >= n_params:
                    break
                t = int(np.searchsorted(offsets, k, side="right") - 1)
                p = params[t].view(-1)
                j = int(k - offsets[t])
                orig = float(p[j])
                values, kink = [], False
                for delta in (eps, -eps):
                    p[j] = orig + delta
                    patterns.clear()
                    values.append(float(loss_fn(model(X), y)))
                    kink = kink or any(not torch.equal(a, b) for a, b in zip(base, patterns))
                p[j] = orig
                if kink:
                    skipped += 1
                    continue
                analytic = float(params[t].grad.view(-1)[j])
                numeric = (values[0] - values[1]) / (2 * eps)
                denom = max(abs(analytic) + abs(numeric), floor)
                worst = max(worst, abs(analytic - numeric) / denom)
                checked += 1
    finally:
        for h in hooks:
            h.remove()
    return (worst, skipped) if return_skipped else worst


def gradient_norm(model: nn.Module, loss_fn, sample: tuple) -> float:
    X, y = (_tensor(a) for a in sample)
    model.eval()
    model.zero_grad()
    loss_fn(model(X), y).backward()
    return float(
        math.sqrt(sum(float((p.grad**2).sum()) for p in model.parameters() if p.grad is not None))
    )
