"""One-hidden-layer softmax classifier trained with the focal loss.

Inputs are the one-hot codes of both features (8 units).  Training uses Adam
on the mean per-sample focal loss of the true-class softmax output.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import List

import numpy as np

from focal_entropy.errors import ConvergenceError, DomainError
from focal_entropy.experiments.data import N_BINS, N_CELLS, BinnedDataset

log = logging.getLogger(__name__)


def one_hot_features(f1, f2) -> np.ndarray:
    f1 = np.asarray(f1)
    x = np.zeros((f1.size, 2 * N_BINS))
    rows = np.arange(f1.size)
    x[rows, f1] = 1.0
    x[rows, N_BINS + np.asarray(f2)] = 1.0
    return x


def _log_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=1, keepdims=True))


def focal_loss_and_grad(logits: np.ndarray, y: np.ndarray, gamma: float):
    """Mean focal loss of the true-class softmax mass and its gradient in ``logits``.

    With ``p`` the softmax and ``p_c`` the true-class mass, the per-sample
    gradient is ``-phi(p_c) * (onehot(y) - p)`` where
    ``phi(t) = (1-t)^gamma * (gamma * t * log(1/t) / (1-t) + 1)``.
    ``1 - p_c`` is summed from the other classes so that it stays accurate
    when ``p_c`` rounds to one.
    """
    if gamma < 0:
        raise DomainError("gamma must be non-negative")
    n = logits.shape[0]
    logp = _log_softmax(logits)
    p = np.exp(logp)
    rows = np.arange(n)
    logp_c = logp[rows, y]
    p_c = p[rows, y]
    r = p.sum(axis=1) - p_c
    neg_log = -logp_c
    # log(1/t) / (1 - t) -> 1 as t -> 1
    safe_r = np.where(r > 0, r, 1.0)
    ratio = np.where(r > 0, neg_log / safe_r, 1.0)
    r_pow = r ** gamma if gamma != 0 else np.ones_like(r)
    loss = r_pow * neg_log
    phi = r_pow * (gamma * p_c * ratio + 1.0)
    onehot = np.zeros_like(p)
    onehot[rows, y] = 1.0
    grad = -phi[:, None] * (onehot - p) / n
    return float(loss.mean()), grad


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 1.0
    hidden_width: int = 64
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 30
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


class MLP:
    """ReLU network ``8 -> hidden -> 2`` with fan-in scaled uniform initialization."""

    def __init__(self, n_in: int, hidden: int, n_out: int, rng: np.random.Generator):
        b1 = 1.0 / np.sqrt(n_in)
        b2 = 1.0 / np.sqrt(hidden)
        self.params = {
            "W1": rng.uniform(-b1, b1, (n_in, hidden)),
            "b1": rng.uniform(-b1, b1, hidden),
            "W2": rng.uniform(-b2, b2, (hidden, n_out)),
            "b2": rng.uniform(-b2, b2, n_out),
        }

    def forward(self, x):
        P = self.params
        pre = x @ P["W1"] + P["b1"]
        h = np.maximum(pre, 0.0)
        return h @ P["W2"] + P["b2"], (x, pre, h)

    def backward(self, dlogits, cache):
        x, pre, h = cache
        P = self.params
        dh = dlogits @ P["W2"].T
        dpre = dh * (pre > 0)
        return {
            "W1": x.T @ dpre,
            "b1": dpre.sum(axis=0),
            "W2": h.T @ dlogits,
            "b2": dlogits.sum(axis=0),
        }

    def predict_proba(self, x):
        return np.exp(_log_softmax(self.forward(x)[0]))


class Adam:
    def __init__(self, params, lr, beta1, beta2, eps):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for k in params:
            g = grads[k]
            self.m[k] = self.b1 * self.m[k] + (1.0 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1.0 - self.b2) * g * g
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def cell_inputs() -> np.ndarray:
    """One-hot inputs of the 16 cells in ``4 * f1 + f2`` order."""
    k = np.arange(N_CELLS)
    return one_hot_features(k // N_BINS, k % N_BINS)


@dataclass
class TrainRun:
    """Result of :func:`train_classifier`.

    Attributes:
        config: Hyperparameters, echoed into serialized output.
        posterior: Learned ``(16, 2)`` softmax table after the last epoch.
        loss_trajectory: Mean training loss per epoch.
        posterior_history: Learned table after every epoch.
    """

    config: TrainConfig
    posterior: np.ndarray
    loss_trajectory: List[float] = field(default_factory=list)
    posterior_history: List[np.ndarray] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "config": asdict(self.config),
            "posterior": self.posterior.tolist(),
            "loss_trajectory": list(self.loss_trajectory),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def train_classifier(data: BinnedDataset, config: TrainConfig = TrainConfig()) -> TrainRun:
    """Fit the network to ``data`` and return the learned cell posteriors.

    Raises:
        DomainError: empty dataset.
        ConvergenceError: the loss became non-finite.
    """
    if len(data) == 0:
        raise DomainError("cannot train on an empty dataset")
    rng = np.random.default_rng(config.seed)
    model = MLP(2 * N_BINS, config.hidden_width, 2, rng)
    opt = Adam(model.params, config.learning_rate, config.beta1, config.beta2, config.eps)
    x_all = one_hot_features(data.f1, data.f2)
    y_all = data.c
    grid = cell_inputs()
    run = TrainRun(config, np.zeros((N_CELLS, 2)))
    n = len(data)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            logits, cache = model.forward(x_all[idx])
            loss, dlogits = focal_loss_and_grad(logits, y_all[idx], config.gamma)
            if not np.isfinite(loss):
                raise ConvergenceError(
                    "training loss is not finite", residual=loss, iterations=epoch, batch_start=start
                )
            opt.step(model.params, model.backward(dlogits, cache))
            total += loss * idx.size
        run.loss_trajectory.append(total / n)
        run.posterior_history.append(model.predict_proba(grid))
        log.debug("epoch %d loss %.6g", epoch, run.loss_trajectory[-1])
    run.posterior = run.posterior_history[-1]
    return run
