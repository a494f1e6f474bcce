"""Hashed bag-of-tokens features and a one-hidden-layer softmax classifier
with exact gradients and Adam."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import sparse

from .textvec import tokenize

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_U64 = (1 << 64) - 1

# probability floor keeping -log finite
LOSS_FLOOR = float(np.finfo(np.float64).eps)


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash."""
    h = FNV64_OFFSET
    for byte in data:
        h = ((h ^ byte) * FNV64_PRIME) & _U64
    return h


@lru_cache(maxsize=1 << 20)
def _token_hash(token: str) -> int:
    return fnv1a64(token.encode("utf-8"))


@dataclass(frozen=True)
class Architecture:
    feature_dim: int = 2 ** 14
    hidden_dim: int = 64
    class_count: int = 2

    def __post_init__(self):
        if self.feature_dim < 1 or self.hidden_dim < 1 or self.class_count < 1:
            raise ValueError("architecture dimensions must be positive")
        if self.feature_dim & (self.feature_dim - 1):
            raise ValueError("feature_dim must be a power of two")

    @property
    def n_params(self) -> int:
        d, h, c = self.feature_dim, self.hidden_dim, self.class_count
        return d * h + h + h * c + c


@dataclass
class ModelState:
    """Flat float64 parameter vector plus its architecture."""

    params: np.ndarray
    arch: Architecture

    def views(self):
        """(W1, b1, W2, b2) views into the flat vector, layer-major."""
        d, h, c = self.arch.feature_dim, self.arch.hidden_dim, self.arch.class_count
        p = self.params
        w1 = p[:d * h].reshape(d, h)
        b1 = p[d * h:d * h + h]
        w2 = p[d * h + h:d * h + h + h * c].reshape(h, c)
        b2 = p[d * h + h + h * c:]
        return w1, b1, w2, b2

    def copy(self) -> "ModelState":
        return ModelState(self.params.copy(), self.arch)


def hashed_counts(text: str, feature_dim: int) -> dict[int, float]:
    """Raw token counts accumulated at fnv1a64(token) mod feature_dim."""
    counts: dict[int, float] = {}
    for tok in tokenize(text):
        idx = _token_hash(tok) % feature_dim
        counts[idx] = counts.get(idx, 0.0) + 1.0
    return counts


def featurize(text: str, feature_dim: int) -> np.ndarray:
    """Dense L2-normalized hashed bag-of-tokens vector; empty text maps to zero."""
    if feature_dim < 1 or feature_dim & (feature_dim - 1):
        raise ValueError("feature_dim must be a power of two")
    vec = np.zeros(feature_dim)
    for idx, count in hashed_counts(text, feature_dim).items():
        vec[idx] = count
    norm = np.linalg.norm(vec)
    if norm > 0.0:
        vec /= norm
    return vec


def features_matrix(texts, feature_dim: int) -> sparse.csr_matrix:
    """CSR matrix of L2-normalized hashed features, one row per text."""
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for text in texts:
        items = sorted(hashed_counts(text, feature_dim).items())
        norm = math.sqrt(sum(c * c for _, c in items))
        for idx, count in items:
            indices.append(idx)
            data.append(count / norm)
        indptr.append(len(indices))
    return sparse.csr_matrix((data, indices, indptr), shape=(len(indptr) - 1, feature_dim))


def init(arch: Architecture, seed: int) -> ModelState:
    """Uniform Glorot weights in +-sqrt(6 / (fan_in + fan_out)), zero biases."""
    rng = np.random.default_rng(seed)
    model = ModelState(np.zeros(arch.n_params), arch)
    w1, _, w2, _ = model.views()
    bound = math.sqrt(6.0 / (arch.feature_dim + arch.hidden_dim))
    w1[:] = rng.uniform(-bound, bound, size=w1.shape)
    bound = math.sqrt(6.0 / (arch.hidden_dim + arch.class_count))
    w2[:] = rng.uniform(-bound, bound, size=w2.shape)
    return model


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=1, keepdims=True)
    return z


def forward_matrix(model: ModelState, X) -> np.ndarray:
    """Class probabilities for a batch; X is dense or CSR with feature_dim columns."""
    w1, b1, w2, b2 = model.views()
    z1 = X @ w1 + b1
    a1 = np.maximum(z1, 0.0)
    return _softmax_rows(a1 @ w2 + b2)


def forward(model: ModelState, features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (model.arch.feature_dim,):
        raise ValueError(f"expected a feature vector of length {model.arch.feature_dim}")
    if not np.all(np.isfinite(features)):
        raise ValueError("features contain non-finite values")
    return forward_matrix(model, features[None, :])[0]


def losses_matrix(model: ModelState, X, labels) -> np.ndarray:
    """Per-row cross-entropy, floored so it stays finite."""
    labels = np.asarray(labels)
    probs = forward_matrix(model, X)
    picked = probs[np.arange(len(labels)), labels]
    return -np.log(np.maximum(picked, LOSS_FLOOR))


def sample_loss(model: ModelState, sample) -> float:
    if not 0 <= sample.label < model.arch.class_count:
        raise ValueError(f"label {sample.label} outside the model's class range")
    probs = forward(model, featurize(sample.text, model.arch.feature_dim))
    return float(-np.log(max(float(probs[sample.label]), LOSS_FLOOR)))


def grad_matrix(model: ModelState, X, labels, weights=None):
    """Gradient of the weighted-mean cross-entropy over a batch.

    Returns (flat gradient, loss value). Weights are normalized by their sum,
    so a duplicated row and a doubled weight are the same thing.
    """
    w1, b1, w2, b2 = model.views()
    n = X.shape[0]
    labels = np.asarray(labels)
    z1 = X @ w1 + b1
    a1 = np.maximum(z1, 0.0)
    probs = _softmax_rows(a1 @ w2 + b2)
    if weights is None:
        wnorm = np.full(n, 1.0 / n)
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (n,) or np.any(w < 0) or w.sum() <= 0:
            raise ValueError("weights must be non-negative with a positive sum")
        wnorm = w / w.sum()
    picked = probs[np.arange(n), labels]
    loss = float(wnorm @ -np.log(np.maximum(picked, LOSS_FLOOR)))
    g = probs
    g[np.arange(n), labels] -= 1.0
    g *= wnorm[:, None]
    d_w2 = a1.T @ g
    d_b2 = g.sum(axis=0)
    d_a1 = g @ w2.T
    d_a1[z1 <= 0.0] = 0.0
    d_w1 = np.asarray(X.T @ d_a1)
    d_b1 = d_a1.sum(axis=0)
    return np.concatenate([d_w1.ravel(), d_b1, d_w2.ravel(), d_b2]), loss


def batch_grad(model: ModelState, batch, weights=None) -> np.ndarray:
    """Exact backprop gradient of the (weighted) mean cross-entropy over
    (features, label) pairs."""
    if not batch:
        raise ValueError("batch_grad needs a non-empty batch")
    X = np.stack([np.asarray(f, dtype=np.float64) for f, _ in batch])
    labels = np.array([label for _, label in batch])
    grad, _ = grad_matrix(model, X, labels, weights)
    return grad


@dataclass
class OptimizerState:
    """Adam moments and hyper-parameters, sized like the model params."""

    step: int
    m: np.ndarray
    v: np.ndarray
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, n_params: int, learning_rate: float = 1e-3) -> "OptimizerState":
        return cls(0, np.zeros(n_params), np.zeros(n_params), learning_rate)


def adam_step(model: ModelState, opt: OptimizerState, gradient: np.ndarray):
    """One bias-corrected Adam update, applied in place; returns (model, opt)."""
    g = np.asarray(gradient)
    if g.shape != model.params.shape:
        raise ValueError("gradient length does not match the parameter vector")
    if not np.all(np.isfinite(g)):
        raise ValueError("gradient contains non-finite values")
    opt.step += 1
    opt.m *= opt.beta1
    opt.m += (1.0 - opt.beta1) * g
    opt.v *= opt.beta2
    opt.v += (1.0 - opt.beta2) * (g * g)
    m_hat = opt.m / (1.0 - opt.beta1 ** opt.step)
    v_hat = opt.v / (1.0 - opt.beta2 ** opt.step)
    model.params -= opt.learning_rate * m_hat / (np.sqrt(v_hat) + opt.eps)
    return model, opt


def save_checkpoint(model: ModelState, path: str | Path) -> None:
    """Three little-endian int64 architecture fields followed by float64 params."""
    arch = model.arch
    with open(path, "wb") as fh:
        np.array([arch.feature_dim, arch.hidden_dim, arch.class_count], dtype="<i8").tofile(fh)
        np.ascontiguousarray(model.params, dtype="<f8").tofile(fh)


def load_checkpoint(path: str | Path) -> ModelState:
    with open(path, "rb") as fh:
        dims = np.fromfile(fh, dtype="<i8", count=3)
        if dims.size != 3:
            raise ValueError(f"truncated checkpoint: {path}")
        arch = Architecture(int(dims[0]), int(dims[1]), int(dims[2]))
        params = np.fromfile(fh, dtype="<f8", count=arch.n_params)
        if params.size != arch.n_params:
            raise ValueError(f"truncated checkpoint: {path}")
        if fh.read(1):
            raise ValueError(f"trailing bytes in checkpoint: {path}")
    return ModelState(params.astype(np.float64), arch)
