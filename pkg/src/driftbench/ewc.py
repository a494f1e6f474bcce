"""Diagonal Fisher estimation, the quadratic parameter-drift penalty, and
similarity-scaled penalty strength."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import ModelState, features_matrix, grad_matrix
from .textvec import SparseVector, cosine


@dataclass
class AnchorState:
    """Parameter snapshot of the previous model plus its diagonal Fisher weights."""

    anchor_params: np.ndarray
    fisher: np.ndarray

    def __post_init__(self):
        if self.anchor_params.shape != self.fisher.shape:
            raise ValueError("anchor and fisher lengths differ")
        if not np.all(np.isfinite(self.fisher)) or np.any(self.fisher < 0):
            raise ValueError("fisher entries must be finite and non-negative")


@dataclass
class LambdaConfig:
    lambda_base: float = 2000.0

    def __post_init__(self):
        if self.lambda_base < 0:
            raise ValueError("lambda_base must be non-negative")


def estimate_fisher(model: ModelState, samples) -> np.ndarray:
    """Mean squared per-sample loss gradient, one exact gradient per sample."""
    samples = list(samples)
    if not samples:
        raise ValueError("estimate_fisher needs at least one sample")
    X = features_matrix([s.text for s in samples], model.arch.feature_dim)
    fisher = np.zeros_like(model.params)
    for row, sample in enumerate(samples):
        grad, _ = grad_matrix(model, X[row], np.array([sample.label]))
        fisher += grad * grad
    fisher /= len(samples)
    return fisher


def _delta(model: ModelState, anchor: AnchorState) -> np.ndarray:
    if model.params.shape != anchor.anchor_params.shape:
        raise ValueError("model and anchor parameter lengths differ")
    return model.params - anchor.anchor_params


def penalty(model: ModelState, anchor: AnchorState, lam: float) -> float:
    """lam * sum_i F_i (theta_i - anchor_i)^2."""
    d = _delta(model, anchor)
    return float(lam * np.dot(anchor.fisher, d * d))


def penalty_grad(model: ModelState, anchor: AnchorState, lam: float) -> np.ndarray:
    return 2.0 * lam * anchor.fisher * _delta(model, anchor)


def adaptive_lambda(cfg: LambdaConfig, current_vec: SparseVector,
                    exemplar_vec: SparseVector) -> float:
    """Penalty strength scaled by the cosine between the incoming dataset
    vector and the exemplar-store vector; zero against an empty store."""
    return cfg.lambda_base * cosine(current_vec, exemplar_vec)


def save_anchor(anchor: AnchorState, path: str | Path) -> None:
    """Two length-prefixed little-endian float64 arrays: params then fisher."""
    with open(path, "wb") as fh:
        for arr in (anchor.anchor_params, anchor.fisher):
            np.array([arr.size], dtype="<i8").tofile(fh)
            np.ascontiguousarray(arr, dtype="<f8").tofile(fh)


def load_anchor(path: str | Path) -> AnchorState:
    arrays = []
    with open(path, "rb") as fh:
        for _ in range(2):
            size = np.fromfile(fh, dtype="<i8", count=1)
            if size.size != 1 or size[0] < 0:
                raise ValueError(f"truncated anchor file: {path}")
            arr = np.fromfile(fh, dtype="<f8", count=int(size[0]))
            if arr.size != int(size[0]):
                raise ValueError(f"truncated anchor file: {path}")
            arrays.append(arr.astype(np.float64))
        if fh.read(1):
            raise ValueError(f"trailing bytes in anchor file: {path}")
    return AnchorState(arrays[0], arrays[1])
