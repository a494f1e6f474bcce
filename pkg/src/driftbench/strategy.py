"""Continual-learning strategies over a partition stream.

Five kinds share one trainer: ft fine-tunes on each partition alone, emr adds
uniform-random replay, ewc adds a Fisher-weighted drift penalty toward the
previous model, repeat combines representative replay with a penalty whose
strength follows the similarity between the incoming data and the store, and
upper retrains on everything seen so far.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import DatasetPartition, Sample
from .ewc import AnchorState, LambdaConfig, adaptive_lambda, estimate_fisher, penalty, penalty_grad
from .exemplar import (ExemplarStore, select_for_partition, update_store,
                       update_store_random)
from .metrics import OmegaMatrix, accuracy, macro_prf1, prf1
from .model import (Architecture, ModelState, OptimizerState, adam_step,
                    features_matrix, forward_matrix, grad_matrix, init)
from .textvec import dataset_vector, fit_tfidf, tokenize

KINDS = ("ft", "emr", "ewc", "repeat", "upper")

# child-seed purposes
SEED_SHUFFLE = 1
SEED_STORE = 2
SEED_FISHER = 3


def derive_seed(base_seed: int, *key: int) -> int:
    """Deterministic child seed for a (purpose, step) slot."""
    seq = np.random.SeedSequence([int(base_seed)] + [int(k) for k in key])
    return int(seq.generate_state(1)[0])


@dataclass
class StrategyConfig:
    kind: str
    epochs: int = 10
    batch_size: int = 32
    budget_fraction: float | None = 0.01
    budget_absolute: int | None = None
    n_clusters: int = 5
    pool_factor: int = 5
    lambda_base: float = 2000.0
    selection: str = "representative"
    feature_dim: int = 2 ** 14
    hidden_dim: int = 64
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.kind == "emr":
            self.selection = "random"

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown strategy kind '{self.kind}'")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if (self.budget_fraction is None) == (self.budget_absolute is None):
            raise ValueError("set exactly one of budget_fraction and budget_absolute")
        if self.budget_fraction is not None and not 0.0 < self.budget_fraction <= 1.0:
            raise ValueError("budget_fraction must lie in (0, 1]")
        if self.budget_absolute is not None and self.budget_absolute < 0:
            raise ValueError("budget_absolute must be non-negative")
        if self.n_clusters < 1 or self.pool_factor < 1:
            raise ValueError("n_clusters and pool_factor must be at least 1")
        if self.lambda_base < 0:
            raise ValueError("lambda_base must be non-negative")
        if self.selection not in ("representative", "random"):
            raise ValueError(f"unknown selection mode '{self.selection}'")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")

    def resolve_budget(self, cumulative_train: int) -> int:
        """Exemplar budget at the current step; fractions track the cumulative
        train size seen so far."""
        if self.budget_absolute is not None:
            return self.budget_absolute
        return int(self.budget_fraction * cumulative_train)


@dataclass
class EvalRecord:
    strategy: str
    seed: int
    step: int
    test_partition: int
    accuracy: float
    precision: float
    recall: float
    f1: float


@dataclass
class RunState:
    model: ModelState
    optimizer: OptimizerState
    store: ExemplarStore
    anchor: AnchorState | None
    history: list[EvalRecord] = field(default_factory=list)
    lambdas: list[float] = field(default_factory=list)
    epoch_losses: list[list[float]] = field(default_factory=list)
    step: int = 0
    cumulative_train: int = 0
    class_count: int = 2
    shuffle_rng: np.random.Generator | None = None
    test_features: list = field(default_factory=list)
    test_labels: list[np.ndarray] = field(default_factory=list)


def init_run_state(cfg: StrategyConfig, class_count: int) -> RunState:
    arch = Architecture(cfg.feature_dim, cfg.hidden_dim, class_count)
    return RunState(
        model=init(arch, cfg.seed),
        optimizer=OptimizerState.fresh(arch.n_params, cfg.learning_rate),
        store=ExemplarStore(),
        anchor=None,
        class_count=class_count,
        shuffle_rng=np.random.default_rng(derive_seed(cfg.seed, SEED_SHUFFLE)),
    )


def _train_epochs(cfg: StrategyConfig, state: RunState, samples: list[Sample],
                  lam: float) -> list[float]:
    X = features_matrix([s.text for s in samples], cfg.feature_dim)
    y = np.array([s.label for s in samples])
    n = len(samples)
    per_epoch: list[float] = []
    use_penalty = lam > 0.0 and state.anchor is not None
    for _ in range(cfg.epochs):
        order = state.shuffle_rng.permutation(n)
        batch_losses: list[float] = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            grad, loss = grad_matrix(state.model, X[idx], y[idx])
            if use_penalty:
                grad += penalty_grad(state.model, state.anchor, lam)
                loss += penalty(state.model, state.anchor, lam)
            adam_step(state.model, state.optimizer, grad)
            batch_losses.append(loss)
        per_epoch.append(sum(batch_losses) / len(batch_losses))
    return per_epoch


def _evaluate(cfg: StrategyConfig, state: RunState) -> None:
    for j, (X, y) in enumerate(zip(state.test_features, state.test_labels), start=1):
        preds = forward_matrix(state.model, X).argmax(axis=1)
        acc = accuracy(preds.tolist(), y.tolist())
        if state.class_count == 2:
            p, r, f = prf1(preds.tolist(), y.tolist(), positive_class=1)
        else:
            p, r, f = macro_prf1(preds.tolist(), y.tolist(), state.class_count)
        state.history.append(EvalRecord(cfg.kind, cfg.seed, state.step, j, acc, p, r, f))


def _adaptive_lambda(cfg: StrategyConfig, partition: DatasetPartition,
                     replay: list[Sample]) -> float:
    if not replay:
        return 0.0
    docs = [tokenize(s.text) for s in partition.train + replay]
    tfidf = fit_tfidf(docs)
    return adaptive_lambda(
        LambdaConfig(cfg.lambda_base),
        dataset_vector(tfidf, partition.train),
        dataset_vector(tfidf, replay),
    )


def run_step(cfg: StrategyConfig, state: RunState, partition: DatasetPartition,
             all_previous_train: list[list[Sample]] | None = None) -> RunState:
    """Advance one stream step: train, update store and anchor, evaluate.

    all_previous_train is only meaningful (and only allowed) for the upper
    kind; every other kind reaches old data exclusively through the store.
    """
    t = state.step + 1
    if partition.index != t:
        raise ValueError(f"expected partition {t}, got {partition.index}")
    if cfg.kind == "upper":
        if all_previous_train is None:
            raise ValueError("upper needs the previous training sets")
    elif all_previous_train is not None:
        raise ValueError("only upper may receive previous training sets")

    state.cumulative_train += len(partition.train)
    budget = cfg.resolve_budget(state.cumulative_train)

    replay = state.store.samples()
    lam = 0.0
    if cfg.kind == "ewc":
        lam = cfg.lambda_base if state.anchor is not None else 0.0
    elif cfg.kind == "repeat":
        lam = _adaptive_lambda(cfg, partition, replay)

    if cfg.kind in ("ft", "ewc"):
        train_samples = list(partition.train)
    elif cfg.kind == "upper":
        train_samples = [s for block in all_previous_train for s in block] + list(partition.train)
    else:
        train_samples = list(partition.train) + replay

    state.epoch_losses.append(_train_epochs(cfg, state, train_samples, lam))
    if cfg.kind in ("ewc", "repeat"):
        state.lambdas.append(lam)

    if cfg.kind == "emr" or (cfg.kind == "repeat" and cfg.selection == "random"):
        state.store = update_store_random(
            state.store, partition.train, state.model, t, budget,
            derive_seed(cfg.seed, SEED_STORE, t))
    elif cfg.kind == "repeat":
        new = select_for_partition(
            partition.train, state.model, t, budget, cfg.n_clusters, cfg.pool_factor,
            derive_seed(cfg.seed, SEED_STORE, t))
        state.store = update_store(state.store, new, t, budget)

    if cfg.kind == "repeat":
        stored = state.store.samples()
        fisher = (estimate_fisher(state.model, stored) if stored
                  else np.zeros_like(state.model.params))
        state.anchor = AnchorState(state.model.params.copy(), fisher)
    elif cfg.kind == "ewc":
        rng = np.random.default_rng(derive_seed(cfg.seed, SEED_FISHER, t))
        size = min(budget, len(partition.train))
        if size > 0:
            picked = np.sort(rng.choice(len(partition.train), size=size, replace=False))
            subsample = [partition.train[i] for i in picked.tolist()]
            fisher = estimate_fisher(state.model, subsample)
        else:
            fisher = np.zeros_like(state.model.params)
        state.anchor = AnchorState(state.model.params.copy(), fisher)

    state.step = t
    state.test_features.append(features_matrix([s.text for s in partition.test], cfg.feature_dim))
    state.test_labels.append(np.array([s.label for s in partition.test]))
    _evaluate(cfg, state)
    return state


def run_stream(cfg: StrategyConfig, stream: list[DatasetPartition],
               class_count: int | None = None, trace=None):
    """Run a strategy over the whole stream.

    Returns (history, final state). The history holds one record per
    (step i, test partition j <= i) pair. ``trace``, when given, is called
    with (state, partition) after every completed step.
    """
    cfg.validate()
    if not stream:
        raise ValueError("empty stream")
    for pos, partition in enumerate(stream, start=1):
        if partition.index != pos:
            raise ValueError("stream partitions must be indexed 1..N in order")
    if class_count is None:
        labels = [s.label for p in stream for split in (p.train, p.valid, p.test) for s in split]
        class_count = max(labels) + 1 if labels else 2
    state = init_run_state(cfg, class_count)
    previous_train: list[list[Sample]] = []
    for partition in stream:
        run_step(cfg, state, partition,
                 all_previous_train=list(previous_train) if cfg.kind == "upper" else None)
        if cfg.kind == "upper":
            previous_train.append(partition.train)
        if trace is not None:
            trace(state, partition)
    return state.history, state


def build_omega(history: list[EvalRecord], metric: str) -> OmegaMatrix:
    """Score triangle for one run's history under the named metric."""
    if not history:
        raise ValueError("empty history")
    n_steps = max(r.step for r in history)
    scores = {(r.test_partition, r.step): getattr(r, metric) for r in history}
    return OmegaMatrix(n_steps, scores)
