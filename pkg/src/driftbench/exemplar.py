"""Representative exemplar selection and the bounded replay store.

Selection picks a fixed per-partition budget: the budget is apportioned over
classes by frequency, each class is clustered on its own TF-IDF geometry, and
every cluster contributes its lowest-loss candidates, drawn at random from a
pool a few times larger than its quota so the picks stay diverse.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cluster import kmeans, n_distinct
from .corpus import Sample
from .model import ModelState, features_matrix, losses_matrix
from .textvec import fit_tfidf, tokenize, transform


@dataclass(frozen=True)
class StoredExemplar:
    sample: Sample
    stored_loss: float
    source_partition: int


@dataclass
class ExemplarStore:
    """Per-partition exemplar lists under one global budget."""

    budget: int = 0
    partitions: dict[int, list[StoredExemplar]] = field(default_factory=dict)

    def total(self) -> int:
        return sum(len(v) for v in self.partitions.values())

    def exemplars(self) -> list[StoredExemplar]:
        return [e for t in sorted(self.partitions) for e in self.partitions[t]]

    def samples(self) -> list[Sample]:
        return [e.sample for e in self.exemplars()]


def proportional_quotas(sizes: list[int], budget: int) -> list[int]:
    """Integer quotas proportional to sizes, summing to budget.

    Largest-remainder rounding with ties to the lowest index; any quota that
    would exceed its size is capped and the excess is redistributed over the
    remaining entries by the same rule.
    """
    if budget < 0:
        raise ValueError("budget must be non-negative")
    if any(s < 0 for s in sizes):
        raise ValueError("sizes must be non-negative")
    if budget > sum(sizes):
        raise ValueError(f"budget {budget} exceeds capacity {sum(sizes)}")
    quotas = [0] * len(sizes)
    left = budget
    while left > 0:
        active = [i for i in range(len(sizes)) if quotas[i] < sizes[i]]
        weight = sum(sizes[i] for i in active)
        ideal = {i: left * sizes[i] / weight for i in active}
        share = {i: int(ideal[i]) for i in active}
        remainder = left - sum(share.values())
        by_fraction = sorted(active, key=lambda i: (-(ideal[i] - share[i]), i))
        for i in by_fraction[:remainder]:
            share[i] += 1
        for i in active:
            quotas[i] = min(quotas[i] + share[i], sizes[i])
        left = budget - sum(quotas)
    return quotas


def cluster_quotas(cluster_sizes: list[int], budget: int) -> list[int]:
    """Per-cluster selection quotas for one class; see proportional_quotas."""
    return proportional_quotas(cluster_sizes, budget)


def partition_targets(budget: int, t: int) -> list[int]:
    """Split budget over t partitions, one extra unit to the lowest indices."""
    base, extra = divmod(budget, t)
    return [base + 1] * extra + [base] * (t - extra)


@dataclass
class ClassSelection:
    label: int
    budget: int
    cluster_sizes: list[int]
    quotas: list[int]
    pools: list[list[str]]
    chosen: list[list[str]]


@dataclass
class SelectionReport:
    partition_budget: int
    classes: list[ClassSelection]


def select_with_report(train_set: list[Sample], model: ModelState, t: int, budget: int,
                       n_clusters: int, pool_factor: int, seed: int):
    """Select exemplars for partition t and report the per-cluster bookkeeping.

    The generator seeded with ``seed`` is consumed in a fixed order: one
    k-means seed per class (classes ascending, drawn even when the class
    budget is zero), then one pool draw per cluster with a positive quota.
    Within a cluster candidates are ranked by (loss, sample id) ascending and
    the pool is the first pool_factor * quota of them.
    """
    if t < 1:
        raise ValueError("t must be at least 1")
    if budget < 0:
        raise ValueError("budget must be non-negative")
    if n_clusters < 1 or pool_factor < 1:
        raise ValueError("n_clusters and pool_factor must be at least 1")
    per_partition = min(budget // t, len(train_set))
    labels = sorted({s.label for s in train_set})
    rng = np.random.default_rng(seed)
    report = SelectionReport(per_partition, [])
    selected: list[StoredExemplar] = []
    if per_partition == 0 or not train_set:
        return selected, report

    class_members = {label: [s for s in train_set if s.label == label] for label in labels}
    class_budgets = proportional_quotas([len(class_members[l]) for l in labels], per_partition)

    for label, class_budget in zip(labels, class_budgets):
        kmeans_seed = int(rng.integers(0, 2 ** 31 - 1))
        if class_budget == 0:
            continue
        members = class_members[label]
        docs = [tokenize(s.text) for s in members]
        tfidf = fit_tfidf(docs)
        vectors = [transform(tfidf, doc) for doc in docs]
        k = min(n_clusters, n_distinct(vectors))
        clustering = kmeans(vectors, k, kmeans_seed)
        losses = losses_matrix(
            model,
            features_matrix([s.text for s in members], model.arch.feature_dim),
            np.array([s.label for s in members]),
        )
        cluster_of = clustering.assignments
        sizes = [int((cluster_of == ci).sum()) for ci in range(clustering.k)]
        quotas = cluster_quotas(sizes, class_budget)
        entry = ClassSelection(label, class_budget, sizes, quotas, [], [])
        for ci in range(clustering.k):
            member_idx = [i for i in range(len(members)) if cluster_of[i] == ci]
            quota = quotas[ci]
            ranked = sorted(member_idx, key=lambda i: (losses[i], members[i].id))
            pool = ranked[:min(pool_factor * quota, len(ranked))] if quota else []
            entry.pools.append([members[i].id for i in pool])
            if quota == 0:
                entry.chosen.append([])
                continue
            picked = rng.choice(len(pool), size=quota, replace=False)
            chosen = [pool[j] for j in sorted(picked.tolist())]
            entry.chosen.append([members[i].id for i in chosen])
            selected.extend(
                StoredExemplar(members[i], float(losses[i]), t) for i in chosen
            )
        report.classes.append(entry)
    return selected, report


def select_for_partition(train_set: list[Sample], model: ModelState, t: int, budget: int,
                         n_clusters: int, pool_factor: int, seed: int) -> list[StoredExemplar]:
    """Representative exemplars for partition t under the global budget."""
    selected, _ = select_with_report(train_set, model, t, budget, n_clusters, pool_factor, seed)
    return selected


def shrink_previous(store: ExemplarStore, t: int, budget: int) -> ExemplarStore:
    """Shrink partitions 1..t-1 to their step-t targets by dropping the
    highest-stored-loss entries (ties dropped in sample-id order)."""
    if t < 2:
        raise ValueError("shrink_previous applies from the second partition on")
    if sorted(store.partitions) != list(range(1, t)):
        raise ValueError(f"store must hold exactly partitions 1..{t - 1}")
    targets = partition_targets(budget, t)
    shrunk: dict[int, list[StoredExemplar]] = {}
    for j in sorted(store.partitions):
        entries = store.partitions[j]
        target = targets[j - 1]
        if len(entries) <= target:
            shrunk[j] = list(entries)
            continue
        removal_order = sorted(entries, key=lambda e: (-e.stored_loss, e.sample.id))
        dropped = {e.sample.id for e in removal_order[:len(entries) - target]}
        shrunk[j] = [e for e in entries if e.sample.id not in dropped]
    return ExemplarStore(budget, shrunk)


def update_store(store: ExemplarStore, new_exemplars: list[StoredExemplar], t: int,
                 budget: int) -> ExemplarStore:
    """Shrink the previous partitions to their new targets and append partition t."""
    if t == 1:
        if store.partitions:
            raise ValueError("a fresh stream must start from an empty store")
        updated = ExemplarStore(budget, {1: list(new_exemplars)})
    else:
        updated = shrink_previous(store, t, budget)
        updated.partitions[t] = list(new_exemplars)
    if updated.total() > budget:
        raise ValueError(f"store holds {updated.total()} exemplars over budget {budget}")
    return updated


def update_store_random(store: ExemplarStore, train_set: list[Sample], model: ModelState,
                        t: int, budget: int, seed: int) -> ExemplarStore:
    """Random-replay store update: down-sample previous partitions uniformly
    to their step-t targets, then draw partition t's exemplars uniformly.

    The new draw reuses the selection path with a single cluster per class and
    a pool covering it, which makes it a uniform draw under the same seed.
    """
    if t >= 2 and sorted(store.partitions) != list(range(1, t)):
        raise ValueError(f"store must hold exactly partitions 1..{t - 1}")
    targets = partition_targets(budget, t)
    rng = np.random.default_rng([seed, 1])
    parts: dict[int, list[StoredExemplar]] = {}
    for j in sorted(store.partitions):
        entries = store.partitions[j]
        target = targets[j - 1]
        if len(entries) > target:
            keep = np.sort(rng.choice(len(entries), size=target, replace=False))
            entries = [entries[i] for i in keep.tolist()]
        parts[j] = list(entries)
    parts[t] = select_for_partition(
        train_set, model, t, budget, 1, max(1, len(train_set)), seed)
    updated = ExemplarStore(budget, parts)
    if updated.total() > budget:
        raise ValueError(f"store holds {updated.total()} exemplars over budget {budget}")
    return updated


def store_to_json(store: ExemplarStore) -> dict:
    """JSON document for the store; loading it back restores every field the
    document carries (group keys are not serialized)."""
    return {
        "budget": store.budget,
        "partitions": [
            {
                "t": t,
                "exemplars": [
                    {
                        "id": e.sample.id,
                        "label": e.sample.label,
                        "text": e.sample.text,
                        "stored_loss": e.stored_loss,
                    }
                    for e in store.partitions[t]
                ],
            }
            for t in sorted(store.partitions)
        ],
    }


def store_from_json(doc: dict) -> ExemplarStore:
    try:
        budget = doc["budget"]
        partitions = {
            int(block["t"]): [
                StoredExemplar(
                    Sample(e["id"], e["text"], int(e["label"])),
                    float(e["stored_loss"]),
                    int(block["t"]),
                )
                for e in block["exemplars"]
            ]
            for block in doc["partitions"]
        }
    except (KeyError, TypeError) as err:
        raise ValueError(f"malformed exemplar store document: {err}") from err
    return ExemplarStore(int(budget), partitions)
