"""Classification scores, n-gram and subsequence text metrics, and
stream-level score aggregation."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass


@dataclass
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def _check_pairs(predictions, golds):
    if len(predictions) != len(golds):
        raise ValueError("predictions and golds must have equal length")
    if not predictions:
        raise ValueError("empty prediction list")


def confusion(predictions, golds, positive_class: int) -> ConfusionCounts:
    _check_pairs(predictions, golds)
    counts = ConfusionCounts()
    for pred, gold in zip(predictions, golds):
        if gold == positive_class:
            if pred == positive_class:
                counts.tp += 1
            else:
                counts.fn += 1
        elif pred == positive_class:
            counts.fp += 1
        else:
            counts.tn += 1
    return counts


def prf1(predictions, golds, positive_class: int) -> tuple[float, float, float]:
    """Precision, recall, F1 for one positive class; every 0/0 is 0."""
    c = confusion(predictions, golds, positive_class)
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
    f1 = 2.0 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def accuracy(predictions, golds) -> float:
    _check_pairs(predictions, golds)
    return sum(1 for p, g in zip(predictions, golds) if p == g) / len(predictions)


def macro_prf1(predictions, golds, class_count: int) -> tuple[float, float, float]:
    """Unweighted mean of per-class precision/recall/F1 over all classes."""
    if class_count < 1:
        raise ValueError("class_count must be positive")
    per_class = [prf1(predictions, golds, c) for c in range(class_count)]
    return tuple(sum(v[i] for v in per_class) / class_count for i in range(3))


def _ngram_counts(tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _sentence_bleu(candidate, reference) -> float:
    log_sum = 0.0
    for n in range(1, 5):
        cand_counts = _ngram_counts(candidate, n)
        total = sum(cand_counts.values())
        ref_counts = _ngram_counts(reference, n)
        clipped = sum(min(count, ref_counts[gram]) for gram, count in cand_counts.items())
        if n == 1:
            if clipped == 0:
                return 0.0
            p = clipped / total
        else:
            p = (clipped + 1.0) / (total + 1.0)
        log_sum += 0.25 * math.log(p)
    brevity = 1.0 if len(candidate) > len(reference) else math.exp(1.0 - len(reference) / len(candidate))
    return brevity * math.exp(log_sum)


def bleu4(candidates, references, mode: str = "corpus") -> float:
    """BLEU-4 with uniform n-gram weights.

    corpus mode pools clipped counts over the whole corpus and applies one
    brevity penalty; any pooled precision of zero makes the score zero.
    sentence_smoothed mode averages per-sentence scores where n >= 2
    precisions get add-one smoothing.
    """
    if len(candidates) != len(references):
        raise ValueError("candidates and references must have equal length")
    if not candidates:
        raise ValueError("empty input")
    if mode == "sentence_smoothed":
        return sum(_sentence_bleu(c, r) for c, r in zip(candidates, references)) / len(candidates)
    if mode != "corpus":
        raise ValueError(f"unknown mode '{mode}'")
    clipped = [0] * 4
    totals = [0] * 4
    cand_len = 0
    ref_len = 0
    for cand, ref in zip(candidates, references):
        cand_len += len(cand)
        ref_len += len(ref)
        for n in range(1, 5):
            cand_counts = _ngram_counts(cand, n)
            ref_counts = _ngram_counts(ref, n)
            totals[n - 1] += sum(cand_counts.values())
            clipped[n - 1] += sum(min(c, ref_counts[g]) for g, c in cand_counts.items())
    if any(c == 0 for c in clipped):
        return 0.0
    log_sum = sum(0.25 * math.log(c / t) for c, t in zip(clipped, totals))
    brevity = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / cand_len)
    return brevity * math.exp(log_sum)


def _lcs_length(x, y) -> int:
    if not x or not y:
        return 0
    prev = [0] * (len(y) + 1)
    for xi in x:
        cur = [0]
        for j, yj in enumerate(y, start=1):
            cur.append(prev[j - 1] + 1 if xi == yj else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate, reference) -> float:
    """LCS F-score where precision is the LCS share of the reference length
    and recall its share of the candidate length; every 0/0 is 0."""
    m, n = len(candidate), len(reference)
    lcs = _lcs_length(candidate, reference)
    p = lcs / n if n else 0.0
    r = lcs / m if m else 0.0
    if p == 0.0 or r == 0.0:
        return 0.0
    beta = p / r
    return (1.0 + beta * beta) * p * r / (r + beta * beta * p)


def meteor(candidate, reference, alpha: float = 0.9, beta: float = 3.0,
           gamma: float = 0.5) -> float:
    """Unigram-match harmonic score with a fragmentation penalty.

    Matching is exact-surface and greedy left to right over the reference,
    each candidate token usable once. A chunk is a maximal run of matches
    contiguous in both sequences.
    """
    used = [False] * len(candidate)
    pairs: list[tuple[int, int]] = []
    for ri, rtok in enumerate(reference):
        for ci, ctok in enumerate(candidate):
            if not used[ci] and ctok == rtok:
                used[ci] = True
                pairs.append((ri, ci))
                break
    matches = len(pairs)
    if matches == 0:
        return 0.0
    chunks = 1
    for k in range(1, matches):
        if not (pairs[k][0] == pairs[k - 1][0] + 1 and pairs[k][1] == pairs[k - 1][1] + 1):
            chunks += 1
    precision = matches / len(candidate)
    recall = matches / len(reference)
    fmean = precision * recall / (alpha * precision + (1.0 - alpha) * recall)
    frag = chunks / matches
    return (1.0 - gamma * frag ** beta) * fmean


@dataclass
class OmegaMatrix:
    """Lower-triangular map (test partition j, step i) -> score, 1 <= j <= i <= n_steps."""

    n_steps: int
    scores: dict[tuple[int, int], float]

    def validate(self) -> None:
        if self.n_steps < 1:
            raise ValueError("n_steps must be positive")
        expected = {(j, i) for i in range(1, self.n_steps + 1) for j in range(1, i + 1)}
        got = set(self.scores)
        if got != expected:
            missing = sorted(expected - got)
            extra = sorted(got - expected)
            raise ValueError(f"incomplete score triangle: missing {missing}, extra {extra}")
        for key, value in self.scores.items():
            if not math.isfinite(value):
                raise ValueError(f"non-finite score at {key}")


def omega(matrix: OmegaMatrix) -> tuple[list[float], float]:
    """Per-step mean over already-seen test partitions, and the mean of those means."""
    matrix.validate()
    per_step = [
        sum(matrix.scores[(j, i)] for j in range(1, i + 1)) / i
        for i in range(1, matrix.n_steps + 1)
    ]
    return per_step, sum(per_step) / matrix.n_steps
