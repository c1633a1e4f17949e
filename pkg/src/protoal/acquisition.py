"""Confidence scoring of unlabeled samples and top-K selection.

Every strategy produces one score per pool sample, higher meaning higher
labeling priority:

  margin   -|o_c0 - o_c1| for the two largest class probabilities; samples
           sitting in the margin area between two classes score highest.
  entropy  sum_c (1 + o_c - max_c o_c); confusion spread over many classes.
  max      -max_c o_c; the classic least-confidence score.
  random   i.i.d. uniform scores, the standard baseline.
  coreset  greedy k-center cover of the embedding space (selection-based,
           not a static per-sample score).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import BudgetExceedsPool, TooFewClasses


class Strategy(str, Enum):
    MARGIN = "margin"
    ENTROPY = "entropy"
    MAX = "max"
    RANDOM = "random"
    CORESET = "coreset"


STRATEGY_NAMES = tuple(s.value for s in Strategy)


@dataclass(frozen=True)
class ConfidenceScore:
    sample_id: int
    score: float


def margin_confidence(probs: np.ndarray) -> float:
    """-|difference of the two largest probabilities|; in [-1, 0]."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape[0] < 2:
        raise TooFewClasses("margin confidence needs at least 2 classes")
    top2 = np.partition(probs, -2)[-2:]
    return -abs(float(top2[1] - top2[0]))


def entropy_confidence(probs: np.ndarray) -> float:
    """sum_c (1 + o_c - max_c o_c); in [1, num_classes]."""
    probs = np.asarray(probs, dtype=np.float64)
    return float(probs.shape[0] + probs.sum() - probs.shape[0] * probs.max())


def max_confidence(probs: np.ndarray) -> float:
    """Negated best-class probability; in (-1, 0)."""
    probs = np.asarray(probs, dtype=np.float64)
    return -float(probs.max())


_SCORE_FNS = {
    Strategy.MARGIN: margin_confidence,
    Strategy.ENTROPY: entropy_confidence,
    Strategy.MAX: max_confidence,
}


def score_probs_matrix(probs: np.ndarray, ids, strategy: Strategy) -> list[ConfidenceScore]:
    """Apply a probability-based strategy row-wise over a (N, C) matrix."""
    fn = _SCORE_FNS[Strategy(strategy)]
    return [
        ConfidenceScore(sample_id=int(i), score=fn(row))
        for i, row in zip(ids, np.atleast_2d(probs))
    ]


def random_scores(pool_ids, rng_seed: int) -> list[ConfidenceScore]:
    """I.i.d. uniform scores; deterministic per seed and pool order."""
    rng = np.random.default_rng(np.random.SeedSequence([int(rng_seed)]))
    draws = rng.uniform(size=len(pool_ids))
    return [
        ConfidenceScore(sample_id=int(i), score=float(u))
        for i, u in zip(pool_ids, draws)
    ]


def top_k_select(scores: list[ConfidenceScore], k: int) -> list[int]:
    """The K highest-scoring ids, ties to the smallest id, sorted
    (score desc, id asc)."""
    if k > len(scores):
        raise BudgetExceedsPool(f"requested {k} from a pool of {len(scores)}")
    ranked = sorted(scores, key=lambda s: (-s.score, s.sample_id))
    return [s.sample_id for s in ranked[:k]]


def _min_dist_to_set(pool: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Per-pool-row Euclidean distance to the nearest row of ``points``."""
    if points.size == 0:
        return np.full(pool.shape[0], np.inf)
    # ||p - q||^2 = ||p||^2 - 2 p.q + ||q||^2, chunk-free via one matmul
    sq = (
        (pool**2).sum(axis=1, keepdims=True)
        - 2.0 * pool @ points.T
        + (points**2).sum(axis=1)
    )
    return np.sqrt(np.maximum(sq, 0.0).min(axis=1))


def coreset_greedy(
    labeled_embeddings: np.ndarray,
    pool_embeddings: np.ndarray,
    pool_ids,
    k: int,
) -> list[int]:
    """Greedy k-center selection over Euclidean distance in embedding space.

    Each step picks the pool point whose distance to the nearest point of
    labeled-union-selected is largest (ties to the smallest id), then folds it
    into the cover. Returns the selected ids in greedy order.
    """
    pool_ids = np.asarray(list(pool_ids), dtype=np.int64)
    pool = np.atleast_2d(np.asarray(pool_embeddings, dtype=np.float64))
    if k > pool.shape[0]:
        raise BudgetExceedsPool(f"requested {k} from a pool of {pool.shape[0]}")
    # deterministic tie-breaking: scan candidates in ascending id order
    order = np.argsort(pool_ids, kind="stable")
    pool_ids = pool_ids[order]
    pool = pool[order]

    labeled = np.atleast_2d(np.asarray(labeled_embeddings, dtype=np.float64))
    min_dist = _min_dist_to_set(pool, labeled)

    selected: list[int] = []
    taken = np.zeros(pool.shape[0], dtype=bool)
    for _ in range(k):
        masked = np.where(taken, -np.inf, min_dist)
        pick = int(np.argmax(masked))  # first max = smallest id after the sort
        taken[pick] = True
        selected.append(int(pool_ids[pick]))
        dist_new = np.sqrt(np.maximum(((pool - pool[pick]) ** 2).sum(axis=1), 0.0))
        min_dist = np.minimum(min_dist, dist_new)
    return selected


def coreset_initial_distances(
    labeled_embeddings: np.ndarray,
    pool_embeddings: np.ndarray,
    pool_ids,
) -> list[ConfidenceScore]:
    """Static audit scores for coreset: distance to the nearest labeled point.

    These are the first greedy step's criteria; the full selection is
    sequential, so only the first pick is the argmax of this dump.
    """
    pool = np.atleast_2d(np.asarray(pool_embeddings, dtype=np.float64))
    labeled = np.atleast_2d(np.asarray(labeled_embeddings, dtype=np.float64))
    dists = _min_dist_to_set(pool, labeled)
    return [
        ConfidenceScore(sample_id=int(i), score=float(d))
        for i, d in zip(pool_ids, dists)
    ]
