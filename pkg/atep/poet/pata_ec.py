import math
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import rankdata


def pata_ec_vector(raw_scores: Sequence[float], clip_lo: float, clip_hi: float) -> np.ndarray:
    """Rank-normalized signature of one environment.

    Scores are clipped, ranked ascending with average ranks for ties, and mapped affinely
    onto [-0.5, 0.5]. A single agent (or all-tied scores) maps to 0.
    """
    scores = np.clip(np.asarray(raw_scores, dtype=np.float64), clip_lo, clip_hi)
    n = scores.shape[0]
    if n == 0:
        return scores
    if n == 1:
        return np.zeros(1)
    ranks = rankdata(scores, method="average")
    return (ranks - 1.0) / (n - 1) - 0.5


def novelty(v: np.ndarray, others: Sequence[np.ndarray], k: int = 5) -> float:
    """Mean Euclidean distance from ``v`` to its ``min(k, len(others))`` nearest neighbours."""
    if len(others) == 0:
        return math.inf
    distances = np.sort(cdist(np.atleast_2d(v), np.vstack(others))[0])
    return float(np.mean(distances[: min(k, len(others))]))
