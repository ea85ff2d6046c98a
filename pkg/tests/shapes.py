"""Two labelled families of synthetic series for nearest-neighbour checks."""
import numpy as np
from scipy.stats import mannwhitneyu

from monrec.similarity import extract_shapelets, shapelet_distance


def family_series(rng, family: int, n: int = 200) -> np.ndarray:
    t = np.arange(n)
    period = rng.uniform(25, 40)
    phase = rng.uniform(0, 2 * np.pi)
    base = np.sin(2 * np.pi * t / period + phase)
    wave = base if family == 0 else np.sign(base)
    scale, offset = rng.uniform(0.5, 20), rng.uniform(-50, 50)
    return offset + scale * (wave + rng.normal(0, 0.15, n))


def corpus(seed: int = 0, per_family: int = 20, n: int = 200):
    rng = np.random.default_rng(seed)
    labels = np.array([f for f in (0, 1) for _ in range(per_family)])
    return [family_series(rng, int(f), n) for f in labels], labels


def series_distance(sa, sb) -> float:
    return min(shapelet_distance(a, b) for a in sa for b in sb)


def nn_auc(series, labels) -> float:
    """Leave-one-out AUC of ``d(nearest family 0) - d(nearest family 1)`` for predicting family 1."""
    shp = [extract_shapelets(s, count=3) for s in series]
    n = len(series)
    d = np.full((n, n), np.inf)
    for i in range(n):
        for j in range(i + 1, n):
            d[i, j] = d[j, i] = series_distance(shp[i], shp[j])
    scores = np.array([d[i, labels == 0].min() - d[i, labels == 1].min() for i in range(n)])
    u = mannwhitneyu(scores[labels == 1], scores[labels == 0]).statistic
    return float(u / ((labels == 1).sum() * (labels == 0).sum()))
