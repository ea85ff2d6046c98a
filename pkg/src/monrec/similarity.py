"""Time-series features, shapelets and combined metric similarity."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .embed import EmbeddingProvider, cosine

log = logging.getLogger(__name__)

_CONST_TOL = 1e-10


class SeriesError(ValueError):
    pass


@dataclass
class MetricTimeseries:
    metric: str
    timestamps: np.ndarray
    values: np.ndarray
    resource: str | None = None
    sampling: str = "Average"

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.timestamps.shape != self.values.shape or self.values.ndim != 1:
            raise SeriesError(f"{self.metric}: timestamps and values must be equal-length 1-D arrays")
        if len(self.timestamps) > 1 and np.any(np.diff(self.timestamps) <= 0):
            raise SeriesError(f"{self.metric}: timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.values)

    def percentile(self, q: float) -> float:
        return float(np.percentile(self.values, q))

    def to_record(self) -> dict:
        return {"metric": self.metric, "resource": self.resource, "sampling": self.sampling,
                "timestamps": self.timestamps.tolist(), "values": self.values.tolist()}

    @classmethod
    def from_record(cls, rec: dict) -> "MetricTimeseries":
        return cls(rec["metric"], rec["timestamps"], rec["values"], rec.get("resource"),
                   rec.get("sampling", "Average"))


# statistical features

@dataclass(frozen=True)
class StatFeatures:
    minimum: float
    maximum: float
    mean: float
    median: float
    mode: float
    skew: float
    kurtosis: float
    mean_frequency: float
    max_frequency: float

    def as_array(self) -> np.ndarray:
        return np.array([self.minimum, self.maximum, self.mean, self.median, self.mode,
                         self.skew, self.kurtosis, self.mean_frequency, self.max_frequency])


def histogram_mode(values: np.ndarray, bins: int = 32) -> float:
    lo, hi = float(values.min()), float(values.max())
    if hi - lo <= _CONST_TOL * max(1.0, abs(lo)):
        return lo
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    i = int(np.argmax(counts))
    return float((edges[i] + edges[i + 1]) / 2)


def stat_features(series: MetricTimeseries | Sequence[float], spacing: float | None = None) -> StatFeatures:
    """Nine summary statistics; frequencies are in cycles per time unit.

    Skew and kurtosis are the population moments (kurtosis in excess form)
    and are 0 for a constant series.
    """
    if isinstance(series, MetricTimeseries):
        values = series.values
        if spacing is None and len(series) > 1:
            spacing = float(np.median(np.diff(series.timestamps)))
    else:
        values = np.asarray(series, dtype=np.float64)
    if values.size < 2:
        raise SeriesError("stat_features needs at least 2 samples")
    spacing = spacing or 1.0
    mu = float(values.mean())
    centred = values - mu
    m2 = float(np.mean(centred ** 2))
    if m2 <= (_CONST_TOL * max(1.0, abs(mu))) ** 2:
        skew = kurt = 0.0
    else:
        skew = float(np.mean(centred ** 3) / m2 ** 1.5)
        kurt = float(np.mean(centred ** 4) / m2 ** 2 - 3.0)
    amp = np.abs(np.fft.rfft(centred))
    freqs = np.fft.rfftfreq(values.size, d=spacing)
    amp[0] = 0.0
    total = amp.sum()
    if total <= _CONST_TOL * values.size * max(1.0, abs(mu)):
        mean_f = max_f = 0.0
    else:
        mean_f = float((freqs * amp).sum() / total)
        max_f = float(freqs[int(np.argmax(amp))])
    return StatFeatures(float(values.min()), float(values.max()), mu, float(np.median(values)),
                        histogram_mode(values), skew, kurt, mean_f, max_f)


# shapelets

@dataclass(frozen=True)
class Shapelet:
    values: np.ndarray = field(compare=False)
    offset: int = 0
    length: int = 0
    constant: bool = False
    score: float = 0.0


def znorm(x: np.ndarray) -> tuple[np.ndarray, bool]:
    """Zero-mean unit-variance copy; flat when the spread is below float resolution.

    Flatness is judged relative to the peak magnitude, so rescaling a series
    never changes whether it counts as constant.
    """
    x = np.asarray(x, dtype=np.float64)
    mu = x.mean()
    sd = x.std()
    if sd <= _CONST_TOL * np.abs(x).max(initial=0.0):
        return np.zeros_like(x), True
    return (x - mu) / sd, False


def _znorm_rows(w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mu = w.mean(axis=1, keepdims=True)
    sd = w.std(axis=1, keepdims=True)
    const = (sd <= _CONST_TOL * np.abs(w).max(axis=1, keepdims=True)).ravel()
    z = np.where(const[:, None], 0.0, (w - mu) / np.where(sd > 0, sd, 1.0))
    return z, const


def default_shapelet_length(n: int) -> int:
    return min(n, max(8, n // 10))


def extract_shapelets(series: MetricTimeseries | Sequence[float], length: int | None = None,
                      count: int = 5, population: Sequence[Sequence[float]] | None = None,
                      stride: int | None = None) -> list[Shapelet]:
    """Top ``count`` discriminative z-normalised subsequences.

    Candidates sit on a stride grid. Each is scored by the variance of its
    distance profile: z-normalised Euclidean distance to every window of every
    population series (the series itself by default, trivial overlapping
    matches excluded). Constant windows carry no shape and are ranked last.
    Candidates overlapping an already chosen one by 50% or more are skipped.
    """
    values = series.values if isinstance(series, MetricTimeseries) else np.asarray(series, dtype=np.float64)
    n = values.size
    length = default_shapelet_length(n) if length is None else int(length)
    if length < 2 or length > n:
        raise SeriesError(f"shapelet length {length} invalid for series of length {n}")
    stride = stride or max(1, length // 4)
    offsets = np.arange(0, n - length + 1, stride)
    if offsets[-1] != n - length:
        offsets = np.append(offsets, n - length)
    windows = sliding_window_view(values, length)
    cand, cand_const = _znorm_rows(windows[offsets])

    pop = [values] if population is None else [np.asarray(p, dtype=np.float64) for p in population]
    scores = np.zeros(len(offsets))
    for pi, p in enumerate(pop):
        if p.size < length:
            continue
        pz, _ = _znorm_rows(sliding_window_view(p, length))
        d2 = (cand ** 2).sum(1)[:, None] + (pz ** 2).sum(1)[None, :] - 2.0 * cand @ pz.T
        dist = np.sqrt(np.maximum(d2, 0.0))
        if population is None or p is values:
            starts = np.arange(pz.shape[0])
            trivial = np.abs(offsets[:, None] - starts[None, :]) < length
            dist = np.where(trivial, np.nan, dist)
        scores_p = np.nanvar(dist, axis=1) if dist.shape[1] else np.zeros(len(offsets))
        scores += np.nan_to_num(scores_p)
    order = sorted(range(len(offsets)), key=lambda i: (cand_const[i], -scores[i], offsets[i]))
    chosen: list[Shapelet] = []
    for i in order:
        if len(chosen) >= count:
            break
        o = int(offsets[i])
        if any(length - abs(o - s.offset) >= length / 2 for s in chosen):
            continue
        chosen.append(Shapelet(cand[i].copy(), o, length, bool(cand_const[i]), float(scores[i])))
    if len(chosen) < count:
        # overlap suppression left slots free; fill with the best remaining candidates
        taken = {s.offset for s in chosen}
        for i in order:
            if len(chosen) >= count:
                break
            if int(offsets[i]) not in taken:
                chosen.append(Shapelet(cand[i].copy(), int(offsets[i]), length,
                                       bool(cand_const[i]), float(scores[i])))
                taken.add(int(offsets[i]))
    return chosen


def shapelet_distance(a: Shapelet | Sequence[float], b: Shapelet | Sequence[float]) -> float:
    """Shape-based distance: 1 - best normalised cross-correlation.

    The shorter sequence slides across the longer one with full overlap and
    each aligned window is z-normalised, so the value lies in [0, 2] and is
    invariant to positive affine rescaling of either input.
    """
    x = a.values if isinstance(a, Shapelet) else np.asarray(a, dtype=np.float64)
    y = b.values if isinstance(b, Shapelet) else np.asarray(b, dtype=np.float64)
    if x.size > y.size:
        x, y = y, x
    xz, xc = znorm(x)
    wins, wc = _znorm_rows(sliding_window_view(y, x.size))
    if xc:
        return 0.0 if np.all(wc) else 1.0
    ncc = (wins @ xz) / x.size
    ncc = np.where(wc, -np.inf, ncc)
    if np.all(wc):
        return 1.0
    best = float(np.clip(ncc.max(), -1.0, 1.0))
    return 1.0 - best


# combined similarity

@dataclass
class MetricProfile:
    """A metric as seen by the similarity module."""

    key: str
    text: str
    series: MetricTimeseries | None = None
    conditions: list = field(default_factory=list)
    account: str | None = None


@dataclass(frozen=True)
class SimilarityScore:
    text: float
    ts: float
    combined: float
    weight: float


class SimilarityIndex:
    """Caches embeddings and shapelets for a corpus of metric profiles."""

    def __init__(self, provider: EmbeddingProvider | None = None, weight: float = 0.5,
                 shapelet_count: int = 5, shortlist: int = 20):
        self.provider = provider or EmbeddingProvider()
        self.weight = weight
        self.shapelet_count = shapelet_count
        self.shortlist = shortlist
        self._shapelets: dict[str, list[Shapelet]] = {}

    def embedding(self, m: MetricProfile) -> np.ndarray:
        return self.provider.embed_text(m.text)

    def shapelets(self, m: MetricProfile) -> list[Shapelet] | None:
        if m.series is None or len(m.series) < 2:
            return None
        cache_key = f"{m.key}\0{hash(m.series.values.tobytes())}"
        if cache_key not in self._shapelets:
            self._shapelets[cache_key] = extract_shapelets(m.series, count=self.shapelet_count)
        return self._shapelets[cache_key]

    def similarity(self, m1: MetricProfile, m2: MetricProfile, weight: float | None = None) -> SimilarityScore:
        w = self.weight if weight is None else weight
        text = (cosine(self.embedding(m1), self.embedding(m2)) + 1.0) / 2.0
        s1, s2 = self.shapelets(m1), self.shapelets(m2)
        if s1 is None or s2 is None:
            ts = 0.5
        else:
            dmin = min(shapelet_distance(a, b) for a in s1 for b in s2)
            ts = 1.0 - dmin / 2.0
        return SimilarityScore(text, ts, w * text + (1.0 - w) * ts, w)

    def top_k(self, metric: MetricProfile, corpus: Sequence[MetricProfile], k: int = 5,
              rescorer: Callable[[MetricProfile, MetricProfile], float] | None = None
              ) -> list[tuple[MetricProfile, float]]:
        """Shortlist by embedding closeness, rescore, return the best ``k``."""
        if not corpus:
            raise ValueError("top_k_similar needs a non-empty corpus")
        q = self.embedding(metric)
        closeness = [cosine(q, self.embedding(c)) for c in corpus]
        order = sorted(range(len(corpus)), key=lambda i: (-closeness[i], corpus[i].key))
        shortlist = order[:max(self.shortlist, k)]
        scored = []
        for i in shortlist:
            c = corpus[i]
            score = self.similarity(metric, c).combined
            if rescorer is not None:
                try:
                    llm = float(rescorer(metric, c))
                    if not 0.0 <= llm <= 1.0:
                        raise ValueError(f"rescore {llm} outside [0, 1]")
                    score = (score + llm) / 2.0
                except Exception as exc:  # rescoring is best effort
                    log.warning("rescoring %s failed (%s); keeping base score", c.key, exc)
            scored.append((c, score))
        scored.sort(key=lambda t: (-t[1], t[0].key))
        return scored[:k]


def metric_similarity(m1: MetricProfile, m2: MetricProfile, w: float = 0.5,
                      index: SimilarityIndex | None = None) -> SimilarityScore:
    return (index or SimilarityIndex(weight=w)).similarity(m1, m2, weight=w)


def top_k_similar(metric: MetricProfile, corpus: Sequence[MetricProfile], k: int = 5,
                  rescorer=None, index: SimilarityIndex | None = None):
    return (index or SimilarityIndex()).top_k(metric, corpus, k, rescorer)


def threshold_similarity(t1: float, t2: float) -> float:
    """Ratio similarity of two positive thresholds, 1 when equal."""
    a, b = abs(t1), abs(t2)
    if a == 0 and b == 0:
        return 1.0
    return min(a, b) / max(a, b)
