"""Statistical edge annealing.

Edges whose parameters cannot be distinguished from the initialization null
model, or from directionless random-walk noise, are zeroed. Scalar matrices
use a two-sided tail test plus a row-normalized equiprobability band;
multi-channel bundles use a chi-square test on the edge sequence norm plus a
binomial channel-consistency test.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import stats
from .linalg import ChannelBundle, as_real_matrix

PREFERENCE = "preference"
NOISE = "noise"
SUPPRESSED = "suppressed"
REMOVED_NORM = "removed-norm"
KEPT = "kept"
LABELS = (PREFERENCE, NOISE, SUPPRESSED, REMOVED_NORM, KEPT)

# median(|Z|) for Z ~ N(0, 1)
_MAD_FACTOR = 0.674489750196


@dataclass(frozen=True)
class InitDistribution:
    sigma: float
    kind: str = "gaussian-zero-mean"

    def __post_init__(self):
        if self.kind != "gaussian-zero-mean":
            raise ValueError(f"unsupported initialization distribution {self.kind!r}")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma}")


@dataclass(frozen=True)
class TestConfig:
    """Annealing parameters.

    ``delta0`` and ``tau`` default to ``1/(10 n)`` when left as ``None``.
    """

    alpha: float = 0.05
    delta0: float | None = None
    tau: float | None = None
    bins: int = 10
    k: int = 8
    retain_suppressed: bool = False

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        for name in ("delta0", "tau"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive, got {v}")
        if self.bins < 2:
            raise ValueError("bins must be at least 2")
        if self.k < 1:
            raise ValueError("k must be positive")

    def bandwidth_start(self, n: int) -> float:
        return self.delta0 if self.delta0 is not None else 1.0 / (10 * n)

    def bandwidth_step(self, n: int) -> float:
        return self.tau if self.tau is not None else 1.0 / (10 * n)


def estimate_sigma(values: np.ndarray) -> float:
    """Robust scale of a zero-mean population: ``median(|w|) / 0.6745``."""
    sigma = float(np.median(np.abs(np.asarray(values, dtype=np.float64)))) / _MAD_FACTOR
    if not sigma > 0:
        raise ValueError("cannot estimate sigma: population median magnitude is zero")
    return sigma


# scalar tests -----------------------------------------------------------

def neyman_threshold(f0: InitDistribution, alpha: float) -> float:
    """``c`` with ``P(|w| >= c) = alpha`` under ``f0``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return f0.sigma * stats.norm_ppf(1.0 - alpha / 2.0)


def neyman_tail_test(w: float, f0: InitDistribution, alpha: float) -> str:
    """Return ``"reject"`` when ``|w|`` falls in the two-sided rejection region."""
    if not math.isfinite(w):
        raise ValueError("weight must be finite")
    return "reject" if abs(w) >= neyman_threshold(f0, alpha) else "accept"


class Normalized(NamedTuple):
    values: np.ndarray
    zero_rows: np.ndarray


def row_normalize(w: np.ndarray) -> Normalized:
    """``|w_ij| / sum_j |w_ij|``; all-zero rows stay zero and are flagged."""
    w = as_real_matrix(w)
    if w.shape[0] != w.shape[1]:
        raise ValueError("row normalization expects a square matrix")
    mag = np.abs(w)
    sums = mag.sum(axis=1)
    zero_rows = sums == 0.0
    out = np.zeros_like(mag)
    ok = ~zero_rows
    out[ok] = mag[ok] / sums[ok, None]
    return Normalized(out, zero_rows)


def _uniformity_rejected(inside: np.ndarray, lo: float, hi: float, bins: int, crit: float) -> bool:
    m = inside.size
    if m == 0:
        return False
    counts, _ = np.histogram(inside, bins=bins, range=(lo, hi))
    if np.count_nonzero(counts) == 1:
        # all mass in one bin: no spread to test, treated as uniform
        return False
    expected = m / bins
    statistic = float(np.sum((counts - expected) ** 2) / expected)
    return statistic >= crit


def estimate_bandwidth(population, n: int, cfg: TestConfig) -> float:
    """Widest band ``[1/n - d, 1/n + d]`` over which the population looks uniform.

    The band grows from ``delta0`` in steps of ``tau``; each candidate is
    checked with a Pearson chi-square test over ``cfg.bins`` equal-width bins.
    The last accepted width is returned at the first rejection (``delta0`` if
    the very first candidate is rejected), and the width never exceeds ``1/n``.
    """
    pop = np.asarray(population, dtype=np.float64).ravel()
    if pop.size == 0:
        raise ValueError("bandwidth estimation needs a non-empty population")
    centre = 1.0 / n
    cap = centre
    start = cfg.bandwidth_start(n)
    step = cfg.bandwidth_step(n)
    crit = stats.chi2_ppf(1.0 - cfg.alpha, cfg.bins - 1)
    accepted = None
    m = 0
    while True:
        delta = start + m * step
        if delta > cap:
            return cap
        lo, hi = centre - delta, centre + delta
        inside = pop[(pop >= lo) & (pop <= hi)]
        if _uniformity_rejected(inside, lo, hi, cfg.bins, crit):
            return start if accepted is None else accepted
        accepted = delta
        m += 1


def classify_edge(wt: float, n: int, delta: float) -> str:
    if not delta > 0:
        raise ValueError("delta must be positive")
    centre = 1.0 / n
    if wt > centre + delta:
        return PREFERENCE
    if wt < centre - delta:
        return SUPPRESSED
    return NOISE


def classify_matrix(wt: np.ndarray, n: int, delta: float) -> np.ndarray:
    """Vectorised :func:`classify_edge`; returns an object array of labels."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    centre = 1.0 / n
    labels = np.full(wt.shape, NOISE, dtype=object)
    labels[wt > centre + delta] = PREFERENCE
    labels[wt < centre - delta] = SUPPRESSED
    return labels


# channel tests ----------------------------------------------------------

def _sum_squares(seq: np.ndarray) -> np.ndarray:
    # ascending-index accumulation over the last axis
    acc = np.zeros(seq.shape[:-1], dtype=np.float64)
    for g in range(seq.shape[-1]):
        acc = acc + seq[..., g] * seq[..., g]
    return acc


def sequence_norm_threshold(alpha: float, k: int) -> float:
    if k <= 0:
        raise ValueError("sequence length must be positive")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return stats.chi2_ppf(1.0 - alpha, k)


def sequence_norm_test(seq, sigma: float, alpha: float, k: int | None = None) -> str:
    """Keep the edge when ``sum(x**2) / sigma**2`` reaches the chi-square_k tail."""
    seq = np.asarray(seq, dtype=np.float64).ravel()
    k = seq.size if k is None else k
    if k == 0 or seq.size != k:
        raise ValueError(f"sequence has length {seq.size}, expected k={k} > 0")
    if not np.all(np.isfinite(seq)):
        raise ValueError("sequence contains NaN or Inf")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    statistic = float(_sum_squares(seq)) / (sigma * sigma)
    return "keep" if statistic >= sequence_norm_threshold(alpha, k) else "remove"


def band_count(seq_normalized, n: int, delta: float) -> int:
    seq = np.asarray(seq_normalized, dtype=np.float64)
    centre = 1.0 / n
    return int(np.count_nonzero((seq >= centre - delta) & (seq <= centre + delta)))


def consistency_pvalue(count: int, k: int, p0: float) -> float:
    """Lower-tail p-value ``P(Binomial(k, p0) <= count)``."""
    return stats.binom_cdf(count, k, p0)


def channel_consistency_test(seq_normalized, n: int, delta: float, p0: float, alpha: float) -> str:
    """Keep the edge when too few channel components sit in the noise band."""
    if not 0.0 < p0 < 1.0:
        raise ValueError(f"p0 must lie in (0, 1), got {p0}")
    seq = np.asarray(seq_normalized, dtype=np.float64).ravel()
    count = band_count(seq, n, delta)
    return "keep" if consistency_pvalue(count, seq.size, p0) <= alpha else "remove"


# orchestration ----------------------------------------------------------

@dataclass
class AnnealedSystem:
    weights: np.ndarray | ChannelBundle
    kept: np.ndarray
    labels: np.ndarray
    report: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.kept.shape[0]

    def label_counts(self) -> dict[str, int]:
        return {lab: int(np.count_nonzero(self.labels == lab)) for lab in LABELS}


def _scalar_anneal(w: np.ndarray, f0: InitDistribution, cfg: TestConfig) -> AnnealedSystem:
    n = w.shape[0]
    threshold = neyman_threshold(f0, cfg.alpha)
    significant = np.abs(w) >= threshold
    norm = row_normalize(w)
    population = norm.values[~norm.zero_rows]
    delta = estimate_bandwidth(population if population.size else np.zeros(1), n, cfg)
    labels = classify_matrix(norm.values, n, delta)
    # rows with no mass have no direction to prefer
    labels[norm.zero_rows, :] = NOISE
    structural = labels == PREFERENCE
    if cfg.retain_suppressed:
        structural |= labels == SUPPRESSED
    kept = significant & structural
    annealed = np.where(kept, w, 0.0)
    report = {
        "mode": "scalar",
        "n": n,
        "sigma": f0.sigma,
        "alpha": cfg.alpha,
        "neyman_threshold": threshold,
        "neyman_rejections": int(np.count_nonzero(significant)),
        "delta": delta,
        "zero_rows": int(np.count_nonzero(norm.zero_rows)),
    }
    return AnnealedSystem(annealed, kept, labels, report)


def _channel_anneal(b: ChannelBundle, f0: InitDistribution, cfg: TestConfig) -> AnnealedSystem:
    n, k = b.n, b.k
    seq = b.sequences()
    threshold = sequence_norm_threshold(cfg.alpha, k)
    statistic = _sum_squares(seq) / (f0.sigma * f0.sigma)
    norm_pass = statistic >= threshold

    normalized = [row_normalize(m) for m in b.channels]
    w_all = np.concatenate([nm.values[~nm.zero_rows].ravel() for nm in normalized] or [np.zeros(0)])
    delta = estimate_bandwidth(w_all if w_all.size else np.zeros(1), n, cfg)
    centre = 1.0 / n
    in_band = np.stack(
        [(nm.values >= centre - delta) & (nm.values <= centre + delta) for nm in normalized], axis=-1
    )
    p0 = float(np.count_nonzero(in_band)) / in_band.size
    counts = in_band.sum(axis=-1)
    if 0.0 < p0 < 1.0:
        pvals = np.array([consistency_pvalue(c, k, p0) for c in range(k + 1)])
        consistent = pvals[counts] <= cfg.alpha
    else:
        # degenerate population: the null predicts the observed count surely
        consistent = np.zeros((n, n), dtype=bool)

    kept = norm_pass & consistent
    labels = np.full((n, n), KEPT, dtype=object)
    labels[~consistent] = NOISE
    labels[~norm_pass] = REMOVED_NORM
    annealed = b.map(lambda m: np.where(kept, m, 0.0))
    report = {
        "mode": "channel",
        "n": n,
        "k": k,
        "sigma": f0.sigma,
        "alpha": cfg.alpha,
        "norm_threshold": threshold,
        "norm_passes": int(np.count_nonzero(norm_pass)),
        "delta": delta,
        "p0": p0,
    }
    return AnnealedSystem(annealed, kept, labels, report)


def anneal(
    weights: np.ndarray | ChannelBundle, f0: InitDistribution | None = None, cfg: TestConfig | None = None
) -> AnnealedSystem:
    """Zero every edge that fails the annealing tests.

    When ``f0`` is omitted its scale is estimated robustly from the whole
    parameter population.
    """
    cfg = cfg or TestConfig()
    channel = isinstance(weights, ChannelBundle)
    if not channel:
        weights = as_real_matrix(weights, "weights")
        if weights.shape[0] != weights.shape[1]:
            raise ValueError("weights must be square")
    if f0 is None:
        population = weights.sequences() if channel else weights
        # an all-zero system anneals away entirely under any positive scale
        if not np.any(population):
            sigma = 1.0
        elif np.median(np.abs(population)) > 0:
            sigma = estimate_sigma(population)
        else:
            # mostly-sparse input: scale from the surviving entries only
            sigma = estimate_sigma(population[population != 0.0])
        f0 = InitDistribution(sigma)
    result = _channel_anneal(weights, f0, cfg) if channel else _scalar_anneal(weights, f0, cfg)
    counts = result.label_counts()
    result.report["labels"] = {k: v for k, v in counts.items() if v}
    result.report["kept"] = int(np.count_nonzero(result.kept))
    result.report["removed"] = int(result.kept.size - result.report["kept"])
    result.report["kept_fraction"] = result.report["kept"] / result.kept.size
    return result
