"""
Estimators over chain output: integrated autocorrelation time, jump
distances, confidence intervals, KDE marginals, binned total variation and
two-sample KS thresholds.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import ks_2samp, kstwobign

from .geometry import geodesic_distance

Z_975 = 1.959964


@dataclass
class ChainTrace:
    """Post-burn-in output of :func:`spheremcmc.chain.run_chain`."""

    functional_series: dict[str, np.ndarray]
    step_count: int
    accepted_count: int
    jump_distances: np.ndarray
    shrink_tries_total: int = 0
    states: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.accepted_count <= self.step_count:
            raise ValueError("accepted_count must lie in [0, step_count]")
        lengths = {len(v) for v in self.functional_series.values()} | {len(self.jump_distances)}
        if len(lengths) > 1:
            raise ValueError(f"recorded series have unequal lengths: {sorted(lengths)}")

    @property
    def acceptance_rate(self) -> float:
        return self.accepted_count / self.step_count if self.step_count else float("nan")

    @property
    def mean_shrink_tries(self) -> float:
        return self.shrink_tries_total / self.step_count if self.step_count else float("nan")

    @property
    def rmsjd(self) -> float:
        jd = self.jump_distances
        return float(math.sqrt(np.mean(jd * jd))) if jd.size else 0.0


@dataclass
class DiagnosticsReport:
    iact: dict[str, float]
    mean: dict[str, float]
    half_ci: dict[str, float]
    rmsjd: float
    acceptance_rate: float
    mean_shrink_tries: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def autocorrelation(x) -> np.ndarray:
    """Empirical autocorrelation function (biased normalisation) via FFT."""
    x = np.asarray(x, dtype=float)
    n = x.size
    xc = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n] / n
    if acov[0] <= 0:
        return np.zeros(n)
    return acov / acov[0]


def iact(series) -> float:
    """Integrated autocorrelation time with Geyer's initial positive sequence.

    Sums autocorrelations in consecutive pairs Gamma_m = rho(2m) + rho(2m+1)
    while the pair sums stay positive; result is ``-1 + 2 sum Gamma_m``,
    clipped below at 1.  Zero-variance input gives 1.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise ValueError("iact expects a 1-D series")
    if x.size < 100:
        raise ValueError(f"iact needs at least 100 values, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains non-finite values")
    if np.ptp(x) == 0:
        return 1.0
    rho = autocorrelation(x)
    if rho[0] == 0:
        return 1.0
    n_pairs = x.size // 2
    pairs = rho[: 2 * n_pairs].reshape(n_pairs, 2).sum(axis=1)
    neg = np.nonzero(pairs <= 0)[0]
    m = neg[0] if neg.size else n_pairs
    tau = -1.0 + 2.0 * pairs[:m].sum()
    return max(1.0, float(tau))


def rmsjd(states) -> float:
    """Root mean squared geodesic jump distance of a state sequence (n, d)."""
    s = np.asarray(states, dtype=float)
    if s.ndim != 2 or s.shape[0] < 2:
        raise ValueError("rmsjd needs at least two states as an (n, d) array")
    jumps = geodesic_distance(s[:-1], s[1:])
    return float(math.sqrt(np.mean(jumps**2)))


def mean_with_ci(series, confidence: float = 0.95) -> tuple[float, float]:
    """Mean and CI half-width ``z * sqrt(iact * var / n)``."""
    if not math.isclose(confidence, 0.95):
        raise ValueError("only 95% intervals are supported")
    x = np.asarray(series, dtype=float)
    tau = iact(x)
    half = Z_975 * math.sqrt(tau * x.var() / x.size)
    return float(x.mean()), float(half)


def silverman_bandwidth(samples) -> float:
    x = np.asarray(samples, dtype=float)
    sd = x.std(ddof=1)
    iqr = np.subtract(*np.percentile(x, [75, 25]))
    spread = min(sd, iqr / 1.349) if iqr > 0 else sd
    return 0.9 * spread * x.size ** (-0.2)


def kde_marginal(samples, grid, bandwidth: float | None = None, *, chunk: int = 50_000) -> np.ndarray:
    """Gaussian KDE with Silverman's bandwidth, evaluated on ``grid``."""
    x = np.asarray(samples, dtype=float).ravel()
    g = np.asarray(grid, dtype=float)
    if x.size < 1000:
        raise ValueError(f"kde needs at least 1000 samples, got {x.size}")
    if np.ptp(x) == 0:
        raise ValueError("kde of zero-variance samples is degenerate")
    h = silverman_bandwidth(x) if bandwidth is None else bandwidth
    out = np.zeros(g.size)
    for i in range(0, x.size, chunk):
        z = (g[:, None] - x[None, i : i + chunk]) / h
        out += np.exp(-0.5 * z * z).sum(axis=1)
    return out / (x.size * h * math.sqrt(2.0 * math.pi))


def binned_tv(samples_a, samples_b, bins) -> float:
    """Half the L1 distance between the two empirical histograms.

    ``bins`` is either an array of edges or an integer, in which case equal
    width bins over the pooled range are used.
    """
    a = np.asarray(samples_a, dtype=float).ravel()
    b = np.asarray(samples_b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("both sample sets must be nonempty")
    if np.isscalar(bins):
        lo, hi = min(a.min(), b.min()), max(a.max(), b.max())
        if lo == hi:
            return 0.0
        bins = np.linspace(lo, hi, int(bins) + 1)
    pa, _ = np.histogram(a, bins)
    pb, _ = np.histogram(b, bins)
    return 0.5 * float(np.abs(pa / a.size - pb / b.size).sum())


def ks_threshold(n: int, m: int, alpha: float = 0.01) -> float:
    """Asymptotic two-sample KS critical value at level ``alpha``."""
    c = kstwobign.isf(alpha)
    return float(c * math.sqrt((n + m) / (n * m)))


def ks_statistic(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic."""
    return float(ks_2samp(np.ravel(a), np.ravel(b), method="asymp").statistic)


def diagnose(trace: ChainTrace) -> DiagnosticsReport:
    iacts, means, halves = {}, {}, {}
    for name, series in trace.functional_series.items():
        iacts[name] = iact(series)
        means[name], halves[name] = mean_with_ci(series)
    tries = trace.mean_shrink_tries if trace.shrink_tries_total else None
    return DiagnosticsReport(iacts, means, halves, trace.rmsjd, trace.acceptance_rate, tries)
