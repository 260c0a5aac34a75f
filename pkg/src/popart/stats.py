"""Adaptive normalization statistics for streaming targets.

The central object is :class:`Normalizer`, which maintains a running shift
``mu`` (first moment) and second moment ``nu`` per output component, and
derives the scale as ``sigma = sqrt(nu - mu**2) / spread``.  Updating the
statistics *before* consuming a target guarantees the normalized target is
bounded by ``spread * sqrt((1 - beta_t) / beta_t)`` regardless of the
target distribution, which is what makes the normalization safe against
arbitrarily large spikes.

Also provided:

- :func:`batch_stats`: one-shot statistics of a finite batch, either by
  moments or by symmetric order statistics around the median.
- :class:`PercentileTracker`: stochastic-approximation tracking of the
  values that a fraction ``(1-p)/2`` of targets exceed / fall below.
- :class:`ExtremeTracker`: moving average of minibatch min/max, which for
  uniform data converges to the same objective with ``p = (B-1)/(B+1)``.
- :func:`spread_from_coverage` / :func:`coverage_from_spread`: the
  erf correspondence between a desired in-band fraction ``p`` of normal
  targets and the spread ``s``.
"""

from __future__ import annotations

import math

import numpy as np

from .schedules import ScheduleKind, StepSizeSchedule, harmonic

DEFAULT_EPSILON = 1e-4


def _as_vector(y, k: int) -> np.ndarray:
    arr = np.asarray(y, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.shape != (k,):
        raise ValueError(f"expected {k} target components, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite target")
    return arr


class Normalizer:
    """Running shift/scale statistics for ``k`` output components.

    The scale is diagonal: each component has its own ``mu`` and ``nu``.
    ``nu - mu**2`` is clamped up to ``epsilon`` after every update so the
    scale is always finite and positive.
    """

    def __init__(
        self,
        k: int = 1,
        spread: float = 1.0,
        epsilon: float = DEFAULT_EPSILON,
        schedule: StepSizeSchedule | None = None,
    ):
        if k < 1:
            raise ValueError("k must be >= 1")
        if spread <= 0:
            raise ValueError("spread must be positive")
        if epsilon <= 0:
            raise ValueError("epsilon must be positive")
        self.k = k
        self.spread = float(spread)
        self.epsilon = float(epsilon)
        self.schedule = schedule if schedule is not None else harmonic()
        self.mu = np.zeros(k)
        self.nu = np.zeros(k)
        self._clamp()

    def _clamp(self) -> None:
        np.maximum(self.nu, self.mu**2 + self.epsilon, out=self.nu)

    @property
    def t(self) -> int:
        return self.schedule.t

    @property
    def sigma(self) -> np.ndarray:
        """Scale per component: ``sqrt(nu - mu**2) / spread``.

        The variance is floored at ``epsilon`` here as well as in the
        stored state: when ``mu**2`` is huge the stored clamp can be lost
        to rounding (``mu**2 + epsilon`` rounds back to ``mu**2``).
        """
        return np.sqrt(np.maximum(self.nu - self.mu**2, self.epsilon)) / self.spread

    def update(self, y) -> None:
        """Move ``mu`` and ``nu`` toward the new target, then clamp."""
        arr = _as_vector(y, self.k)
        beta = self.schedule.step()
        self.mu += beta * (arr - self.mu)
        self.nu += beta * (arr**2 - self.nu)
        self._clamp()

    def normalize(self, y) -> np.ndarray:
        arr = _as_vector(y, self.k)
        return (arr - self.mu) / self.sigma

    def unnormalize(self, y_tilde) -> np.ndarray:
        arr = _as_vector(y_tilde, self.k)
        return arr * self.sigma + self.mu

    def copy(self) -> "Normalizer":
        other = Normalizer(self.k, self.spread, self.epsilon, self.schedule.copy())
        other.mu = self.mu.copy()
        other.nu = self.nu.copy()
        return other

    def to_dict(self) -> dict:
        return {
            "mu": self.mu.tolist(),
            "nu": self.nu.tolist(),
            "spread": self.spread,
            "epsilon": self.epsilon,
            "schedule": self.schedule.to_dict(),
            "t": self.schedule.t,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        schedule = StepSizeSchedule.from_dict(d["schedule"])
        obj = cls(
            k=len(d["mu"]),
            spread=d["spread"],
            epsilon=d["epsilon"],
            schedule=schedule,
        )
        obj.mu = np.asarray(d["mu"], dtype=float)
        obj.nu = np.asarray(d["nu"], dtype=float)
        return obj


def _interpolated_order_stat(sorted_values: np.ndarray, rank: float) -> float:
    """Order statistic at a 1-based, possibly fractional, rank."""
    t = len(sorted_values)
    rank = min(max(rank, 1.0), float(t))
    lo = int(math.floor(rank))
    hi = int(math.ceil(rank))
    if lo == hi:
        return float(sorted_values[lo - 1])
    frac = rank - lo
    return float((1.0 - frac) * sorted_values[lo - 1] + frac * sorted_values[hi - 1])


def batch_stats(
    targets,
    mode: str = "moments",
    p: float = 1.0,
    spread: float = 1.0,
    epsilon: float = DEFAULT_EPSILON,
) -> tuple[float, float]:
    """Shift and scale of a finite batch of scalar targets.

    ``moments`` mode returns the sample mean and
    ``sqrt(mean-of-squares - mean**2) / spread``, with the variance floored
    at ``epsilon``.  ``percentile`` mode places a fraction ``p`` of the
    batch inside ``[mu - sigma, mu + sigma]`` using the symmetric order
    statistics at 1-based ranks ``(t+1)/2 +- p*(t-1)/2``, interpolating
    linearly at non-integer ranks.
    """
    arr = np.asarray(targets, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError("need at least 2 targets")
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite target")
    if mode == "moments":
        mu = float(arr.mean())
        var = max(float((arr**2).mean()) - mu**2, epsilon)
        return mu, math.sqrt(var) / spread
    if mode == "percentile":
        if not (0.0 < p <= 1.0):
            raise ValueError(f"p must be in (0, 1], got {p}")
        t = arr.size
        srt = np.sort(arr)
        hi = _interpolated_order_stat(srt, (t + 1) / 2 + p * (t - 1) / 2)
        lo = _interpolated_order_stat(srt, (t + 1) / 2 - p * (t - 1) / 2)
        mu = 0.5 * (hi + lo)
        sigma = 0.5 * (hi - lo)
        if sigma <= 0.0:
            sigma = math.sqrt(epsilon) / spread
        return mu, sigma
    raise ValueError(f"unknown mode {mode!r}")


class PercentileTracker:
    """Tracks ``y_min``/``y_max`` such that a fraction ``(1-p)/2`` of a
    stationary stream exceeds ``y_max`` and the same fraction falls below
    ``y_min``.

    The first observed target seeds both bounds; subsequent targets move
    the bounds by ``beta_t * (indicator - (1-p)/2)``.
    """

    def __init__(self, p: float, schedule: StepSizeSchedule | None = None):
        if not (0.0 < p <= 1.0):
            raise ValueError(f"p must be in (0, 1], got {p}")
        self.p = float(p)
        self.schedule = schedule if schedule is not None else harmonic()
        self.y_min = math.nan
        self.y_max = math.nan

    @property
    def initialized(self) -> bool:
        return math.isfinite(self.y_min)

    def update(self, y: float) -> None:
        y = float(y)
        if not math.isfinite(y):
            raise ValueError("non-finite target")
        if not self.initialized:
            self.y_min = self.y_max = y
            return
        beta = self.schedule.step()
        tail = (1.0 - self.p) / 2.0
        self.y_max += beta * ((1.0 if y > self.y_max else 0.0) - tail)
        self.y_min -= beta * ((1.0 if y < self.y_min else 0.0) - tail)

    @property
    def mu(self) -> float:
        return 0.5 * (self.y_max + self.y_min)

    @property
    def sigma(self) -> float:
        return 0.5 * (self.y_max - self.y_min)


class ExtremeTracker:
    """Moving average of minibatch extremes.

    ``y_min`` and ``y_max`` chase the min and max of each minibatch of a
    fixed size ``B``; the first minibatch seeds both.  The derived shift
    and scale are the midpoint and half-range, as for
    :class:`PercentileTracker`.
    """

    def __init__(self, batch_size: int, schedule: StepSizeSchedule | None = None):
        if batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        self.batch_size = int(batch_size)
        self.schedule = schedule if schedule is not None else harmonic()
        self.y_min = math.nan
        self.y_max = math.nan

    @property
    def initialized(self) -> bool:
        return math.isfinite(self.y_min)

    def update(self, batch) -> None:
        arr = np.asarray(batch, dtype=float)
        if arr.shape != (self.batch_size,):
            raise ValueError(
                f"expected batch of {self.batch_size}, got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("non-finite target")
        lo = float(arr.min())
        hi = float(arr.max())
        if not self.initialized:
            self.y_min, self.y_max = lo, hi
            return
        beta = self.schedule.step()
        self.y_min += beta * (lo - self.y_min)
        self.y_max += beta * (hi - self.y_max)

    @property
    def mu(self) -> float:
        return 0.5 * (self.y_max + self.y_min)

    @property
    def sigma(self) -> float:
        return 0.5 * (self.y_max - self.y_min)


# Rational approximation of erf (Abramowitz & Stegun 7.1.26 style); keeps
# the package free of heavyweight math dependencies.
_ERF_P = 0.3275911
_ERF_A = (0.254829592, -0.284496736, 1.421413741, -1.453152027, 1.061405429)


def erf(x: float) -> float:
    """Error function via a rational approximation (abs error ~1.5e-7)."""
    sign = 1.0 if x >= 0 else -1.0
    x = abs(x)
    t = 1.0 / (1.0 + _ERF_P * x)
    poly = t * (
        _ERF_A[0]
        + t * (_ERF_A[1] + t * (_ERF_A[2] + t * (_ERF_A[3] + t * _ERF_A[4])))
    )
    return sign * (1.0 - poly * math.exp(-x * x))


def _erf_inverse(p: float) -> float:
    """Inverse of :func:`erf` on (0, 1) by bisection."""
    lo, hi = 0.0, 1.0
    while erf(hi) < p:
        hi *= 2.0
        if hi > 1e3:  # pragma: no cover - p astronomically close to 1
            break
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if erf(mid) < p:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    return 0.5 * (lo + hi)


def spread_from_coverage(p: float) -> float:
    """Spread ``s`` such that a fraction ``p`` of normally distributed
    targets lands in ``[-1, 1]`` after normalization: ``p = erf(1/(sqrt(2) s))``.
    """
    if not (0.0 < p < 1.0):
        raise ValueError(f"p must be in (0, 1), got {p}")
    return 1.0 / (math.sqrt(2.0) * _erf_inverse(p))


def coverage_from_spread(s: float) -> float:
    """Inverse of :func:`spread_from_coverage`."""
    if s <= 0:
        raise ValueError(f"s must be positive, got {s}")
    return erf(1.0 / (math.sqrt(2.0) * s))
