"""Gaussian and normal inverse Gaussian (NIG) laws for the systematic factor.

Both spec classes expose ``pdf``, ``cdf``, ``quantile`` and ``moments`` so the
copula code can treat them interchangeably. NIG uses the
(alpha, beta, mu, delta) parameterisation with ``gamma = sqrt(alpha**2 - beta**2)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate, optimize, special

from .errors import ConvergenceError, ValidationError


class Moments(NamedTuple):
    mean: float
    variance: float
    skewness: float
    kurtosis: float  # full, not excess


@dataclass(frozen=True)
class GaussianSpec:
    mean: float = 0.0
    variance: float = 1.0

    def __post_init__(self):
        if not self.variance > 0:
            raise ValidationError(f"variance must be positive, got {self.variance}", "variance")

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    def pdf(self, x):
        return gaussian_pdf(x, self)

    def cdf(self, x):
        return gaussian_cdf(x, self)

    def quantile(self, p):
        return gaussian_quantile(p, self)

    def moments(self) -> Moments:
        return Moments(self.mean, self.variance, 0.0, 3.0)


@dataclass(frozen=True)
class NigSpec:
    alpha: float
    beta: float
    mu: float
    delta: float

    def __post_init__(self):
        if not 0 <= abs(self.beta) < self.alpha:
            raise ValidationError(
                f"need 0 <= |beta| < alpha, got alpha={self.alpha}, beta={self.beta}", "alpha"
            )
        if not self.delta > 0:
            raise ValidationError(f"delta must be positive, got {self.delta}", "delta")

    @property
    def gamma(self) -> float:
        return math.sqrt(self.alpha**2 - self.beta**2)

    def pdf(self, x):
        return nig_pdf(x, self)

    def cdf(self, x):
        return nig_cdf(x, self)

    def quantile(self, p):
        return nig_quantile(p, self)

    def moments(self) -> Moments:
        """Closed-form moments."""
        a, b, d, g = self.alpha, self.beta, self.delta, self.gamma
        mean = self.mu + d * b / g
        var = d * a**2 / g**3
        skew = 3 * b / (a * math.sqrt(d * g))
        kurt = 3 + 3 * (1 + 4 * b**2 / a**2) / (d * g)
        return Moments(mean, var, skew, kurt)

    @property
    def std(self) -> float:
        return math.sqrt(self.moments().variance)


# Moments (0, 1, 1, 6); alpha is printed with a minus sign in the source table,
# which the constraint |beta| < alpha rules out.
REFERENCE_NIG = NigSpec(alpha=1.6771, beta=0.75, mu=-0.6, delta=1.2)
STANDARD_NORMAL = GaussianSpec(0.0, 1.0)


def gaussian_pdf(x, spec: GaussianSpec = STANDARD_NORMAL):
    u = (np.asarray(x, dtype=float) - spec.mean) / spec.std
    out = np.exp(-0.5 * u * u) / (spec.std * math.sqrt(2 * math.pi))
    return float(out) if np.ndim(out) == 0 else out


def gaussian_cdf(x, spec: GaussianSpec = STANDARD_NORMAL):
    out = special.ndtr((np.asarray(x, dtype=float) - spec.mean) / spec.std)
    return float(out) if np.ndim(out) == 0 else out


def _check_open_unit(p):
    arr = np.asarray(p, dtype=float)
    if np.any(~((arr > 0) & (arr < 1))):
        raise ValidationError(f"probability must lie in (0, 1), got {p}")
    return arr


def gaussian_quantile(p, spec: GaussianSpec = STANDARD_NORMAL):
    out = spec.mean + spec.std * special.ndtri(_check_open_unit(p))
    return float(out) if np.ndim(out) == 0 else out


def bessel_k1(x):
    """Modified Bessel function of the second kind, order 1 (x > 0)."""
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise ValidationError(f"bessel_k1 needs x > 0, got {x}")
    out = special.k1(arr)
    return float(out) if np.ndim(out) == 0 else out


def nig_pdf(x, spec: NigSpec):
    a, b, mu, d = spec.alpha, spec.beta, spec.mu, spec.delta
    x = np.asarray(x, dtype=float)
    q = np.sqrt(1.0 + ((x - mu) / d) ** 2)
    arg = d * a * q
    # k1e(y) = k1(y) * exp(y); fold exp(-arg) into the exponent to avoid underflow
    log_rest = d * spec.gamma + b * (x - mu) - arg
    out = (a / math.pi) * special.k1e(arg) / q * np.exp(log_rest)
    return float(out) if np.ndim(out) == 0 else out


def _nig_span(spec: NigSpec) -> tuple[float, float]:
    return spec.mu - 40 * spec.delta, spec.mu + 40 * spec.delta


def _nig_cdf_scalar(x: float, spec: NigSpec) -> float:
    lo, hi = _nig_span(spec)
    if x <= lo:
        return 0.0
    if x >= hi:
        return 1.0
    center = spec.moments().mean
    f = lambda t: nig_pdf(t, spec)
    kw = dict(epsabs=1e-13, epsrel=1e-12, limit=200)
    # integrate the shorter tail for accuracy
    if x <= center:
        val = integrate.quad(f, lo, x, **kw)[0]
    else:
        val = 1.0 - integrate.quad(f, x, hi, **kw)[0]
    return min(max(val, 0.0), 1.0)


def nig_cdf(x, spec: NigSpec):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return _nig_cdf_scalar(float(arr), spec)
    return np.vectorize(lambda t: _nig_cdf_scalar(float(t), spec))(arr)


@lru_cache(maxsize=4096)
def _nig_quantile_scalar(p: float, spec: NigSpec) -> float:
    lo, hi = _nig_span(spec)
    g = lambda t: _nig_cdf_scalar(t, spec) - p
    g_lo, g_hi = g(lo), g(hi)
    if g_lo > 0 or g_hi < 0:
        raise ConvergenceError(f"NIG quantile of {p} not bracketed by [{lo}, {hi}]")
    try:
        root, info = optimize.brentq(g, lo, hi, xtol=1e-10, rtol=1e-14, full_output=True)
    except (RuntimeError, ValueError) as exc:
        raise ConvergenceError(f"NIG quantile of {p} did not converge: {exc}") from exc
    if not info.converged:
        raise ConvergenceError(f"NIG quantile of {p} did not converge")
    return root


def nig_quantile(p, spec: NigSpec):
    arr = _check_open_unit(p)
    if arr.ndim == 0:
        return _nig_quantile_scalar(float(arr), spec)
    return np.vectorize(lambda t: _nig_quantile_scalar(float(t), spec))(arr)


def quadrature_moments(pdf: Callable, center: float, half_width: float) -> Moments:
    """Mean, variance, skewness and full kurtosis of ``pdf`` by adaptive quadrature."""
    lo, hi = center - half_width, center + half_width
    kw = dict(epsabs=1e-12, limit=400, points=[center])

    def raw(k):
        return integrate.quad(lambda t: t**k * pdf(t), lo, hi, **kw)[0]

    m0 = raw(0)
    mean = raw(1) / m0

    def central(k):
        return integrate.quad(lambda t: (t - mean) ** k * pdf(t), lo, hi, **kw)[0] / m0

    var = central(2)
    return Moments(mean, var, central(3) / var**1.5, central(4) / var**2)


@dataclass(frozen=True)
class DiscreteDistribution:
    """``2**n_z`` equally spaced grid points on ``[low, high]`` with probabilities."""

    grid: np.ndarray
    probs: np.ndarray
    low: float
    high: float
    n_z: int

    def __post_init__(self):
        size = 1 << self.n_z
        if len(self.grid) != size or len(self.probs) != size:
            raise ValidationError(f"grid and probs must have 2**{self.n_z} = {size} entries")
        if np.any(self.probs < 0) or abs(self.probs.sum() - 1.0) > 1e-12:
            raise ValidationError("probabilities must be non-negative and sum to 1")

    @property
    def spacing(self) -> float:
        return (self.high - self.low) / ((1 << self.n_z) - 1)

    def mode_index(self) -> int:
        return int(np.argmax(self.probs))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["z", "probability"])
        for z, p in zip(self.grid, self.probs):
            writer.writerow([repr(float(z)), repr(float(p))])
        return buf.getvalue()


def discretize(pdf: Callable, n_z: int, low: float, high: float) -> DiscreteDistribution:
    """Evaluate ``pdf`` on a uniform ``2**n_z`` grid over [low, high] and renormalise."""
    if n_z < 1:
        raise ValidationError(f"n_z must be >= 1, got {n_z}", "n_z")
    if not low < high:
        raise ValidationError(f"need low < high, got [{low}, {high}]", "low")
    grid = np.linspace(low, high, 1 << n_z)
    weights = np.asarray(pdf(grid), dtype=float)
    total = weights.sum()
    if not total > 0:
        raise ValidationError("density vanishes on every grid point")
    probs = weights / total
    probs /= probs.sum()
    return DiscreteDistribution(grid, probs, float(low), float(high), n_z)


def default_range(spec: GaussianSpec | NigSpec, width: float = 3.0) -> tuple[float, float]:
    """Truncation interval mean +/- width standard deviations."""
    m = spec.moments()
    s = math.sqrt(m.variance)
    return m.mean - width * s, m.mean + width * s
