"""Conditional-independence default model and its rotation-angle linearisation.

Conditional on the systematic factor ``Z = z`` an asset defaults with

    p(z) = F((F^-1(p0) - sqrt(rho) * z) / sqrt(1 - rho))

Rotation coefficients are stored in gate convention: an ``RY`` of angle
``offset + slope * z`` loads ``sin((offset + slope * z) / 2) ** 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .dist import DiscreteDistribution
from .errors import ValidationError


class Distribution(Protocol):
    def pdf(self, x): ...
    def cdf(self, x): ...
    def quantile(self, p): ...


@dataclass(frozen=True)
class Asset:
    """One pool constituent.

    ``loss_given_default`` is usually an integer number of monetary units;
    fractional values only appear after a recovery adjustment.
    """

    loss_given_default: float
    default_prob: float
    correlation: float

    def __post_init__(self):
        if not 0 < self.default_prob < 1:
            raise ValidationError(f"must lie in (0, 1), got {self.default_prob}", "default_prob")
        if not 0 <= self.correlation < 1:
            raise ValidationError(f"must lie in [0, 1), got {self.correlation}", "correlation")
        if not self.loss_given_default >= 0:
            raise ValidationError(
                f"must be non-negative, got {self.loss_given_default}", "loss_given_default"
            )


@dataclass(frozen=True)
class RotationCoeffs:
    slope: float
    offset: float

    def angle(self, z):
        return self.offset + self.slope * np.asarray(z, dtype=float)

    def loaded_prob(self, z):
        out = np.sin(self.angle(z) / 2) ** 2
        return float(out) if np.ndim(out) == 0 else out


def _unclamped(asset: Asset, z, F: Distribution):
    rho = asset.correlation
    arg = (F.quantile(asset.default_prob) - math.sqrt(rho) * np.asarray(z, dtype=float)) / math.sqrt(1 - rho)
    return np.asarray(F.cdf(arg), dtype=float)


def conditional_default_prob(asset: Asset, z, F: Distribution):
    """Default probability of ``asset`` given ``Z = z`` (scalar or array ``z``)."""
    out = np.clip(_unclamped(asset, z, F), 0.0, 1.0)
    return float(out) if np.ndim(out) == 0 else out


def linearization_coeffs(asset: Asset, F: Distribution) -> RotationCoeffs:
    """First-order expansion of ``arcsin(sqrt(p(z)))`` around ``z = 0``, doubled for ``RY``."""
    rho = asset.correlation
    psi = F.quantile(asset.default_prob) / math.sqrt(1 - rho)
    F_psi = float(F.cdf(psi))
    if F_psi < 1e-12 or F_psi > 1 - 1e-12:
        raise ValidationError(f"F(psi) = {F_psi} is degenerate; slope is singular")
    amp_slope = -math.sqrt(rho) / (2 * math.sqrt(1 - rho)) * float(F.pdf(psi)) / (
        math.sqrt(1 - F_psi) * math.sqrt(F_psi)
    )
    return RotationCoeffs(slope=2 * amp_slope, offset=2 * math.asin(math.sqrt(F_psi)))


def affine_grid_angles(coeffs: RotationCoeffs, dist: DiscreteDistribution) -> tuple[float, np.ndarray]:
    """Split ``offset + slope * grid[i]`` into a base angle and one angle per index bit.

    With ``i = sum_j b_j 2**j`` the total ``base + sum_j b_j * per_qubit[j]`` is
    ``offset + slope * (low + i * h)``.
    """
    base = coeffs.offset + coeffs.slope * dist.low
    per_qubit = coeffs.slope * dist.spacing * (2.0 ** np.arange(dist.n_z))
    return base, per_qubit


def taylor_deviation(asset: Asset, F: Distribution, grid) -> float:
    """Largest gap between the loaded and the exact conditional probability on ``grid``."""
    coeffs = linearization_coeffs(asset, F)
    return float(np.max(np.abs(coeffs.loaded_prob(grid) - conditional_default_prob(asset, grid, F))))


def clamping_active(asset: Asset, grid, F: Distribution) -> bool:
    raw = _unclamped(asset, grid, F)
    return bool(np.any((raw < 0) | (raw > 1)))
