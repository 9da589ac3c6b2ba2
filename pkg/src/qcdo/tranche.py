"""Tranche payoff and its piecewise-linear description."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class Tranche:
    name: str
    lower: float
    upper: float

    def __post_init__(self):
        if not 0 <= self.lower < self.upper:
            raise ValidationError(
                f"attachment points must satisfy 0 <= lower < upper, got ({self.lower}, {self.upper})",
                self.name,
            )

    @property
    def notional(self) -> float:
        return self.upper - self.lower

    def scaled(self, factor: float) -> Tranche:
        return Tranche(self.name, self.lower * factor, self.upper * factor)


def tranche_loss(total_loss, tranche: Tranche):
    """Loss absorbed by ``tranche`` when the pool loses ``total_loss``."""
    L = np.asarray(total_loss, dtype=float)
    out = np.minimum(tranche.notional, np.maximum(0.0, L - tranche.lower))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class PiecewiseSpec:
    """Piecewise-linear objective on the integer loss range.

    ``offsets[k]`` is the function value at ``breakpoints[k]`` (segment start),
    not the y-intercept of the segment's line. ``[f_min, f_max]`` is mapped
    onto the rotation range ``[0, 2c]``.
    """

    breakpoints: tuple[int, ...]
    slopes: tuple[float, ...]
    offsets: tuple[float, ...]
    f_min: float
    f_max: float
    c: float

    def __post_init__(self):
        n = len(self.breakpoints)
        if n == 0 or len(self.slopes) != n or len(self.offsets) != n:
            raise ValidationError("breakpoints, slopes and offsets need the same non-zero length")
        if any(int(b) != b or b < 0 for b in self.breakpoints):
            raise ValidationError(f"breakpoints must be non-negative integers: {self.breakpoints}")
        if any(b2 <= b1 for b1, b2 in zip(self.breakpoints, self.breakpoints[1:])):
            raise ValidationError(f"breakpoints must be strictly ascending: {self.breakpoints}")
        if not 0 < self.c < 0.5:
            raise ValidationError(f"scaling factor c must lie in (0, 0.5), got {self.c}", "c")
        if not self.f_max > self.f_min:
            raise ValidationError("need f_max > f_min")
        if any(s < 0 for s in self.slopes):
            raise ValidationError(f"slopes must be non-negative: {self.slopes}")
        for k in range(1, n):
            if abs(self.jump(k)) > 1e-12:
                raise ValidationError(f"objective is discontinuous at breakpoint {self.breakpoints[k]}")

    def jump(self, k: int) -> float:
        """Offset at breakpoint ``k`` minus the previous segment's value there."""
        b, s, o = self.breakpoints, self.slopes, self.offsets
        return o[k] - (o[k - 1] + s[k - 1] * (b[k] - b[k - 1]))

    def value(self, L):
        L = np.asarray(L, dtype=float)
        k = np.clip(np.searchsorted(self.breakpoints, L, side="right") - 1, 0, None)
        b = np.asarray(self.breakpoints, dtype=float)[k]
        out = np.asarray(self.offsets)[k] + np.asarray(self.slopes)[k] * (L - b)
        return float(out) if np.ndim(out) == 0 else out

    def rotation(self, L):
        """Amplitude-level objective angle ``g0 + 2c (f(L) - f_min) / (f_max - f_min)``."""
        g0 = math.pi / 4 - self.c
        return g0 + 2 * self.c * (np.asarray(self.value(L)) - self.f_min) / (self.f_max - self.f_min)


def tranche_to_piecewise(tranche: Tranche, max_loss: int, c: float = 0.25) -> PiecewiseSpec:
    """Breakpoint arrays reproducing ``tranche_loss`` on ``0..max_loss``.

    A saturating segment is appended only when ``upper`` lies inside the range.
    """
    lo, hi = tranche.lower, tranche.upper
    if int(lo) != lo or int(hi) != hi:
        raise ValidationError(f"attachment points must be integers here, got ({lo}, {hi})", tranche.name)
    lo, hi = int(lo), int(hi)
    breakpoints, slopes, offsets = [0], [1.0 if lo == 0 else 0.0], [0.0]
    if 0 < lo <= max_loss:
        breakpoints.append(lo)
        slopes.append(1.0)
        offsets.append(0.0)
    if hi < max_loss:
        breakpoints.append(hi)
        slopes.append(0.0)
        offsets.append(float(hi - lo))
    return PiecewiseSpec(tuple(breakpoints), tuple(slopes), tuple(offsets), 0.0, float(hi - lo), c)
