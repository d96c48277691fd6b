"""Numeric distribution families with deterministic CDF evaluation.

The coder requires that the compressing and the decompressing process
derive bit-identical branch probabilities from the same stored
parameters.  libm's exp/erf vary by a few ulps across platforms, which
is enough to flip a probability snapped onto the coding grid, so the
transcendental kernels here are fixed-operation-order polynomials over
IEEE-754 basic operations only.  Accuracy is secondary (absolute CDF
error < 1e-7); probabilities must be reproducible, not exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

_LN2_HI = 6.93147180369123816490e-01
_LN2_LO = 1.90821492927058770002e-10
_INV_LN2 = 1.4426950408889634
_INV_SQRT_TWO_PI = 0.3989422804014327

# 1/k! for the exp Taylor tail, k = 2..13.  |r| <= ln2/2 keeps the
# truncation error below 1e-16.
_EXP_COEFFS = (
    0.5,
    1.6666666666666666e-01,
    4.1666666666666664e-02,
    8.3333333333333332e-03,
    1.3888888888888889e-03,
    1.9841269841269841e-04,
    2.4801587301587302e-05,
    2.7557319223985893e-06,
    2.7557319223985888e-07,
    2.5052108385441720e-08,
    2.0876756987868100e-09,
    1.6059043836821613e-10,
)


def det_exp(x: float) -> float:
    """exp(x) from basic float operations in a fixed order."""
    if x != x:
        raise ValueError("exp of nan")
    if x > 709.0:
        return math.inf
    if x < -745.0:
        return 0.0
    k = int(round(x * _INV_LN2))
    r = (x - k * _LN2_HI) - k * _LN2_LO
    p = _EXP_COEFFS[-1]
    for c in reversed(_EXP_COEFFS[:-1]):
        p = p * r + c
    p = 1.0 + r * (1.0 + r * p)
    return math.ldexp(p, k)


def std_normal_cdf(z: float) -> float:
    """Rational-polynomial Phi(z), monotone to well below coding precision."""
    if z < -38.0:
        return 0.0
    if z > 38.0:
        return 1.0
    a = -z if z < 0.0 else z
    t = 1.0 / (1.0 + 0.2316419 * a)
    poly = t * (
        0.319381530
        + t * (-0.356563782 + t * (1.781477937 + t * (-1.821255978 + t * 1.330274429)))
    )
    tail = det_exp(-0.5 * a * a) * _INV_SQRT_TWO_PI * poly
    return tail if z < 0.0 else 1.0 - tail


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def cdf(self, x: float) -> float:
        if x <= self.lo:
            return 0.0
        if x >= self.hi:
            return 1.0
        return (x - self.lo) / (self.hi - self.lo)

    def mass(self, a: float, b: float) -> float:
        m = self.cdf(b) - self.cdf(a)
        return m if m > 0.0 else 0.0


@dataclass(frozen=True)
class Gaussian:
    mu: float
    sigma: float  # > 0

    def cdf(self, x: float) -> float:
        return std_normal_cdf((x - self.mu) / self.sigma)

    def mass(self, a: float, b: float) -> float:
        m = self.cdf(b) - self.cdf(a)
        return m if m > 0.0 else 0.0


@dataclass(frozen=True)
class Laplace:
    mu: float
    b: float  # > 0

    def cdf(self, x: float) -> float:
        u = (x - self.mu) / self.b
        if u < 0.0:
            return 0.5 * det_exp(u)
        return 1.0 - 0.5 * det_exp(-u)

    def mass(self, a: float, b: float) -> float:
        m = self.cdf(b) - self.cdf(a)
        return m if m > 0.0 else 0.0


Law = Uniform | Gaussian | Laplace
