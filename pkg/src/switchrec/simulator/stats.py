"""Two-proportion z-test and Wald intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

Z_95 = 1.959963984540054


def normal_cdf(x: float) -> float:
    """Standard normal CDF.

    Hart's double-precision rational approximation (algorithm 5666), in the
    form popularised by G. West: a degree 6/7 rational in ``|x|`` times the
    Gaussian kernel below ``|x| = 5*sqrt(2)``, a continued fraction above it.
    Absolute error is below 1e-14 across the real line.
    """
    ax = abs(x)
    if ax > 37.0:
        tail = 0.0
    else:
        e = math.exp(-0.5 * ax * ax)
        if ax < 7.07106781186547:
            num = 3.52624965998911e-02 * ax + 0.700383064443688
            num = num * ax + 6.37396220353165
            num = num * ax + 33.912866078383
            num = num * ax + 112.079291497871
            num = num * ax + 221.213596169931
            num = num * ax + 220.206867912376
            den = 8.83883476483184e-02 * ax + 1.75566716318264
            den = den * ax + 16.064177579207
            den = den * ax + 86.7807322029461
            den = den * ax + 296.564248779674
            den = den * ax + 637.333633378831
            den = den * ax + 793.826512519948
            den = den * ax + 440.413735824752
            tail = e * num / den
        else:
            cf = ax + 0.65
            cf = ax + 4.0 / cf
            cf = ax + 3.0 / cf
            cf = ax + 2.0 / cf
            cf = ax + 1.0 / cf
            tail = e / cf / 2.506628274631
    return 1.0 - tail if x > 0 else tail


def two_sided_p_value(z: float) -> float:
    # from the lower tail directly; 1 - cdf would cancel for large |z|
    return min(1.0, 2.0 * normal_cdf(-abs(z)))


def wald_interval(successes: int, trials: int, z: float = Z_95) -> tuple[float, float]:
    if trials <= 0:
        return (math.nan, math.nan)
    r = successes / trials
    half = z * math.sqrt(r * (1.0 - r) / trials)
    return (r - half, r + half)


@dataclass(frozen=True)
class ZTestResult:
    z: float
    p_value: float
    uplift: float | None  # None when the control rate is zero

    @property
    def uplift_defined(self) -> bool:
        return self.uplift is not None


def uplift(c1: int, n1: int, c2: int, n2: int) -> float | None:
    """Relative change of the second rate over the first, exact up to the final rounding."""
    if c1 == 0:
        return None
    return float(Fraction(c2 * n1, c1 * n2) - 1)


def two_proportion_ztest(c1: int, n1: int, c2: int, n2: int) -> ZTestResult:
    """Pooled two-proportion z-test; arm 1 is control, arm 2 is treatment."""
    if n1 <= 0 or n2 <= 0:
        raise ValueError("both arms need at least one trial")
    if not (0 <= c1 <= n1 and 0 <= c2 <= n2):
        raise ValueError("conversions must lie between 0 and the number of trials")
    p1, p2 = c1 / n1, c2 / n2
    pooled = (c1 + c2) / (n1 + n2)
    var = pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2)
    if var == 0.0 or p1 == p2:
        z = 0.0
    else:
        z = (p2 - p1) / math.sqrt(var)
    return ZTestResult(z, two_sided_p_value(z), uplift(c1, n1, c2, n2))
