"""Chi-squared distribution function and quantiles via the regularized
incomplete gamma function."""
import math

_EPS = 1e-16
_TINY = 1e-300


def _gamma_series(a, x):
    # P(a, x) by its power series; converges fast for x < a + 1.
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(10_000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cont_frac(a, x):
    # Q(a, x) by the modified Lentz continued fraction; used for x >= a + 1.
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gammainc_lower(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x)."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x <= 0:
        return 0.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return 1.0 - _gamma_cont_frac(a, x)


def gammainc_upper(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x)."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x <= 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_cont_frac(a, x)


def chisq_cdf(x: float, r: int) -> float:
    return gammainc_lower(0.5 * r, 0.5 * x)


def chisq_sf(x: float, r: int) -> float:
    """Upper tail P(chi2_r > x); this is the p-value of an EL ratio statistic."""
    return gammainc_upper(0.5 * r, 0.5 * x)


def chisq_quantile(r: int, level: float, tol: float = 1e-12) -> float:
    """Point ``x`` with ``P(chi2_r <= x) = level``, by bisection.

    ``chisq_quantile(1, 0.95)`` is the 95% critical value 3.8414588...
    """
    if int(r) != r or r < 1:
        raise ValueError(f"degrees of freedom must be a positive integer, got {r}")
    if not (0.0 < level < 1.0):
        raise ValueError(f"level must lie in (0, 1), got {level}")
    tail = 1.0 - level
    lo, hi = 0.0, max(1.0, float(r))
    while chisq_sf(hi, r) > tail:
        lo, hi = hi, 2.0 * hi
    # Compare on whichever tail is smaller to keep relative precision.
    use_upper = tail < 0.5
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        below = chisq_sf(mid, r) > tail if use_upper else chisq_cdf(mid, r) < level
        if below:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, hi):
            break
    return 0.5 * (lo + hi)
