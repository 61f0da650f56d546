"""Tail probabilities used by the statistical tests.

Normal CDF, chi-square upper tail (regularized incomplete gamma), the
Kolmogorov distribution, and the studentized range distribution with infinite
degrees of freedom (adaptive Gauss-Kronrod quadrature). Pure Python + math.
"""

from __future__ import annotations

import math

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# 15-point Kronrod nodes on [0, 1] half of [-1, 1], with embedded 7-point Gauss weights
_XGK = (
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
)
_WGK = (
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
)
_WG = (
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
)


def norm_pdf(z: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * z * z)


def norm_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / _SQRT2)


def _gk15(f, a: float, b: float):
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    fc = f(c)
    kron = _WGK[7] * fc
    gauss = _WG[3] * fc
    for i in range(7):
        dx = h * _XGK[i]
        s = f(c - dx) + f(c + dx)
        kron += _WGK[i] * s
        if i % 2 == 1:
            gauss += _WG[i // 2] * s
    return kron * h, abs((kron - gauss) * h)


def integrate(f, a: float, b: float, tol: float = 1e-10, max_depth: int = 40) -> float:
    """Adaptive Gauss-Kronrod (7/15) quadrature to absolute error ``tol``."""
    total = 0.0
    stack = [(a, b, tol, 0)]
    while stack:
        lo, hi, t, depth = stack.pop()
        val, err = _gk15(f, lo, hi)
        if err <= t or depth >= max_depth:
            total += val
        else:
            mid = 0.5 * (lo + hi)
            stack.append((mid, hi, t / 2, depth + 1))
            stack.append((lo, mid, t / 2, depth + 1))
    return total


def _gamma_series(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) by series (x < a + 1)."""
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(10_000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-16:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cf(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) by continued fraction (Lentz)."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gamma_q(a: float, x: float) -> float:
    if a <= 0:
        raise ValueError("shape must be positive")
    if x <= 0:
        return 1.0
    if x < a + 1.0:
        return max(0.0, 1.0 - _gamma_series(a, x))
    return min(1.0, _gamma_cf(a, x))


def chi2_sf(x: float, df: float) -> float:
    """P(X > x) for X ~ chi-square(df)."""
    return gamma_q(0.5 * df, 0.5 * x)


def kolmogorov_sf(lam: float) -> float:
    """P(K > lam) for the limiting Kolmogorov distribution."""
    if lam <= 0:
        return 1.0
    if lam < 1.0:
        # theta-function form converges fast for small arguments
        s = 0.0
        for i in range(1, 50):
            t = math.exp(-((2 * i - 1) ** 2) * math.pi**2 / (8 * lam * lam))
            s += t
            if t < 1e-17 * s:
                break
        return min(1.0, max(0.0, 1.0 - math.sqrt(2 * math.pi) / lam * s))
    s = 0.0
    for i in range(1, 101):
        t = math.exp(-2.0 * i * i * lam * lam)
        s += t if i % 2 == 1 else -t
        if t < 1e-17:
            break
    return min(1.0, max(0.0, 2.0 * s))


def studentized_range_sf(q: float, k: int, tol: float = 1e-10) -> float:
    """P(Q > q) for the range of ``k`` iid standard normals (infinite df).

    Uses P(Q > q) = k * int phi(z) [Phi(z)^(k-1) - (Phi(z) - Phi(z - q))^(k-1)] dz,
    which keeps small tail probabilities accurate.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if q <= 0:
        return 1.0

    def f(z):
        pz = norm_cdf(z)
        return norm_pdf(z) * (pz ** (k - 1) - (pz - norm_cdf(z - q)) ** (k - 1))

    val = k * integrate(f, -8.0, 8.0 + q, tol=tol / k)
    return min(1.0, max(0.0, val))


def studentized_range_cdf(q: float, k: int) -> float:
    return 1.0 - studentized_range_sf(q, k)
