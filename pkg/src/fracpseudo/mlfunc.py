"""Two-parameter Mittag-Leffler function on the real axis.

E_{a,b}(z) = sum_m z^m / Gamma(a m + b), evaluated for 0 < a <= 1, b > 0 and
real z.  The negative half-line is the production range; positive z is only
supported through the (cancellation-free) series, which is enough for the
small neighbourhoods used in tests.

Four evaluation branches, each returning a value together with an error
estimate:

* Taylor series in double precision with compensated summation,
* the Poincare expansion E_{a,b}(-x) ~ -sum_k (-x)^-k / Gamma(b - a k),
  truncated at its smallest term,
* a real integral representation evaluated with adaptive quadrature
  (1/4 <= a < 1), which covers the band where the series cancels too much
  and the expansion is not yet accurate,
* the Taylor series in mpmath with enough working digits to absorb the
  cancellation.

``ml_eval`` tries the double-precision branches in order of expected
suitability (series first for |z| <= z_switch) and accepts the first whose
estimate meets the tolerance; the mpmath series is the fallback.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.special import rgamma

from .errors import InvalidParams, NonConvergence

EPS = float(np.finfo(float).eps)

# Branch estimates must beat abs_tol by this factor before being trusted.
_SAFETY = 0.25
_LOG_PI = math.log(math.pi)


@dataclass(frozen=True)
class MLParams:
    alpha: float
    beta: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha <= 1.0) or not math.isfinite(self.alpha):
            raise InvalidParams(f"alpha must lie in (0, 1], got {self.alpha!r}")
        if not (self.beta > 0.0) or not math.isfinite(self.beta):
            raise InvalidParams(f"beta must be positive, got {self.beta!r}")


@dataclass(frozen=True)
class MLAccuracy:
    """Absolute tolerance, term budget and series/asymptotic switch point."""

    abs_tol: float = 1e-14
    max_terms: int = 10_000
    z_switch: float = 8.0

    def __post_init__(self) -> None:
        if not (self.abs_tol >= 4 * EPS):
            raise InvalidParams(f"abs_tol must be >= {4 * EPS:.2e}, got {self.abs_tol!r}")
        if self.max_terms < 1:
            raise InvalidParams("max_terms must be a positive integer")
        if not (self.z_switch > 0):
            raise InvalidParams("z_switch must be positive")


DEFAULT_ACCURACY = MLAccuracy()


def reciprocal_gamma(x: float) -> float:
    """1/Gamma(x); zero at the poles of Gamma."""
    return float(rgamma(x))


# {{{ branches


def _series(alpha: float, beta: float, z: float, max_terms: int) -> tuple[float, float]:
    """Compensated double-precision Taylor sum; returns (value, error estimate)."""
    if z == 0.0:
        return reciprocal_gamma(beta), 0.0

    x = abs(z)
    lx = math.log(x)
    negative = z < 0.0
    s = 0.0
    comp = 0.0
    abs_sum = 0.0
    prev = math.inf
    for m in range(max_terms):
        arg = alpha * m + beta
        lt = m * lx - math.lgamma(arg)
        if lt > 700.0:
            return math.nan, math.inf
        p = x**m if m * lx < 700.0 else math.inf
        g = reciprocal_gamma(arg)
        mag = p * g if (math.isfinite(p) and g > 1e-290) else math.exp(lt)
        term = -mag if (negative and m % 2) else mag

        y = term - comp
        total = s + y
        comp = (total - s) - y
        s = total
        abs_sum += mag * (1.0 + abs(lt) * 0.5)

        if mag <= prev and (mag <= 0.05 * EPS * abs(s) or mag < 1e-300):
            return s, 8.0 * EPS * abs_sum + mag
        prev = mag

    return s, math.inf


def _asymptotic(alpha: float, beta: float, x: float, max_terms: int) -> tuple[float, float]:
    value, est, _ = _asymptotic_k(alpha, beta, x, max_terms)
    return value, est


def _asymptotic_k(alpha: float, beta: float, x: float, max_terms: int) -> tuple[float, float, int]:
    """Poincare expansion of E_{a,b}(-x), x > 0, cut at the smallest term.

    Truncation is driven by the envelope Gamma(1 - b + a k) x^-k / pi of the
    terms (reflection formula) so that near-zeros of 1/Gamma do not end the sum
    early.  For a > 2/3 the exponentially small contributions of the two
    saddle points at arg = +-pi/a are added to the estimate.  Also returns the
    number of terms summed.
    """
    lx = math.log(x)
    s = 0.0
    prev_env = math.inf
    est = math.inf
    used = 0
    for k in range(1, max_terms + 1):
        shifted = 1.0 - beta + alpha * k
        env = None
        if shifted > 0.0:
            lenv = math.lgamma(shifted) - k * lx - _LOG_PI
            env = math.exp(lenv) if lenv > -745.0 else 0.0
            if env > prev_env:
                est = prev_env
                break
        used = k
        lp = -k * lx
        if lp > -745.0:
            term = reciprocal_gamma(beta - alpha * k) * math.exp(lp)
            s += term if k % 2 else -term
        if env is not None:
            prev_env = env
            if env <= 1e-3 * EPS * max(abs(s), 1e-300):
                est = env
                break

    if alpha > 2.0 / 3.0:
        w = x ** (1.0 / alpha)
        lcorr = math.log(2.0 / alpha) + w * math.cos(math.pi / alpha) + (1.0 - beta) * math.log(w)
        est = max(est, math.exp(lcorr) if lcorr > -745.0 else 0.0)
    return s, est, used


# below this order the u^alpha factor in the integrand is too rough for quad
_INTEGRAL_MIN_ALPHA = 0.25


def _integral(alpha: float, beta: float, x: float) -> tuple[float, float]:
    """E_{a,b}(-x) from its real integral representation, 1/4 <= a < 1.

    With u = r^(1/a) the representation reads

        E_{a,b}(-x) = (1/pi) int_0^inf u^(a-b) e^-u
                      (u^a sin(pi(1-b)) + x sin(pi(1-b+a))) / |u^a + x e^(i pi a)|^2 du,

    valid for b < 1 + a.  It is applied at b0 = beta - j a in (1 - a, 1], and
    E_{a,b+a}(z) = (E_{a,b}(z) - 1/Gamma(b)) / z climbs back to beta, dividing
    the error by x at every step.
    """
    if not (_INTEGRAL_MIN_ALPHA <= alpha < 1.0):
        return math.nan, math.inf
    j, b = 0, beta
    while b > 1.0:
        b -= alpha
        j += 1
    s1 = math.sin(math.pi * (1.0 - b))
    s2 = math.sin(math.pi * (1.0 - b + alpha))
    c1 = 1.0 + math.cos(math.pi * alpha)

    def g(u: float) -> float:
        ch = u**alpha
        return math.exp(-u) * (ch * s1 + x * s2) / ((ch - x) ** 2 + 2.0 * ch * x * c1) / math.pi

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        v1, e1 = quad(g, 0.0, 1.0, weight="alg", wvar=(alpha - b, 0.0),
                      epsabs=1e-17, epsrel=1e-14, limit=200)
        peak = x ** (1.0 / alpha)
        v2, e2 = quad(lambda u: u ** (alpha - b) * g(u), 1.0, 60.0,
                      points=[peak] if 1.0 < peak < 60.0 else None,
                      epsabs=1e-17, epsrel=1e-14, limit=200)
    v, e = v1 + v2, e1 + e2 + 1e-16
    for _ in range(j):
        v = (v - reciprocal_gamma(b)) / (-x)
        e /= x
        b += alpha
    return v, e


@lru_cache(maxsize=128)
def _mp_coefficients(alpha: float, beta: float, n: int, dps: int) -> tuple:
    """1/Gamma(alpha m + beta) for m < n at ``dps`` digits."""
    with mpmath.workdps(dps):
        a = mpmath.mpf(alpha)
        b = mpmath.mpf(beta)
        return tuple(mpmath.rgamma(a * m + b) for m in range(n))


def _series_mp(alpha: float, beta: float, z: float, abs_tol: float, max_terms: int) -> float:
    """Taylor sum in mpmath with working precision sized to the largest term.

    The term count and precision are rounded up so that nearby arguments share
    one cached coefficient table; each call is then a single Horner pass.
    """
    if z == 0.0:
        return reciprocal_gamma(beta)
    x = abs(z)
    lx = math.log(x)
    lcut = math.log(abs_tol) - 3.0 * math.log(10.0)

    # walk the term magnitudes in log space to the peak and past the cutoff
    peak = 0.0
    m = 0
    while True:
        if m >= max_terms:
            raise NonConvergence(
                f"Mittag-Leffler series did not converge within {max_terms} terms "
                f"(alpha={alpha}, beta={beta}, z={z})"
            )
        lt = m * lx - math.lgamma(alpha * m + beta)
        peak = max(peak, lt)
        if m > 0 and lt < lcut and lt < peak and alpha * m + beta > 1.0:
            break
        m += 1

    n = 1 << max(4, m.bit_length())
    dps = int(peak / math.log(10.0)) + int(-math.log10(abs_tol)) + 15
    dps = 10 * (dps // 10 + 1)
    coeffs = _mp_coefficients(float(alpha), float(beta), n, dps)
    with mpmath.workdps(dps):
        zz = mpmath.mpf(z)
        total = mpmath.mpf(0)
        for c in reversed(coeffs):
            total = total * zz + c
        return float(total)


_LD = np.longdouble
_LD_EPS = float(np.finfo(_LD).eps)
# x^(1/alpha) bound past which the extended-precision sum is not attempted;
# its own estimate usually rejects points well before this
_LD_REACH = 25.0


@lru_cache(maxsize=256)
def _ld_coefficients(alpha: float, beta: float, n: int) -> np.ndarray:
    """1/Gamma(alpha m + beta), m < n, rounded once into long double."""
    with mpmath.workdps(30):
        a = mpmath.mpf(alpha)
        b = mpmath.mpf(beta)
        c = [_LD(mpmath.nstr(mpmath.rgamma(a * m + b), 25)) for m in range(n)]
    arr = np.array(c, dtype=_LD)
    arr.setflags(write=False)
    return arr


def _ld_terms(alpha: float, beta: float, xmax: float) -> int:
    """Number of Taylor terms after which x^m/Gamma(alpha m + beta) < e^-55 for x <= xmax."""
    if xmax <= 0.0:
        return 1
    lx = math.log(xmax)
    m = 0
    peak = -math.inf
    while True:
        lt = m * lx - math.lgamma(alpha * m + beta)
        peak = max(peak, lt)
        if lt < -55.0 and lt < peak and alpha * m + beta > 1.0:
            return m + 1
        m += 1


def _series_ld(alpha: float, beta: float, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """E_{alpha,beta}(-x) by Horner's rule in long double, with error estimates.

    The estimate scales the long-double unit roundoff by E_{alpha,beta}(+x),
    the sum of the term magnitudes, which bounds the cancellation.
    """
    xmax = float(np.max(x)) if x.size else 0.0
    # round n up so nearby calls share one cached coefficient table
    n = _ld_terms(alpha, beta, xmax)
    n = 1 << max(4, (n - 1).bit_length())
    c = _ld_coefficients(float(alpha), float(beta), n)
    xl = x.astype(_LD)
    zl = -xl
    s = np.full(x.shape, c[-1], dtype=_LD)
    a = np.full(x.shape, abs(c[-1]), dtype=_LD)
    ac = np.abs(c)
    for m in range(n - 2, -1, -1):
        s = s * zl + c[m]
        a = a * xl + ac[m]
    est = (4.0 * n * _LD_EPS) * a.astype(float) + 1e-300
    return s.astype(float), est


# Largest argument covered by interpolation tables; beyond it and short of the
# asymptotic range, points are evaluated one at a time.
_TABLE_XMAX = 2048.0
_TABLE_DEG = 24
# Tables only pay off when this many points need them in one call.
_TABLE_MIN_POINTS = 32


@dataclass(frozen=True)
class _Panel:
    lo: float
    hi: float
    coeffs: np.ndarray

    def __call__(self, x: np.ndarray) -> np.ndarray:
        t = (2.0 * x - (self.lo + self.hi)) / (self.hi - self.lo)
        return np.polynomial.chebyshev.chebval(t, self.coeffs)


@dataclass(frozen=True)
class _Table:
    """Piecewise Chebyshev interpolant of E_{a,b}(-x) on [lo, hi], then a
    fixed-length Poincare sum for x >= asym_from (when reachable)."""

    lo: float
    hi: float
    edges: np.ndarray
    panels: tuple
    asym_from: float
    asym_terms: int


def _fit_panel(f, lo: float, hi: float, tol: float, depth: int = 0) -> list:
    n = _TABLE_DEG + 1
    nodes = np.cos(np.pi * (np.arange(n) + 0.5) / n)
    xs = 0.5 * (lo + hi) + 0.5 * (hi - lo) * nodes
    coeffs = np.polynomial.chebyshev.chebfit(nodes, np.array([f(x) for x in xs]), _TABLE_DEG)
    panel = _Panel(lo, hi, coeffs)
    # check between the interpolation nodes
    probe = 0.5 * (lo + hi) + 0.5 * (hi - lo) * np.cos(np.pi * np.arange(1, n, 3) / n)
    err = max(abs(panel(np.array([x]))[0] - f(x)) for x in probe)
    if err <= tol or depth >= 8:
        if err > tol:
            return []
        return [panel]
    mid = 0.5 * (lo + hi)
    left = _fit_panel(f, lo, mid, tol, depth + 1)
    right = _fit_panel(f, mid, hi, tol, depth + 1)
    return left + right if (left and right) else []


@lru_cache(maxsize=64)
def _table(alpha: float, beta: float, acc: MLAccuracy) -> _Table:
    tol = _SAFETY * acc.abs_tol
    # start where the extended-precision sum stops meeting its estimate, which
    # is usually well short of _LD_REACH
    lo = _LD_REACH**alpha
    probe = np.geomspace(1e-3 * lo, lo, 400)
    _, est = _series_ld(alpha, beta, probe)
    failed = np.flatnonzero(est > tol)
    if failed.size:
        lo = 0.9 * float(probe[failed[0]])

    asym_from, asym_terms = math.inf, 0
    x = lo
    while x <= _TABLE_XMAX:
        _, est, k = _asymptotic_k(alpha, beta, x, acc.max_terms)
        if est <= 0.1 * tol:
            asym_from, asym_terms = x, k
            break
        x *= 1.25
    hi = min(asym_from, _TABLE_XMAX)

    def f(xx: float) -> float:
        return _ml_cached(alpha, beta, -float(xx), acc)

    panels: list = []
    a = lo
    while a < hi:
        b = min(2.0 * a, hi)
        fitted = _fit_panel(f, a, b, 0.5 * tol)
        if not fitted:
            hi = a
            break
        panels.extend(fitted)
        a = b
    edges = np.array([p.lo for p in panels] + ([panels[-1].hi] if panels else []))
    return _Table(lo, hi, edges, tuple(panels), asym_from, asym_terms)


def _asymptotic_fixed(alpha: float, beta: float, x: np.ndarray, terms: int) -> np.ndarray:
    """-sum_{k=1..terms} (-x)^-k / Gamma(beta - alpha k), vectorised."""
    out = np.zeros_like(x)
    inv = 1.0 / x
    p = np.ones_like(x)
    for k in range(1, terms + 1):
        p = p * inv
        c = reciprocal_gamma(beta - alpha * k)
        out += c * p if k % 2 else -c * p
    return out


def _exp_remainder(n: int, z: float) -> float:
    """E_{1,n+1}(z) = (e^z - sum_{k<n} z^k/k!) / z^n for integer n >= 1."""
    if abs(z) <= 1.0:
        s = 0.0
        term = 1.0 / math.factorial(n)
        k = 0
        while True:
            s += term
            k += 1
            term *= z / (n + k)
            if abs(term) < 1e-18 * max(abs(s), 1e-300):
                return s
    if n == 1:
        return math.expm1(z) / z
    head = sum(z**k / math.factorial(k) for k in range(n))
    return (math.exp(z) - head) / z**n


# }}}


@lru_cache(maxsize=65536)
def _ml_cached(alpha: float, beta: float, z: float, acc: MLAccuracy) -> float:
    if z == 0.0:
        return reciprocal_gamma(beta)
    if alpha == 1.0:
        if beta == 1.0:
            return math.exp(z)
        if float(beta).is_integer():
            return _exp_remainder(int(beta) - 1, z)

    tol = _SAFETY * acc.abs_tol
    if z > 0.0:
        value, est = _series(alpha, beta, z, acc.max_terms)
        if est <= tol * max(1.0, abs(value)):
            return value
        return _series_mp(alpha, beta, z, acc.abs_tol * max(1.0, abs(value)), acc.max_terms)

    x = -z
    # the double-precision Taylor sum cannot cancel to tol once x^(1/alpha) > 8
    series = () if x ** (1.0 / alpha) > 8.0 else (lambda: _series(alpha, beta, z, acc.max_terms),)
    asym = lambda: _asymptotic(alpha, beta, x, acc.max_terms)  # noqa: E731
    integral = lambda: _integral(alpha, beta, x)  # noqa: E731
    if x <= acc.z_switch:
        branches = series + (asym, integral)
    else:
        branches = (asym, integral) + series
    for branch in branches:
        value, est = branch()
        if est <= tol:
            return value
    return _series_mp(alpha, beta, z, acc.abs_tol, acc.max_terms)


def ml_eval(params: MLParams, z: float, acc: MLAccuracy = DEFAULT_ACCURACY) -> float:
    """E_{alpha,beta}(z) to absolute accuracy ``acc.abs_tol``.

    Raises InvalidParams for non-finite z and NonConvergence when even the
    high-precision series exhausts ``acc.max_terms``.
    """
    z = float(z)
    if not math.isfinite(z):
        raise InvalidParams(f"z must be finite, got {z!r}")
    return _ml_cached(float(params.alpha), float(params.beta), z, acc)


def mittag_leffler(alpha: float, beta: float, z: float, acc: MLAccuracy = DEFAULT_ACCURACY) -> float:
    """Convenience wrapper around :func:`ml_eval`."""
    return ml_eval(MLParams(alpha, beta), z, acc)


def ml_eval_array(
    alpha: float, beta: float, z: np.ndarray, acc: MLAccuracy = DEFAULT_ACCURACY
) -> np.ndarray:
    """Vectorised E_{alpha,beta} over an array of non-positive arguments.

    Points within reach of the extended-precision Taylor sum are evaluated
    together; the rest go through :func:`ml_eval` one by one.
    """
    params = MLParams(alpha, beta)
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise InvalidParams("z must be finite")
    if alpha == 1.0 and beta == 1.0:
        return np.exp(z)

    out = np.empty(z.shape)
    flat_z = z.ravel()
    flat_out = out.reshape(-1)
    todo = np.ones(flat_z.size, dtype=bool)

    x = -flat_z
    near = (x >= 0.0) & (x ** (1.0 / alpha) <= _LD_REACH)
    idx = np.flatnonzero(near)
    if idx.size:
        vals, est = _series_ld(alpha, beta, x[idx])
        ok = est <= _SAFETY * acc.abs_tol
        flat_out[idx[ok]] = vals[ok]
        todo[idx[ok]] = False

    rest = np.flatnonzero(todo & (x > 0.0))
    if rest.size >= _TABLE_MIN_POINTS:
        tab = _table(float(alpha), float(beta), acc)
        xr = x[rest]
        in_asym = xr >= tab.asym_from
        if np.any(in_asym):
            sel = rest[in_asym]
            flat_out[sel] = _asymptotic_fixed(alpha, beta, x[sel], tab.asym_terms)
            todo[sel] = False
        if tab.panels:
            in_tab = (xr >= tab.lo) & (xr <= tab.hi) & ~in_asym
            sel = rest[in_tab]
            j = np.clip(np.searchsorted(tab.edges, x[sel], side="right") - 1, 0, len(tab.panels) - 1)
            for pi in np.unique(j):
                pts = sel[j == pi]
                flat_out[pts] = tab.panels[pi](x[pts])
            todo[sel] = False

    for i in np.flatnonzero(todo):
        flat_out[i] = ml_eval(params, float(flat_z[i]), acc)
    return out


def ml_complement(alpha: float, x: np.ndarray | float, acc: MLAccuracy = DEFAULT_ACCURACY):
    """1 - E_{alpha,1}(-x) for x >= 0, computed as x E_{alpha,alpha+1}(-x).

    Avoids the cancellation of the direct difference when x is small.
    """
    xa = np.asarray(x, dtype=float)
    val = xa * ml_eval_array(alpha, alpha + 1.0, -xa, acc)
    return float(val) if np.ndim(x) == 0 else val


def ml_simon_bounds(alpha: float, z: float) -> tuple[float, float]:
    """Two-sided rational bounds on E_{alpha,1}(-z) for 0 < alpha < 1, z >= 0.

    Returns ``(1/(1 + Gamma(1-alpha) z), 1/(1 + z/Gamma(1+alpha)))``.  The
    bounds fail for alpha >= 1, which is rejected.
    """
    if not (0.0 < alpha < 1.0):
        raise InvalidParams(f"Simon bounds need 0 < alpha < 1, got {alpha!r}")
    if not (z >= 0.0) or not math.isfinite(z):
        raise InvalidParams(f"z must be finite and non-negative, got {z!r}")
    lower = 1.0 / (1.0 + math.gamma(1.0 - alpha) * z)
    upper = 1.0 / (1.0 + z / math.gamma(1.0 + alpha))
    return lower, upper


def ml_kernel_derivative(
    alpha: float, rho: float, s: float, acc: MLAccuracy = DEFAULT_ACCURACY
) -> float:
    """d/ds E_{alpha,1}(-rho s^alpha) = -rho s^(alpha-1) E_{alpha,alpha}(-rho s^alpha)."""
    if not (rho > 0.0) or not (s > 0.0):
        raise InvalidParams(f"rho and s must be positive, got rho={rho!r}, s={s!r}")
    params = MLParams(alpha, alpha)
    sa = s**alpha
    return -rho * sa / s * ml_eval(params, -rho * sa, acc)
