"""Product integration of weakly singular Mittag-Leffler convolutions.

Computes

    I(t) = int_0^t k(s) g(t - s) ds,   k(s) = s^(beta-1) E_{alpha,beta}(-rho s^alpha),

by replacing g with its piecewise-linear interpolant and integrating the
kernel exactly.  Two antiderivatives make that possible:

    K1(s) = s^beta     E_{alpha,beta+1}(-rho s^alpha),   K1' = k,
    K2(s) = s^(beta+1) E_{alpha,beta+2}(-rho s^alpha),   K2' = K1.

Integrating by parts once, with G(s) = g(t - s) linear on each panel,

    I(t) = g(0) K1(t) - sum_j (G_{j+1} - G_j)(K2_{j+1} - K2_j) / h.

The s^(beta-1) singularity never meets a quadrature node, and constant g is
integrated exactly.  Each result is computed with m and 2m panels; their
difference is the error estimate and a Richardson step (order 2) the value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.signal import fftconvolve

from .errors import InvalidParams, QuadratureFailure
from .mlfunc import DEFAULT_ACCURACY, MLAccuracy, ml_eval_array


@dataclass(frozen=True)
class QuadratureSpec:
    """``panels`` on [0, T] at the coarse level; ``tol`` bounds |I_2m - I_m|.

    The tolerance is relative to max(1, sup |I|) over the grid.  When the
    comparison fails, the panel count is doubled up to ``max_panels`` before
    giving up.
    """

    panels: int = 1024
    tol: float = 1e-8
    max_panels: int = 2**16

    def __post_init__(self) -> None:
        if isinstance(self.panels, bool) or not isinstance(self.panels, (int, np.integer)):
            raise InvalidParams("panels must be an integer")
        if self.panels < 2:
            raise InvalidParams(f"need at least 2 panels, got {self.panels}")
        if not (self.tol > 0) or not math.isfinite(self.tol):
            raise InvalidParams(f"quadrature tolerance must be positive, got {self.tol!r}")
        if self.max_panels < self.panels:
            raise InvalidParams("max_panels must be at least panels")


@dataclass(frozen=True)
class QuadResult:
    values: np.ndarray
    error_estimate: float
    panels: int


def kernel_antiderivatives(
    alpha: float, beta: float, rho: float, s: np.ndarray, acc: MLAccuracy = DEFAULT_ACCURACY
) -> tuple[np.ndarray, np.ndarray]:
    """(K1(s), K2(s)) for the kernel s^(beta-1) E_{alpha,beta}(-rho s^alpha)."""
    s = np.asarray(s, dtype=float)
    z = -rho * s**alpha
    k1 = s**beta * ml_eval_array(alpha, beta + 1.0, z, acc)
    k2 = s ** (beta + 1.0) * ml_eval_array(alpha, beta + 2.0, z, acc)
    return k1, k2


def _uniform_pass(g0: float, dg: np.ndarray, k1: np.ndarray, k2: np.ndarray, h: float):
    """Product rule on the uniform nodes s_j = j h for every t_n = n h at once.

    ``dg[i] = g(t_i) - g(t_{i+1})``; the panel sums form a discrete convolution.
    """
    out = g0 * k1
    if np.any(dg):
        dk2 = np.diff(k2)
        conv = fftconvolve(dk2, dg)[: dg.size]
        out[1:] -= conv / h
    out[0] = 0.0
    return out


def convolve_uniform(
    alpha: float,
    beta: float,
    rho: float,
    g: Callable[[np.ndarray], np.ndarray],
    T: float,
    J: int,
    spec: QuadratureSpec,
    acc: MLAccuracy = DEFAULT_ACCURACY,
) -> QuadResult:
    """I(t) at t_n = n T / J, n = 0..J."""
    return _refine(lambda m: _uniform_attempt(alpha, beta, rho, g, T, J, m, acc), spec)


def _uniform_attempt(alpha, beta, rho, g, T, J, panels, acc):
    r = max(1, -(-panels // J))
    M = 2 * J * r
    h = T / M
    s = h * np.arange(M + 1)
    k1, k2 = kernel_antiderivatives(alpha, beta, rho, s, acc)
    gv = np.asarray(g(s), dtype=float)
    g0 = float(gv[0])

    fine = _uniform_pass(g0, gv[:-1] - gv[1:], k1, k2, h)[::2]
    gc = gv[::2]
    coarse = _uniform_pass(g0, gc[:-1] - gc[1:], k1[::2], k2[::2], 2 * h)
    return fine[::r], coarse[::r]


def convolve_points(
    alpha: float,
    beta: float,
    rho: float,
    g: Callable[[np.ndarray], np.ndarray],
    times: np.ndarray,
    spec: QuadratureSpec,
    acc: MLAccuracy = DEFAULT_ACCURACY,
) -> QuadResult:
    """I(t) at arbitrary times, with ``spec.panels`` panels on each [0, t]."""
    times = np.asarray(times, dtype=float)
    return _refine(lambda m: _points_attempt(alpha, beta, rho, g, times, m, acc), spec)


def _points_attempt(alpha, beta, rho, g, times, m, acc):
    frac = np.arange(2 * m + 1) / (2 * m)
    fine = np.zeros(times.size)
    coarse = np.zeros(times.size)
    for i, t in enumerate(times):
        if t == 0.0:
            continue
        s = t * frac
        k1, k2 = kernel_antiderivatives(alpha, beta, rho, s, acc)
        gs = np.asarray(g(t - s), dtype=float)  # G_j = g(t - s_j)
        for step, out in ((1, fine), (2, coarse)):
            G = gs[::step]
            K2 = k2[::step]
            h = t / (G.size - 1)
            out[i] = G[-1] * k1[-1] - float(np.dot(np.diff(G), np.diff(K2))) / h
    return fine, coarse


def _refine(attempt, spec: QuadratureSpec) -> QuadResult:
    m = spec.panels
    while True:
        fine, coarse = attempt(m)
        diff = fine - coarse
        est = float(np.max(np.abs(diff))) if diff.size else 0.0
        values = fine + diff / 3.0
        scale = max(1.0, float(np.max(np.abs(values))) if values.size else 0.0)
        if math.isfinite(est) and est <= spec.tol * scale:
            return QuadResult(values, est, m)
        if 2 * m > spec.max_panels or not math.isfinite(est):
            raise QuadratureFailure(
                f"product-integration self-estimate {est:.3e} exceeds tolerance "
                f"{spec.tol:.1e} at {m} panels"
            )
        m *= 2
