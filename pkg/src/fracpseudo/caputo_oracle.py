"""L1 time stepping: an independent brute-force oracle for Caputo derivatives.

Nothing here touches the Mittag-Leffler evaluator.  The Caputo derivative
(lower terminal 0) is discretised by piecewise-linear product integration on a
uniform grid,

    D^alpha u(t_n) ~ tau^-alpha / Gamma(2 - alpha) sum_{k=0}^{n-1} b_k (u_{n-k} - u_{n-k-1}),
    b_k = (k + 1)^(1-alpha) - k^(1-alpha),

and the modal ODE D^alpha u + rho u = g is stepped implicitly with it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.signal import fftconvolve

from .errors import InsufficientRefinements, InvalidAlpha, InvalidParams
from .problem import ModalProblem


@dataclass(frozen=True)
class L1Grid:
    J: int
    T: float = 1.0

    def __post_init__(self) -> None:
        if isinstance(self.J, bool) or not isinstance(self.J, (int, np.integer)) or self.J < 2:
            raise InvalidParams(f"L1 grid needs an integer J >= 2, got {self.J!r}")
        if not (self.T > 0) or not math.isfinite(self.T):
            raise InvalidParams(f"T must be positive, got {self.T!r}")

    @property
    def tau(self) -> float:
        return self.T / self.J

    @property
    def nodes(self) -> np.ndarray:
        return self.T * np.arange(self.J + 1) / self.J


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not (0.0 < alpha < 1.0):
        raise InvalidAlpha(f"the L1 scheme needs 0 < alpha < 1, got {alpha!r}")
    return alpha


def l1_weights(alpha: float, n: int) -> np.ndarray:
    """b_0..b_{n-1}.

    (k+1)^(1-a) - k^(1-a) is rewritten as k^(1-a) expm1((1-a) log1p(1/k)) so
    the large-k weights keep full relative accuracy.
    """
    alpha = _check_alpha(alpha)
    b = np.empty(n)
    if n:
        b[0] = 1.0
        k = np.arange(1, n, dtype=float)
        b[1:] = k ** (1.0 - alpha) * np.expm1((1.0 - alpha) * np.log1p(1.0 / k))
    return b


def caputo_derivative_sampled(samples, alpha: float, grid: L1Grid) -> np.ndarray:
    """L1 approximation of D^alpha at t_1..t_J (length J)."""
    alpha = _check_alpha(alpha)
    u = np.asarray(samples, dtype=float)
    if u.shape != (grid.J + 1,):
        raise InvalidParams(f"expected {grid.J + 1} samples, got shape {u.shape}")
    du = np.diff(u)
    if not np.any(du):
        return np.zeros(grid.J)
    b = l1_weights(alpha, grid.J)
    c = grid.tau ** (-alpha) / math.gamma(2.0 - alpha)
    if grid.J <= 256:
        conv = np.convolve(b, du)[: grid.J]
    else:
        conv = fftconvolve(b, du)[: grid.J]
    return c * conv


def l1_solve_modal(p: ModalProblem, grid: L1Grid) -> np.ndarray:
    """Implicit L1 solution of D^alpha u + rho u = f / (1 + lambda), u(0) = phi."""
    alpha = _check_alpha(p.alpha.alpha)
    J = grid.J
    rho = p.rho
    g = p.rhs(grid.nodes)
    b = l1_weights(alpha, J)
    c = grid.tau ** (-alpha) / math.gamma(2.0 - alpha)

    u = np.empty(J + 1)
    u[0] = p.phi
    # du_rev[J - j] = u_j - u_{j-1}, so the history sum is one contiguous dot
    du_rev = np.zeros(J)
    for n in range(1, J + 1):
        hist = float(np.dot(b[1:n], du_rev[J - n + 1 : J])) if n > 1 else 0.0
        un = (g[n] - c * hist + c * u[n - 1]) / (c + rho)
        du_rev[J - n] = un - u[n - 1]
        u[n] = un
    return u


def l1_residual(u: np.ndarray, p: ModalProblem, grid: L1Grid) -> np.ndarray:
    """Discrete ODE residual of samples u at t_1..t_J."""
    return caputo_derivative_sampled(u, p.alpha.alpha, grid) + p.rho * u[1:] - p.rhs(grid.nodes[1:])


def richardson(values: Sequence[float], exponents: Sequence[float], ratio: float = 2.0) -> float:
    """Eliminate h^p terms in turn from values computed at h, h/ratio, h/ratio^2, ...

    One value is consumed per exponent; extra values are ignored from the
    coarse end.
    """
    v = [float(x) for x in values]
    if len(v) < len(exponents) + 1:
        raise InsufficientRefinements(
            f"{len(exponents)} exponents need at least {len(exponents) + 1} values"
        )
    v = v[len(v) - len(exponents) - 1 :]
    for p in exponents:
        f = ratio**p
        v = [(f * v[i + 1] - v[i]) / (f - 1.0) for i in range(len(v) - 1)]
    return v[-1]


def l1_expansion_exponents(alpha: float, smooth_source: bool = True) -> list[float]:
    """Leading powers of tau in the L1 error at a fixed t > 0.

    The t^alpha initial layer contributes tau^1 first, then the scheme's own
    tau^(2-alpha) and tau^2, and for non-constant sources tau^(1+alpha).
    """
    alpha = _check_alpha(alpha)
    exps = [1.0, 2.0 - alpha, 2.0]
    if smooth_source:
        exps.insert(2, 1.0 + alpha)
    return sorted(set(round(e, 12) for e in exps))


def l1_reference(
    p: ModalProblem,
    T: float,
    J_list: Sequence[int] = (2**10, 2**11, 2**12, 2**13, 2**14),
    exponents: Optional[Sequence[float]] = None,
) -> float:
    """Richardson-extrapolated L1 value of u(T) over geometric J refinements."""
    J_list = list(J_list)
    if len(J_list) < 2:
        raise InsufficientRefinements("need at least two refinements")
    ratios = {J_list[i + 1] / J_list[i] for i in range(len(J_list) - 1)}
    if len(ratios) != 1:
        raise InvalidParams("J_list must be geometric")
    if exponents is None:
        exponents = l1_expansion_exponents(p.alpha.alpha, not p.source.is_constant)
    exponents = list(exponents)[: len(J_list) - 1]
    vals = [l1_solve_modal(p, L1Grid(J, T))[-1] for J in J_list]
    return richardson(vals, exponents, ratios.pop())


@dataclass(frozen=True)
class ConvergenceResult:
    order: float
    orders: tuple
    errors: tuple
    exact: bool


def convergence_order(
    errors_or_values: Sequence[float],
    J_list: Sequence[int],
    exact: Optional[float] = None,
    roundoff: float = 1e-13,
) -> ConvergenceResult:
    """Observed order from a geometric refinement sequence.

    With ``exact`` given, the inputs are values and errors are taken against it;
    otherwise the inputs are treated as errors already.  All errors at
    roundoff level mark the result ``exact`` (order reported as inf).
    """
    J_list = list(J_list)
    if len(J_list) < 3 or len(errors_or_values) != len(J_list):
        raise InsufficientRefinements("convergence order needs at least 3 refinements")
    ratios = [J_list[i + 1] / J_list[i] for i in range(len(J_list) - 1)]
    if any(abs(r - ratios[0]) > 1e-12 * ratios[0] for r in ratios) or ratios[0] <= 1:
        raise InvalidParams("J_list must be increasing and geometric")

    v = np.asarray(errors_or_values, dtype=float)
    err = np.abs(v - exact) if exact is not None else np.abs(v)
    if np.all(err <= roundoff):
        return ConvergenceResult(math.inf, (), tuple(err), True)
    with np.errstate(divide="ignore", invalid="ignore"):
        orders = np.log(err[:-1] / err[1:]) / math.log(ratios[0])
    return ConvergenceResult(float(orders[-1]), tuple(orders), tuple(err), False)

