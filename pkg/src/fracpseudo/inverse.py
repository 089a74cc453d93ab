"""Inverse source problem: recover (u, f) from u(0) = phi and u(T) = psi.

For a time-independent source every mode has the general solution

    u_xi(t) = f_xi / mu_xi + C_xi E_{alpha,1}(-rho_xi t^alpha),

and the two end conditions fix

    C_xi = (phi_xi - psi_xi) / (1 - E_{alpha,1}(-rho_xi T^alpha)),
    f_xi = mu_xi (phi_xi - C_xi).

The denominators are bounded below through the rational upper bound on
E_{alpha,1}; for kappa > 1 they decay like mu^(1 - kappa), which is what makes
the reconstruction cost gamma = kappa - 1 extra orders of smoothness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .caputo_oracle import L1Grid, caputo_derivative_sampled
from .direct import LedgerEntry, TimeGrid
from .errors import DenominatorUnderflow, InvalidParams, InvalidTruncation
from .mlfunc import DEFAULT_ACCURACY, MLAccuracy, ml_complement, ml_eval_array
from .problem import FractionalOrder, as_order
from .spectral import SpectralField, SpectrumPair

EPS_DENOM = 1e-14


@dataclass(frozen=True, eq=False)
class InverseProblemData:
    spectrum: SpectrumPair
    phi: SpectralField
    psi: SpectralField
    alpha: FractionalOrder
    T: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", as_order(self.alpha))
        if not (self.T > 0) or not math.isfinite(self.T):
            raise InvalidParams(f"T must be positive and finite, got {self.T!r}")
        N = self.spectrum.N
        for name in ("phi", "psi"):
            v = getattr(self, name)
            if not isinstance(v, SpectralField) or v.coeffs.shape != (N,):
                raise InvalidTruncation(f"{name} must be a SpectralField with {N} coefficients")
        g = self.spectrum.gamma
        # the data must sit in H^{1+gamma}_L and H^{1+gamma}_M at this truncation
        for name in ("phi", "psi"):
            v = getattr(self, name)
            v.norm(1 + g, 0)
            v.norm(0, 1 + g)


@dataclass(frozen=True, eq=False)
class InverseSolution:
    time_grid: np.ndarray
    u: np.ndarray
    f: SpectralField
    C: np.ndarray
    denom: np.ndarray
    denom_floor: float
    weighted_floor: float
    discarded: tuple = ()
    ledger: dict = field(default_factory=dict)


def denominator_certificate(spectrum: SpectrumPair, alpha, T: float) -> tuple[float, float]:
    """Analytic lower bounds (floor, weighted_floor) on 1 - E_{alpha,1}(-rho T^alpha).

    From E_{alpha,1}(-x) <= 1 / (1 + x / Gamma(1+alpha)) with x = rho T^alpha:

        1 - E >= g / ((1 + lambda) / (mu T^alpha) + g),    g = 1 / Gamma(1 + alpha).

    ``weighted_floor`` is the minimum of mu^(kappa-1) times that bound when
    kappa > 1 and equals ``floor`` otherwise.
    """
    a = as_order(alpha).alpha
    if not (T > 0):
        raise InvalidParams("T must be positive")
    g = 1.0 / math.gamma(1.0 + a)
    bound = g / ((1.0 + spectrum.lam) / (spectrum.mu * T**a) + g)
    floor = float(np.min(bound))
    if spectrum.kappa > 1.0:
        weighted = float(np.min(spectrum.mu ** (spectrum.kappa - 1.0) * bound))
    else:
        weighted = floor
    return floor, weighted


def reconstruct(
    data: InverseProblemData,
    grid: Optional[TimeGrid] = None,
    eps_denom: float = EPS_DENOM,
    cutoff: Optional[float] = None,
    acc: MLAccuracy = DEFAULT_ACCURACY,
) -> InverseSolution:
    """Closed-form (u, f) for the inverse problem.

    ``cutoff`` enables the spectral cutoff: modes whose weighted denominator
    mu^(kappa-1) (1 - E) falls below it get C = 0 and are listed in
    ``discarded``.  Without it nothing is dropped.
    """
    sp = data.spectrum
    a = data.alpha.alpha
    if grid is None:
        grid = TimeGrid(data.T, 64)
    if abs(grid.T - data.T) > 1e-12 * data.T:
        raise InvalidParams(f"grid spans [0, {grid.T}] but the final time is T={data.T}")

    rho = sp.rho
    denom = np.asarray(ml_complement(a, rho * data.T**a, acc), dtype=float).reshape(sp.N)
    bad = np.flatnonzero(~(denom >= eps_denom))
    if bad.size:
        i = int(bad[0])
        raise DenominatorUnderflow(
            f"1 - E(-rho T^alpha) = {denom[i]:.3e} is below {eps_denom:.1e}; "
            "T is too small for this mode"
        ).with_mode(i + 1)

    phi = data.phi.coeffs
    psi = data.psi.coeffs
    C = (phi - psi) / denom
    discarded: tuple = ()
    if cutoff is not None:
        w = sp.mu ** max(sp.kappa - 1.0, 0.0) * denom
        drop = w < cutoff
        discarded = tuple(int(i) + 1 for i in np.flatnonzero(drop))
        C = np.where(drop, 0.0, C)
    f = sp.mu * (phi - C)

    t = grid.nodes
    # u = phi - C (1 - E(-rho t^alpha)) keeps u(0) = phi exact
    comp = np.vstack([ml_complement(a, r * t**a, acc) for r in rho])
    u = phi[:, None] - C[:, None] * comp

    floor, weighted = denominator_certificate(sp, a, data.T)
    return InverseSolution(
        time_grid=t,
        u=u,
        f=SpectralField(f, sp),
        C=C,
        denom=denom,
        denom_floor=floor,
        weighted_floor=weighted,
        discarded=discarded,
    )


def eigen_relation_error(
    alpha: float, rho: float, T: float, J: int, window: float = 0.5,
    acc: MLAccuracy = DEFAULT_ACCURACY,
) -> float:
    """sup |D^alpha E(-rho t^alpha) + rho E(-rho t^alpha)| on t in [window T, T].

    D^alpha comes from the L1 oracle applied to samples of E on a uniform grid
    with J steps.  The window keeps the t^alpha layer at the origin, where the
    L1 error does not decay, out of the supremum.
    """
    grid = L1Grid(J, T)
    t = grid.nodes
    e = ml_eval_array(alpha, 1.0, -rho * t**alpha, acc)
    d = caputo_derivative_sampled(e, alpha, grid)
    mask = t[1:] >= window * T - 1e-12 * T
    return float(np.max(np.abs(d + rho * e[1:])[mask]))


def _sup_sq(rows: np.ndarray) -> float:
    """sup_t sum_xi rows[xi, t]^2."""
    return float(np.max(np.sum(rows**2, axis=0))) if rows.size else 0.0


def inverse_ledger(sol: InverseSolution, data: InverseProblemData, acc=DEFAULT_ACCURACY) -> dict:
    """Sup-in-time norm inequalities for u, f, Mu, D^alpha u and D^alpha L u."""
    sp = data.spectrum
    g = sp.gamma
    a = data.alpha.alpha
    t = sol.time_grid
    phi, psi = data.phi, data.psi
    E = np.vstack([ml_eval_array(a, 1.0, -r * t**a, acc) for r in sp.rho])
    du = -(sp.rho * sol.C)[:, None] * E

    def dn(l, m):
        return phi.norm(l, m) ** 2 + psi.norm(l, m) ** 2

    mu = sp.mu[:, None]
    lam = sp.lam[:, None]
    entries = {
        "u-C-estimate": (_sup_sq(sol.u), phi.norm(0, 0) ** 2 + dn(0, g)),
        "f-estimate": (sol.f.norm(0, 0) ** 2, phi.norm(0, 1) ** 2 + dn(0, 1 + g)),
        "Mu-C-estimate": (_sup_sq(mu * sol.u), phi.norm(0, 1) ** 2 + dn(0, 1 + g)),
        "Dalpha_u-C-estimate": (_sup_sq(du), dn(-1, 1 + g)),
        "Dalpha_Lu-C-estimate": (_sup_sq(lam * du), dn(0, 1 + g)),
    }
    return {k: LedgerEntry(*v) for k, v in entries.items()}


def inverse_diagnostics(
    sol: InverseSolution,
    data: InverseProblemData,
    oracle_J: int = 2**10,
    window: float = 0.5,
    acc: MLAccuracy = DEFAULT_ACCURACY,
) -> dict:
    """Ledger of norm inequalities plus two oracle checks.

    ``residual`` is sup |(1+lambda) D^alpha u + mu u - f| over modes and
    t in [window T, T], with D^alpha from the L1 oracle on ``oracle_J`` steps;
    ``eigen_relation`` is the largest eigen-identity defect over the modes.
    Both oracle checks are skipped (None) for alpha = 1.
    """
    out: dict = dict(inverse_ledger(sol, data, acc))
    sp = data.spectrum
    a = data.alpha.alpha
    if a >= 1.0:
        out["residual"] = None
        out["eigen_relation"] = None
        return out

    grid = L1Grid(oracle_J, data.T)
    t = grid.nodes
    mask = t[1:] >= window * data.T - 1e-12 * data.T
    res = 0.0
    eig = 0.0
    for i in range(sp.N):
        x = sp.rho[i] * t**a
        e = ml_eval_array(a, 1.0, -x, acc)
        u = data.phi.coeffs[i] - sol.C[i] * ml_complement(a, x, acc)
        du = caputo_derivative_sampled(u, a, grid)
        r = (1.0 + sp.lam[i]) * du + sp.mu[i] * u[1:] - sol.f.coeffs[i]
        res = max(res, float(np.max(np.abs(r[mask]))))
        de = caputo_derivative_sampled(e, a, grid)
        eig = max(eig, float(np.max(np.abs(de + sp.rho[i] * e[1:])[mask])))
    out["residual"] = res
    out["eigen_relation"] = eig
    return out
