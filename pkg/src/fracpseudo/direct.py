"""Direct problem D^alpha[u + L u] + M u = f, u(0) = phi, solved mode by mode.

Two closed-form modal representations are available.  With
rho = mu / (1 + lambda) and E(t) = E_{alpha,1}(-rho t^alpha):

case I (1/2 < alpha <= 1)
    u(t) = phi E(t) + 1/(1+lambda) int_0^t s^(alpha-1) E_{alpha,alpha}(-rho s^alpha) f(t-s) ds

case II (0 < alpha <= 1, f differentiable)
    u(t) = phi E(t) + f(0) (1 - E(t)) / mu + (f(t) - f(0)) / mu
           - 1/mu int_0^t E(s) f'(t-s) ds

The two agree by one integration by parts.  Both convolutions go through the
product rule in :mod:`fracpseudo.quadrature`, which is exact for constant f.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid

from .errors import (
    InvalidParams,
    InvalidTruncation,
    MissingDerivative,
    NumericalFailure,
    RegimeMismatch,
)
from .mlfunc import DEFAULT_ACCURACY, MLAccuracy, ml_complement, ml_eval_array
from .problem import FractionalOrder, ModalProblem, SourceTrace, as_order
from .quadrature import QuadratureSpec, convolve_points, convolve_uniform
from .spectral import SpectralField, SpectrumPair

__all__ = [
    "TimeGrid",
    "QuadratureSpec",
    "LedgerEntry",
    "SolveReport",
    "solve_modal_caseI",
    "solve_modal_caseII",
    "solve_modal",
    "select_regime",
    "solve_direct",
    "derived_series",
    "direct_ledger",
    "FamilyCheck",
    "check_ledger_family",
]


# {{{ time grids


@dataclass(frozen=True)
class TimeGrid:
    """Nodes t_j = T (j/J)^(1/grading), j = 0..J; grading 1 is uniform."""

    T: float
    J: int
    grading: float = 1.0

    def __post_init__(self) -> None:
        if not (self.T > 0) or not math.isfinite(self.T):
            raise InvalidParams(f"T must be positive and finite, got {self.T!r}")
        if isinstance(self.J, bool) or not isinstance(self.J, (int, np.integer)) or self.J < 1:
            raise InvalidParams(f"J must be a positive integer, got {self.J!r}")
        if not (0 < self.grading <= 1.0):
            raise InvalidParams(f"grading must lie in (0, 1], got {self.grading!r}")

    @property
    def uniform(self) -> bool:
        return self.grading == 1.0

    @property
    def nodes(self) -> np.ndarray:
        x = np.arange(self.J + 1) / self.J
        t = self.T * (x if self.uniform else x ** (1.0 / self.grading))
        t[-1] = self.T
        return t


def _as_grid(grid) -> TimeGrid:
    if isinstance(grid, TimeGrid):
        return grid
    raise InvalidParams("grid must be a TimeGrid")


# }}}


# {{{ modal solvers


def _relaxation(p: ModalProblem, t: np.ndarray, acc: MLAccuracy) -> np.ndarray:
    return ml_eval_array(p.alpha.alpha, 1.0, -p.rho * t**p.alpha.alpha, acc)


def _convolve(p, beta, g, grid: TimeGrid, quad: QuadratureSpec, acc):
    a = p.alpha.alpha
    if grid.uniform:
        return convolve_uniform(a, beta, p.rho, g, grid.T, grid.J, quad, acc)
    return convolve_points(a, beta, p.rho, g, grid.nodes, quad, acc)


def solve_modal_caseI(
    p: ModalProblem,
    grid: TimeGrid,
    quad: QuadratureSpec = QuadratureSpec(),
    acc: MLAccuracy = DEFAULT_ACCURACY,
) -> np.ndarray:
    """Modal solution through the weakly singular kernel s^(alpha-1) E_{alpha,alpha}."""
    grid = _as_grid(grid)
    a = p.alpha.alpha
    if not a > 0.5:
        raise RegimeMismatch(
            f"the case I representation needs 1/2 < alpha <= 1 (got alpha={a}); "
            "supply a source derivative to use the case II representation"
        )
    t = grid.nodes
    u = p.phi * _relaxation(p, t, acc) if p.phi else np.zeros(t.size)
    src = p.source
    if src.is_zero:
        return u
    if src.is_constant:
        # c int_0^t k = c t^alpha E_{alpha,alpha+1}(-rho t^alpha), exact
        with np.errstate(divide="ignore"):
            conv = src.value * t**a * ml_eval_array(a, a + 1.0, -p.rho * t**a, acc)
    else:
        conv = _convolve(p, a, src, grid, quad, acc).values
    return u + conv / (1.0 + p.lam)


def solve_modal_caseII(
    p: ModalProblem,
    grid: TimeGrid,
    quad: QuadratureSpec = QuadratureSpec(),
    acc: MLAccuracy = DEFAULT_ACCURACY,
    allow_estimated: bool = False,
) -> np.ndarray:
    """Modal solution through the integrated-by-parts form with f'.

    Sampled sources without derivative samples are refused unless
    ``allow_estimated`` is set, in which case centred differences stand in.
    """
    grid = _as_grid(grid)
    src = p.source
    if not src.derivative_available and not (allow_estimated and src.kind == "sampled"):
        raise MissingDerivative(
            "the case II representation needs the source derivative f'"
        )
    a = p.alpha.alpha
    t = grid.nodes
    u = p.phi * _relaxation(p, t, acc) if p.phi else np.zeros(t.size)
    if src.is_zero:
        return u
    f0 = float(src(np.zeros(1))[0])
    if f0:
        u = u + f0 / p.mu * ml_complement(a, p.rho * t**a, acc)
    if src.is_constant:
        return u
    ft = src(t)
    conv = _convolve(p, 1.0, src.derivative, grid, quad, acc).values
    return u + ((ft - f0) - conv) / p.mu


def select_regime(alpha: FractionalOrder, sources: Sequence[SourceTrace]) -> tuple[str, bool]:
    """(regime, uses_estimated_derivative) for a set of modal sources.

    An explicit regime on ``alpha`` wins.  Otherwise case II is used when every
    source has a derivative, case I when alpha > 1/2, and case II with
    estimated derivatives for sampled sources as the last resort.
    """
    have = all(s.derivative_available for s in sources)
    sampled_ok = all(s.derivative_available or s.kind == "sampled" for s in sources)
    if alpha.regime == "classical":
        return ("classical", False)

    regime = alpha.regime if alpha.forced else None
    if regime == "case_I":
        return ("case_I", False)
    if regime == "case_II":
        if have:
            return ("case_II", False)
        if sampled_ok:
            return ("case_II", True)
        raise MissingDerivative("case II was requested but a source has no derivative")

    if have:
        return ("case_II", False)
    if alpha.allows_case_I:
        return ("case_I", False)
    if sampled_ok:
        return ("case_II", True)
    raise RegimeMismatch(
        f"alpha={alpha.alpha} <= 1/2 needs the case II representation, "
        "which requires source derivatives"
    )


def solve_modal(
    p: ModalProblem,
    grid: TimeGrid,
    quad: QuadratureSpec = QuadratureSpec(),
    regime: Optional[str] = None,
    acc: MLAccuracy = DEFAULT_ACCURACY,
) -> np.ndarray:
    """Dispatch to the representation named by ``regime`` (auto when None)."""
    if regime is None:
        order = FractionalOrder(p.alpha.alpha)
        regime, _ = select_regime(order, [p.source])
    if regime in ("case_I", "classical"):
        return solve_modal_caseI(p, grid, quad, acc)
    if regime == "case_II":
        return solve_modal_caseII(p, grid, quad, acc, allow_estimated=True)
    raise InvalidParams(f"unknown regime {regime!r}")


# }}}


# {{{ report and ledger


@dataclass(frozen=True)
class LedgerEntry:
    """One norm inequality lhs <= C rhs; ``constant`` is lhs / rhs."""

    lhs: float
    rhs: float

    @property
    def constant(self) -> float:
        if self.rhs > 0:
            return self.lhs / self.rhs
        return 0.0 if self.lhs == 0 else math.inf

    def as_dict(self) -> dict:
        c = self.constant
        return {"lhs": self.lhs, "rhs": self.rhs, "constant": c if math.isfinite(c) else None}


@dataclass(frozen=True, eq=False)
class SolveReport:
    time_grid: np.ndarray
    modal_solutions: np.ndarray
    spectrum: SpectrumPair
    phi: SpectralField
    alpha: FractionalOrder
    regime: str
    source_values: np.ndarray
    source_derivatives: Optional[np.ndarray]
    derivative_estimated: bool
    truncation_diag: float
    norms_ledger: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.spectrum.N

    @property
    def final_values(self) -> np.ndarray:
        return self.modal_solutions[:, -1].copy()


def derived_series(report: SolveReport, which: str) -> np.ndarray:
    """Lu, Mu, Dalpha_u or Dalpha_Lu as an N x grid matrix.

    D^alpha u is read off the modal ODE itself: (f - mu u) / (1 + lambda).
    """
    lam = report.spectrum.lam[:, None]
    mu = report.spectrum.mu[:, None]
    u = report.modal_solutions
    if which == "Lu":
        return lam * u
    if which == "Mu":
        return mu * u
    if which in ("Dalpha_u", "Dalpha_Lu"):
        d = (report.source_values - mu * u) / (1.0 + lam)
        return d if which == "Dalpha_u" else lam * d
    raise InvalidParams(f"unknown derived series {which!r}")


def _l2_time(t: np.ndarray, rows: np.ndarray, weights: np.ndarray) -> float:
    """int_0^T sum_xi (w_xi g_xi(t))^2 dt by the trapezoid rule."""
    return float(trapezoid(np.sum((weights[:, None] * rows) ** 2, axis=0), t))


def _w1_time(t, rows, drows, weights) -> float:
    """(||g||_L2 + ||g'||_L2)^2, the squared W^1 norm used by the case II estimates."""
    return (math.sqrt(_l2_time(t, rows, weights)) + math.sqrt(_l2_time(t, drows, weights))) ** 2


def direct_ledger(report: SolveReport) -> dict:
    """Squared-norm inequalities for u, Lu, Mu, D^alpha u and D^alpha L u."""
    sp = report.spectrum
    t = report.time_grid
    F = report.source_values
    phi = report.phi
    w = sp.weights
    lhs = {
        "u": _l2_time(t, report.modal_solutions, np.ones(sp.N)),
        "Lu": _l2_time(t, derived_series(report, "Lu"), np.ones(sp.N)),
        "Mu": _l2_time(t, derived_series(report, "Mu"), np.ones(sp.N)),
        "Dalpha_u": _l2_time(t, derived_series(report, "Dalpha_u"), np.ones(sp.N)),
        "Dalpha_Lu": _l2_time(t, derived_series(report, "Dalpha_Lu"), np.ones(sp.N)),
    }

    def pn(l, m):
        return phi.norm(l, m) ** 2

    if report.regime == "case_II":
        dF = report.source_derivatives

        def fn(l, m):
            return _w1_time(t, F, dF, w(l, m))

        rhs = {
            "u": pn(0, 0) + fn(0, -1),
            "Lu": pn(1, 0) + fn(1, -1),
            "Mu": pn(0, 1) + fn(0, 0),
            "Dalpha_u": pn(-1, 1) + fn(-1, 0),
            "Dalpha_Lu": pn(0, 1) + fn(0, 0),
        }
    else:

        def fn(l, m):
            return _l2_time(t, F, w(l, m))

        rhs = {
            "u": pn(0, 0) + fn(-1, 0),
            "Lu": pn(1, 0) + fn(0, 0),
            "Mu": pn(0, 1) + fn(-1, 1),
            "Dalpha_u": pn(-1, 1) + fn(-1, 0) + fn(-2, 1),
            "Dalpha_Lu": pn(0, 1) + fn(0, 0) + fn(-1, 1),
        }
    return {f"{k}-L2-estimate": LedgerEntry(lhs[k], rhs[k]) for k in lhs}


@dataclass(frozen=True)
class FamilyCheck:
    recorded: float
    constants: tuple
    spread: float
    holds: bool


def check_ledger_family(ledgers: Sequence[dict], slack: float = 0.05) -> dict:
    """Stability of fitted constants over a refinement family.

    The constant is recorded at the first (base) member.  An inequality holds
    across the family when no member needs more than (1 + slack) times the
    recorded constant and the spread (max - min) / min stays within ``slack``.
    """
    if not ledgers:
        raise InvalidParams("empty ledger family")
    out = {}
    for name in ledgers[0]:
        cs = [float(led[name].constant) for led in ledgers]
        rec = cs[0]
        lo, hi = min(cs), max(cs)
        if lo > 0:
            spread = (hi - lo) / lo
        else:
            spread = 0.0 if hi == 0 else math.inf
        ok = all(math.isfinite(c) for c in cs) and hi <= (1 + slack) * rec and spread <= slack
        out[name] = FamilyCheck(rec, tuple(cs), spread, ok)
    return out


# }}}


def solve_direct(
    spectrum: SpectrumPair,
    phi: SpectralField,
    f: Sequence[SourceTrace],
    alpha,
    grid: TimeGrid,
    quad: QuadratureSpec = QuadratureSpec(),
    threads: int = 1,
    acc: MLAccuracy = DEFAULT_ACCURACY,
    ledger: bool = True,
) -> SolveReport:
    """Solve every mode and assemble a :class:`SolveReport`.

    ``f`` holds one SourceTrace per mode.  Modes may run on ``threads`` worker
    threads; results are assembled in mode order so output does not depend on
    scheduling.  Numerical failures are re-raised tagged with their 1-based
    mode index.
    """
    alpha = as_order(alpha)
    grid = _as_grid(grid)
    if phi.spectrum is not spectrum and phi.coeffs.shape != (spectrum.N,):
        raise InvalidTruncation("phi does not match the spectrum truncation")
    sources = list(f)
    if len(sources) != spectrum.N:
        raise InvalidTruncation(f"expected {spectrum.N} modal sources, got {len(sources)}")
    regime, estimated = select_regime(alpha, sources)

    problems = [
        ModalProblem(spectrum.lam[i], spectrum.mu[i], phi.coeffs[i], sources[i], alpha)
        for i in range(spectrum.N)
    ]

    def run(i: int) -> np.ndarray:
        try:
            return solve_modal(problems[i], grid, quad, regime, acc)
        except NumericalFailure as exc:
            raise exc.with_mode(i + 1)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            rows = list(pool.map(run, range(spectrum.N)))
    else:
        rows = [run(i) for i in range(spectrum.N)]

    t = grid.nodes
    U = np.vstack(rows)
    F = np.vstack([s(t) for s in sources])
    dF = None
    if regime == "case_II" or all(s.derivative_available or s.kind == "sampled" for s in sources):
        dF = np.vstack([s.derivative(t) for s in sources])

    report = SolveReport(
        time_grid=t,
        modal_solutions=U,
        spectrum=spectrum,
        phi=phi,
        alpha=alpha,
        regime=regime,
        source_values=F,
        source_derivatives=dF,
        derivative_estimated=estimated,
        truncation_diag=float(np.max(np.abs(U[-1]))),
    )
    if ledger:
        report.norms_ledger.update(direct_ledger(report))
    return report

