"""Scalar modal problems and the source traces that drive them.

Each spectral mode xi obeys

    D^alpha u + rho u = f(t) / (1 + lambda),    u(0) = phi,

with rho = mu / (1 + lambda).  These types are shared by the closed-form
solvers, the inverse reconstruction and the L1 oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InvalidAlpha, InvalidParams, RegimeMismatch

REGIMES = ("case_I", "case_II", "classical")


@dataclass(frozen=True)
class FractionalOrder:
    """alpha in (0, 1] together with the representation it is solved under.

    ``case_I`` needs alpha > 1/2, ``classical`` needs alpha == 1 and
    ``case_II`` accepts any alpha in (0, 1].  Leaving ``regime`` as None picks
    the natural one; ``forced`` records whether the caller chose it.
    """

    alpha: float
    regime: Optional[str] = None
    forced: bool = field(init=False, default=False, compare=False)

    def __post_init__(self) -> None:
        a = self.alpha
        if isinstance(a, bool) or not isinstance(a, (int, float, np.floating, np.integer)):
            raise InvalidAlpha(f"alpha must be a real number, got {a!r}")
        a = float(a)
        if not (0.0 < a <= 1.0) or not math.isfinite(a):
            raise InvalidAlpha(f"alpha must lie in (0, 1], got {a!r}")
        object.__setattr__(self, "alpha", a)

        regime = self.regime
        object.__setattr__(self, "forced", regime is not None)
        if regime is None:
            regime = "classical" if a == 1.0 else ("case_I" if a > 0.5 else "case_II")
        if regime not in REGIMES:
            raise InvalidParams(f"unknown regime {regime!r}; choose one of {REGIMES}")
        if regime == "case_I" and not a > 0.5:
            raise RegimeMismatch(
                f"the case I representation needs 1/2 < alpha <= 1, got alpha={a}"
            )
        if regime == "classical" and a != 1.0:
            raise RegimeMismatch(f"classical regime needs alpha = 1, got alpha={a}")
        object.__setattr__(self, "regime", regime)

    @property
    def allows_case_I(self) -> bool:
        return self.alpha > 0.5


def as_order(alpha) -> FractionalOrder:
    return alpha if isinstance(alpha, FractionalOrder) else FractionalOrder(float(alpha))


Callback = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class SourceTrace:
    """Time dependence of one modal source coefficient f_xi(t).

    Build with :meth:`constant`, :meth:`sampled` or :meth:`callback`.  Sampled
    traces are evaluated between samples by linear interpolation; when no
    derivative samples are supplied, f' is estimated by centred differences
    (one-sided at the ends) and ``derivative_estimated`` is set.
    """

    kind: str
    value: float = 0.0
    times: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None
    derivative_values: Optional[np.ndarray] = None
    func: Optional[Callback] = None
    dfunc: Optional[Callback] = None
    derivative_estimated: bool = field(default=False)

    @classmethod
    def constant(cls, c: float) -> "SourceTrace":
        c = float(c)
        if not math.isfinite(c):
            raise InvalidParams("constant source must be finite")
        return cls("constant", value=c)

    @classmethod
    def zero(cls) -> "SourceTrace":
        return cls.constant(0.0)

    @classmethod
    def sampled(cls, times, values, derivative_values=None) -> "SourceTrace":
        t = np.array(times, dtype=float)
        v = np.array(values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size < 2:
            raise InvalidParams("sampled source needs matching 1-d times/values, at least 2")
        if np.any(np.diff(t) <= 0) or not np.all(np.isfinite(v)):
            raise InvalidParams("sample times must increase strictly and values be finite")
        estimated = derivative_values is None
        if estimated:
            d = np.gradient(v, t, edge_order=1)
        else:
            d = np.array(derivative_values, dtype=float)
            if d.shape != v.shape or not np.all(np.isfinite(d)):
                raise InvalidParams("derivative samples must match the value samples")
        for a in (t, v, d):
            a.setflags(write=False)
        return cls(
            "sampled", times=t, values=v, derivative_values=d, derivative_estimated=estimated
        )

    @classmethod
    def callback(cls, func: Callback, dfunc: Optional[Callback] = None) -> "SourceTrace":
        if not callable(func) or (dfunc is not None and not callable(dfunc)):
            raise InvalidParams("callback sources need callables")
        return cls("callback", func=func, dfunc=dfunc)

    def scaled(self, c: float) -> "SourceTrace":
        """The trace c f(t)."""
        c = float(c)
        if self.kind == "constant":
            return SourceTrace.constant(c * self.value)
        if self.kind == "sampled":
            d = None if self.derivative_estimated else c * self.derivative_values
            return SourceTrace.sampled(self.times, c * self.values, d)
        f, df = self.func, self.dfunc
        return SourceTrace.callback(
            lambda t: c * np.asarray(f(t), dtype=float),
            None if df is None else (lambda t: c * np.asarray(df(t), dtype=float)),
        )

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    @property
    def is_zero(self) -> bool:
        if self.kind == "constant":
            return self.value == 0.0
        if self.kind == "sampled":
            return not np.any(self.values)
        return False

    @property
    def derivative_available(self) -> bool:
        """True when f' is known exactly (not estimated from samples)."""
        if self.kind == "constant":
            return True
        if self.kind == "sampled":
            return not self.derivative_estimated
        return self.dfunc is not None

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            return np.full(t.shape, self.value)
        if self.kind == "sampled":
            return np.interp(t, self.times, self.values)
        out = np.broadcast_to(np.asarray(self.func(t), dtype=float), t.shape).copy()
        if not np.all(np.isfinite(out)):
            raise InvalidParams("source callback returned non-finite values")
        return out

    def derivative(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            return np.zeros(t.shape)
        if self.kind == "sampled":
            return np.interp(t, self.times, self.derivative_values)
        if self.dfunc is None:
            raise InvalidParams("callback source has no derivative")
        return np.broadcast_to(np.asarray(self.dfunc(t), dtype=float), t.shape).copy()


@dataclass(frozen=True, eq=False)
class ModalProblem:
    """One scalar fractional ODE of the modal decomposition."""

    lam: float
    mu: float
    phi: float
    source: SourceTrace
    alpha: FractionalOrder

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", as_order(self.alpha))
        for name in ("lam", "mu", "phi"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise InvalidParams(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if not (self.lam > 0 and self.mu > 0):
            raise InvalidParams("modal eigenvalues lambda and mu must be positive")
        if not isinstance(self.source, SourceTrace):
            raise InvalidParams("source must be a SourceTrace")

    @property
    def rho(self) -> float:
        return self.mu / (1.0 + self.lam)

    def rhs(self, t) -> np.ndarray:
        """f(t) / (1 + lambda), the right-hand side of the normalised ODE."""
        return self.source(t) / (1.0 + self.lam)
