"""Diagonal operator pairs (L, M) and the weighted coefficient norms.

Elements of the Hilbert space are represented by their coefficients in the
shared eigenbasis, truncated to modes k = 1..N.  Operators act coefficient-wise,
so nothing here ever materialises a basis function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParams, InvalidTruncation, NumericOverflow, UnknownSpectrum

BUILTIN_SPECTRA = ("dirichlet_laplacian_pair", "bilaplacian_pair", "fractional_pair")


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SpectrumPair:
    """Eigenvalues of L and M on modes 1..N.

    ``growth_constant`` is the recorded C with lambda_k <= C mu_k^kappa on the
    implemented modes.
    """

    name: str
    lam: np.ndarray
    mu: np.ndarray
    kappa: float
    c_L: float = field(default=math.nan)
    c_M: float = field(default=math.nan)
    growth_constant: float = field(default=math.nan)
    params: tuple = ()

    def __post_init__(self) -> None:
        lam = _frozen(self.lam)
        mu = _frozen(self.mu)
        if lam.ndim != 1 or lam.shape != mu.shape or lam.size < 1:
            raise InvalidTruncation("lam and mu must be equal-length 1-d arrays with N >= 1")
        if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(mu))):
            raise NumericOverflow(f"eigenvalues of {self.name!r} overflow double precision")
        if not (self.kappa > 0):
            raise InvalidParams(f"kappa must be positive, got {self.kappa!r}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "mu", mu)

        c_L = float(lam.min()) if math.isnan(self.c_L) else float(self.c_L)
        c_M = float(mu.min()) if math.isnan(self.c_M) else float(self.c_M)
        if not (c_L > 0 and c_M > 0):
            raise InvalidParams("eigenvalue floors c_L, c_M must be positive")
        if np.any(lam < c_L) or np.any(mu < c_M):
            raise InvalidParams("eigenvalues fall below the declared floors c_L, c_M")
        object.__setattr__(self, "c_L", c_L)
        object.__setattr__(self, "c_M", c_M)

        ratio = float(np.max(lam / mu**self.kappa))
        if math.isnan(self.growth_constant):
            object.__setattr__(self, "growth_constant", ratio)
        elif ratio > self.growth_constant * (1 + 1e-12):
            raise InvalidParams("growth constant does not bound lambda / mu^kappa")

    @property
    def N(self) -> int:
        return int(self.lam.size)

    @property
    def modes(self) -> np.ndarray:
        return np.arange(1, self.N + 1)

    @property
    def gamma(self) -> float:
        """Smoothing index max(0, kappa - 1)."""
        return smoothing_index(self.kappa)

    @property
    def rho(self) -> np.ndarray:
        """Relaxation rates mu_k / (1 + lambda_k)."""
        return self.mu / (1.0 + self.lam)

    def weights(self, l: float, m: float) -> np.ndarray:
        """lambda_k^l mu_k^m, raising NumericOverflow if it leaves double range."""
        with np.errstate(over="ignore"):
            w = self.lam**l * self.mu**m
        if not np.all(np.isfinite(w)):
            raise NumericOverflow(f"weights lambda^{l} mu^{m} overflow for {self.name!r}")
        return w

    def truncate(self, N: int) -> "SpectrumPair":
        if not (1 <= N <= self.N):
            raise InvalidTruncation(f"cannot truncate N={self.N} spectrum to {N}")
        return SpectrumPair(self.name, self.lam[:N], self.mu[:N], self.kappa, params=self.params)


def smoothing_index(kappa: float) -> float:
    return max(0.0, float(kappa) - 1.0)


def builtin_spectrum(name: str, N: int, **params: float) -> SpectrumPair:
    """Concrete operator pairs satisfying the positivity and growth assumptions.

    ``dirichlet_laplacian_pair``: lambda_k = mu_k = k^2 (kappa = 1).
    ``bilaplacian_pair``: lambda_k = k^4, mu_k = k^2 (kappa = 2).
    ``fractional_pair``: lambda_k = k^(2a), mu_k = k^(2b) with kappa = a/b;
    requires keyword parameters ``a`` and ``b`` (both positive).
    """
    if not isinstance(N, (int, np.integer)) or isinstance(N, bool) or N < 1:
        raise InvalidTruncation(f"truncation N must be a positive integer, got {N!r}")
    k = np.arange(1, int(N) + 1, dtype=float)

    with np.errstate(over="ignore"):
        if name == "dirichlet_laplacian_pair":
            _no_params(name, params)
            lam, mu, kappa = k**2, k**2, 1.0
        elif name == "bilaplacian_pair":
            _no_params(name, params)
            lam, mu, kappa = k**4, k**2, 2.0
        elif name == "fractional_pair":
            if set(params) != {"a", "b"}:
                raise InvalidParams("fractional_pair needs exactly the parameters a and b")
            a, b = float(params["a"]), float(params["b"])
            if not (a > 0 and b > 0):
                raise InvalidParams("fractional_pair parameters must be positive")
            lam, mu, kappa = k ** (2 * a), k ** (2 * b), a / b
        else:
            raise UnknownSpectrum(f"unknown spectrum {name!r}; choose one of {BUILTIN_SPECTRA}")

    if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(mu))):
        raise NumericOverflow(f"{name} eigenvalues overflow at N={N}")
    return SpectrumPair(
        name, lam, mu, kappa, c_L=1.0, c_M=1.0, params=tuple(sorted(params.items()))
    )


def _no_params(name: str, params: dict) -> None:
    if params:
        raise InvalidParams(f"{name} takes no parameters, got {sorted(params)}")


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Truncated coefficient vector of an element of the Hilbert space."""

    coeffs: np.ndarray
    spectrum: SpectrumPair

    def __post_init__(self) -> None:
        c = _frozen(self.coeffs)
        if c.shape != (self.spectrum.N,):
            raise InvalidTruncation(
                f"expected {self.spectrum.N} coefficients, got shape {c.shape}"
            )
        if not np.all(np.isfinite(c)):
            raise InvalidParams("coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, spectrum: SpectrumPair) -> "SpectralField":
        return cls(np.zeros(spectrum.N), spectrum)

    @classmethod
    def basis_vector(cls, spectrum: SpectrumPair, k: int) -> "SpectralField":
        c = np.zeros(spectrum.N)
        c[k - 1] = 1.0
        return cls(c, spectrum)

    def apply(self, l: float = 0.0, m: float = 0.0) -> "SpectralField":
        """Coefficients of L^l M^m u."""
        return SpectralField(self.spectrum.weights(l, m) * self.coeffs, self.spectrum)

    def norm(self, l: float = 0.0, m: float = 0.0) -> float:
        return sobolev_norm(self, l, m)


def sobolev_norm(field: SpectralField, l: float, m: float) -> float:
    """sqrt(sum_k (lambda_k^l mu_k^m |u_k|)^2): the norm of the L/M scale."""
    if not (math.isfinite(l) and math.isfinite(m)):
        raise InvalidParams("norm exponents must be finite")
    w = field.spectrum.weights(l, m) * np.abs(field.coeffs)
    # scale before squaring so large weights do not overflow needlessly
    scale = float(np.max(w)) if w.size else 0.0
    if scale == 0.0:
        return 0.0
    val = scale * math.sqrt(float(np.sum((w / scale) ** 2)))
    if not math.isfinite(val):
        raise NumericOverflow("norm overflows double precision")
    return val
