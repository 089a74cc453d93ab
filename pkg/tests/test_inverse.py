import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracpseudo import (
    DenominatorUnderflow,
    InvalidParams,
    InvalidTruncation,
    InverseProblemData,
    SourceTrace,
    SpectralField,
    TimeGrid,
    builtin_spectrum,
    denominator_certificate,
    eigen_relation_error,
    inverse_diagnostics,
    ml_complement,
    reconstruct,
    solve_direct,
)

# bilaplacian pair, alpha = 0.7, T = 1, phi_k = k^-6, f_k = 3 k^-4: u_k(1) from Talbot inversion
PSI_REFERENCE = [
    1.7897048158808714575,
    0.022491071620365825834,
    0.0016780958953559517277,
    0.00027612449926262358407,
]


def _data(N=4):
    sp = builtin_spectrum("bilaplacian_pair", N)
    k = sp.modes.astype(float)
    return sp, k, SpectralField(k**-6.0, sp)


def test_recovers_source_from_independent_final_data():
    sp, k, phi = _data()
    data = InverseProblemData(sp, phi, SpectralField(np.array(PSI_REFERENCE), sp), 0.7, 1.0)
    sol = reconstruct(data)
    np.testing.assert_allclose(sol.f.coeffs, 3 * k**-4.0, rtol=1e-12)
    np.testing.assert_allclose(sol.u[:, 0], phi.coeffs, rtol=1e-15)
    np.testing.assert_allclose(sol.u[:, -1], PSI_REFERENCE, rtol=1e-12)


def test_equal_end_data_gives_stationary_solution():
    sp, k, phi = _data()
    sol = reconstruct(InverseProblemData(sp, phi, phi, 0.5, 2.0))
    assert not np.any(sol.C)
    np.testing.assert_allclose(sol.f.coeffs, sp.mu * phi.coeffs, rtol=1e-15)
    np.testing.assert_allclose(sol.u, np.repeat(phi.coeffs[:, None], sol.u.shape[1], axis=1))


def test_certificate_bounds_denominators():
    sp = builtin_spectrum("bilaplacian_pair", 32)
    for alpha in (0.2, 0.5, 0.9):
        floor, weighted = denominator_certificate(sp, alpha, 0.5)
        denom = ml_complement(alpha, sp.rho * 0.5**alpha)
        assert np.all(denom >= floor)
        assert np.all(sp.mu * denom >= weighted)
        assert weighted > 10 * floor  # mu^(kappa-1) restores a mode-independent floor


def test_certificate_formula():
    sp = builtin_spectrum("dirichlet_laplacian_pair", 1)  # lam = mu = 1
    g = 1 / math.gamma(1.5)
    floor, weighted = denominator_certificate(sp, 0.5, 1.0)
    assert floor == pytest.approx(g / (2 + g)) and weighted == floor


def test_underflow_names_the_mode():
    sp, k, phi = _data()
    data = InverseProblemData(sp, phi, phi, 0.5, 1e-30)
    with pytest.raises(DenominatorUnderflow, match="^mode 1: ") as err:
        reconstruct(data, TimeGrid(1e-30, 4))
    assert err.value.mode_index == 1


def test_cutoff_discards_weak_modes():
    sp = builtin_spectrum("dirichlet_laplacian_pair", 6)
    phi = SpectralField(np.ones(6), sp)
    psi = SpectralField(np.full(6, 0.5), sp)
    sol = reconstruct(InverseProblemData(sp, phi, psi, 0.5, 0.01), cutoff=0.5)
    assert sol.discarded and all(sol.C[i - 1] == 0 for i in sol.discarded)


def test_validation():
    sp, k, phi = _data()
    other = SpectralField(np.ones(3), builtin_spectrum("bilaplacian_pair", 3))
    with pytest.raises(InvalidTruncation):
        InverseProblemData(sp, phi, other, 0.7, 1.0)
    with pytest.raises(InvalidParams):
        InverseProblemData(sp, phi, phi, 0.7, 0.0)
    with pytest.raises(InvalidParams):
        reconstruct(InverseProblemData(sp, phi, phi, 0.7, 1.0), TimeGrid(2.0, 4))


def test_eigen_relation_and_residual_are_small():
    sp, k, phi = _data()
    data = InverseProblemData(sp, phi, SpectralField(np.array(PSI_REFERENCE), sp), 0.7, 1.0)
    sol = reconstruct(data)
    diag = inverse_diagnostics(sol, data, oracle_J=2**12)
    assert diag["residual"] < 1e-4 and diag["eigen_relation"] < 1e-4
    assert eigen_relation_error(0.5, 1.0, 1.0, 2**14) <= 1e-5
    assert set(diag) >= {"u-C-estimate", "f-estimate", "Mu-C-estimate",
                         "Dalpha_u-C-estimate", "Dalpha_Lu-C-estimate"}


def test_oracle_checks_skipped_at_integer_order():
    sp, k, phi = _data()
    data = InverseProblemData(sp, phi, SpectralField(0.5 * phi.coeffs, sp), 1.0, 1.0)
    diag = inverse_diagnostics(reconstruct(data), data)
    assert diag["residual"] is None and diag["eigen_relation"] is None


@given(st.floats(0.1, 1.0), st.floats(0.2, 3.0),
       st.lists(st.floats(-5, 5), min_size=4, max_size=4))
def test_round_trip_with_constant_sources(alpha, T, fs):
    sp, k, phi = _data()
    f = np.array(fs) * k**-4.0
    g = TimeGrid(T, 4)
    rep = solve_direct(sp, phi, [SourceTrace.constant(c) for c in f], alpha, g, ledger=False)
    sol = reconstruct(InverseProblemData(sp, phi, SpectralField(rep.final_values, sp), alpha, T), g)
    # the error is amplified by mu / denom over the data scale
    scale = sp.mu / sol.denom * np.maximum(np.abs(phi.coeffs), np.abs(rep.final_values))
    assert np.all(np.abs(sol.f.coeffs - f) <= 1e-13 * (np.abs(f) + scale))
    np.testing.assert_allclose(sol.u, rep.modal_solutions, atol=1e-13)
