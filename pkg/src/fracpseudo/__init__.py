"""Direct and inverse problems for D^alpha [u + L u] + M u = f by eigenfunction expansion."""

from .caputo_oracle import (
    ConvergenceResult,
    L1Grid,
    caputo_derivative_sampled,
    convergence_order,
    l1_expansion_exponents,
    l1_reference,
    l1_residual,
    l1_solve_modal,
    l1_weights,
    richardson,
)
from .direct import (
    FamilyCheck,
    LedgerEntry,
    SolveReport,
    TimeGrid,
    check_ledger_family,
    derived_series,
    direct_ledger,
    select_regime,
    solve_direct,
    solve_modal,
    solve_modal_caseI,
    solve_modal_caseII,
)
from .errors import *  # noqa: F401,F403
from .inverse import (
    InverseProblemData,
    InverseSolution,
    denominator_certificate,
    eigen_relation_error,
    inverse_diagnostics,
    inverse_ledger,
    reconstruct,
)
from .mlfunc import (
    DEFAULT_ACCURACY,
    MLAccuracy,
    MLParams,
    mittag_leffler,
    ml_complement,
    ml_eval,
    ml_eval_array,
    ml_kernel_derivative,
    ml_simon_bounds,
)
from .problem import FractionalOrder, ModalProblem, SourceTrace
from .quadrature import QuadratureSpec, QuadResult, convolve_points, convolve_uniform
from .spectral import (
    BUILTIN_SPECTRA,
    SpectralField,
    SpectrumPair,
    builtin_spectrum,
    smoothing_index,
    sobolev_norm,
)

__version__ = "0.1.0"
