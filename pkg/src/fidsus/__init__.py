"""Dense simulation of block-encoding estimators for fidelity susceptibility."""
from .amplitude_estimation import (
    AmplitudeEstimate,
    amplitude_estimate,
    grover_operator,
    median_amplify,
)
from .block_encoding import (
    BlockEncoding,
    encode_matrix,
    ff_select_prepare,
    ff_shifted_encoding,
    product,
    verify,
)
from .errors import *  # noqa: F401,F403
from .models import FFModel, ModelSpec, PauliSum, build_ff_model, build_model, dense_model, ground_data
from .operator_core import SpectralData, hermitian_eig, pseudoinverse, unitary_dilation
from .polynomials import (
    ApproxTarget,
    ChebyshevPolynomial,
    eval_matrix,
    eval_scalar,
    ff_inverse_poly,
    inverse_poly,
    sqrt_inverse_poly,
    sup_error,
)
from .qsvt import apply_poly, ff_pseudoinverse_encoding, pseudoinverse_encoding
from .susceptibility import (
    EstimationReport,
    build_g_encoding,
    chi_f_exact_resolvent,
    chi_f_exact_sum,
    chi_f_finite_difference,
    estimate_chi_f,
    estimate_chi_f_ff,
    prepare_chi_f,
    prepare_chi_f_ff,
    qfi,
    static_susceptibility_estimate,
    static_susceptibility_exact,
)

__version__ = "0.1.0"
