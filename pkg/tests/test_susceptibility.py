import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import diag_spec, kron_word, random_hermitian
from fidsus.block_encoding import encode_matrix, verify
from fidsus.errors import DegenerateGroundState, ParameterError, ResourceCapError, ShapeError
from fidsus.models import ModelSpec, build_ff_model, dense_model, ground_data
from fidsus.operator_core import hermitian_eig, pseudoinverse
from fidsus.qsvt import hamiltonian_encoding
from fidsus.susceptibility import (
    EstimationReport,
    build_g_encoding,
    chi_f_exact_resolvent,
    chi_f_exact_sum,
    chi_f_finite_difference,
    estimate_chi_f,
    estimate_chi_f_ff,
    k_for_precision,
    prepare_chi_f,
    prepare_chi_f_ff,
    qfi,
    static_susceptibility_estimate,
    static_susceptibility_exact,
)

X = kron_word("X")
D01 = np.diag([0.0, 1.0])
SUCCESS = 8 / math.pi ** 2 - 0.03


def tfim(n, lam):
    return dense_model(ModelSpec("tfim", n, lam))


# --- exact oracles ----------------------------------------------------------


@pytest.mark.parametrize("gap", [0.5, 1.0, 3.0])
def test_diag_oracles(gap):
    H = np.diag([0.0, gap])
    assert chi_f_exact_sum(H, X) == pytest.approx(1 / gap ** 2)
    assert chi_f_exact_resolvent(H, X) == pytest.approx(1 / gap ** 2)
    assert static_susceptibility_exact(H, X) == pytest.approx(2 / gap)


def test_identity_driving_is_zero(rng):
    H = random_hermitian(rng, 8)
    assert chi_f_exact_sum(H, np.eye(8)) <= 1e-28
    assert static_susceptibility_exact(H, np.eye(8)) <= 1e-14
    _, psi0 = ground_data(H)
    assert chi_f_exact_resolvent(H, np.outer(psi0, psi0.conj())) <= 1e-28


def test_oracle_triangle_tfim():
    H, HI = tfim(2, 0.3)
    assert abs(chi_f_exact_sum(H, HI) - chi_f_exact_resolvent(H, HI)) <= 1e-10


def test_oracle_random_pair(rng):
    H, V = random_hermitian(rng, 8), random_hermitian(rng, 8)
    assert abs(chi_f_exact_sum(H, V) - chi_f_exact_resolvent(H, V)) <= 1e-10


def test_fd_diag_model():
    gap = 1.5
    fam = lambda lam: np.diag([0.0, gap]) + lam * X  # noqa: E731
    fd = chi_f_finite_difference(fam, 1e-3, lam=0.0)
    assert abs(fd - 1 / gap ** 2) <= 1e-4
    # Richardson: halving h moves the estimate by O(h^2)
    fd2 = chi_f_finite_difference(fam, 5e-4, lam=0.0)
    assert abs(fd - fd2) <= 1e-5


def test_fd_lambda_independent():
    H = np.diag([0.0, 1.0, 3.0, 4.0])
    assert chi_f_finite_difference(lambda lam: H, 1e-3) <= 1e-10


def test_fd_tfim4():
    spec = ModelSpec("tfim", 4, 0.8)
    H, HI = dense_model(spec)
    eq3 = chi_f_exact_sum(H, HI)
    assert abs(chi_f_finite_difference(spec, 1e-3) - eq3) <= 1e-4 * eq3


def test_degenerate_raises():
    with pytest.raises(DegenerateGroundState):
        chi_f_exact_sum(np.diag([0.0, 0.0, 1.0, 1.0]), np.eye(4))


@pytest.mark.parametrize("lam", [0.8, 1.2])
def test_static_vs_field_derivative(lam):
    n = 4
    H, _ = tfim(n, lam)
    O = sum(kron_word("I" * i + "Z" + "I" * (n - 1 - i)) for i in range(n))
    h = 1e-4

    def mean_o(f):
        _, psi = ground_data(H - f * O)
        return np.vdot(psi, O @ psi).real

    deriv = (mean_o(h) - mean_o(-h)) / (2 * h)
    exact = static_susceptibility_exact(H, O)
    assert abs(deriv - exact) <= 1e-4 * max(1.0, exact)


def test_qfi_ratio():
    for lam in (0.4, 0.9, 1.4):
        spec = ModelSpec("tfim", 4, lam)
        H, HI = dense_model(spec)
        assert qfi(spec, exact=True) == 4 * chi_f_exact_sum(H, HI)


def test_qfi_estimated_diag():
    spec = ModelSpec("tfim", 2, 1.0)
    assert qfi(spec, eps=0.1, seed=0, n_runs=1) == pytest.approx(
        4 * estimate_chi_f(spec, 0.1, seed=0).chi_f_hat)
    with pytest.raises(ParameterError):
        qfi(spec)


# --- encodings --------------------------------------------------------------


def test_g_diag():
    u_h = encode_matrix(D01, 1.0)
    u_i = encode_matrix(X, tag="U_I")
    g = build_g_encoding(u_h, u_i, 1.0, 1e-3)
    assert g.alpha == pytest.approx(4 / 3)
    assert verify(g, np.array([[0, 0], [1, 0]])) <= 1e-3


def test_g_identity_driving_annihilates():
    H, _ = tfim(3, 1.0)
    sd = hermitian_eig(H)
    g = build_g_encoding(hamiltonian_encoding(H, sd.e0), encode_matrix(np.eye(8)), sd.gap, 1e-3)
    assert np.linalg.norm(g.encoded() @ sd.ground_state) <= 1e-3


def test_g_tfim4():
    H, HI = tfim(4, 0.5)
    sd = hermitian_eig(H)
    eps = 1e-2
    g = build_g_encoding(hamiltonian_encoding(H, sd.e0), encode_matrix(HI), sd.gap, eps)
    assert verify(g, pseudoinverse(H - sd.e0 * np.eye(16)) @ HI) <= eps
    assert g.eps <= eps + 1e-15


def test_g_shape_mismatch():
    with pytest.raises(ShapeError):
        build_g_encoding(encode_matrix(D01), encode_matrix(np.eye(4)), 1.0, 1e-3)


def test_k_for_precision():
    for e in (0.1, 1e-3, 1e-5):
        K = k_for_precision(e)
        assert math.pi / K + math.pi ** 2 / K ** 2 <= e
        assert math.pi / (K / 2) + math.pi ** 2 / (K / 2) ** 2 > e
    with pytest.raises(ResourceCapError):
        k_for_precision(1e-12)


# --- end-to-end -------------------------------------------------------------


def _hit_rate(prep, truth, eps, seeds, n_runs=1):
    return np.mean([abs(prep.run(s, n_runs).chi_f_hat - truth) <= eps for s in seeds])


def test_diag_pipeline():
    prep = prepare_chi_f(diag_spec(1.0), 0.02)
    assert abs(prep.oracle_values["eq3"] - 1.0) <= 1e-12
    assert _hit_rate(prep, 1.0, 0.02, range(100)) >= SUCCESS
    assert all(0.98 <= prep.run(s, 15).chi_f_hat <= 1.02 for s in range(20))


def test_h_i_equal_h():
    H, _ = tfim(2, 0.7)
    prep = prepare_chi_f(H, 0.05, H_I=H)
    assert prep.oracle_values["eq3"] <= 1e-20
    assert _hit_rate(prep, 0.0, 0.05, range(100)) >= SUCCESS


def test_dense_needs_driving():
    with pytest.raises(ParameterError):
        prepare_chi_f(np.diag([0.0, 1.0]), 0.05)
    with pytest.raises(ParameterError):
        prepare_chi_f(diag_spec(), 0.75)


def test_tfim4_seed_sweep():
    eps = 0.05
    prep = prepare_chi_f(ModelSpec("tfim", 4, 0.5), eps)
    truth = prep.oracle_values["eq3"]
    assert _hit_rate(prep, truth, eps, range(200)) >= SUCCESS
    assert _hit_rate(prep, truth, eps, range(200), n_runs=15) >= 0.99


def test_report_fields_and_budget():
    spec = ModelSpec("tfim", 3, 1.0)
    rep = estimate_chi_f(spec, 0.1, seed=5)
    assert rep.chi_f_hat == rep.alpha_q ** 2 * rep.p_hat
    assert rep.eps1 <= rep.eps_target / (4 * rep.alpha_q)
    assert rep.eps2 <= rep.eps_target / (2 * rep.alpha_q ** 2)
    assert math.pi / rep.K + math.pi ** 2 / rep.K ** 2 <= rep.eps2
    assert abs(rep.oracle_values["eq3"] - rep.oracle_values["eq5"]) <= 1e-10
    assert abs(rep.oracle_values["eq3"] - rep.oracle_values["eq2_fd"]) <= 1e-3 * (1 + rep.oracle_values["eq3"])
    assert all(v >= 0 for v in rep.queries.values())
    assert rep.queries["U_H"] == rep.degree * rep.queries["U_Psi"]
    assert rep.queries["U_I"] == rep.queries["U_Psi"] == rep.queries_total
    back = EstimationReport(**{k: v for k, v in rep.to_dict().items() if k != "queries_total"})
    assert back == rep
    assert rep.to_csv().splitlines()[0].startswith("quantity,chi_f_hat")


def test_seeded_runs_repeat():
    prep = prepare_chi_f(ModelSpec("tfim", 2, 0.9), 0.1)
    assert prep.run(11).chi_f_hat == prep.run(11).chi_f_hat
    assert estimate_chi_f(ModelSpec("tfim", 2, 0.9), 0.1, seed=11).chi_f_hat == prep.run(11).chi_f_hat


def test_ff_catalog_pipeline():
    m = build_ff_model(2, "pair")
    drive = kron_word("XX")
    eps = 0.05
    prep = prepare_chi_f_ff(m, drive, eps)
    truth = chi_f_exact_sum(m.h_f, drive)
    assert prep.ff_mode
    assert _hit_rate(prep, truth, eps, range(100)) >= SUCCESS
    gen = prepare_chi_f(m.h_f, eps, H_I=drive)
    # FF equivalence: both pipelines agree within 2 eps on the same seed
    for s in range(20):
        assert abs(prep.run(s, 15).chi_f_hat - gen.run(s, 15).chi_f_hat) <= 2 * eps


def test_ff_single_projector():
    m = build_ff_model(1, "chain")
    rep = estimate_chi_f_ff(m, X, 0.05, seed=0, n_runs=15)
    assert abs(rep.chi_f_hat - 1.0) <= 0.05


def test_ff_n6_cheaper():
    m = build_ff_model(6, "chain")
    H, drive = dense_model(ModelSpec("ff_projector_chain", 6, 0.0))
    prep = prepare_chi_f_ff(m, drive, 0.1)
    assert prep.extra["ff_degree"] < prep.extra["general_degree"]


def test_static_estimates():
    rep = static_susceptibility_estimate(D01, X, 0.05, seed=0, n_runs=15)
    assert abs(rep.chi_f_hat - 2.0) <= 0.05
    H, _ = tfim(3, 1.0)
    O = kron_word("ZII") + kron_word("IZI") + kron_word("IIZ")
    O /= 3
    exact = static_susceptibility_exact(H, O)
    for s in range(5):
        rep = static_susceptibility_estimate(H, O, 0.05, seed=s, n_runs=15)
        assert abs(rep.chi_f_hat - exact) <= 0.05
    assert static_susceptibility_estimate(H, np.eye(8), 0.05, seed=1, n_runs=15).chi_f_hat <= 0.05


def test_imperfect_e0_recorded():
    prep = prepare_chi_f(ModelSpec("tfim", 2, 1.0), 0.1, delta_e0=1e-3)
    assert prep.extra["delta_e0"] == 1e-3
