import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import kron_word
from fidsus.block_encoding import encode_matrix, ff_select_prepare, ff_shifted_encoding, verify
from fidsus.errors import BackendUnsupported, NormalizationError, ParameterError
from fidsus.models import ModelSpec, build_ff_model, dense_model, ground_data
from fidsus.operator_core import hermitian_eig, operator_norm, pseudoinverse, unitarity_defect
from fidsus.polynomials import ChebyshevPolynomial, chebyshev_basis, fit_inverse
from fidsus.qsvt import (
    apply_poly,
    chebyshev_blocks,
    ff_pseudoinverse_encoding,
    hamiltonian_encoding,
    pseudoinverse_encoding,
    sqrt_pseudoinverse_encoding,
)

X = kron_word("X")
Z = kron_word("Z")


def tfim(n, lam):
    H, HI = dense_model(ModelSpec("tfim", n, lam))
    return H, HI, hermitian_eig(H)


@pytest.mark.parametrize("backend", ["spectral", "cheb_lcu"])
def test_t1_and_t2(backend):
    be = encode_matrix(Z, 1.0)
    out = apply_poly(be, chebyshev_basis(1), backend)
    assert out.alpha == 1.0
    assert_allclose(out.block(), Z, atol=1e-12)
    assert_allclose(apply_poly(be, chebyshev_basis(2), backend).block(), np.eye(2), atol=1e-12)


def test_t1_rescaled_block():
    A = np.diag([0.5, -1.5])
    be = encode_matrix(A, 2.0)
    assert_allclose(apply_poly(be, chebyshev_basis(1)).block(), A / 2, atol=1e-12)


def test_output_is_unitary_with_extra_ancilla():
    be = encode_matrix(X, 1.0)
    out = apply_poly(be, chebyshev_basis(3))
    assert out.m == be.m + 1
    assert unitarity_defect(out.unitary) < 1e-12
    mixed = apply_poly(be, ChebyshevPolynomial([0.2, 0.3, 0.4]))
    assert mixed.m == be.m + 2


def test_walk_powers_are_chebyshev(rng):
    H, _, sd = tfim(2, 0.9)
    be = hamiltonian_encoding(H, sd.e0)
    B = be.block()
    blocks = chebyshev_blocks(be, 6)
    for k, blk in enumerate(blocks):
        c = np.zeros(k + 1)
        c[k] = 1.0
        w, V = np.linalg.eigh(B)
        want = (V * np.polynomial.chebyshev.chebval(w, c)) @ V.conj().T
        assert_allclose(blk, want, atol=1e-10)


def test_backends_agree_on_tfim():
    H, _, sd = tfim(3, 0.7)
    be = hamiltonian_encoding(H, sd.e0)
    p = fit_inverse(sd.gap / be.alpha, 0.05)
    # trim to degree 15 and rescale so |p| <= 1 still holds
    c = p.coeffs.copy()
    c[16:] = 0.0
    q = ChebyshevPolynomial(c, "odd")
    q = ChebyshevPolynomial(q.coeffs / max(1.0, q.max_abs()), "odd")
    assert q.degree == 15
    a = apply_poly(be, q, "spectral")
    b = apply_poly(be, q, "cheb_lcu")
    assert np.max(np.abs(a.block() - b.block())) <= 1e-8
    assert b.meta["lcu_alpha"] == pytest.approx(np.sum(np.abs(q.coeffs)))


def test_backends_agree_non_hermitian_unitary(rng):
    # a Hermitian block inside a non-Hermitian dilation goes through the augmentation
    A = np.diag([0.3, -0.6])
    be = encode_matrix(A, 1.0)
    be.unitary = be.unitary @ np.kron(np.eye(2), np.eye(2))
    U = be.unitary.copy()
    U[2:, :] *= 1j
    be.unitary = U
    q = ChebyshevPolynomial([0.0, 0.5, 0.0, 0.25], "odd")
    assert_allclose(apply_poly(be, q, "cheb_lcu").block(), apply_poly(be, q).block(), atol=1e-10)


def test_query_counts():
    H, _, sd = tfim(2, 0.8)
    be = hamiltonian_encoding(H, sd.e0)
    q = ChebyshevPolynomial([0.0, 0.5, 0.0, 0.0, 0.0, 0.25], "odd")
    out = apply_poly(be, q)
    assert out.meta["queries_per_use"] == 5
    out.apply(np.eye(out.unitary.shape[0])[:, 0])
    assert be.queries == 5
    lcu = apply_poly(be, q, "cheb_lcu")
    assert lcu.meta["queries_per_use"] == 1 + 5


def test_errors():
    be = encode_matrix(Z, 1.0)
    with pytest.raises(NormalizationError):
        apply_poly(be, ChebyshevPolynomial([0.0, 2.0]))
    with pytest.raises(ParameterError):
        apply_poly(be, chebyshev_basis(1), "remez")
    nh = encode_matrix(np.array([[0, 0.5], [0, 0]]), 1.0)
    with pytest.raises(BackendUnsupported):
        apply_poly(nh, chebyshev_basis(1), "cheb_lcu")
    with pytest.raises(ParameterError):
        pseudoinverse_encoding(be, 0.0, 1e-3)


def test_pinv_diag01():
    u_h = encode_matrix(np.diag([0.0, 1.0]), 1.0)
    out = pseudoinverse_encoding(u_h, 1.0, 1e-3)
    assert out.alpha == pytest.approx(4 / 3)
    assert operator_norm(out.encoded() - np.diag([0.0, 1.0])) <= 1e-3


def test_pinv_diag024():
    A = np.diag([0.0, 2.0, 4.0, 4.0])
    u_h = encode_matrix(A, 4.0)
    out = pseudoinverse_encoding(u_h, 2.0, 1e-3)
    assert out.alpha == 4 / (3 * 2.0)
    assert operator_norm(out.encoded() - np.diag([0, 0.5, 0.25, 0.25])) <= 1e-3


@pytest.mark.parametrize("backend", ["spectral", "cheb_lcu"])
def test_pinv_tfim4(backend):
    H, _, sd = tfim(4, 0.5)
    u_h = hamiltonian_encoding(H, sd.e0)
    eps = 1e-2
    out = pseudoinverse_encoding(u_h, sd.gap, eps, backend)
    R = pseudoinverse(H - sd.e0 * np.eye(16))
    assert verify(out, R) <= eps
    assert np.linalg.norm(out.encoded() @ sd.ground_state) <= eps
    assert out.meta["queries_per_use"] == out.meta["polynomial"].degree or backend == "cheb_lcu"


def test_sqrt_pinv():
    H, _, sd = tfim(3, 1.0)
    u_h = hamiltonian_encoding(H, sd.e0)
    out = sqrt_pseudoinverse_encoding(u_h, sd.gap, 1e-2)
    w, V = np.linalg.eigh(H - sd.e0 * np.eye(8))
    s = np.where(w > sd.gap / 2, 1 / np.sqrt(np.abs(w)), 0.0)
    assert operator_norm(out.encoded() - (V * s) @ V.conj().T) <= 1e-2


def _ff(n, variant):
    m = build_ff_model(n, variant)
    u_sa = ff_select_prepare(m)
    return m, u_sa, ff_shifted_encoding(u_sa)


def test_ff_catalog():
    m, u_sa, u_f = _ff(2, "pair")
    out = ff_pseudoinverse_encoding(u_f, 2, 1.0, 1e-3)
    assert out.m == u_f.m + 2
    assert out.alpha == pytest.approx(4 / 3)
    want = pseudoinverse(m.h_f)
    assert_allclose(np.sort(np.linalg.eigvalsh(want)), [0, 0.5, 1, 1], atol=1e-12)
    assert verify(out, want) <= 1e-3


def test_ff_single_projector():
    m, u_sa, u_f = _ff(1, "chain")
    out = ff_pseudoinverse_encoding(u_f, 1, 1.0, 1e-3)
    assert verify(out, m.projectors[0]) <= 1e-3


def test_ff_rejects_wrong_r():
    _, _, u_f = _ff(3, "chain")
    with pytest.raises(ParameterError):
        ff_pseudoinverse_encoding(u_f, 5, 1.0, 1e-3)


def test_ff_n6_fewer_queries():
    m, u_sa, u_f = _ff(6, "chain")
    sd, _ = ground_data(m.h_f)
    eps = 1e-2
    ff = ff_pseudoinverse_encoding(u_f, u_sa.meta["r_padded"], sd.gap, eps)
    assert verify(ff, pseudoinverse(m.h_f)) <= eps
    u_h = hamiltonian_encoding(m.h_f, sd.e0)
    gen_degree = fit_inverse(sd.gap / u_h.alpha, 0.75 * sd.gap * eps).degree
    assert ff.meta["queries_per_use"] < gen_degree


def test_imperfect_e0_declared():
    H, _, sd = tfim(2, 0.8)
    be = hamiltonian_encoding(H, sd.e0, delta_e0=1e-3)
    assert be.eps == 1e-3
    assert verify(be, H - sd.e0 * np.eye(4)) <= 1e-3 + 1e-12


def test_lcu_explicit_matches_contracted():
    from fidsus.qsvt import lcu_block

    H, _, sd = tfim(2, 0.6)
    be = hamiltonian_encoding(H, sd.e0)
    q = ChebyshevPolynomial([0.0, 0.4, 0.0, -0.3, 0.0, 0.2], "odd")
    a, l1a, qa = lcu_block(be, q, explicit=True)
    b, l1b, qb = lcu_block(be, q, explicit=False)
    assert_allclose(a, b, atol=1e-12)
    assert (l1a, qa) == (l1b, qb) == (pytest.approx(0.9), 9)
