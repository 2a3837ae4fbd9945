"""Polynomial transforms of block-encoded Hermitian matrices.

Two backends produce the same encoded block:

``spectral``  evaluates ``p`` in the eigenbasis of the extracted block and
              re-dilates the result.  This is the reference semantics.
``cheb_lcu``  builds the qubitization walk operator ``W = (2 Pi - I) U``,
              reads ``T_k(A/alpha)`` off the ancilla-zero block of ``W^k`` and
              combines the powers with a PREPARE/SELECT linear combination.

Outputs carry ``alpha = 1``.  The LCU itself block-encodes
``p(A/alpha) / ||c||_1``; that factor is recorded as ``meta['lcu_alpha']``
and the returned unitary is the dilation of the rescaled block, so both
backends hand the same object downstream.
"""
from __future__ import annotations

import numpy as np

from .block_encoding import BlockEncoding, encode_matrix
from .errors import BackendUnsupported, NormalizationError, ParameterError
from .models import ground_data
from .operator_core import (
    hermiticity_defect,
    operator_norm,
    state_prep_unitary,
    unitary_dilation,
)
from .polynomials import (
    ChebyshevPolynomial,
    eval_matrix,
    ff_inverse_poly,
    fit_inverse,
    sqrt_inverse_poly,
)

BACKENDS = ("spectral", "cheb_lcu")
BOUND_TOL = 1e-9
HERMITIAN_BLOCK_TOL = 1e-10
LCU_EXPLICIT_DIM = 2048


def _check_bounded(p: ChebyshevPolynomial) -> None:
    mx = p.max_abs()
    if mx > 1.0 + BOUND_TOL:
        raise NormalizationError(f"polynomial reaches |p| = {mx:.12g} > 1 on [-1, 1]")


def _extra_ancillas(p: ChebyshevPolynomial) -> int:
    # a definite-parity polynomial needs one extra qubit; a mixed-parity one is
    # the sum of its even and odd parts, which costs one more
    return 1 if p.parity in ("odd", "even") else 2


def _hermitian_unitary(U: np.ndarray) -> tuple[np.ndarray, bool]:
    """``U`` itself when Hermitian, else ``(H x I) X-controlled(U, U^dag) (H x I)``.

    The second form is a Hermitian unitary with one extra (most significant)
    ancilla whose ancilla-zero block is ``(B + B^dag)/2 = B`` for Hermitian
    ``B``.  Each application costs one query to ``U`` or ``U^dag``.
    """
    if hermiticity_defect(U) <= HERMITIAN_BLOCK_TOL:
        return U, False
    d = U.shape[0]
    V = np.zeros((2 * d, 2 * d), dtype=complex)
    V[d:, :d] = U
    V[:d, d:] = U.conj().T
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    Hd = np.kron(h, np.eye(d))
    return Hd @ V @ Hd, True


def walk_operator(be: BlockEncoding) -> tuple[np.ndarray, int]:
    """Qubitization walk ``W = (2 Pi - I) V`` and the number of ancillas in ``Pi``.

    ``Pi`` projects every stored ancilla onto ``|0>``.
    """
    V, augmented = _hermitian_unitary(be.unitary)
    m = be.m_phys + int(augmented)
    refl = -np.ones(V.shape[0])
    refl[: be.dim] = 1.0
    return refl[:, None] * V, m


def chebyshev_blocks(be: BlockEncoding, degree: int) -> list[np.ndarray]:
    """``[T_0(B), ..., T_degree(B)]`` read off successive walk powers."""
    W, _ = walk_operator(be)
    d = be.dim
    out = []
    # only the first d columns of W^k are needed
    cols = np.eye(W.shape[0], d, dtype=complex)
    for _ in range(degree + 1):
        out.append(cols[:d].copy())
        cols = W @ cols
    return out


def lcu_block(be: BlockEncoding, p: ChebyshevPolynomial,
              explicit: bool | None = None) -> tuple[np.ndarray, float, int]:
    """Ancilla-zero block of PREPARE^dag SELECT PREPARE over walk powers.

    Returns ``(block, l1, queries)`` with ``block = p(B) / l1``.  Small
    instances build the full SELECT matrix; larger ones contract the
    PREPARE column against the walk powers directly, which gives the same
    block without the ``(#terms * dim)``-sized matrices.
    """
    c = np.asarray(p.coeffs[: p.degree + 1], dtype=float)
    ks = np.flatnonzero(c)
    if ks.size == 0:
        return np.zeros((be.dim, be.dim), dtype=complex), 1.0, 0
    l1 = float(np.sum(np.abs(c[ks])))
    W, _ = walk_operator(be)
    D, d = W.shape[0], be.dim
    nsel = 1 << max(0, int(ks.size - 1).bit_length())
    amp = np.zeros(nsel)
    amp[: ks.size] = np.sqrt(np.abs(c[ks]) / l1)
    prep1 = state_prep_unitary(amp)
    signs = np.sign(c[ks])
    queries = int(np.sum(ks))
    if explicit is None:
        explicit = nsel * D <= LCU_EXPLICIT_DIM
    if explicit:
        prep = np.kron(prep1, np.eye(D))
        sel = np.zeros((nsel * D, nsel * D), dtype=complex)
        Wk = np.eye(D, dtype=complex)
        k_prev = 0
        for i, k in enumerate(ks):
            Wk = np.linalg.matrix_power(W, int(k - k_prev)) @ Wk
            k_prev = k
            sel[i * D:(i + 1) * D, i * D:(i + 1) * D] = signs[i] * Wk
        for i in range(ks.size, nsel):
            sel[i * D:(i + 1) * D, i * D:(i + 1) * D] = np.eye(D)
        full = prep.conj().T @ sel @ prep
        return full[:d, :d], l1, queries
    # <0|PREPARE^dag (|i><i| x s_i W^k_i) PREPARE|0> = |a_i|^2 s_i W^k_i
    w = np.abs(prep1[: ks.size, 0]) ** 2 * signs
    out = np.zeros((d, d), dtype=complex)
    cols = np.eye(D, d, dtype=complex)
    k_prev = 0
    for i, k in enumerate(ks):
        for _ in range(int(k - k_prev)):
            cols = W @ cols
        k_prev = k
        out += w[i] * cols[:d]
    return out, l1, queries


def apply_poly(be: BlockEncoding, p: ChebyshevPolynomial, backend: str = "spectral",
               tag: str | None = None) -> BlockEncoding:
    """``(1, m + 1, 0)`` encoding of ``p(A/alpha)`` (``m + 2`` for mixed parity).

    One application of the result costs ``degree`` queries to ``be`` with the
    spectral backend and ``sum_k k`` over nonzero ``c_k`` with ``cheb_lcu``.
    """
    if backend not in BACKENDS:
        raise ParameterError(f"unknown backend {backend!r}; choose from {BACKENDS}")
    _check_bounded(p)
    B = be.block()
    if backend == "spectral":
        P = eval_matrix(p, B)
        queries = p.degree
        meta = {}
    else:
        if hermiticity_defect(B) > HERMITIAN_BLOCK_TOL:
            raise BackendUnsupported("cheb_lcu needs a Hermitian encoded block")
        blk, l1, queries = lcu_block(be, p)
        P = l1 * blk
        meta = {"lcu_alpha": l1}
    nrm = operator_norm(P)
    if nrm > 1.0:
        # floating-point overshoot only; the polynomial is bounded by 1
        P = P / nrm
    extra = _extra_ancillas(p)
    return BlockEncoding(
        unitary_dilation(P),
        1.0,
        be.m + extra,
        be.n,
        0.0,
        tag=tag,
        components=((be, queries),),
        meta={"backend": backend, "degree": p.degree, "queries_per_use": queries,
              "polynomial": p, **meta},
        idle=be.m + extra - 1,
    )


def _rescaled(be: BlockEncoding, alpha: float, eps: float, **meta) -> BlockEncoding:
    return BlockEncoding(
        be.unitary, alpha, be.m, be.n, eps, tag=be.tag,
        components=be.components, meta={**be.meta, **meta}, idle=be.idle,
    )


def hamiltonian_encoding(H, e0: float | None = None, delta_e0: float = 0.0,
                         tag: str = "U_H") -> BlockEncoding:
    """Encoding of ``H - E0`` with ``alpha = ||H - E0||``.

    ``E0`` defaults to the exact ground energy.  ``delta_e0`` shifts the value
    actually subtracted, for studying an imperfectly known ground energy; the
    encoding then carries ``eps = |delta_e0|`` against the true ``H - E0``.
    """
    H = np.asarray(H, dtype=complex)
    if e0 is None:
        e0 = ground_data(H)[0].e0
    shifted = H - (e0 + delta_e0) * np.eye(H.shape[0])
    be = encode_matrix(shifted, tag=tag)
    be.eps = abs(float(delta_e0))
    be.meta.update({"e0": float(e0), "delta_e0": float(delta_e0)})
    return be


def pseudoinverse_normalization(gap: float) -> float:
    return 4.0 / (3.0 * gap)


def pseudoinverse_encoding(u_h: BlockEncoding, gap: float, eps: float,
                           backend: str = "spectral") -> BlockEncoding:
    """``(4/(3 gap), m + 1, eps)`` encoding of ``(H - E0)^+``.

    With ``delta = gap/alpha_H`` the polynomial approximates ``(3/4) delta/x``
    to ``(3/4) gap eps``, so ``alpha' p(x)`` is within ``eps`` of ``1/E`` for
    every ``E >= gap``; odd parity sends the kernel to exactly zero.  The
    declared ``eps`` covers the polynomial error only; any input error
    ``u_h.eps`` is kept in ``meta['input_eps']``.
    """
    if not gap > 0:
        raise ParameterError(f"gap must be positive, got {gap}")
    if not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    delta = gap / u_h.alpha
    if delta > 1.0 + 1e-12:
        raise ParameterError(f"gap {gap:.6g} exceeds the normalization {u_h.alpha:.6g}")
    alpha = pseudoinverse_normalization(gap)
    p = fit_inverse(min(delta, 1.0), min(0.75 * gap * eps, 1.0))
    out = apply_poly(u_h, p, backend)
    return _rescaled(out, alpha, float(eps), gap=float(gap), input_eps=u_h.eps)


def sqrt_pseudoinverse_encoding(u_h: BlockEncoding, gap: float, eps: float,
                                backend: str = "spectral") -> BlockEncoding:
    """``(4/(3 sqrt(gap)), m + 1, eps)`` encoding of ``((H - E0)^+)^{1/2}``."""
    if not gap > 0:
        raise ParameterError(f"gap must be positive, got {gap}")
    delta = gap / u_h.alpha
    if delta > 1.0 + 1e-12:
        raise ParameterError(f"gap {gap:.6g} exceeds the normalization {u_h.alpha:.6g}")
    alpha = 4.0 / (3.0 * np.sqrt(gap))
    p = sqrt_inverse_poly(min(delta, 1.0), min(eps / alpha, 1.0))
    out = apply_poly(u_h, p, backend)
    return _rescaled(out, float(alpha), float(eps), gap=float(gap), input_eps=u_h.eps)


def ff_pseudoinverse_encoding(u_f: BlockEncoding, r: int, gap: float, eps: float,
                              backend: str = "spectral") -> BlockEncoding:
    """``(K, m + 2, eps)`` encoding of ``H_F^+`` from the block ``I - 2 H_F / r``.

    ``r`` must be the value in the shifted block, which after padding is
    ``u_f.meta['r_padded']``; passing the unpadded count is accepted and
    mapped to the padded one.  ``K = 4/(3 gap)``.
    """
    r_pad = u_f.meta.get("r_padded", r)
    if r not in (r_pad, u_f.meta.get("r", r_pad)):
        raise ParameterError(f"r = {r} does not match the shifted encoding (r_padded = {r_pad})")
    if not 0 < gap <= r_pad:
        raise ParameterError(f"gap must lie in (0, r], got {gap}")
    q = ff_inverse_poly(int(r_pad), float(gap), min(float(eps), 0.5))
    K = q.domain_note["K"]
    out = apply_poly(u_f, q, backend)
    return _rescaled(out, float(K), float(eps), gap=float(gap), r_padded=int(r_pad))
