"""Block encodings as explicit unitaries, their products, and FF constructions.

Register layout: ancilla registers are listed most significant first and the
system register is last, so ``(<0^m| x I) U (|0^m> x I)`` is the top-left
``2**n x 2**n`` corner of ``U``.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import NormalizationError, ShapeError
from .models import FFModel
from .operator_core import (
    as_operator,
    operator_norm,
    unitarity_defect,
    unitary_dilation,
)

UNITARITY_TOL = 1e-10
# unitarity is re-checked on construction only up to this dimension
CHECK_DIM_LIMIT = 2048


class QueryCounter:
    """Thread-safe tally of applications of a unitary (or its inverse)."""

    def __init__(self):
        self._n = 0
        self._lock = threading.Lock()

    def add(self, k: int = 1) -> None:
        with self._lock:
            self._n += int(k)

    @property
    def value(self) -> int:
        return self._n

    def reset(self) -> None:
        with self._lock:
            self._n = 0


@dataclass(eq=False)
class BlockEncoding:
    """An ``(alpha, m, eps)`` block encoding of an ``n``-qubit operator.

    ``components`` lists ``(child, k)`` pairs: one application of this
    encoding applies ``child`` (or its inverse) ``k`` times.  Charging an
    encoding propagates down to every child, so tagged leaves (``U_H``,
    ``U_I``, ``U_F``, ``U_Psi``) accumulate honest query totals.

    ``idle`` of the ``m`` declared ancillas are ones the unitary provably acts
    on as the identity; they are not stored, so ``unitary`` spans
    ``m - idle + n`` qubits.  Ancillas start and end in ``|0>``, so dropping
    them leaves the block and every ancilla-zero amplitude unchanged.
    """

    unitary: np.ndarray
    alpha: float
    m: int
    n: int
    eps: float = 0.0
    tag: str | None = None
    components: tuple = ()
    meta: dict = field(default_factory=dict)
    idle: int = 0
    counter: QueryCounter = field(default_factory=QueryCounter, repr=False)

    def __post_init__(self):
        U = np.asarray(self.unitary, dtype=complex)
        if not 0 <= self.idle <= self.m:
            raise ShapeError(f"idle ancilla count {self.idle} outside [0, m={self.m}]")
        if U.shape != (1 << (self.m_phys + self.n),) * 2:
            raise ShapeError(
                f"unitary shape {U.shape} does not match {self.m_phys} stored ancillas "
                f"+ n={self.n} qubits"
            )
        if not self.alpha > 0:
            raise NormalizationError("alpha must be positive")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if U.shape[0] <= CHECK_DIM_LIMIT:
            defect = unitarity_defect(U)
            if defect > UNITARITY_TOL:
                raise ValueError(f"matrix is not unitary (defect {defect:.2e})")
        self.unitary = U

    @property
    def dim(self) -> int:
        return 1 << self.n

    @property
    def m_phys(self) -> int:
        """Ancillas actually stored in ``unitary``."""
        return self.m - self.idle

    def block(self) -> np.ndarray:
        d = self.dim
        return self.unitary[:d, :d]

    def encoded(self) -> np.ndarray:
        """``alpha`` times the top-left block."""
        return self.alpha * self.block()

    @property
    def queries(self) -> int:
        return self.counter.value

    def charge(self, times: int = 1) -> None:
        self.counter.add(times)
        for child, k in self.components:
            child.charge(times * k)

    def apply(self, state) -> np.ndarray:
        self.charge(1)
        return self.unitary @ np.asarray(state, dtype=complex)

    def apply_inverse(self, state) -> np.ndarray:
        self.charge(1)
        return self.unitary.conj().T @ np.asarray(state, dtype=complex)

    def cost(self) -> dict[str, int]:
        """Queries to each tagged leaf per application of this encoding."""
        if self.tag is not None:
            return {self.tag: 1}
        return self._child_cost()

    def _child_cost(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for child, k in self.components:
            for t, c in child.cost().items():
                out[t] = out.get(t, 0) + k * c
        return out

    def leaves(self) -> dict[str, "BlockEncoding"]:
        """Tagged encodings reachable from here (self included)."""
        found: dict[str, BlockEncoding] = {}
        stack = [self]
        while stack:
            be = stack.pop()
            if be.tag is not None and be.tag not in found:
                found[be.tag] = be
            stack.extend(c for c, _ in be.components)
        return found


def lift(U, dims, which) -> np.ndarray:
    """Embed ``U`` acting on ``(register which, system)`` into the register list.

    ``dims`` gives the dimension of each register, system last.  ``U`` acts as
    identity on every other register.
    """
    dims = [int(d) for d in dims]
    k = len(dims)
    sys = k - 1
    others = [i for i in range(sys) if i != which]
    order = others + [which, sys]
    rest = int(np.prod([dims[i] for i in others])) if others else 1
    big = np.kron(np.eye(rest), U)
    t = big.reshape([dims[i] for i in order] * 2)
    perm = list(np.argsort(order))
    t = t.transpose(perm + [k + p for p in perm])
    D = int(np.prod(dims))
    return t.reshape(D, D)


def encode_matrix(A, alpha: float | None = None, tag: str | None = None) -> BlockEncoding:
    """Exact ``(alpha, 1, 0)`` encoding of ``A`` via the unitary dilation of ``A/alpha``."""
    A = as_operator(A)
    nrm = operator_norm(A)
    if alpha is None:
        alpha = nrm if nrm > 0 else 1.0
    if alpha <= 0 or nrm > alpha * (1 + 1e-12):
        raise NormalizationError(f"alpha = {alpha:.6g} is below ||A|| = {nrm:.6g}")
    U = unitary_dilation(A / alpha)
    n = A.shape[0].bit_length() - 1
    return BlockEncoding(U, float(alpha), 1, n, 0.0, tag=tag)


def unitary_as_encoding(U, tag: str | None = None) -> BlockEncoding:
    """A unitary is trivially a ``(1, 0, 0)`` encoding of itself."""
    U = as_operator(U)
    n = U.shape[0].bit_length() - 1
    return BlockEncoding(U, 1.0, 0, n, 0.0, tag=tag)


def product(u_a: BlockEncoding, u_b: BlockEncoding) -> BlockEncoding:
    """Encoding of ``A B`` from encodings of ``A`` and ``B``.

    Realized as ``(I_b x U_A)(I_a x U_B)`` on registers ``[a][b][system]``.
    The result is an ``(alpha_A alpha_B, a + b, alpha_A eps_B + alpha_B eps_A)``
    encoding; the error bound is the worst case and never tightened.
    """
    if u_a.n != u_b.n:
        raise ShapeError(f"system sizes differ: {u_a.n} vs {u_b.n} qubits")
    dims = [1 << u_a.m_phys, 1 << u_b.m_phys, u_a.dim]
    U = lift(u_a.unitary, dims, 0) @ lift(u_b.unitary, dims, 1)
    eps = u_a.alpha * u_b.eps + u_b.alpha * u_a.eps
    return BlockEncoding(
        U,
        u_a.alpha * u_b.alpha,
        u_a.m + u_b.m,
        u_a.n,
        eps,
        components=((u_a, 1), (u_b, 1)),
        idle=u_a.idle + u_b.idle,
    )


def verify(be: BlockEncoding, target) -> float:
    """Operator-norm discrepancy ``||target - alpha * block||``."""
    target = np.asarray(target, dtype=complex)
    if target.shape != (be.dim, be.dim):
        raise ShapeError(f"target shape {target.shape} does not match block {(be.dim, be.dim)}")
    return operator_norm(target - be.encoded())


def passes(be: BlockEncoding, target, slack: float = 1e-9) -> bool:
    return verify(be, target) <= be.eps + slack


# ----------------------------------------------------------------------------
# frustration-free constructions


def ff_select_prepare(model: FFModel) -> BlockEncoding:
    """Encoding of the spectral-amplification operator ``sum_j |j>_b (x) P_j``.

    Registers ``[a][b][system]``: ``a`` is the single dilation qubit shared by
    all projector encodings, ``b`` indexes the projectors.  ``r`` is padded to
    a power of two with zero projectors and ``alpha = sqrt(r_padded)``.  The
    returned encoding treats ``b`` as part of its system; restricting the
    block to ``b = 0`` inputs gives ``H_SA / alpha``.
    """
    N = 1 << model.n_qubits
    r_pad = 1 << max(0, (model.r - 1).bit_length())
    nb = r_pad.bit_length() - 1
    zero = np.zeros((N, N))
    proj_encs = [encode_matrix(p, 1.0, tag=f"Pi_{j}") for j, p in enumerate(model.projectors)]
    units = [be.unitary for be in proj_encs]
    units += [unitary_dilation(zero)] * (r_pad - model.r)

    T = np.zeros((2, r_pad, N, 2, r_pad, N), dtype=complex)
    for j, u in enumerate(units):
        T[:, j, :, :, j, :] = u.reshape(2, N, 2, N)
    D = 2 * r_pad * N
    select = T.reshape(D, D)
    hb = np.ones((1, 1))
    for _ in range(nb):
        hb = np.kron(hb, np.array([[1, 1], [1, -1]]) / np.sqrt(2))
    prepare = np.kron(np.eye(2), np.kron(hb, np.eye(N)))
    U = select @ prepare
    return BlockEncoding(
        U,
        math.sqrt(r_pad),
        1,
        nb + model.n_qubits,
        0.0,
        components=tuple((be, 1) for be in proj_encs),
        meta={"r": model.r, "r_padded": r_pad, "b_qubits": nb, "n_system": model.n_qubits},
    )


def h_sa_matrix(model: FFModel) -> np.ndarray:
    """``sum_j |j>_b (x) P_j`` as a ``(r_pad N) x N`` matrix."""
    N = 1 << model.n_qubits
    r_pad = 1 << max(0, (model.r - 1).bit_length())
    out = np.zeros((r_pad * N, N), dtype=complex)
    for j, p in enumerate(model.projectors):
        out[j * N:(j + 1) * N] = p
    return out


def ff_shifted_encoding(u_sa: BlockEncoding, tag: str | None = "U_F") -> BlockEncoding:
    """``(1, a + b, 0)`` encoding of ``I - 2 H_F / r`` as ``U_SA^dag (REF_a x I) U_SA``.

    The ground state of ``H_F`` sits at block eigenvalue exactly 1.
    """
    nb = u_sa.meta["b_qubits"]
    n_sys = u_sa.meta["n_system"]
    half = u_sa.unitary.shape[0] // 2
    ref = np.ones(2 * half)
    ref[:half] = -1.0  # I - 2|0><0|_a
    U = u_sa.unitary.conj().T @ (ref[:, None] * u_sa.unitary)
    return BlockEncoding(
        U,
        1.0,
        1 + nb,
        n_sys,
        0.0,
        tag=tag,
        components=((u_sa, 2),),
        meta={"r": u_sa.meta["r"], "r_padded": u_sa.meta["r_padded"]},
    )
