"""Hamiltonian families, their driving terms, and exact ground-state data.

Pauli words are read left to right as qubit 0, 1, ..., n-1, with qubit 0 the
most significant bit of the computational-basis index (``np.kron`` order).

Catalog (open boundaries throughout):

* ``tfim``:  H = -sum Z_i Z_{i+1} - lam * sum X_i,  driving -sum X_i.
  Nondegenerate for every lam != 0; lam = 0 is a degenerate fixture.
* ``xxz``:   H = sum (X_i X_{i+1} + Y_i Y_{i+1} + lam * Z_i Z_{i+1}),
  driving sum Z_i Z_{i+1}.  Even n gives a unique singlet-like ground state.
* ``ff_projector_chain``: H = sum |1><1|_i + lam * (-sum X_i).  At lam = 0
  this is frustration-free with unique ground state |0...0> and gap 1.
* ``explicit``: user-supplied Hamiltonian and driving.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    ConfigError,
    DegenerateGroundState,
    NotFrustrationFree,
    ShapeError,
)
from .operator_core import SpectralData, hermitian_eig

MAX_QUBITS = 10
FAMILIES = ("tfim", "xxz", "ff_projector_chain", "explicit")


@dataclass(frozen=True)
class PauliSum:
    """Real-weighted sum of Pauli words; Hermitian by construction."""

    n_qubits: int
    terms: tuple[tuple[float, str], ...] = ()

    def __post_init__(self):
        terms = []
        for c, s in self.terms:
            c = float(c)
            s = str(s).upper()
            if len(s) != self.n_qubits:
                raise ShapeError(f"Pauli word {s!r} has length {len(s)}, expected {self.n_qubits}")
            if set(s) - set("IXYZ"):
                raise ValueError(f"Pauli word {s!r} has letters outside IXYZ")
            if not np.isfinite(c):
                raise ValueError("non-finite coefficient")
            terms.append((c, s))
        object.__setattr__(self, "terms", tuple(terms))

    @classmethod
    def from_ops(cls, n_qubits, ops: Sequence[tuple[float, dict[int, str]]]):
        """Build from ``(coeff, {qubit: letter})`` pairs."""
        terms = []
        for c, where in ops:
            word = ["I"] * n_qubits
            for q, letter in where.items():
                word[q] = letter
            terms.append((c, "".join(word)))
        return cls(n_qubits, tuple(terms))

    def __add__(self, other: "PauliSum") -> "PauliSum":
        if other.n_qubits != self.n_qubits:
            raise ShapeError("qubit count mismatch")
        return PauliSum(self.n_qubits, self.terms + other.terms)

    def __mul__(self, k: float) -> "PauliSum":
        return PauliSum(self.n_qubits, tuple((k * c, s) for c, s in self.terms))

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def simplify(self, atol=0.0) -> "PauliSum":
        acc: dict[str, float] = {}
        for c, s in self.terms:
            acc[s] = acc.get(s, 0.0) + c
        return PauliSum(self.n_qubits, tuple((c, s) for s, c in acc.items() if abs(c) > atol))

    def one_norm(self) -> float:
        return float(sum(abs(c) for c, _ in self.terms))

    def to_dict(self):
        return {"n_qubits": self.n_qubits, "terms": [[c, s] for c, s in self.terms]}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["n_qubits"]), tuple((float(c), str(s)) for c, s in d["terms"]))


def _word_action(word: str):
    n = len(word)
    xmask = zmask = 0
    n_y = 0
    for q, letter in enumerate(word):
        bit = 1 << (n - 1 - q)
        if letter in "XY":
            xmask |= bit
        if letter in "ZY":
            zmask |= bit
        n_y += letter == "Y"
    return xmask, zmask, n_y


def _popcount_parity(a: np.ndarray) -> np.ndarray:
    a = a.copy()
    parity = np.zeros_like(a)
    while np.any(a):
        parity ^= a & 1
        a >>= 1
    return parity


def pauli_to_dense(p: PauliSum) -> np.ndarray:
    """Dense matrix of a Pauli sum.

    Each word acts as ``i^{#Y} X^{xmask} Z^{zmask}``: a signed permutation,
    so no Kronecker products are formed.
    """
    n = p.n_qubits
    if n > MAX_QUBITS:
        raise ShapeError(f"{n} qubits exceeds the dense cap of {MAX_QUBITS}")
    dim = 1 << n
    cols = np.arange(dim)
    out = np.zeros((dim, dim), dtype=complex)
    for c, word in p.terms:
        xmask, zmask, n_y = _word_action(word)
        sign = 1.0 - 2.0 * _popcount_parity(cols & zmask)
        # P|b> = i^{nY} (-1)^{b.z} |b ^ x>
        out[cols ^ xmask, cols] += c * (1j ** n_y) * sign
    return out


def tfim_terms(n: int) -> tuple[PauliSum, PauliSum]:
    """(ZZ part, X part) of the open transverse-field Ising chain."""
    zz = PauliSum.from_ops(n, [(-1.0, {i: "Z", i + 1: "Z"}) for i in range(n - 1)])
    x = PauliSum.from_ops(n, [(-1.0, {i: "X"}) for i in range(n)])
    return zz, x


@dataclass(frozen=True)
class ModelSpec:
    family: str
    n_qubits: int
    lam: float = 0.0
    driving: PauliSum | None = None
    hamiltonian: PauliSum | None = None  # explicit family only

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unsupported model family {self.family!r}; choose from {FAMILIES}")
        if not 1 <= int(self.n_qubits) <= MAX_QUBITS:
            raise ConfigError(f"n_qubits must lie in [1, {MAX_QUBITS}], got {self.n_qubits}")
        if not np.isfinite(self.lam):
            raise ConfigError("lam must be finite")
        if self.family in ("tfim", "xxz") and self.n_qubits < 2:
            raise ConfigError(f"{self.family} needs at least 2 qubits")
        if self.family == "explicit" and (self.hamiltonian is None or self.driving is None):
            raise ConfigError("explicit family needs both 'hamiltonian' and 'driving'")
        for p in (self.driving, self.hamiltonian):
            if p is not None and p.n_qubits != self.n_qubits:
                raise ConfigError("Pauli sum qubit count differs from n_qubits")

    def at(self, lam: float) -> "ModelSpec":
        return ModelSpec(self.family, self.n_qubits, lam, self.driving, self.hamiltonian)

    def to_dict(self):
        d = {"family": self.family, "n_qubits": self.n_qubits, "lam": self.lam}
        if self.driving is not None:
            d["driving"] = self.driving.to_dict()
        if self.hamiltonian is not None:
            d["hamiltonian"] = self.hamiltonian.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        allowed = {"family", "n_qubits", "lam", "driving", "hamiltonian"}
        unknown = set(d) - allowed
        if unknown:
            raise ConfigError(f"unknown model keys: {sorted(unknown)}")
        try:
            return cls(
                family=d["family"],
                n_qubits=int(d["n_qubits"]),
                lam=float(d.get("lam", 0.0)),
                driving=PauliSum.from_dict(d["driving"]) if d.get("driving") else None,
                hamiltonian=PauliSum.from_dict(d["hamiltonian"]) if d.get("hamiltonian") else None,
            )
        except KeyError as exc:
            raise ConfigError(f"model config missing key {exc}") from None


def build_model(spec: ModelSpec) -> tuple[PauliSum, PauliSum]:
    """Return ``(H(lam), H_I)`` as Pauli sums."""
    n, lam = spec.n_qubits, spec.lam
    if spec.family == "tfim":
        zz, x = tfim_terms(n)
        h, drive = zz + lam * x, x
    elif spec.family == "xxz":
        hop = PauliSum.from_ops(
            n,
            [(1.0, {i: a, i + 1: a}) for i in range(n - 1) for a in "XY"],
        )
        zz = PauliSum.from_ops(n, [(1.0, {i: "Z", i + 1: "Z"}) for i in range(n - 1)])
        h, drive = hop + lam * zz, zz
    elif spec.family == "ff_projector_chain":
        # |1><1|_i = (I - Z_i) / 2
        proj = PauliSum.from_ops(
            n, [c for i in range(n) for c in ((0.5, {}), (-0.5, {i: "Z"}))]
        )
        x = PauliSum.from_ops(n, [(-1.0, {i: "X"}) for i in range(n)])
        h, drive = proj + lam * x, x
    else:
        return spec.hamiltonian, spec.driving
    if spec.driving is not None:
        drive = spec.driving
    return h.simplify(), drive.simplify()


def dense_model(spec: ModelSpec) -> tuple[np.ndarray, np.ndarray]:
    h, drive = build_model(spec)
    return pauli_to_dense(h), pauli_to_dense(drive)


def ground_data(H) -> tuple[SpectralData, np.ndarray]:
    """Spectral data and ground state; a degenerate ground level raises."""
    sd = hermitian_eig(H)
    if sd.degenerate:
        raise DegenerateGroundState(
            f"ground level is degenerate (E1 - E0 = {sd.gap:.3e}); "
            "a nondegenerate ground state is required"
        )
    return sd, sd.ground_state


# ----------------------------------------------------------------------------
# frustration-free models


def _site_projector(n: int, site: int, which: int = 1) -> np.ndarray:
    p1 = np.zeros((2, 2), dtype=complex)
    p1[which, which] = 1.0
    left = np.eye(1 << site)
    right = np.eye(1 << (n - site - 1))
    return np.kron(np.kron(left, p1), right)


def _bond_singlet(n: int, i: int) -> np.ndarray:
    s = np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2)
    p = np.outer(s, s.conj())
    return np.kron(np.kron(np.eye(1 << i), p), np.eye(1 << (n - i - 2)))


@dataclass
class FFModel:
    """Frustration-free Hamiltonian ``h_f = sum_j projectors[j]``."""

    projectors: list[np.ndarray]
    n_qubits: int
    h_f: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.projectors:
            raise ValueError("need at least one projector")
        dim = 1 << self.n_qubits
        ps = []
        for j, p in enumerate(self.projectors):
            p = np.asarray(p, dtype=complex)
            if p.shape != (dim, dim):
                raise ShapeError(f"projector {j} has shape {p.shape}, expected {(dim, dim)}")
            if np.max(np.abs(p @ p - p)) > 1e-10 or np.max(np.abs(p - p.conj().T)) > 1e-10:
                raise ValueError(f"operator {j} is not an orthogonal projector")
            ps.append(p)
        self.projectors = ps
        self.h_f = sum(ps)
        e0 = float(np.linalg.eigvalsh(self.h_f)[0])
        if e0 > 1e-9:
            raise NotFrustrationFree(
                f"projectors share no common kernel (ground energy {e0:.3e} > 0)"
            )

    @property
    def r(self) -> int:
        return len(self.projectors)


def build_ff_model(n_qubits: int, variant="chain") -> FFModel:
    """Frustration-free catalog.

    ``chain``: one projector |1><1| per site (r = n, gap 1, ground |0...0>).
    ``pair``: the n = 2 chain.  ``heisenberg_pinned``: singlet projectors on
    every bond plus |1><1| on site 0, whose only zero mode is |0...0>.
    ``complementary``: |0><0| and |1><1| on one qubit, which has no common
    kernel and raises.  A list of matrices is taken as explicit projectors.
    """
    n = int(n_qubits)
    if not isinstance(variant, str):
        return FFModel(list(variant), n)
    if variant == "pair":
        if n != 2:
            raise ConfigError("the 'pair' variant is defined for 2 qubits")
        variant = "chain"
    if variant == "chain":
        projs = [_site_projector(n, i) for i in range(n)]
    elif variant == "heisenberg_pinned":
        if n < 2:
            raise ConfigError("heisenberg_pinned needs at least 2 qubits")
        projs = [_site_projector(n, 0)] + [_bond_singlet(n, i) for i in range(n - 1)]
    elif variant == "complementary":
        if n != 1:
            raise ConfigError("the 'complementary' variant is defined for 1 qubit")
        projs = [_site_projector(1, 0, 0), _site_projector(1, 0, 1)]
    else:
        raise ConfigError(f"unknown frustration-free variant {variant!r}")
    return FFModel(projs, n)


def ff_model_from_spec(spec: ModelSpec) -> FFModel:
    if spec.family != "ff_projector_chain" or spec.lam != 0.0:
        raise ConfigError("frustration-free mode needs family ff_projector_chain at lam = 0")
    return build_ff_model(spec.n_qubits, "chain")


def check_ff_ground(model: FFModel, psi0) -> float:
    """Largest ``<psi0|P_j|psi0>``; zero for a frustration-free ground state."""
    return max(float(np.real(np.vdot(psi0, p @ psi0))) for p in model.projectors)
