"""Fidelity susceptibility: exact oracles and the block-encoding estimator.

The estimator writes ``chi_F = ||G |psi0>||^2`` with ``G = (H - E0)^+ H_I``,
block-encodes ``G / alpha_Q`` with ``alpha_Q = 4 alpha_I / (3 gap)``, and
estimates ``p = ||(<0| x I) U_Q |0>|psi0>||^2`` by amplitude estimation, so
``chi_hat = alpha_Q^2 p_hat``.  The error budget gives half of ``eps`` to the
encoding (``eps1 = eps / (4 alpha_Q)``) and half to the readout
(``eps2 = eps / (2 alpha_Q^2)``).

Estimation is split into a ``prepare`` step that builds every encoding and
the exact success probability once, and a ``run`` step that only samples the
readout, so seed sweeps do not rebuild polynomials.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .amplitude_estimation import (
    MAX_LOG2_K,
    ancilla_zero_flag,
    estimate_from_probability,
    queries_per_run,
    success_probability,
)
from .block_encoding import (
    BlockEncoding,
    encode_matrix,
    ff_select_prepare,
    ff_shifted_encoding,
    product,
    unitary_as_encoding,
)
from .errors import ParameterError, ResourceCapError, ShapeError
from .models import FFModel, ModelSpec, PauliSum, dense_model, ground_data, pauli_to_dense
from .operator_core import hermitian_eig, operator_norm, pseudoinverse, state_prep_unitary
from .polynomials import fit_inverse
from .qsvt import (
    ff_pseudoinverse_encoding,
    hamiltonian_encoding,
    pseudoinverse_encoding,
    sqrt_pseudoinverse_encoding,
)

FD_STEP = 1e-3
QUERY_TAGS = ("U_H", "U_I", "U_F", "U_Psi")


# ----------------------------------------------------------------------------
# exact oracles


def chi_f_exact_sum(H, H_I) -> float:
    """Perturbative sum ``sum_{j>0} |<j|H_I|0>|^2 / (E_j - E0)^2``."""
    sd, psi0 = ground_data(H)
    amps = sd.eigenvectors.conj().T @ (np.asarray(H_I, dtype=complex) @ psi0)
    den = sd.eigenvalues[1:] - sd.e0
    return float(np.sum(np.abs(amps[1:]) ** 2 / den ** 2))


def chi_f_exact_resolvent(H, H_I) -> float:
    """``||(H - E0)^+ H_I |psi0>||^2`` with an explicit pseudoinverse."""
    H = np.asarray(H, dtype=complex)
    sd, psi0 = ground_data(H)
    R = pseudoinverse(H - sd.e0 * np.eye(H.shape[0]))
    v = R @ (np.asarray(H_I, dtype=complex) @ psi0)
    return float(np.vdot(v, v).real)


def chi_f_finite_difference(family, h: float = FD_STEP, lam: float | None = None) -> float:
    """``-2 ln |<psi0(lam - h)|psi0(lam + h)>| / (2h)^2``.

    ``family`` is a :class:`ModelSpec` (evaluated at ``spec.lam`` unless
    ``lam`` is given) or a callable returning the dense ``H(lam)``.  The
    absolute value of the overlap removes the arbitrary eigenvector phases.
    """
    if h <= 0:
        raise ParameterError("h must be positive")
    if isinstance(family, ModelSpec):
        lam = family.lam if lam is None else lam
        H_of = lambda l: dense_model(family.at(l))[0]  # noqa: E731
    else:
        lam = 0.0 if lam is None else lam
        H_of = family
    _, lo = ground_data(H_of(lam - h))
    _, hi = ground_data(H_of(lam + h))
    F = min(abs(np.vdot(lo, hi)), 1.0)
    return float(-2.0 * math.log(F) / (2.0 * h) ** 2)


def static_susceptibility_exact(H, O) -> float:
    """Lehmann sum ``2 sum_{j>0} |<j|O|0>|^2 / (E_j - E0)``."""
    sd, psi0 = ground_data(H)
    amps = sd.eigenvectors.conj().T @ (np.asarray(O, dtype=complex) @ psi0)
    den = sd.eigenvalues[1:] - sd.e0
    return float(2.0 * np.sum(np.abs(amps[1:]) ** 2 / den))


def qfi_exact(H, H_I) -> float:
    return 4.0 * chi_f_exact_sum(H, H_I)


# ----------------------------------------------------------------------------
# reports


@dataclass
class EstimationReport:
    chi_f_hat: float
    eps_target: float
    alpha_q: float
    p_hat: float
    queries: dict
    backend: str
    ff_mode: bool
    seed: int | None
    oracle_values: dict = field(default_factory=dict)
    eps1: float = 0.0
    eps2: float = 0.0
    K: int = 0
    degree: int = 0
    n_runs: int = 1
    p_exact: float = float("nan")
    quantity: str = "chi_f"
    extra: dict = field(default_factory=dict)

    @property
    def queries_total(self) -> int:
        """Applications of the full amplitude-estimation unitary."""
        return self.n_runs * queries_per_run(self.K)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["queries_total"] = self.queries_total
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    CSV_FIELDS = (
        "quantity", "chi_f_hat", "eps_target", "alpha_q", "p_hat", "K", "degree",
        "n_runs", "backend", "ff_mode", "seed", "q_U_H", "q_U_I", "q_U_F", "q_U_Psi",
        "eq3", "eq5", "eq2_fd",
    )

    def csv_row(self) -> dict:
        row = {k: getattr(self, k) for k in self.CSV_FIELDS if hasattr(self, k)}
        for t in QUERY_TAGS:
            row[f"q_{t}"] = self.queries.get(t, 0)
        for k in ("eq3", "eq5", "eq2_fd"):
            row[k] = self.oracle_values.get(k)
        return {k: ("" if v is None else (f"{v:.17g}" if isinstance(v, float) else v))
                for k, v in row.items()}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=self.CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        w.writerow(self.csv_row())
        return buf.getvalue()


# ----------------------------------------------------------------------------
# encodings


def build_g_encoding(u_h: BlockEncoding, u_i: BlockEncoding, gap: float, eps: float,
                     backend: str = "spectral") -> BlockEncoding:
    """``(4 alpha_I/(3 gap), m_H + m_I + 1, eps)`` encoding of ``(H - E0)^+ H_I``.

    The inverse step gets ``eps / alpha_I`` so the product bound
    ``alpha' eps_I + alpha_I eps'`` equals ``eps`` for an exact ``U_I``.
    """
    if u_h.n != u_i.n:
        raise ShapeError(f"system sizes differ: {u_h.n} vs {u_i.n} qubits")
    pinv = pseudoinverse_encoding(u_h, gap, eps / u_i.alpha, backend)
    g = product(pinv, u_i)
    g.meta.update({"degree": pinv.meta["degree"], "eps_inverse": pinv.eps})
    return g


def k_for_precision(eps2: float, max_log2_k: int = MAX_LOG2_K) -> int:
    """Smallest power of two with ``pi/K + pi^2/K^2 <= eps2`` (worst case ``p = 1/2``)."""
    if not eps2 > 0:
        raise ParameterError("readout precision must be positive")
    K = 2
    while math.pi / K + math.pi ** 2 / K ** 2 > eps2:
        K *= 2
        if K > 1 << max_log2_k:
            raise ResourceCapError(
                f"readout precision {eps2:.3g} needs K > 2**{max_log2_k}"
            )
    return K


@dataclass
class PreparedEstimate:
    """Everything but the random readout; ``run`` samples for a seed."""

    u: BlockEncoding
    p_exact: float
    alpha: float
    scale: float  # estimate = scale * alpha^2 * p_hat
    eps: float
    eps1: float
    eps2: float
    K: int
    degree: int
    backend: str
    ff_mode: bool
    oracle_values: dict
    quantity: str = "chi_f"
    extra: dict = field(default_factory=dict)

    def per_run_cost(self) -> dict:
        cost = self.u.cost()
        return {t: cost.get(t, 0) * queries_per_run(self.K) for t in QUERY_TAGS}

    def run(self, seed=None, n_runs: int = 1) -> EstimationReport:
        est = estimate_from_probability(self.p_exact, self.K, seed, n_runs)
        per = self.per_run_cost()
        self.u.charge(est.queries)
        return EstimationReport(
            chi_f_hat=self.scale * self.alpha ** 2 * est.p_hat,
            eps_target=self.eps,
            alpha_q=self.alpha,
            p_hat=est.p_hat,
            queries={t: n_runs * v for t, v in per.items()},
            backend=self.backend,
            ff_mode=self.ff_mode,
            seed=seed,
            oracle_values=dict(self.oracle_values),
            eps1=self.eps1,
            eps2=self.eps2,
            K=self.K,
            degree=self.degree,
            n_runs=n_runs,
            p_exact=self.p_exact,
            quantity=self.quantity,
            extra=dict(self.extra),
        )


def _check_eps(eps):
    if not 0 < eps <= 0.5:
        raise ParameterError(f"eps must lie in (0, 1/2], got {eps}")


def _as_dense(op, n_qubits: int) -> np.ndarray:
    if isinstance(op, PauliSum):
        return pauli_to_dense(op)
    A = np.asarray(op, dtype=complex)
    if A.shape != (1 << n_qubits,) * 2:
        raise ShapeError(f"operator shape {A.shape} does not match {n_qubits} qubits")
    return A


def _state_encoding(psi0) -> BlockEncoding:
    return unitary_as_encoding(state_prep_unitary(psi0), tag="U_Psi")


def _assemble(g: BlockEncoding, psi0, alpha, scale, eps, eps1, eps2, K, backend, ff_mode,
              oracles, quantity="chi_f", extra=None) -> PreparedEstimate:
    u = product(g, _state_encoding(psi0))
    flag = ancilla_zero_flag(u.m_phys, u.n)
    p = success_probability(u, flag)
    return PreparedEstimate(u, p, alpha, scale, eps, eps1, eps2, K, g.meta["degree"], backend,
                            ff_mode, oracles, quantity, extra or {})


def _oracles(H, H_I, spec: ModelSpec | None) -> dict:
    out = {"eq3": chi_f_exact_sum(H, H_I), "eq5": chi_f_exact_resolvent(H, H_I), "eq2_fd": None}
    # the finite-difference oracle needs H_I to be dH/dlam of the family
    if spec is not None and spec.driving is None and spec.family != "explicit":
        out["eq2_fd"] = chi_f_finite_difference(spec, FD_STEP)
    return out


def prepare_chi_f(model, eps: float, backend: str = "spectral", H_I=None,
                  max_log2_k: int = MAX_LOG2_K, delta_e0: float = 0.0) -> PreparedEstimate:
    """Build the general-mode pipeline for a :class:`ModelSpec` or a dense ``H``.

    A dense ``H`` needs ``H_I``.  ``delta_e0`` perturbs the subtracted ground
    energy (sensitivity studies only; the error budget assumes it is zero).
    """
    _check_eps(eps)
    spec = model if isinstance(model, ModelSpec) else None
    if spec is not None:
        H, HI = dense_model(spec)
    else:
        H = np.asarray(model, dtype=complex)
        if H_I is None:
            raise ParameterError("a dense Hamiltonian needs an explicit H_I")
        HI = _as_dense(H_I, H.shape[0].bit_length() - 1)
    sd, psi0 = ground_data(H)
    u_h = hamiltonian_encoding(H, sd.e0, delta_e0)
    u_i = encode_matrix(HI, tag="U_I")
    alpha_q = 4.0 * u_i.alpha / (3.0 * sd.gap)
    eps1 = eps / (4.0 * alpha_q)
    eps2 = eps / (2.0 * alpha_q ** 2)
    K = k_for_precision(eps2, max_log2_k)
    g = build_g_encoding(u_h, u_i, sd.gap, eps1, backend)
    return _assemble(g, psi0, alpha_q, 1.0, eps, eps1, eps2, K, backend, False,
                     _oracles(H, HI, spec), extra={"gap": sd.gap, "delta_e0": delta_e0})


def estimate_chi_f(model, eps: float, seed=None, n_runs: int = 1, backend: str = "spectral",
                   H_I=None, max_log2_k: int = MAX_LOG2_K) -> EstimationReport:
    """End-to-end estimate of ``chi_F`` to additive error ``eps``.

    With ``n_runs = 1`` the guarantee holds with probability at least
    ``8/pi^2``; an odd ``n_runs > 1`` takes the median readout.
    """
    return prepare_chi_f(model, eps, backend, H_I, max_log2_k).run(seed, n_runs)


def general_inverse_degree(H, gap: float, eps: float) -> int:
    """Degree the general pipeline would use to invert ``H - E0`` at accuracy ``eps``."""
    alpha_h = operator_norm(np.asarray(H) - hermitian_eig(H).e0 * np.eye(len(H)))
    return fit_inverse(min(gap / alpha_h, 1.0), min(0.75 * gap * eps, 1.0)).degree


def prepare_chi_f_ff(model: FFModel, driving, eps: float, backend: str = "spectral",
                     max_log2_k: int = MAX_LOG2_K, compare_general: bool = True) -> PreparedEstimate:
    """Frustration-free pipeline: the inverse is built from ``U_F`` instead of ``U_H``."""
    _check_eps(eps)
    H = model.h_f
    HI = _as_dense(driving, model.n_qubits)
    sd, psi0 = ground_data(H)
    if abs(sd.e0) > 1e-9:
        raise ParameterError(f"frustration-free ground energy must be 0, got {sd.e0:.3e}")
    u_sa = ff_select_prepare(model)
    u_f = ff_shifted_encoding(u_sa)
    u_i = encode_matrix(HI, tag="U_I")
    alpha_q = 4.0 * u_i.alpha / (3.0 * sd.gap)
    eps1 = eps / (4.0 * alpha_q)
    eps2 = eps / (2.0 * alpha_q ** 2)
    K = k_for_precision(eps2, max_log2_k)
    pinv = ff_pseudoinverse_encoding(u_f, u_sa.meta["r_padded"], sd.gap, eps1 / u_i.alpha, backend)
    g = product(pinv, u_i)
    g.meta["degree"] = pinv.meta["degree"]
    extra = {"gap": sd.gap, "r": model.r, "r_padded": u_sa.meta["r_padded"]}
    if compare_general:
        extra["ff_degree"] = pinv.meta["degree"]
        extra["general_degree"] = general_inverse_degree(H, sd.gap, eps1 / u_i.alpha)
    return _assemble(g, psi0, alpha_q, 1.0, eps, eps1, eps2, K, backend, True,
                     _oracles(H, HI, None), extra=extra)


def estimate_chi_f_ff(model: FFModel, driving, eps: float, seed=None, n_runs: int = 1,
                      backend: str = "spectral", max_log2_k: int = MAX_LOG2_K) -> EstimationReport:
    """``chi_F`` for a frustration-free ``H_F`` driven by ``driving``.

    ``report.extra`` holds the FF inverse degree (queries to ``U_F`` per
    ``G``) next to the degree the general pipeline needs for the same model.
    """
    return prepare_chi_f_ff(model, driving, eps, backend, max_log2_k).run(seed, n_runs)


def prepare_static(model, O, eps: float, backend: str = "spectral",
                   max_log2_k: int = MAX_LOG2_K) -> PreparedEstimate:
    """Static susceptibility as ``2 ||R^{1/2} O |psi0>||^2`` with ``R = (H - E0)^+``."""
    _check_eps(eps)
    if isinstance(model, ModelSpec):
        H = dense_model(model)[0]
    else:
        H = np.asarray(model, dtype=complex)
    O = _as_dense(O, H.shape[0].bit_length() - 1)
    sd, psi0 = ground_data(H)
    u_h = hamiltonian_encoding(H, sd.e0)
    u_o = encode_matrix(O, tag="U_I")
    alpha_s = 4.0 * u_o.alpha / (3.0 * math.sqrt(sd.gap))
    eps1 = eps / (8.0 * alpha_s)
    eps2 = eps / (4.0 * alpha_s ** 2)
    K = k_for_precision(eps2, max_log2_k)
    root = sqrt_pseudoinverse_encoding(u_h, sd.gap, eps1 / u_o.alpha, backend)
    g = product(root, u_o)
    g.meta["degree"] = root.meta["degree"]
    oracles = {"static_exact": static_susceptibility_exact(H, O)}
    return _assemble(g, psi0, alpha_s, 2.0, eps, eps1, eps2, K, backend, False, oracles,
                     quantity="static", extra={"gap": sd.gap})


def static_susceptibility_estimate(model, O, eps: float, seed=None, n_runs: int = 1,
                                   backend: str = "spectral") -> EstimationReport:
    """Block-encoding estimate of the static susceptibility; ``chi_f_hat`` holds the value."""
    return prepare_static(model, O, eps, backend).run(seed, n_runs)


def qfi(model: ModelSpec, eps: float | None = None, seed=None, exact: bool = False,
        n_runs: int = 1) -> float:
    """Quantum Fisher information ``4 chi_F`` for the family's own ``dH/dlam``."""
    if model.driving is not None:
        model = ModelSpec(model.family, model.n_qubits, model.lam, None, model.hamiltonian)
    if exact:
        H, HI = dense_model(model)
        return qfi_exact(H, HI)
    if eps is None:
        raise ParameterError("estimated QFI needs eps")
    return 4.0 * estimate_chi_f(model, eps, seed, n_runs).chi_f_hat

