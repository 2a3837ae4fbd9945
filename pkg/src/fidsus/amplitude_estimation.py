"""Canonical amplitude estimation with a simulated phase-estimation readout.

For ``u|0> = sin(theta)|good> + cos(theta)|bad>`` the Grover operator has
eigenphases ``+-2 theta`` on the span of the two branches.  Phase estimation
with a ``log2 K``-qubit register then returns ``y`` with the Fejer-kernel
probability ``sin^2(pi D) / (K^2 sin^2(pi D / K))``, ``D = y - K theta / pi``
(the two eigenphases give mirror outcomes ``y`` and ``K - y``, which map to
the same estimate and are merged).  The estimate is ``sin^2(pi y / K)``.

Registers can be as large as ``2**32``, so outcomes are sampled lazily,
walking bins outward from the peak in doubling chunks until the running mass
passes a uniform draw.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .block_encoding import BlockEncoding
from .errors import ParameterError, ResourceCapError
from .operator_core import is_power_of_two, unitarity_defect

MAX_LOG2_K = 32
PROJECTOR_TOL = 1e-10
SUCCESS_FLOOR = 8.0 / math.pi ** 2
# P(median of n runs fails) <= exp(-CHERNOFF_C * n) when each run succeeds
# with probability at least 8/pi^2 (Hoeffding: c = 2 (8/pi^2 - 1/2)^2)
CHERNOFF_C = 2.0 * (SUCCESS_FLOOR - 0.5) ** 2
_FIRST_CHUNK = 1024
_MAX_SCAN = 1 << 26


def qae_bound(p: float, K: int) -> float:
    """``2 pi sqrt(p(1-p))/K + pi^2/K^2``."""
    return 2.0 * math.pi * math.sqrt(max(p * (1.0 - p), 0.0)) / K + math.pi ** 2 / K ** 2


def queries_per_run(K: int) -> int:
    """Applications of ``u`` or ``u^dag``: two per Grover step plus the preparation."""
    return 2 * (K - 1) + 1


@dataclass(frozen=True)
class AmplitudeEstimate:
    p_hat: float
    k_queries: int
    bound: float
    n_medians: int
    seed: int | None
    queries: int
    outcome: int

    def to_dict(self) -> dict:
        return asdict(self)


def _as_unitary(u) -> np.ndarray:
    return u.unitary if isinstance(u, BlockEncoding) else np.asarray(u, dtype=complex)


def _check_projector(P: np.ndarray) -> None:
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ParameterError(f"flag must be a square matrix, got shape {P.shape}")
    if np.max(np.abs(P - P.conj().T)) > PROJECTOR_TOL or np.max(np.abs(P @ P - P)) > PROJECTOR_TOL:
        raise ParameterError("flag is not an orthogonal projector")


def ancilla_zero_flag(m: int, n: int) -> np.ndarray:
    """``|0^m><0^m| x I_n`` on ``m`` ancillas (most significant) and ``n`` system qubits."""
    D = 1 << (m + n)
    P = np.zeros((D, D))
    d = 1 << n
    P[np.arange(d), np.arange(d)] = 1.0
    return P


def grover_operator(u, flag) -> np.ndarray:
    """``Q = u S_0 u^dag S_flag`` with ``S_0 = 2|0><0| - I`` and ``S_flag = I - 2 flag``."""
    U = _as_unitary(u)
    P = np.asarray(flag, dtype=complex)
    _check_projector(P)
    if P.shape != U.shape:
        raise ParameterError(f"flag shape {P.shape} does not match u {U.shape}")
    if unitarity_defect(U) > 1e-10:
        raise ParameterError("u is not unitary")
    D = U.shape[0]
    s0 = -np.eye(D, dtype=complex)
    s0[0, 0] = 1.0
    s_flag = np.eye(D) - 2.0 * P
    return U @ s0 @ U.conj().T @ s_flag


def success_probability(u, flag) -> float:
    """``p = ||flag u |0>||^2``."""
    U = _as_unitary(u)
    P = np.asarray(flag, dtype=complex)
    _check_projector(P)
    col = U[:, 0]
    return float(min(1.0, max(0.0, np.vdot(col, P @ col).real)))


def _fejer(delta: np.ndarray, K: int) -> np.ndarray:
    num = np.sin(np.pi * delta) ** 2
    den = (K * np.sin(np.pi * delta / K)) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den
    return np.where(np.abs(delta) < 1e-12, 1.0, out)


def _ordered_bins(x: float, lo: int, hi: int) -> np.ndarray:
    # offsets lo..hi-1 on each side of x, nearest first
    base = math.floor(x)
    d = np.arange(lo, hi)
    left = base - d
    right = base + 1 + d
    nearer_left = (x - left) <= (right - x)
    first = np.where(nearer_left, left, right)
    second = np.where(nearer_left, right, left)
    return np.stack([first, second], axis=1).ravel()


def sample_outcome(p: float, K: int, rng: np.random.Generator) -> int:
    """Draw a phase-estimation outcome ``y`` in ``[0, K)`` for amplitude ``p``."""
    theta = math.asin(math.sqrt(min(max(p, 0.0), 1.0)))
    x = K * theta / math.pi
    target = rng.random()
    acc = 0.0
    lo, size = 0, _FIRST_CHUNK
    half = K // 2  # K distinct bins in total
    while lo < min(half, _MAX_SCAN):
        hi = min(lo + size, half)
        ys = _ordered_bins(x, lo, hi)
        probs = _fejer(ys - x, K)
        cum = acc + np.cumsum(probs)
        idx = int(np.searchsorted(cum, target, side="right"))
        if idx < ys.size:
            return int(ys[idx]) % K
        acc = float(cum[-1])
        lo, size = hi, 2 * size
    # residual mass from rounding or the scan cap: keep the nearest outcome
    return int(math.floor(x + 0.5)) % K


def outcome_to_p(y: int, K: int) -> float:
    """``sin^2(pi y / K)`` with mirror bins merged; exact at the lattice points 0, K/4, K/2."""
    j = min(y % K, K - y % K)
    if j == 0:
        return 0.0
    if 4 * j == K:
        return 0.5
    if 2 * j == K:
        return 1.0
    return math.sin(math.pi * j / K) ** 2


def _check_K(K: int) -> None:
    if not (isinstance(K, (int, np.integer)) and K >= 2 and is_power_of_two(int(K))):
        raise ParameterError(f"K must be a power of two >= 2, got {K}")
    if K > 1 << MAX_LOG2_K:
        raise ResourceCapError(f"K = {K} exceeds the register cap 2**{MAX_LOG2_K}")


def _rngs(seed, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def estimate_from_probability(p: float, K: int, seed=None, n_runs: int = 1) -> AmplitudeEstimate:
    """Median of ``n_runs`` simulated readouts for a known success probability."""
    _check_K(K)
    if n_runs < 1 or n_runs % 2 == 0:
        raise ParameterError(f"n_runs must be a positive odd integer, got {n_runs}")
    outs = [sample_outcome(p, int(K), g) for g in _rngs(seed, n_runs)]
    vals = [outcome_to_p(y, int(K)) for y in outs]
    order = np.argsort(vals, kind="stable")
    mid = int(order[n_runs // 2])
    p_hat = vals[mid]
    return AmplitudeEstimate(
        p_hat=p_hat,
        k_queries=int(K),
        bound=qae_bound(p_hat, int(K)),
        n_medians=n_runs,
        seed=seed,
        queries=n_runs * queries_per_run(int(K)),
        outcome=outs[mid],
    )


def amplitude_estimate(u, flag, K: int, seed=None) -> AmplitudeEstimate:
    """One phase-estimation run on ``Q`` built from ``u`` and ``flag``.

    When ``u`` is a :class:`BlockEncoding` its counter (and those of its
    components) is charged ``2(K - 1) + 1`` times.
    """
    return median_amplify(u, flag, K, 1, seed)


def median_amplify(u, flag, K: int, n_runs: int, seed=None) -> AmplitudeEstimate:
    """Median of ``n_runs`` independent estimates.

    Run ``i`` draws from child ``i`` of ``SeedSequence(seed)``, so results do
    not depend on execution order and ``n_runs = 1`` reproduces
    :func:`amplitude_estimate`.  The median misses the single-run bound with
    probability at most ``exp(-CHERNOFF_C * n_runs)``.
    """
    _check_K(K)
    p = success_probability(u, flag)
    est = estimate_from_probability(p, K, seed, n_runs)
    if isinstance(u, BlockEncoding):
        u.charge(est.queries)
    return est
