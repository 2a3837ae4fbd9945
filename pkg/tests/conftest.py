import numpy as np
import pytest

from fidsus.models import ModelSpec, PauliSum

PAULI = {
    "I": np.eye(2),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1.0, -1.0]).astype(complex),
}


def kron_word(word):
    """Independent Pauli-word expansion used as an oracle."""
    out = np.ones((1, 1), dtype=complex)
    for ch in word:
        out = np.kron(out, PAULI[ch])
    return out


def random_hermitian(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (a + a.conj().T) / 2


def diag_spec(gap=1.0):
    """One qubit, H = gap |1><1| and driving X: chi_F = 1/gap**2."""
    h = PauliSum.from_ops(1, [(gap / 2, {}), (-gap / 2, {0: "Z"})])
    x = PauliSum.from_ops(1, [(1.0, {0: "X"})])
    return ModelSpec("explicit", 1, 0.0, driving=x, hamiltonian=h)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
