import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240117)


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random U(n) via QR of a complex Ginibre matrix."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def phase_distance(u: np.ndarray, v: np.ndarray) -> float:
    """1 - |Tr(U^dag V)| / dim: zero iff equal up to global phase."""
    d = u.shape[0]
    return 1 - abs(np.trace(u.conj().T @ v)) / d
