"""Seeded random model circuits: uniform layer permutations and Haar SU(4) blocks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import Circuit, Gate, GateKind


@dataclass(frozen=True)
class ModelCircuitSpec:
    width: int
    depth: int
    seed: int

    def __post_init__(self):
        if self.width < 1:
            raise ValueError("width must be >= 1")
        if self.depth < 1:
            raise ValueError("depth must be >= 1")


def haar_su4(rng: np.random.Generator) -> np.ndarray:
    """Haar-random SU(4): QR of a complex Ginibre matrix, phase-fixed, det-normalized."""
    z = (rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    q = q * (d / np.abs(d))
    return q / np.linalg.det(q) ** 0.25


def haar_su4_batch(n: int, rng: np.random.Generator) -> np.ndarray:
    """n Haar-random SU(4) matrices, shape (n, 4, 4)."""
    z = (rng.standard_normal((n, 4, 4)) + 1j * rng.standard_normal((n, 4, 4))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    q = q * (d / np.abs(d))[:, None, :]
    det = np.linalg.det(q)
    return q / det[:, None, None] ** 0.25


def sample_layer(m: int, rng: np.random.Generator) -> tuple[np.ndarray, list[np.ndarray]]:
    """One layer: a uniform permutation of qubit labels and floor(m/2) SU(4) blocks.

    Blocks pair (perm[0], perm[1]), (perm[2], perm[3]), ...; for odd m the
    last permuted qubit idles.
    """
    if m < 2:
        raise ValueError("layers need at least 2 qubits")
    perm = rng.permutation(m)
    blocks = [haar_su4(rng) for _ in range(m // 2)]
    return perm, blocks


def build_model_circuit(spec: ModelCircuitSpec) -> Circuit:
    """Depth-d circuit of permuted Haar SU(4) blocks; a pure function of the spec."""
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    gates: list[Gate] = []
    for _ in range(spec.depth):
        if spec.width == 1:
            continue  # no two-qubit blocks fit
        perm, blocks = sample_layer(spec.width, rng)
        for k, block in enumerate(blocks):
            a, b = int(perm[2 * k]), int(perm[2 * k + 1])
            gates.append(Gate(GateKind.SU4, (a, b), matrix=block))
    return Circuit(spec.width, tuple(gates))
