"""Circuit intermediate representation: gates, matrices, layering, dense unitaries.

Conventions (used everywhere in this package):
  - Qubit 0 is the least-significant bit of a basis-state index.
  - Bitstrings are printed most-significant qubit first.
  - For a two-qubit gate on (a, b), the 4x4 matrix is indexed by
    (x_a << 1) | x_b, so the first-listed qubit is the high bit. CX has
    the first qubit as control.
  - Global phase is not tracked; unitary comparisons are made through
    |Tr(U^dag V)|.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class GateKind(Enum):
    U1 = "u1"
    U2 = "u2"
    U3 = "u3"
    CX = "cx"
    H = "h"
    SWAP = "swap"
    SU4 = "su4"
    BARRIER = "barrier"
    MEASURE = "measure"


ONE_QUBIT_KINDS = frozenset({GateKind.U1, GateKind.U2, GateKind.U3, GateKind.H, GateKind.MEASURE})
TWO_QUBIT_KINDS = frozenset({GateKind.CX, GateKind.SWAP, GateKind.SU4})

_PARAM_ARITY = {
    GateKind.U1: 1,
    GateKind.U2: 2,
    GateKind.U3: 3,
    GateKind.CX: 0,
    GateKind.H: 0,
    GateKind.SWAP: 0,
    GateKind.SU4: 0,
    GateKind.BARRIER: 0,
    GateKind.MEASURE: 0,
}

UNITARITY_TOL = 1e-12


def max_norm(a: np.ndarray) -> float:
    """Entrywise max-norm ||A||_max."""
    return float(np.max(np.abs(a)))


def is_unitary(u: np.ndarray, tol: float = UNITARITY_TOL) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return max_norm(u.conj().T @ u - np.eye(u.shape[0])) < tol


@dataclass(frozen=True, eq=False)
class Gate:
    """One circuit operation. Immutable after construction."""

    kind: GateKind
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()
    matrix: np.ndarray | None = None  # SU4 only

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if len(self.params) != _PARAM_ARITY[self.kind]:
            raise ValueError(
                f"{self.kind.value} takes {_PARAM_ARITY[self.kind]} params, got {len(self.params)}"
            )
        if self.kind is GateKind.BARRIER:
            if len(self.qubits) < 1:
                raise ValueError("barrier needs at least one qubit")
        elif self.kind in TWO_QUBIT_KINDS:
            if len(self.qubits) != 2:
                raise ValueError(f"{self.kind.value} acts on 2 qubits, got {len(self.qubits)}")
        else:
            if len(self.qubits) != 1:
                raise ValueError(f"{self.kind.value} acts on 1 qubit, got {len(self.qubits)}")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"duplicate qubit in {self.kind.value} gate: {self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise ValueError(f"negative qubit index: {self.qubits}")
        if self.kind is GateKind.SU4:
            if self.matrix is None:
                raise ValueError("su4 gate requires an explicit matrix")
            m = np.array(self.matrix, dtype=complex)
            if m.shape != (4, 4):
                raise ValueError(f"su4 matrix must be 4x4, got {m.shape}")
            if not is_unitary(m):
                raise ValueError("su4 matrix is not unitary to 1e-12")
            m.setflags(write=False)
            object.__setattr__(self, "matrix", m)
        elif self.matrix is not None:
            raise ValueError(f"{self.kind.value} does not take an explicit matrix")


def u1(lam: float, q: int) -> Gate:
    return Gate(GateKind.U1, (q,), (lam,))


def u2(phi: float, lam: float, q: int) -> Gate:
    return Gate(GateKind.U2, (q,), (phi, lam))


def u3(theta: float, phi: float, lam: float, q: int) -> Gate:
    return Gate(GateKind.U3, (q,), (theta, phi, lam))


def cx(control: int, target: int) -> Gate:
    return Gate(GateKind.CX, (control, target))


def h(q: int) -> Gate:
    return Gate(GateKind.H, (q,))


def swap(a: int, b: int) -> Gate:
    return Gate(GateKind.SWAP, (a, b))


def su4(matrix: np.ndarray, a: int, b: int) -> Gate:
    return Gate(GateKind.SU4, (a, b), matrix=matrix)


def barrier(*qubits: int) -> Gate:
    return Gate(GateKind.BARRIER, qubits)


def measure(q: int) -> Gate:
    return Gate(GateKind.MEASURE, (q,))


@dataclass(frozen=True, eq=False)
class Circuit:
    """Ordered gate list over m qubits plus a measurement-label permutation.

    output_permutation[i] = j means the readout of circuit qubit i is
    reported as logical bit j.
    """

    m: int
    gates: tuple[Gate, ...] = ()
    output_permutation: tuple[int, ...] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("circuit width must be >= 1")
        object.__setattr__(self, "gates", tuple(self.gates))
        perm = self.output_permutation
        if perm is None:
            perm = tuple(range(self.m))
        else:
            perm = tuple(int(p) for p in perm)
        if sorted(perm) != list(range(self.m)):
            raise ValueError(f"output_permutation is not a permutation of 0..{self.m - 1}: {perm}")
        object.__setattr__(self, "output_permutation", perm)
        for g in self.gates:
            if any(q >= self.m for q in g.qubits):
                raise ValueError(f"gate {g.kind.value} on {g.qubits} exceeds width {self.m}")

    def with_gates(self, gates) -> "Circuit":
        return Circuit(self.m, tuple(gates), self.output_permutation)

    def with_permutation(self, perm) -> "Circuit":
        return Circuit(self.m, self.gates, tuple(perm))

    def count(self, kind: GateKind) -> int:
        return sum(1 for g in self.gates if g.kind is kind)

    @property
    def has_identity_permutation(self) -> bool:
        return self.output_permutation == tuple(range(self.m))


# -- gate matrices -----------------------------------------------------------

_CX_MATRIX = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
_SWAP_MATRIX = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)
_H_MATRIX = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    """Closed form of Rz(phi+3pi) Rx(pi/2) Rz(theta+pi) Rx(pi/2) Rz(lam)."""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    pre = np.exp(-0.5j * (phi + lam))
    return pre * np.array(
        [[c, -np.exp(1j * lam) * s], [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c]],
        dtype=complex,
    )


def gate_matrix(g: Gate) -> np.ndarray:
    """Unitary of a gate (2x2 or 4x4). Barrier/Measure have none."""
    if g.kind is GateKind.U1:
        return np.array([[1, 0], [0, np.exp(1j * g.params[0])]], dtype=complex)
    if g.kind is GateKind.U2:
        return u3_matrix(np.pi / 2, *g.params)
    if g.kind is GateKind.U3:
        return u3_matrix(*g.params)
    if g.kind is GateKind.CX:
        return _CX_MATRIX.copy()
    if g.kind is GateKind.SWAP:
        return _SWAP_MATRIX.copy()
    if g.kind is GateKind.H:
        return _H_MATRIX.copy()
    if g.kind is GateKind.SU4:
        return np.array(g.matrix, dtype=complex)
    raise ValueError(f"{g.kind.value} has no matrix")


# -- dense unitaries ---------------------------------------------------------

UNITARY_WIDTH_LIMIT = 14


def apply_matrix_1q(arr: np.ndarray, mat: np.ndarray, q: int, m: int) -> np.ndarray:
    """Apply a 2x2 matrix on qubit q to the first axis of arr (length 2^m)."""
    cols = arr.shape[1] if arr.ndim == 2 else 1
    a = arr.reshape(1 << (m - q - 1), 2, (1 << q) * cols)
    out = np.einsum("ab,xby->xay", mat, a)
    return out.reshape(arr.shape)


def apply_matrix_2q(arr: np.ndarray, mat: np.ndarray, qa: int, qb: int, m: int) -> np.ndarray:
    """Apply a 4x4 matrix on (qa, qb) to the first axis of arr; qa is the high bit."""
    cols = arr.shape[1] if arr.ndim == 2 else 1
    shape = arr.shape
    a = arr.reshape([2] * m + ([cols] if arr.ndim == 2 else []))
    # numpy axis for qubit q is (m - 1 - q); merge the two qubit axes
    ax_a, ax_b = m - 1 - qa, m - 1 - qb
    a = np.moveaxis(a, (ax_a, ax_b), (0, 1))
    rest = a.shape[2:]
    a = a.reshape(4, -1)
    a = mat @ a
    a = a.reshape((2, 2) + rest)
    a = np.moveaxis(a, (0, 1), (ax_a, ax_b))
    return a.reshape(shape)


def permutation_unitary(perm: tuple[int, ...]) -> np.ndarray:
    """Relabeling unitary: basis |x> -> |y> with y_{perm[i]} = x_i."""
    m = len(perm)
    p = np.zeros((1 << m, 1 << m), dtype=complex)
    for x in range(1 << m):
        y = 0
        for i, j in enumerate(perm):
            y |= ((x >> i) & 1) << j
        p[y, x] = 1.0
    return p


def permute_index_bits(x, perm: tuple[int, ...]):
    """Relabel basis-index bits: bit i of x becomes bit perm[i]. Vectorized."""
    x = np.asarray(x, dtype=np.int64)
    y = np.zeros_like(x)
    for i, j in enumerate(perm):
        y |= ((x >> i) & 1) << j
    return y


def compose_permutations(first: tuple[int, ...], then: tuple[int, ...]) -> tuple[int, ...]:
    """Permutation applying `first`, then `then`: result[i] = then[first[i]]."""
    return tuple(then[f] for f in first)


def invert_permutation(perm: tuple[int, ...]) -> tuple[int, ...]:
    inv = [0] * len(perm)
    for i, p in enumerate(perm):
        inv[p] = i
    return tuple(inv)


def circuit_unitary(c: Circuit) -> np.ndarray:
    """Dense 2^m x 2^m unitary of the circuit, including the output relabeling."""
    if c.m > UNITARY_WIDTH_LIMIT:
        raise ValueError(f"circuit_unitary limited to {UNITARY_WIDTH_LIMIT} qubits, got {c.m}")
    dim = 1 << c.m
    u = np.eye(dim, dtype=complex)
    for g in c.gates:
        if g.kind is GateKind.BARRIER:
            continue
        if g.kind is GateKind.MEASURE:
            raise ValueError("circuit_unitary does not support measure gates")
        mat = gate_matrix(g)
        if len(g.qubits) == 1:
            u = apply_matrix_1q(u, mat, g.qubits[0], c.m)
        else:
            u = apply_matrix_2q(u, mat, g.qubits[0], g.qubits[1], c.m)
    if not c.has_identity_permutation:
        u = permutation_unitary(c.output_permutation) @ u
    return u


# -- layering ----------------------------------------------------------------

@dataclass(frozen=True)
class Layer:
    """Gates acting on pairwise-disjoint qubit sets."""

    gates: tuple[Gate, ...]

    def __post_init__(self):
        seen: set[int] = set()
        for g in self.gates:
            for q in g.qubits:
                if q in seen:
                    raise ValueError(f"qubit {q} used twice within a layer")
                seen.add(q)


def layerize(c: Circuit) -> list[Layer]:
    """As-soon-as-possible partition into layers of disjoint gates.

    Barriers act as a full-width fence and occupy their own layer.
    """
    frontier = [0] * c.m  # first free layer index per qubit
    buckets: list[list[Gate]] = []
    for g in c.gates:
        if g.kind is GateKind.BARRIER:
            depth = max(frontier) if frontier else 0
            buckets.extend([] for _ in range(depth + 1 - len(buckets)))
            buckets[depth].append(g)
            frontier = [depth + 1] * c.m
            continue
        at = max(frontier[q] for q in g.qubits)
        buckets.extend([] for _ in range(at + 1 - len(buckets)))
        buckets[at].append(g)
        for q in g.qubits:
            frontier[q] = at + 1
    return [Layer(tuple(b)) for b in buckets if b]


def concatenate_layers(m: int, layers: list[Layer], output_permutation=None) -> Circuit:
    gates: list[Gate] = []
    for layer in layers:
        gates.extend(layer.gates)
    return Circuit(m, tuple(gates), output_permutation)
