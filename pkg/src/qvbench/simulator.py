"""Dense statevector simulation: ideal distributions, heavy sets, noisy sampling.

The noise model is stochastic Pauli injection: after each gate, with the
configured probability, a uniformly random non-identity Pauli is applied
on the gate's qubits; measurement flips each readout bit independently.
Each shot is one pure-state trajectory. All randomness is pre-drawn from
a seeded generator and consumed identically by both kernel backends.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .circuit import Circuit, GateKind, gate_matrix, permute_index_bits

PROBABILITY_WIDTH_LIMIT = 26

_BASIS_KINDS = frozenset(
    {GateKind.U1, GateKind.U2, GateKind.U3, GateKind.CX, GateKind.BARRIER, GateKind.MEASURE}
)


@dataclass(frozen=True)
class Statevector:
    """Normalized complex amplitudes over 2^m basis states."""

    amplitudes: np.ndarray

    def __post_init__(self):
        norm = float(np.sum(np.abs(self.amplitudes) ** 2))
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"statevector norm^2 deviates from 1 by {abs(norm - 1):.2e}")


@dataclass(frozen=True)
class NoiseModel:
    """Pauli-injection probabilities per 1q gate, 2q gate, and readout bit.

    `per_edge` optionally overrides eps2 for specific (unordered) qubit
    pairs. Use `from_config` to convert average-gate-infidelity inputs
    (factor 3/2 for one qubit, 5/4 for two).
    """

    eps1: float = 0.0
    eps2: float = 0.0
    epsM: float = 0.0
    per_edge: tuple[tuple[tuple[int, int], float], ...] = ()

    def __post_init__(self):
        for name in ("eps1", "eps2", "epsM"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        object.__setattr__(
            self,
            "per_edge",
            tuple(((min(a, b), max(a, b)), float(e)) for (a, b), e in self.per_edge),
        )

    @property
    def is_zero(self) -> bool:
        return (
            self.eps1 == 0.0
            and self.eps2 == 0.0
            and self.epsM == 0.0
            and not self.per_edge
        )

    @property
    def has_gate_noise(self) -> bool:
        return self.eps1 > 0 or self.eps2 > 0 or any(e > 0 for _, e in self.per_edge)

    def edge_eps(self, a: int, b: int) -> float:
        key = (min(a, b), max(a, b))
        for pair, e in self.per_edge:
            if pair == key:
                return e
        return self.eps2

    @classmethod
    def from_config(cls, cfg: dict) -> "NoiseModel":
        interp = cfg.get("interpretation", "pauli")
        if interp not in ("pauli", "infidelity"):
            raise ValueError(f"noise interpretation must be pauli|infidelity, got {interp!r}")
        f1, f2 = (1.5, 1.25) if interp == "infidelity" else (1.0, 1.0)
        per_edge = tuple(
            ((int(a), int(b)), float(e) * f2) for (a, b), e in cfg.get("per_edge", ())
        )
        return cls(
            eps1=float(cfg.get("eps1", 0.0)) * f1,
            eps2=float(cfg.get("eps2", 0.0)) * f2,
            epsM=float(cfg.get("epsM", 0.0)),
            per_edge=per_edge,
        )


@dataclass(frozen=True)
class HeavySet:
    """Bitstrings whose ideal probability strictly exceeds the median."""

    members: frozenset[int]
    p_med: float
    m: int
    ideal_heavy_prob: float

    def __post_init__(self):
        if len(self.members) > 1 << (self.m - 1):
            raise ValueError("heavy set larger than half the outcome space")

    def bitstrings(self) -> list[str]:
        return [format(x, f"0{self.m}b") for x in sorted(self.members)]


@dataclass(frozen=True)
class CompiledCircuit:
    """Gate stream flattened to arrays for the kernels."""

    m: int
    codes: np.ndarray
    q0: np.ndarray
    q1: np.ndarray
    mats1: np.ndarray
    mats4: np.ndarray
    is_2q: np.ndarray
    output_permutation: tuple[int, ...]


def compile_circuit(c: Circuit) -> CompiledCircuit:
    n = len(c.gates)
    codes = np.full(n, _kernels.CODE_SKIP, dtype=np.int8)
    q0 = np.zeros(n, dtype=np.int64)
    q1 = np.zeros(n, dtype=np.int64)
    mats1 = np.zeros((n, 2, 2), dtype=np.complex128)
    mats4 = np.zeros((n, 4, 4), dtype=np.complex128)
    is_2q = np.zeros(n, dtype=bool)
    for g_idx, g in enumerate(c.gates):
        if g.kind in (GateKind.BARRIER, GateKind.MEASURE):
            continue
        mat = gate_matrix(g)
        if len(g.qubits) == 1:
            codes[g_idx] = _kernels.CODE_1Q
            q0[g_idx] = g.qubits[0]
            mats1[g_idx] = mat
        else:
            codes[g_idx] = _kernels.CODE_2Q
            q0[g_idx], q1[g_idx] = g.qubits
            mats4[g_idx] = mat
            is_2q[g_idx] = True
    return CompiledCircuit(c.m, codes, q0, q1, mats1, mats4, is_2q, c.output_permutation)


def _gate_eps(compiled: CompiledCircuit, noise: NoiseModel) -> np.ndarray:
    eps = np.zeros(len(compiled.codes))
    for g in range(len(compiled.codes)):
        if compiled.codes[g] == _kernels.CODE_SKIP:
            continue
        if compiled.is_2q[g]:
            eps[g] = noise.edge_eps(int(compiled.q0[g]), int(compiled.q1[g]))
        else:
            eps[g] = noise.eps1
    return eps


def run_statevector(c: Circuit) -> Statevector:
    """Ideal final state |psi> = U |0...0> (output relabeling not applied)."""
    compiled = compile_circuit(c)
    state = _kernels.run_state(
        1 << c.m, compiled.codes, compiled.q0, compiled.q1, compiled.mats1, compiled.mats4
    )
    return Statevector(state)


def ideal_probabilities(c: Circuit) -> np.ndarray:
    """p(x) = |<x|U|0>|^2 with the output permutation applied to labels."""
    if c.m > PROBABILITY_WIDTH_LIMIT:
        raise ValueError(f"width {c.m} exceeds the statevector guard {PROBABILITY_WIDTH_LIMIT}")
    state = run_statevector(c).amplitudes
    probs = np.abs(state) ** 2
    if not c.has_identity_permutation:
        out = np.empty_like(probs)
        out[permute_index_bits(np.arange(1 << c.m), c.output_permutation)] = probs
        return out
    return probs


def heavy_set(c: Circuit) -> HeavySet:
    """Outcomes with ideal probability strictly above the median (exact ties excluded)."""
    probs = ideal_probabilities(c)
    order = np.sort(probs)
    half = 1 << (c.m - 1)
    p_med = (order[half] + order[half - 1]) / 2
    members = np.nonzero(probs > p_med)[0]
    return HeavySet(
        frozenset(int(x) for x in members),
        float(p_med),
        c.m,
        float(probs[members].sum()),
    )


def sample_outputs(
    c: Circuit | CompiledCircuit,
    noise: NoiseModel,
    shots: int,
    seed,
) -> np.ndarray:
    """Measurement outcomes (as ints) of `shots` noisy trajectories.

    Deterministic in (circuit, noise, shots, seed) and independent of the
    kernel backend up to floating-point tie-breaks in sampling.
    """
    compiled = c if isinstance(c, CompiledCircuit) else compile_circuit(c)
    if compiled.m > PROBABILITY_WIDTH_LIMIT:
        raise ValueError(f"width {compiled.m} exceeds the statevector guard")
    if noise.has_gate_noise and c is not compiled:
        bad = [g.kind.value for g in c.gates if g.kind not in _BASIS_KINDS]
        if bad:
            raise ValueError(f"gate noise requires a transpiled circuit; found {sorted(set(bad))}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    n_gates = len(compiled.codes)
    u_err = rng.random((shots, n_gates))
    picks = rng.integers(0, 15, size=(shots, n_gates))
    u_sample = rng.random(shots)
    u_flip = rng.random((shots, compiled.m))
    eps = _gate_eps(compiled, noise)
    dim = 1 << compiled.m

    out = _kernels.run_shots(
        dim,
        compiled.codes,
        compiled.q0,
        compiled.q1,
        compiled.mats1,
        compiled.mats4,
        eps,
        noise.epsM,
        compiled.m,
        u_err,
        picks,
        u_sample,
        u_flip,
    )
    perm = compiled.output_permutation
    if perm != tuple(range(compiled.m)):
        out = permute_index_bits(out, perm)
    return out


def heavy_fraction(samples: np.ndarray, hs: HeavySet) -> tuple[int, float]:
    """Count of heavy outcomes and the heavy fraction h_hat."""
    samples = np.asarray(samples)
    if len(samples) == 0:
        return 0, 0.0
    if hs.members:
        table = np.zeros(1 << hs.m, dtype=bool)
        table[list(hs.members)] = True
        n_h = int(table[samples].sum())
    else:
        n_h = 0
    return n_h, n_h / len(samples)
