"""Statevector hot loops: numba-jitted kernels with a pure-numpy fallback.

Backend is chosen once at import from the environment variable
QVBENCH_KERNELS: "numba" (fail if unavailable), "numpy", or "auto"
(default: numba when importable). `benchmarks/bench_kernels.py` compares
the two paths.

Qubit 0 is the least-significant bit of a state index; for two-qubit
gates the first qubit is the high bit of the 4x4 matrix index.
"""

from __future__ import annotations

import os

import numpy as np

_CHOICE = os.environ.get("QVBENCH_KERNELS", "auto").lower()
if _CHOICE not in ("auto", "numba", "numpy"):
    raise ValueError(f"QVBENCH_KERNELS must be auto|numba|numpy, got {_CHOICE!r}")

USE_NUMBA = False
if _CHOICE in ("auto", "numba"):
    try:
        from numba import njit

        USE_NUMBA = True
    except ImportError:
        if _CHOICE == "numba":
            raise

BACKEND = "numba" if USE_NUMBA else "numpy"

# gate codes in compiled circuits
CODE_1Q = 0
CODE_2Q = 1
CODE_SKIP = 2

PAULIS = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=np.complex128,
)


# -- numpy implementations ---------------------------------------------------

def _np_apply_1q(state: np.ndarray, mat: np.ndarray, q: int) -> np.ndarray:
    n = state.shape[0]
    a = state.reshape(n >> (q + 1), 2, 1 << q)
    out = np.einsum("ab,xby->xay", mat, a)
    return np.ascontiguousarray(out).reshape(n)


def _np_apply_2q(state: np.ndarray, mat: np.ndarray, qa: int, qb: int) -> np.ndarray:
    n = state.shape[0]
    m = n.bit_length() - 1
    a = state.reshape([2] * m)
    ax_a, ax_b = m - 1 - qa, m - 1 - qb
    a = np.moveaxis(a, (ax_a, ax_b), (0, 1))
    rest = a.shape[2:]
    a = mat @ a.reshape(4, -1)
    a = np.moveaxis(a.reshape((2, 2) + rest), (0, 1), (ax_a, ax_b))
    return np.ascontiguousarray(a).reshape(n)


def _np_run_shot(
    dim, codes, q0, q1, mats1, mats4, eps, eps_meas, m, u_err, pauli_pick, u_sample, u_flip
):
    state = np.zeros(dim, dtype=np.complex128)
    state[0] = 1.0
    for g in range(codes.shape[0]):
        code = codes[g]
        if code == CODE_SKIP:
            continue
        if code == CODE_1Q:
            state = _np_apply_1q(state, mats1[g], q0[g])
        else:
            state = _np_apply_2q(state, mats4[g], q0[g], q1[g])
        if u_err[g] < eps[g]:
            pick = pauli_pick[g]
            if code == CODE_1Q:
                state = _np_apply_1q(state, PAULIS[1 + pick % 3], q0[g])
            else:
                pa, pb = (pick + 1) >> 2, (pick + 1) & 3
                if pa:
                    state = _np_apply_1q(state, PAULIS[pa], q0[g])
                if pb:
                    state = _np_apply_1q(state, PAULIS[pb], q1[g])
    probs = np.abs(state) ** 2
    idx = int(np.searchsorted(np.cumsum(probs), u_sample))
    if idx >= dim:
        idx = dim - 1
    for j in range(m):
        if u_flip[j] < eps_meas:
            idx ^= 1 << j
    return idx


def _np_run_state(dim, codes, q0, q1, mats1, mats4):
    state = np.zeros(dim, dtype=np.complex128)
    state[0] = 1.0
    for g in range(codes.shape[0]):
        code = codes[g]
        if code == CODE_SKIP:
            continue
        if code == CODE_1Q:
            state = _np_apply_1q(state, mats1[g], q0[g])
        else:
            state = _np_apply_2q(state, mats4[g], q0[g], q1[g])
    return state


# -- numba implementations ---------------------------------------------------

if USE_NUMBA:

    @njit(cache=True)
    def _nb_apply_1q_inplace(state, mat, q):  # pragma: no cover - jitted
        step = 1 << q
        n = state.shape[0]
        m00, m01 = mat[0, 0], mat[0, 1]
        m10, m11 = mat[1, 0], mat[1, 1]
        for base in range(0, n, step << 1):
            for off in range(step):
                i0 = base + off
                i1 = i0 + step
                a0 = state[i0]
                a1 = state[i1]
                state[i0] = m00 * a0 + m01 * a1
                state[i1] = m10 * a0 + m11 * a1

    @njit(cache=True)
    def _nb_apply_2q_inplace(state, mat, qa, qb):  # pragma: no cover - jitted
        sa = 1 << qa
        sb = 1 << qb
        n = state.shape[0]
        for i in range(n):
            if (i & sa) == 0 and (i & sb) == 0:
                i01 = i + sb
                i10 = i + sa
                i11 = i + sa + sb
                a0 = state[i]
                a1 = state[i01]
                a2 = state[i10]
                a3 = state[i11]
                state[i] = mat[0, 0] * a0 + mat[0, 1] * a1 + mat[0, 2] * a2 + mat[0, 3] * a3
                state[i01] = mat[1, 0] * a0 + mat[1, 1] * a1 + mat[1, 2] * a2 + mat[1, 3] * a3
                state[i10] = mat[2, 0] * a0 + mat[2, 1] * a1 + mat[2, 2] * a2 + mat[2, 3] * a3
                state[i11] = mat[3, 0] * a0 + mat[3, 1] * a1 + mat[3, 2] * a2 + mat[3, 3] * a3

    @njit(cache=True)
    def _nb_run_state(dim, codes, q0, q1, mats1, mats4):  # pragma: no cover - jitted
        state = np.zeros(dim, dtype=np.complex128)
        state[0] = 1.0
        for g in range(codes.shape[0]):
            code = codes[g]
            if code == CODE_SKIP:
                continue
            if code == CODE_1Q:
                _nb_apply_1q_inplace(state, mats1[g], q0[g])
            else:
                _nb_apply_2q_inplace(state, mats4[g], q0[g], q1[g])
        return state

    @njit(cache=True)
    def _nb_run_shot(
        dim, codes, q0, q1, mats1, mats4, eps, eps_meas, m, u_err, pauli_pick, u_sample, u_flip
    ):  # pragma: no cover - jitted
        state = np.zeros(dim, dtype=np.complex128)
        state[0] = 1.0
        paulis = PAULIS
        for g in range(codes.shape[0]):
            code = codes[g]
            if code == CODE_SKIP:
                continue
            if code == CODE_1Q:
                _nb_apply_1q_inplace(state, mats1[g], q0[g])
            else:
                _nb_apply_2q_inplace(state, mats4[g], q0[g], q1[g])
            if u_err[g] < eps[g]:
                pick = pauli_pick[g]
                if code == CODE_1Q:
                    _nb_apply_1q_inplace(state, paulis[1 + pick % 3], q0[g])
                else:
                    pa = (pick + 1) >> 2
                    pb = (pick + 1) & 3
                    if pa:
                        _nb_apply_1q_inplace(state, paulis[pa], q0[g])
                    if pb:
                        _nb_apply_1q_inplace(state, paulis[pb], q1[g])
        acc = 0.0
        idx = dim - 1
        for i in range(dim):
            a = state[i]
            acc += a.real * a.real + a.imag * a.imag
            if u_sample < acc:
                idx = i
                break
        for j in range(m):
            if u_flip[j] < eps_meas:
                idx ^= 1 << j
        return idx

    @njit(cache=True)
    def _nb_run_shots(
        dim, codes, q0, q1, mats1, mats4, eps, eps_meas, m, u_err, pauli_pick, u_sample, u_flip
    ):  # pragma: no cover - jitted
        shots = u_sample.shape[0]
        out = np.empty(shots, dtype=np.int64)
        for s in range(shots):
            out[s] = _nb_run_shot(
                dim, codes, q0, q1, mats1, mats4, eps, eps_meas, m,
                u_err[s], pauli_pick[s], u_sample[s], u_flip[s],
            )
        return out

    run_shot = _nb_run_shot
    run_shots = _nb_run_shots
    run_state = _nb_run_state
else:

    def _np_run_shots(
        dim, codes, q0, q1, mats1, mats4, eps, eps_meas, m, u_err, pauli_pick, u_sample, u_flip
    ):
        shots = u_sample.shape[0]
        out = np.empty(shots, dtype=np.int64)
        for s in range(shots):
            out[s] = _np_run_shot(
                dim, codes, q0, q1, mats1, mats4, eps, eps_meas, m,
                u_err[s], pauli_pick[s], u_sample[s], u_flip[s],
            )
        return out

    run_shot = _np_run_shot
    run_shots = _np_run_shots
    run_state = _np_run_state


def apply_1q(state: np.ndarray, mat: np.ndarray, q: int) -> np.ndarray:
    """Apply a 2x2 gate; returns the (possibly in-place) updated state."""
    if USE_NUMBA:
        _nb_apply_1q_inplace(state, np.ascontiguousarray(mat), q)
        return state
    return _np_apply_1q(state, mat, q)


def apply_2q(state: np.ndarray, mat: np.ndarray, qa: int, qb: int) -> np.ndarray:
    """Apply a 4x4 gate; the first qubit is the high bit of the matrix index."""
    if USE_NUMBA:
        _nb_apply_2q_inplace(state, np.ascontiguousarray(mat), qa, qb)
        return state
    return _np_apply_2q(state, mat, qa, qb)
