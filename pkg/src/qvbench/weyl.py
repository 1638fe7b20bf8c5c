"""Canonical two-qubit decomposition and CNOT-basis synthesis.

Every two-qubit unitary factors as phase * K1 * U_d(a, b, c) * K2 with
K_i = k_i_left (x) k_i_right single-qubit pairs and

    U_d(a, b, c) = exp(i (a XX + b YY + c ZZ)),

where the interaction coordinates can always be brought into the chamber
pi/4 >= a >= b >= |c|. The decomposition is computed in the magic (Bell)
basis, where U_d is diagonal and local gates become real orthogonal.

Synthesis emits circuits with 0..3 CX applications using exact templates
derived from the conjugation identities

    CX (Rx(t) x I) CX = exp(-i t/2 XX)
    CX (I x Rz(t)) CX = exp(-i t/2 ZZ)

plus single-qubit basis changes, so the achieved approximation fidelity
matches the closed-form prediction for each application count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import Circuit, Gate, max_norm, u3 as u3_gate, cx as cx_gate

PI4 = np.pi / 4

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_I2 = np.eye(2, dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_S = np.array([[1, 0], [0, 1j]], dtype=complex)
_SWAP4 = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)

# Magic basis: columns are the Bell states (Phi+, i Phi-, i Psi+, Psi-),
# simultaneous eigenvectors of XX, YY, ZZ.
_MAGIC = np.array(
    [
        [1, 1j, 0, 0],
        [0, 0, 1j, 1],
        [0, 0, 1j, -1],
        [1, -1j, 0, 0],
    ],
    dtype=complex,
) / np.sqrt(2)
_MAGIC_DAG = _MAGIC.conj().T

CNOT_COORDS = (PI4, 0.0, 0.0)
DCNOT_COORDS = (PI4, PI4, 0.0)
SWAP_COORDS = (PI4, PI4, PI4)

_CHAMBER_SLACK = 1e-9
_BOUNDARY_EPS = 1e-10


def rz(theta: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]], dtype=complex)


def rx(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def u_d(alpha: float, beta: float, gamma: float) -> np.ndarray:
    """exp(i (alpha XX + beta YY + gamma ZZ)), diagonal in the magic basis."""
    phases = np.exp(
        1j
        * np.array(
            [
                alpha - beta + gamma,
                -alpha + beta + gamma,
                alpha + beta - gamma,
                -alpha - beta - gamma,
            ]
        )
    )
    return (_MAGIC * phases) @ _MAGIC_DAG


@dataclass(frozen=True)
class WeylCoordinates:
    """Interaction content (alpha, beta, gamma) in the canonical chamber."""

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        a, b, g = self.alpha, self.beta, self.gamma
        if not (
            PI4 + _CHAMBER_SLACK >= a >= b - _CHAMBER_SLACK
            and b >= abs(g) - _CHAMBER_SLACK
            and b >= -_CHAMBER_SLACK
        ):
            raise ValueError(f"coordinates outside the canonical chamber: {(a, b, g)}")

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha, self.beta, self.gamma])

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.alpha, self.beta, self.gamma)


@dataclass(frozen=True)
class KakFactors:
    """phase * (k1l x k1r) * U_d(coords) * (k2l x k2r) reconstructs the input."""

    k1l: np.ndarray
    k1r: np.ndarray
    k2l: np.ndarray
    k2r: np.ndarray
    coords: WeylCoordinates
    phase: complex

    def reconstruct(self) -> np.ndarray:
        return (
            self.phase
            * np.kron(self.k1l, self.k1r)
            @ u_d(*self.coords.as_tuple())
            @ np.kron(self.k2l, self.k2r)
        )


@dataclass(frozen=True)
class ExpansionChoice:
    """Basis-application count picked for a target, with its approximation fidelity."""

    applications: int
    mirrored: bool
    predicted_fidelity: float

    def __post_init__(self):
        if self.applications not in (0, 1, 2, 3):
            raise ValueError("applications must be in 0..3")
        if not (0.2 - 1e-9 <= self.predicted_fidelity <= 1 + 1e-9):
            raise ValueError(f"fidelity {self.predicted_fidelity} outside [1/5, 1]")


# -- fidelity ----------------------------------------------------------------

def avg_fidelity(u: np.ndarray, v: np.ndarray) -> float:
    """Average gate fidelity (|Tr(U^dag V)|^2 / d + 1) / (d + 1)."""
    d = u.shape[0]
    t = abs(np.trace(u.conj().T @ v)) ** 2
    return float((t / d + 1) / (d + 1))


def trace_product(wc, wt) -> complex:
    """Tr(U_d(wc)^dag U_d(wt)) from coordinate differences."""
    da, db, dg = (np.asarray(_coords_arr(wc)) - _coords_arr(wt))
    return complex(
        4 * np.cos(da) * np.cos(db) * np.cos(dg)
        - 4j * np.sin(da) * np.sin(db) * np.sin(dg)
    )


def _coords_arr(w) -> np.ndarray:
    if isinstance(w, WeylCoordinates):
        return w.as_array()
    return np.asarray(w, dtype=float)


# -- decomposition -----------------------------------------------------------

_MIX_WEIGHTS = (1.0, 0.6180339887498949, -0.41421356237309503, 1.7320508075688772, 0.2679491924311227)


def _orthogonal_eigvecs(s: np.ndarray) -> np.ndarray:
    """Real orthogonal eigenvectors of a complex symmetric unitary matrix.

    Re(s) and Im(s) commute; a generic real combination separates the
    spectrum, so we diagonalize Re + t*Im for a few fixed weights and keep
    the first basis that actually diagonalizes s. Degenerate eigenvalues of
    the combination that are not true degeneracies of s fail the residual
    check and fall through to the next weight (then to seeded random ones).
    """
    best_p, best_res = None, np.inf

    def try_weight(t: float):
        nonlocal best_p, best_res
        _, p = np.linalg.eigh(s.real + t * s.imag)
        res = p.T @ s @ p
        off = max_norm(res - np.diag(np.diagonal(res)))
        if off < best_res:
            best_p, best_res = p, off
        return off

    for t in _MIX_WEIGHTS:
        if try_weight(t) < 5e-12:
            return best_p
    rng = np.random.default_rng(20110317)
    for _ in range(100):
        if try_weight(rng.uniform(-2, 2)) < 5e-12:
            return best_p
    return best_p  # best effort; caller verifies reconstruction


def _split_tensor_product(k4: np.ndarray) -> tuple[np.ndarray, np.ndarray, complex]:
    """Factor K = phase * (A x B) with det(A) = det(B) = 1."""
    k = k4.reshape(2, 2, 2, 2)  # axes: a_row, b_row, a_col, b_col
    norms = np.sqrt(np.sum(np.abs(k) ** 2, axis=(1, 3)))
    ar, ac = np.unravel_index(int(np.argmax(norms)), (2, 2))
    braw = k[ar, :, ac, :]
    b = braw / np.sqrt(np.linalg.det(braw))
    a = np.einsum("xy,ixjy->ij", b.conj(), k) / 2
    a = a / np.sqrt(np.linalg.det(a))
    s = np.einsum("ij,ij->", np.kron(a, b).conj(), k4) / 4
    s /= abs(s)
    return a, b, complex(s)


class _Factors:
    """Mutable decomposition state while reducing into the chamber."""

    __slots__ = ("v", "k1l", "k1r", "k2l", "k2r", "phase")

    def __init__(self, v, k1l, k1r, k2l, k2r, phase):
        self.v = v
        self.k1l, self.k1r = k1l, k1r
        self.k2l, self.k2r = k2l, k2r
        self.phase = phase


_AXIS_PAULI = (_X, _Y, _Z)
# Conjugations C with (C x C) U_d (C x C)^dag swapping one coordinate pair.
_SWAP_CONJ = {
    (0, 1): _S,                      # X -> Y
    (1, 2): (_I2 + 1j * _X) / np.sqrt(2),  # Z -> Y, Y -> -Z
    (0, 2): (_I2 + 1j * _Y) / np.sqrt(2),  # X -> Z, Z -> -X
}


def _shift(st: _Factors, i: int, steps: int):
    p = _AXIS_PAULI[i]
    for _ in range(abs(steps)):
        st.k1l = st.k1l @ p
        st.k1r = st.k1r @ p
        st.phase *= -1j if steps > 0 else 1j
        st.v[i] += np.pi / 2 if steps > 0 else -np.pi / 2


def _negate_pair(st: _Factors, i: int, j: int):
    p = _AXIS_PAULI[3 - i - j]
    st.k1l = st.k1l @ p
    st.k2l = p @ st.k2l
    st.v[i] = -st.v[i]
    st.v[j] = -st.v[j]


def _swap_pair(st: _Factors, i: int, j: int):
    c = _SWAP_CONJ[(min(i, j), max(i, j))]
    cd = c.conj().T
    st.k1l = st.k1l @ cd
    st.k1r = st.k1r @ cd
    st.k2l = c @ st.k2l
    st.k2r = c @ st.k2r
    st.v[i], st.v[j] = st.v[j], st.v[i]


def _canonicalize(st: _Factors):
    v = st.v
    for i in range(3):
        k = int(np.floor((v[i] + PI4) / (np.pi / 2)))
        if k:
            _shift(st, i, -k)
    # sort descending by magnitude (stable: strict comparisons only)
    for i, j in ((0, 1), (1, 2), (0, 1)):
        if abs(v[i]) < abs(v[j]):
            _swap_pair(st, i, j)
    if v[0] < 0:
        _negate_pair(st, 0, 2)
    if v[1] < 0:
        _negate_pair(st, 1, 2)
    # boundary alpha = pi/4 identifies +-gamma; normalize to gamma >= 0
    if v[0] >= PI4 - _BOUNDARY_EPS and v[2] < 0:
        _negate_pair(st, 0, 2)
        _shift(st, 0, 1)
    v += 0.0  # normalize -0.0


def kak_decompose(u: np.ndarray) -> KakFactors:
    """Canonical decomposition of a 4x4 unitary."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (4, 4):
        raise ValueError(f"expected a 4x4 matrix, got {u.shape}")
    if max_norm(u.conj().T @ u - np.eye(4)) >= 1e-10:
        raise ValueError("input is not unitary to 1e-10")
    det = np.linalg.det(u)
    phase = complex(det) ** 0.25
    u_su = u / phase

    m = _MAGIC_DAG @ u_su @ _MAGIC
    s = m @ m.T
    p = _orthogonal_eigvecs(s)
    if np.linalg.det(p) < 0:
        p = p.copy()
        p[:, 3] = -p[:, 3]
    lam = np.diagonal(p.T @ s @ p).copy()
    lam /= np.abs(lam)
    th = np.angle(lam[:3]) / 2
    th = np.append(th, -th.sum())
    d = np.exp(1j * th)
    k2_orth = (p.T @ m) / d[:, None]

    v = np.array(
        [(th[0] + th[2]) / 2, (th[1] + th[2]) / 2, (th[0] + th[1]) / 2]
    )
    k1l, k1r, s1 = _split_tensor_product(_MAGIC @ p @ _MAGIC_DAG)
    k2l, k2r, s2 = _split_tensor_product(_MAGIC @ k2_orth @ _MAGIC_DAG)

    st = _Factors(v, k1l, k1r, k2l, k2r, phase * s1 * s2)
    _canonicalize(st)

    factors = KakFactors(
        st.k1l, st.k1r, st.k2l, st.k2r,
        WeylCoordinates(st.v[0], st.v[1], st.v[2]),
        st.phase,
    )
    if max_norm(factors.reconstruct() - u) > 1e-9:
        raise RuntimeError("canonical decomposition failed to reconstruct its input")
    return factors


def weyl_of(u: np.ndarray) -> WeylCoordinates:
    """Interaction coordinates of a two-qubit unitary."""
    return kak_decompose(u).coords


def weyl_coords_batch(us: np.ndarray) -> np.ndarray:
    """Chamber coordinates for a stack of 4x4 unitaries, shape (n, 3).

    Eigenvalue-only path (no local factors); any branch or ordering chosen
    by the solver differs from the canonical point by chamber symmetries,
    which the coordinate reduction below removes.
    """
    us = np.asarray(us, dtype=complex)
    det = np.linalg.det(us)
    usu = us / (det ** 0.25)[:, None, None]
    m = _MAGIC_DAG @ usu @ _MAGIC
    s = m @ np.transpose(m, (0, 2, 1))
    lam = np.linalg.eigvals(s)
    lam /= np.abs(lam)
    th = np.angle(lam[:, :3]) / 2
    v = np.stack(
        [
            (th[:, 0] + th[:, 2]) / 2,
            (th[:, 1] + th[:, 2]) / 2,
            (th[:, 0] + th[:, 1]) / 2,
        ],
        axis=1,
    )
    v -= np.floor((v + PI4) / (np.pi / 2)) * (np.pi / 2)
    order = np.argsort(-np.abs(v), axis=1, kind="stable")
    v = np.take_along_axis(v, order, axis=1)
    neg = v[:, 0] < 0
    v[neg, 0] *= -1
    v[neg, 2] *= -1
    neg = v[:, 1] < 0
    v[neg, 1] *= -1
    v[neg, 2] *= -1
    boundary = (v[:, 0] >= PI4 - _BOUNDARY_EPS) & (v[:, 2] < 0)
    v[boundary, 2] *= -1
    return v + 0.0


def mirror_coords(w) -> WeylCoordinates:
    """Coordinates of the target composed with SWAP (sign(0) = +1)."""
    a, b, g = _coords_arr(w)
    sign = -1.0 if g < 0 else 1.0
    ma = PI4 - abs(g)
    mb = PI4 - b
    mg = sign * (a - PI4)
    if ma >= PI4 - _BOUNDARY_EPS:
        mg = abs(mg)
    return WeylCoordinates(float(ma), float(mb), float(mg + 0.0))


# -- approximate expansions --------------------------------------------------

def _is_supercontrolled(wb) -> bool:
    a, _, g = _coords_arr(wb)
    return abs(a - PI4) < 1e-9 and abs(g) < 1e-9


def expansion_fidelity(i: int, wt, wb=CNOT_COORDS) -> float:
    """Approximation fidelity of the i-application expansion of a target."""
    a, b, g = _coords_arr(wt)
    if i == 0:
        return float(
            (
                1
                + 4 * (np.cos(a) * np.cos(b) * np.cos(g)) ** 2
                + 4 * (np.sin(a) * np.sin(b) * np.sin(g)) ** 2
            )
            / 5
        )
    if i == 1:
        da, db, dg = _coords_arr(wb) - np.array([a, b, g])
        return float(
            (
                1
                + 4 * (np.cos(da) * np.cos(db) * np.cos(dg)) ** 2
                + 4 * (np.sin(da) * np.sin(db) * np.sin(dg)) ** 2
            )
            / 5
        )
    if i in (2, 3):
        if not _is_supercontrolled(wb):
            raise ValueError(f"{i}-application expansion needs a super-controlled basis")
        if i == 2:
            return float((1 + 4 * np.cos(g) ** 2) / 5)
        return 1.0
    raise ValueError("applications must be in 0..3")


def select_expansion(wt, f_b: float, allow_mirror: bool = False) -> ExpansionChoice:
    """Pick the application count maximizing F^(i) * F_b^i.

    Ties break toward fewer applications, then toward the unmirrored target.
    """
    if not 0 < f_b <= 1:
        raise ValueError("basis fidelity must be in (0, 1]")
    best = None
    for i in range(4):
        for mirrored in (False, True) if allow_mirror else (False,):
            w = mirror_coords(wt) if mirrored else wt
            f_approx = expansion_fidelity(i, w)
            score = f_approx * f_b**i
            if best is None or score > best[0]:
                best = (score, i, mirrored, f_approx)
    _, i, mirrored, f_approx = best
    return ExpansionChoice(i, mirrored, f_approx)


def _select_batch(v: np.ndarray, f_b: float, mirror: bool):
    """Vectorized select_expansion over coordinate rows; returns (apps, F_best)."""
    variants = [v]
    if mirror:
        a, b, g = v[:, 0], v[:, 1], v[:, 2]
        sign = np.where(g < 0, -1.0, 1.0)
        mv = np.stack([PI4 - np.abs(g), PI4 - b, sign * (a - PI4)], axis=1)
        mv[mv[:, 0] >= PI4 - _BOUNDARY_EPS, 2] = np.abs(
            mv[mv[:, 0] >= PI4 - _BOUNDARY_EPS, 2]
        )
        variants.append(mv)

    def f0(w):
        return (
            1
            + 4 * (np.cos(w[:, 0]) * np.cos(w[:, 1]) * np.cos(w[:, 2])) ** 2
            + 4 * (np.sin(w[:, 0]) * np.sin(w[:, 1]) * np.sin(w[:, 2])) ** 2
        ) / 5

    def f1(w):
        da, db, dg = PI4 - w[:, 0], -w[:, 1], -w[:, 2]
        return (
            1
            + 4 * (np.cos(da) * np.cos(db) * np.cos(dg)) ** 2
            + 4 * (np.sin(da) * np.sin(db) * np.sin(dg)) ** 2
        ) / 5

    cols = []
    apps_of_col = []
    for i in range(4):
        for w in variants:
            if i == 0:
                f = f0(w)
            elif i == 1:
                f = f1(w)
            elif i == 2:
                f = (1 + 4 * np.cos(w[:, 2]) ** 2) / 5
            else:
                f = np.ones(len(w))
            cols.append(f * f_b**i)
            apps_of_col.append(i)
    scores = np.stack(cols, axis=1)
    pick = np.argmax(scores, axis=1)  # first max: fewest applications, unmirrored first
    apps = np.asarray(apps_of_col)[pick]
    f_best = scores[np.arange(len(pick)), pick]
    return apps, f_best


def approx_application_stats(
    f_b: float, n_samples: int, mirror: bool, seed: int
) -> dict:
    """Application-count fractions, mean count, and effective fidelity over Haar targets."""
    from .model import haar_su4_batch

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    fractions = np.zeros(4)
    mean_apps = 0.0
    mean_best = 0.0
    done = 0
    while done < n_samples:
        chunk = min(50_000, n_samples - done)
        v = weyl_coords_batch(haar_su4_batch(chunk, rng))
        apps, f_best = _select_batch(v, f_b, mirror)
        fractions += np.bincount(apps, minlength=4)
        mean_apps += apps.sum()
        mean_best += f_best.sum()
        done += chunk
    fractions /= n_samples
    return {
        "basis_fidelity": f_b,
        "mirror": mirror,
        "samples": n_samples,
        "fractions": fractions.tolist(),
        "mean_applications": mean_apps / n_samples,
        "effective_fidelity": float((mean_best / n_samples) ** (1 / 3)),
    }


def effective_fidelity(f_b: float, mirror: bool, n_samples: int, seed: int = 7) -> float:
    """Cube root of the mean best-expansion fidelity over Haar targets."""
    if f_b == 1.0:
        return 1.0
    return approx_application_stats(f_b, n_samples, mirror, seed)["effective_fidelity"]


# -- chamber density and fidelity distributions ------------------------------

def weyl_density(w) -> float:
    """Haar density on the chamber, normalized over pi/4 >= a >= b >= |g|."""
    a, b, g = _coords_arr(w)
    return float(_density_abg(a, b, g))


def _density_abg(a, b, g):
    c4a, c4b, c4g = np.cos(4 * a), np.cos(4 * b), np.cos(4 * g)
    c8a, c8b, c8g = np.cos(8 * a), np.cos(8 * b), np.cos(8 * g)
    return (24 / np.pi) * (
        c4a * c8b + c4b * c8g + c4g * c8a - c8a * c4b - c8b * c4g - c8g * c4a
    )


def cdf_f2(f):
    """P(F^(2) < F) for the two-application expansion of a Haar target."""
    f = np.asarray(f, dtype=float)
    scalar = f.ndim == 0
    f = np.atleast_1d(f)
    out = np.zeros_like(f)
    mask = f > 3 / 5
    z = np.arccos(np.clip(np.sqrt(5 * f[mask] - 1) / 2, 0.0, 1.0))
    out[mask] = (
        np.cos(2 * z) ** 4
        * ((4 * z - np.pi) * (np.cos(4 * z) - 2) - 3 * np.sin(4 * z))
        / np.pi
    )
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if scalar else out


def cdf_f2m(f):
    """P(F^(2m) < F) for the mirror-aware two-application expansion."""
    f = np.asarray(f, dtype=float)
    scalar = f.ndim == 0
    f = np.atleast_1d(f)
    out = np.zeros_like(f)
    arg = np.clip(np.sqrt(np.clip(5 * f - 1, 0, None)) / 2, 0.0, 1.0)
    z = np.arccos(arg)
    mask = z < np.pi / 8
    zm = z[mask]
    out[mask] = (
        np.cos(4 * zm)
        * ((8 * zm - np.pi) * (np.cos(8 * zm) - 2) - 3 * np.sin(8 * zm))
        / np.pi
    )
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if scalar else out


# -- synthesis ---------------------------------------------------------------

def _u3_params(v: np.ndarray) -> tuple[float, float, float]:
    """(theta, phi, lambda) with u3(theta, phi, lambda) equal to v up to phase."""
    v = np.asarray(v, dtype=complex)
    lower = abs(v[1, 0])
    upper = abs(v[0, 0])
    theta = 2 * np.arctan2(lower, upper)
    if lower < 1e-12:
        return 0.0, 0.0, float(np.angle(v[1, 1] * np.conj(v[0, 0])))
    if upper < 1e-12:
        return float(np.pi), float(np.angle(v[1, 0] * np.conj(-v[0, 1]))), 0.0
    phi = float(np.angle(v[1, 0] * np.conj(v[0, 0])))
    lam = float(np.angle(-v[0, 1] * np.conj(v[0, 0])))
    return float(theta), phi, lam


def _local_layer(left: np.ndarray, right: np.ndarray) -> list[Gate]:
    # kron's left factor is the high bit of the matrix index, i.e. qubit 1
    return [u3_gate(*_u3_params(left), 1), u3_gate(*_u3_params(right), 0)]


def _core_layers(i: int, coords: WeylCoordinates) -> list[tuple[np.ndarray, np.ndarray]]:
    """Single-qubit layers of the i-CX core, earliest first.

    Entry 0 precedes the first CX and entry k follows the k-th; the caller
    folds the outer KAK locals into the first and last layers.
    """
    a, b, g = coords.as_tuple()
    sdg = _S.conj().T
    rzm = rz(-np.pi / 2)
    if i == 3:
        m1 = (rx(-2 * b) @ sdg @ rzm, rz(-2 * g) @ rzm @ _H)
        m2 = (rx(-2 * a), _H)
        return [(_I2, _I2), m2, m1, (_S, _S)]
    if i == 2:
        r = (_I2 + 1j * _X) / np.sqrt(2)
        return [(r.conj().T, r.conj().T), (rx(-2 * a), rz(-2 * b)), (r, r)]
    if i == 1:
        return [(_H, _I2), (_H @ rzm, _H @ rzm @ _H)]
    return [(_I2, _I2)]


def synthesize(u_target: np.ndarray, choice: ExpansionChoice) -> Circuit:
    """Two-qubit circuit (u3 + exactly `applications` CX) approximating the target.

    When mirrored, the gates implement target @ SWAP and the output
    permutation records the wire exchange.
    """
    target = np.asarray(u_target, dtype=complex)
    if choice.mirrored:
        target = target @ _SWAP4
    f = kak_decompose(target)
    coords = f.coords
    if choice.applications == 2:
        coords = WeylCoordinates(coords.alpha, coords.beta, 0.0)
    perm = (1, 0) if choice.mirrored else (0, 1)
    if choice.applications == 0:
        return Circuit(2, tuple(_local_layer(f.k1l @ f.k2l, f.k1r @ f.k2r)), perm)

    layers = _core_layers(choice.applications, coords)
    gates: list[Gate] = []
    pre0, pre1 = layers[0]
    gates.extend(_local_layer(pre0 @ f.k2l, pre1 @ f.k2r))
    for k in range(choice.applications):
        gates.append(cx_gate(1, 0))
        m0, m1 = layers[k + 1]
        if k + 1 == choice.applications:
            m0, m1 = f.k1l @ m0, f.k1r @ m1
        gates.extend(_local_layer(m0, m1))
    return Circuit(2, tuple(gates), perm)


def exact_synthesis(u_target: np.ndarray) -> Circuit:
    """Exact CX+u3 circuit using the fewest applications that stay exact."""
    coords = weyl_of(u_target)
    a, b, g = coords.as_tuple()
    tol = 1e-8
    if max(a, b, abs(g)) < tol:
        i = 0
    elif abs(a - PI4) < tol and b < tol and abs(g) < tol:
        i = 1
    elif abs(g) < tol:
        i = 2
    else:
        i = 3
    return synthesize(u_target, ExpansionChoice(i, False, 1.0))
