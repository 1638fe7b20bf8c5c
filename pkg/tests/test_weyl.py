import numpy as np
import pytest

from qvbench.circuit import Circuit, GateKind, circuit_unitary, cx, swap
from qvbench.model import haar_su4, haar_su4_batch
from qvbench.weyl import (
    CNOT_COORDS,
    DCNOT_COORDS,
    SWAP_COORDS,
    ExpansionChoice,
    WeylCoordinates,
    avg_fidelity,
    cdf_f2,
    cdf_f2m,
    effective_fidelity,
    exact_synthesis,
    expansion_fidelity,
    kak_decompose,
    mirror_coords,
    select_expansion,
    synthesize,
    trace_product,
    u_d,
    weyl_coords_batch,
    weyl_density,
    weyl_of,
    _density_abg,
)

from conftest import random_unitary

PI4 = np.pi / 4
SWAP4 = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)


def random_chamber_point(rng) -> tuple[float, float, float]:
    a = rng.uniform(0, PI4 * 0.98)
    b = rng.uniform(0, a)
    g = rng.uniform(-b, b)
    return a, b, g


def random_local(rng) -> np.ndarray:
    return np.kron(random_unitary(2, rng), random_unitary(2, rng))


class TestKakDecompose:
    def test_identity(self):
        f = kak_decompose(np.eye(4))
        assert np.allclose(f.coords.as_array(), 0, atol=1e-12)
        # local factors proportional to identity
        for k in (f.k1l, f.k1r, f.k2l, f.k2r):
            assert abs(abs(np.trace(k)) - 2) < 1e-9

    def test_cnot_coords(self):
        u = circuit_unitary(Circuit(2, (cx(0, 1),)))
        assert np.allclose(weyl_of(u).as_array(), CNOT_COORDS, atol=1e-9)

    def test_swap_coords(self):
        u = circuit_unitary(Circuit(2, (swap(0, 1),)))
        f = kak_decompose(u)
        assert np.allclose(f.coords.as_array(), SWAP_COORDS, atol=1e-9)
        assert np.max(np.abs(f.reconstruct() - u)) < 1e-10

    def test_dcnot_coords(self):
        u = circuit_unitary(Circuit(2, (cx(0, 1), cx(1, 0))))
        assert np.allclose(weyl_of(u).as_array(), DCNOT_COORDS, atol=1e-9)

    def test_haar_roundtrip(self, rng):
        for _ in range(300):
            u = haar_su4(rng)
            f = kak_decompose(u)
            assert 1 - avg_fidelity(f.reconstruct(), u) < 1e-10

    def test_rejects_non_unitary(self):
        with pytest.raises(ValueError, match="unitary"):
            kak_decompose(np.ones((4, 4)))

    def test_high_symmetry_gates(self, rng):
        # dressed versions of gates at chamber boundaries stay numerically stable
        specials = [
            u_d(PI4, 0, 0), u_d(PI4, PI4, 0), u_d(PI4, PI4, PI4), u_d(PI4, PI4, -PI4),
            u_d(0.3, 0.3, 0.3), u_d(PI4, 0.2, 0.2), np.eye(4, dtype=complex),
        ]
        for base in specials:
            u = random_local(rng) @ base @ random_local(rng)
            f = kak_decompose(u)
            assert 1 - avg_fidelity(f.reconstruct(), u) < 1e-10

    def test_colliding_eigenvalue_mixture(self, rng):
        # gamma = pi/8 collides the eigenvalues of Re + 1.0 Im in the magic
        # basis, forcing the diagonalizer onto its fallback mixing weights
        for _ in range(20):
            a = rng.uniform(np.pi / 8, PI4)
            b = rng.uniform(np.pi / 8, a)
            u = random_local(rng) @ u_d(a, b, np.pi / 8) @ random_local(rng)
            f = kak_decompose(u)
            assert 1 - avg_fidelity(f.reconstruct(), u) < 1e-10


class TestWeylCoordinates:
    def test_chamber_validation(self):
        with pytest.raises(ValueError, match="chamber"):
            WeylCoordinates(0.1, 0.3, 0.0)
        with pytest.raises(ValueError, match="chamber"):
            WeylCoordinates(0.3, 0.1, 0.2)

    def test_local_invariance(self, rng):
        for _ in range(40):
            a, b, g = random_chamber_point(rng)
            u = u_d(a, b, g)
            w0 = weyl_of(u).as_array()
            w1 = weyl_of(random_local(rng) @ u @ random_local(rng)).as_array()
            assert np.allclose(w0, w1, atol=1e-9)
            assert np.allclose(w0, (a, b, g), atol=1e-9)

    def test_coords_lie_in_chamber(self, rng):
        for u in haar_su4_batch(100, rng):
            w = weyl_of(u)
            assert PI4 + 1e-9 >= w.alpha >= w.beta >= abs(w.gamma) - 1e-9

    def test_batch_matches_single(self, rng):
        us = haar_su4_batch(100, rng)
        batch = weyl_coords_batch(us)
        for k in range(len(us)):
            assert np.allclose(batch[k], weyl_of(us[k]).as_array(), atol=1e-9)


class TestMirror:
    def test_identity_mirrors_to_swap(self):
        w = mirror_coords((0.0, 0.0, 0.0))
        assert np.allclose(w.as_array(), SWAP_COORDS, atol=1e-12)

    def test_cnot_mirrors_to_dcnot(self):
        w = mirror_coords(CNOT_COORDS)
        assert np.allclose(w.as_array(), DCNOT_COORDS, atol=1e-12)

    def test_matches_composition_with_swap(self, rng):
        for _ in range(100):
            a, b, g = random_chamber_point(rng)
            direct = weyl_of(u_d(a, b, g) @ SWAP4).as_array()
            assert np.allclose(mirror_coords((a, b, g)).as_array(), direct, atol=1e-9)

    def test_involutive(self, rng):
        for _ in range(50):
            w = random_chamber_point(rng)
            back = mirror_coords(mirror_coords(w)).as_array()
            assert np.allclose(back, w, atol=1e-9)


class TestTraceAndFidelity:
    def test_equal_coords_trace_four(self):
        assert trace_product((0.1, 0.05, 0.0), (0.1, 0.05, 0.0)) == pytest.approx(4)

    def test_cnot_vs_identity(self):
        assert trace_product(CNOT_COORDS, (0, 0, 0)) == pytest.approx(2 * np.sqrt(2))

    def test_matches_dense_product(self, rng):
        for _ in range(100):
            wc = random_chamber_point(rng)
            wt = random_chamber_point(rng)
            dense = np.trace(u_d(*wc).conj().T @ u_d(*wt))
            assert abs(trace_product(wc, wt) - dense) < 1e-12

    def test_avg_fidelity_identity(self, rng):
        u = haar_su4(rng)
        assert avg_fidelity(u, u) == pytest.approx(1.0)

    def test_avg_fidelity_swap(self):
        assert avg_fidelity(np.eye(4), SWAP4) == pytest.approx(0.4)

    def test_monte_carlo_state_fidelity(self, rng):
        # oracle: F_avg = E_psi |<psi| U^dag V |psi>|^2 over Haar states
        u, v = haar_su4(rng), haar_su4(rng)
        w = u.conj().T @ v
        n = 100_000
        psi = rng.standard_normal((n, 4)) + 1j * rng.standard_normal((n, 4))
        psi /= np.linalg.norm(psi, axis=1, keepdims=True)
        vals = np.abs(np.einsum("ni,ij,nj->n", psi.conj(), w, psi)) ** 2
        assert abs(avg_fidelity(u, v) - vals.mean()) < 3 * vals.std() / np.sqrt(n)


class TestExpansions:
    def test_three_applications_exact(self, rng):
        assert expansion_fidelity(3, random_chamber_point(rng)) == 1.0

    def test_two_applications_swap(self):
        assert expansion_fidelity(2, SWAP_COORDS) == pytest.approx(3 / 5)

    def test_zero_applications_local_target(self):
        assert expansion_fidelity(0, (0.0, 0.0, 0.0)) == pytest.approx(1.0)

    def test_one_application_at_basis(self):
        assert expansion_fidelity(1, CNOT_COORDS) == pytest.approx(1.0)

    def test_two_applications_requires_supercontrolled(self):
        with pytest.raises(ValueError, match="super"):
            expansion_fidelity(2, (0.1, 0.0, 0.0), wb=(0.2, 0.1, 0.05))

    def test_one_application_monotone_in_each_delta(self):
        deltas = np.linspace(0, PI4, 30)
        f_alpha = [expansion_fidelity(1, (PI4 - d, 0, 0)) for d in deltas]
        assert all(x >= y - 1e-12 for x, y in zip(f_alpha, f_alpha[1:]))
        f_beta = [expansion_fidelity(1, (PI4, d, 0)) for d in deltas]
        assert all(x >= y - 1e-12 for x, y in zip(f_beta, f_beta[1:]))


class TestSelectExpansion:
    def test_perfect_basis_prefers_exact(self, rng):
        a, b, g = random_chamber_point(rng)
        g = max(abs(g), 0.05)
        choice = select_expansion((a, max(b, 0.06), g), 1.0)
        assert choice.applications == 3 and not choice.mirrored

    def test_gamma_zero_ties_to_two(self):
        choice = select_expansion((0.3, 0.2, 0.0), 1.0)
        assert choice.applications == 2

    def test_fb_validation(self):
        with pytest.raises(ValueError):
            select_expansion((0.1, 0.0, 0.0), 0.0)

    def test_fraction_profile_at_097(self, rng):
        # smaller-sample version of the published operating point
        v = weyl_coords_batch(haar_su4_batch(20_000, rng))
        apps = np.array([select_expansion(w, 0.97).applications for w in v[:2000]])
        frac3 = (apps == 3).mean()
        frac2 = (apps == 2).mean()
        assert 0.16 < frac3 < 0.28
        assert 0.70 < frac2 < 0.82

    def test_mirror_dominates(self, rng):
        for w in weyl_coords_batch(haar_su4_batch(200, rng)):
            plain = select_expansion(w, 0.97, allow_mirror=False)
            mirrored = select_expansion(w, 0.97, allow_mirror=True)
            best = lambda ch: ch.predicted_fidelity * 0.97**ch.applications
            assert best(mirrored) >= best(plain) - 1e-12


class TestSynthesize:
    def test_exact_matches_target(self, rng):
        for _ in range(100):
            u = haar_su4(rng)
            circ = synthesize(u, ExpansionChoice(3, False, 1.0))
            assert circ.count(GateKind.CX) == 3
            achieved = avg_fidelity(circuit_unitary(Circuit(2, circ.gates)), u)
            assert 1 - achieved < 1e-9

    @pytest.mark.parametrize("i", [0, 1, 2])
    def test_approximate_matches_closed_form(self, i, rng):
        for _ in range(50):
            u = haar_su4(rng)
            predicted = expansion_fidelity(i, weyl_of(u))
            circ = synthesize(u, ExpansionChoice(i, False, predicted))
            assert circ.count(GateKind.CX) == i
            achieved = avg_fidelity(circuit_unitary(Circuit(2, circ.gates)), u)
            assert abs(achieved - predicted) < 1e-9

    def test_two_applications_on_known_point(self):
        u = u_d(0.3, 0.2, 0.15)
        circ = synthesize(u, ExpansionChoice(2, False, expansion_fidelity(2, (0.3, 0.2, 0.15))))
        achieved = avg_fidelity(circuit_unitary(Circuit(2, circ.gates)), u)
        assert achieved == pytest.approx((1 + 4 * np.cos(0.15) ** 2) / 5, abs=1e-9)

    def test_zero_applications_on_local_gate(self, rng):
        u = np.kron(random_unitary(2, rng), random_unitary(2, rng))
        circ = synthesize(u, ExpansionChoice(0, False, 1.0))
        assert circ.count(GateKind.CX) == 0
        assert 1 - avg_fidelity(circuit_unitary(Circuit(2, circ.gates)), u) < 1e-9

    def test_mirrored_targets_swap_composition(self, rng):
        for _ in range(30):
            u = haar_su4(rng)
            circ = synthesize(u, ExpansionChoice(3, True, 1.0))
            assert circ.output_permutation == (1, 0)
            gates_u = circuit_unitary(Circuit(2, circ.gates))
            assert 1 - avg_fidelity(gates_u, u @ SWAP4) < 1e-9

    def test_exact_synthesis_uses_fewest_applications(self, rng):
        locals_only = np.kron(random_unitary(2, rng), random_unitary(2, rng))
        assert exact_synthesis(locals_only).count(GateKind.CX) == 0
        assert exact_synthesis(circuit_unitary(Circuit(2, (cx(0, 1),)))).count(GateKind.CX) == 1
        assert exact_synthesis(u_d(0.3, 0.21, 0.0)).count(GateKind.CX) == 2
        assert exact_synthesis(haar_su4(rng)).count(GateKind.CX) == 3


class TestDensityAndCdfs:
    def test_density_normalizes_over_chamber(self):
        n = 80
        x = (np.arange(n) + 0.5) * PI4 / n
        g = np.concatenate([-x[::-1], x])
        A, B, G = np.meshgrid(x, x, g, indexing="ij")
        mask = (A >= B) & (B >= np.abs(G))
        total = np.sum(_density_abg(A, B, G) * mask) * (PI4 / n) ** 2 * (PI4 / n)
        assert total == pytest.approx(1.0, abs=2e-3)

    def test_density_scalar_interface(self):
        assert weyl_density((0.5, 0.3, 0.1)) >= 0

    def test_cdf_f2_support(self):
        assert cdf_f2(0.6) == 0.0
        assert cdf_f2(0.59) == 0.0
        assert cdf_f2(1.0) == pytest.approx(1.0)

    def test_cdf_f2m_support(self):
        # support boundary at F = (3 + sqrt(2))/5
        edge = (3 + np.sqrt(2)) / 5
        assert cdf_f2m(edge - 1e-6) == 0.0
        assert cdf_f2m(1.0) == pytest.approx(1.0)
        assert cdf_f2m(0.88) == 0.0

    def test_cdfs_monotone(self):
        f = np.linspace(0.2, 1.0, 400)
        for fn in (cdf_f2, cdf_f2m):
            vals = fn(f)
            assert np.all(np.diff(vals) >= -1e-12)

    def test_cdf_matches_empirical_medians(self, rng):
        v = weyl_coords_batch(haar_su4_batch(10_000, rng))
        f2 = (1 + 4 * np.cos(v[:, 2]) ** 2) / 5
        med = float(np.median(f2))
        assert med == pytest.approx(0.99, abs=0.002)
        assert cdf_f2(med) == pytest.approx(0.5, abs=0.02)
        f2m = (1 + 4 * np.cos(np.minimum(np.abs(v[:, 2]), np.abs(v[:, 0] - PI4))) ** 2) / 5
        medm = float(np.median(f2m))
        assert medm == pytest.approx(0.997, abs=0.002)
        assert cdf_f2m(medm) == pytest.approx(0.5, abs=0.02)


def test_effective_fidelity_perfect_basis():
    assert effective_fidelity(1.0, False, 100) == 1.0
