import numpy as np
import pytest

from sep2n.matrixcore import (
    DensityState,
    ToleranceConfig,
    hermitize,
    numerical_rank_kernel,
    operator_norm,
    partial_expectation,
    partial_transpose,
    partial_transpose_matrix,
    pseudoinverse,
    psd_difference_check,
)
from sep2n.productfinder import ProductVector

from helpers import (
    build_separable,
    eig_rank,
    power_iteration_norm,
    psd_difference_oracle,
    random_product_vector,
    random_psd,
)


def test_tolerance_config_validation():
    ToleranceConfig()
    with pytest.raises(ValueError):
        ToleranceConfig(rank_rel_tol=0.0)
    with pytest.raises(ValueError):
        ToleranceConfig(rank_rel_tol=2.0)
    with pytest.raises(ValueError):
        ToleranceConfig(psd_tol=-1e-9)


class TestPartialTranspose:
    def test_identity_fixed_point(self):
        m = np.eye(4, dtype=complex)
        assert np.allclose(partial_transpose_matrix(m, 2), m)

    def test_product_projector_maps_to_conjugate(self):
        rng = np.random.default_rng(0)
        pv = random_product_vector(rng, 3)
        pt = partial_transpose_matrix(pv.projector(), 3)
        partner = pv.conjugate_partner.projector()
        assert np.allclose(pt, partner, atol=1e-12)

    def test_involution_trace_hermiticity(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            n = rng.integers(1, 5)
            m = hermitize(rng.standard_normal((2 * n, 2 * n))
                          + 1j * rng.standard_normal((2 * n, 2 * n)))
            pt = partial_transpose_matrix(m, n)
            assert np.allclose(partial_transpose_matrix(pt, n), m)
            assert abs(np.trace(pt) - np.trace(m)) < 1e-12
            assert np.allclose(pt, pt.conj().T, atol=1e-12)

    def test_block_identity_under_qubit_contraction(self):
        # <e_i| rho |e_j> equals <e_j*| rho^TA |e_i*> as N x N blocks
        rng = np.random.default_rng(2)
        n = 4
        m = hermitize(rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8)))
        pt = partial_transpose_matrix(m, n)
        for _ in range(10):
            ei = rng.standard_normal(2) + 1j * rng.standard_normal(2)
            ej = rng.standard_normal(2) + 1j * rng.standard_normal(2)
            lhs = partial_expectation(m, n, ei, ej)
            rhs = partial_expectation(pt, n, np.conj(ej), np.conj(ei))
            assert np.allclose(lhs, rhs, atol=1e-12)

    def test_state_level_operation(self):
        rng = np.random.default_rng(3)
        m, _, _ = build_separable(rng, 3, 4)
        state = DensityState(m)
        pt_state = partial_transpose(state)
        assert np.allclose(pt_state.matrix, state.pt_matrix)
        back = partial_transpose(pt_state)
        assert np.allclose(back.matrix, state.matrix, atol=1e-12)


class TestRankKernel:
    def test_zero_matrix(self):
        info = numerical_rank_kernel(np.zeros((4, 4)))
        assert info.rank == 0
        assert info.kernel_basis.shape == (4, 4)

    def test_rank_one_projector(self):
        v = np.array([1.0, 1j, 0.0, -1.0]) / np.sqrt(3)
        info = numerical_rank_kernel(np.outer(v, v.conj()))
        assert info.rank == 1
        assert info.kernel_basis.shape[1] == 3

    def test_three_product_projectors_rank_three(self):
        rng = np.random.default_rng(4)
        m, _, _ = build_separable(rng, 3, 3)
        info = numerical_rank_kernel(m)
        assert info.rank == eig_rank(m) == 3
        # rank + kernel dimension covers the space, bases orthonormal
        assert info.rank + info.kernel_basis.shape[1] == 6
        assert np.allclose(info.kernel_basis.conj().T @ info.kernel_basis, np.eye(3), atol=1e-10)
        assert np.linalg.norm(m @ info.kernel_basis) < 1e-10

    def test_rank_stable_under_small_perturbation(self):
        rng = np.random.default_rng(5)
        m, _, _ = build_separable(rng, 4, 5)
        state = DensityState(m)
        noise = hermitize(rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8)))
        noise *= 1e-13 * state.norm / np.linalg.norm(noise, 2)
        perturbed = DensityState(m + noise)
        assert perturbed.rank == state.rank
        assert perturbed.pt_rank == state.pt_rank


class TestPseudoinverse:
    def test_diagonal(self):
        m = np.diag([1.0, 2.0]).astype(complex)
        assert np.allclose(pseudoinverse(m), np.diag([1.0, 0.5]))

    def test_projector_is_own_inverse(self):
        v = np.array([1.0, 1.0]) / np.sqrt(2)
        p = np.outer(v, v)
        assert np.allclose(pseudoinverse(p.astype(complex)), p)

    def test_rank_two_psd(self):
        rng = np.random.default_rng(6)
        h = random_psd(rng, 4, rank=2)
        hinv = pseudoinverse(h)
        assert np.allclose(h @ hinv @ h, h, atol=1e-10 * np.linalg.norm(h, 2))
        # product is the range projector
        proj = h @ hinv
        assert np.allclose(proj @ proj, proj, atol=1e-10)

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            pseudoinverse(np.array([[0.0, 1.0], [0.0, 0.0]]))


class TestPsdDifference:
    def test_scaled_identity(self):
        assert psd_difference_check(2 * np.eye(3), np.eye(3))

    def test_kernel_containment_failure(self):
        x = np.diag([1.0, 0.0]).astype(complex)
        y = np.diag([0.0, 1.0]).astype(complex)
        assert not psd_difference_check(x, y)

    def test_boundary_at_maximal_weight(self):
        rng = np.random.default_rng(7)
        m, gens, _ = build_separable(rng, 3, 4)
        v = gens[0].vector
        lam0 = 1.0 / float(np.real(np.vdot(v, pseudoinverse(m) @ v)))
        proj = np.outer(v, v.conj())
        tol = ToleranceConfig()
        assert psd_difference_check(m, lam0 * proj, tol)
        assert not psd_difference_check(m, lam0 * (1 + 10 * tol.psd_tol) * proj, tol)
        # independent spectral confirmation
        assert psd_difference_oracle(m, lam0 * proj)

    def test_rejects_non_psd_input(self):
        with pytest.raises(ValueError):
            psd_difference_check(np.diag([1.0, -1.0]), np.eye(2))

    def test_agrees_with_spectral_oracle(self):
        rng = np.random.default_rng(8)
        trues = falses = 0
        for _ in range(1000):
            dim = int(rng.integers(2, 6))
            x = random_psd(rng, dim, rank=int(rng.integers(1, dim + 1)))
            y = random_psd(rng, dim, rank=int(rng.integers(1, dim + 1)))
            # bias toward genuinely comparable pairs half the time
            if rng.random() < 0.5:
                y = x * rng.uniform(0.2, 1.2) - random_psd(rng, dim) * 1e-3
                y = hermitize(y)
                w = np.linalg.eigvalsh(y)
                if w[0] < 0:
                    y -= w[0] * np.eye(dim)
            margin = np.min(np.linalg.eigvalsh(hermitize(x - y))) / np.linalg.norm(x, 2)
            if abs(margin) <= 1e-7:
                # on the PSD boundary the two tolerance conventions may
                # legitimately split; only decisive pairs are comparable
                continue
            expected = psd_difference_oracle(x, y)
            assert psd_difference_check(x, y) == expected
            trues += int(expected)
            falses += int(not expected)
        assert trues > 100 and falses > 100


class TestOperatorNorm:
    def test_identity(self):
        assert operator_norm(np.eye(5)) == pytest.approx(1.0)

    def test_sign_insensitive(self):
        assert operator_norm(np.diag([3.0, -1.0])) == pytest.approx(3.0)

    def test_matches_power_iteration(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            m = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
            assert operator_norm(m) == pytest.approx(power_iteration_norm(m, rng), abs=1e-10)


class TestDensityState:
    def test_validation_rejects_non_hermitian(self):
        m = np.zeros((4, 4), dtype=complex)
        m[0, 1] = 1.0
        with pytest.raises(ValueError):
            DensityState(m)

    def test_validation_rejects_negative(self):
        with pytest.raises(ValueError):
            DensityState(np.diag([1.0, 1.0, 1.0, -0.5]).astype(complex))

    def test_validation_rejects_nan(self):
        m = np.eye(4, dtype=complex)
        m[0, 0] = np.nan
        with pytest.raises(ValueError):
            DensityState(m)

    def test_caches_and_ppt_flag(self):
        rng = np.random.default_rng(10)
        m, _, _ = build_separable(rng, 2, 2)
        state = DensityState(m)
        assert state.rank == 2
        assert state.is_ppt
        assert state.kernel_basis.shape == (4, 2)
        assert np.linalg.norm(state.matrix @ state.kernel_basis) < 1e-10

    def test_unnormalized_trace_accepted(self):
        rng = np.random.default_rng(11)
        m, _, _ = build_separable(rng, 2, 3, unit_trace=False)
        state = DensityState(m)
        assert state.trace > 1.0
