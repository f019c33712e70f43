import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robustscatter import errors, matcore

from conftest import rand_pd


def _sym_strategy(max_dim=5):
    return st.integers(2, max_dim).flatmap(
        lambda p: st.lists(
            st.floats(-10, 10, allow_nan=False), min_size=p * p, max_size=p * p
        ).map(lambda vals: 0.5 * (np.reshape(vals, (p, p)) + np.reshape(vals, (p, p)).T))
    )


class TestEigSym:
    def test_identity(self):
        vals, vecs = matcore.eig_sym(np.eye(3))
        assert np.allclose(vals, [1, 1, 1])
        assert np.allclose(vecs @ vecs.T, np.eye(3))

    def test_diagonal_with_sign_convention(self):
        vals, vecs = matcore.eig_sym(np.diag([4.0, 1.0]))
        assert np.allclose(vals, [4.0, 1.0])
        assert np.allclose(vecs, np.eye(2))

    def test_two_by_two_hand_eigenvalues(self):
        # characteristic polynomial x^2 - 4x + 3 has roots 3 and 1
        vals, _ = matcore.eig_sym([[2.0, 1.0], [1.0, 2.0]])
        assert np.allclose(vals, [3.0, 1.0], atol=1e-12)

    def test_nonfinite_rejected(self):
        with pytest.raises(errors.InvalidInput):
            matcore.eig_sym([[np.nan, 0.0], [0.0, 1.0]])

    @settings(max_examples=40, deadline=None)
    @given(_sym_strategy())
    def test_reconstruction_roundtrip(self, m):
        vals, vecs = matcore.eig_sym(m)
        recon = (vecs * vals) @ vecs.T
        scale = max(np.max(np.abs(m)), 1e-30)
        assert np.max(np.abs(recon - m)) <= 1e-10 * scale
        assert np.all(np.diff(vals) <= 1e-12)

    def test_sign_convention_largest_entry_positive(self, rng):
        m = rand_pd(4, rng)
        _, vecs = matcore.eig_sym(m)
        for j in range(4):
            k = np.argmax(np.abs(vecs[:, j]))
            assert vecs[k, j] > 0


class TestInvSqrt:
    def test_identity(self):
        assert np.allclose(matcore.inv_sqrt(np.eye(4)), np.eye(4))

    def test_diagonal(self):
        r = matcore.inv_sqrt(np.diag([4.0, 9.0]))
        assert np.allclose(r, np.diag([0.5, 1.0 / 3.0]), atol=1e-12)

    def test_rmr_recovers_identity(self):
        m = np.array([[2.0, 1.0], [1.0, 2.0]])
        r = matcore.inv_sqrt(m)
        assert np.max(np.abs(r @ m @ r - np.eye(2))) <= 1e-8
        assert np.allclose(r, r.T)

    def test_unique_psd_root_inverse(self, rng):
        m = rand_pd(4, rng)
        r = matcore.inv_sqrt(m)
        root = np.linalg.inv(r)
        assert np.max(np.abs(root @ root - m)) <= 1e-8 * np.max(np.abs(m))

    def test_singular_rejected(self):
        with pytest.raises(errors.SingularMatrix):
            matcore.inv_sqrt(np.diag([1.0, 0.0]))


class TestInvert:
    def test_identity_and_diagonal(self):
        assert np.allclose(matcore.invert(np.eye(3)), np.eye(3))
        assert np.allclose(matcore.invert(np.diag([2.0, 5.0])), np.diag([0.5, 0.2]))

    def test_roundtrip(self, rng):
        m = rand_pd(5, rng)
        r = matcore.invert(m)
        assert np.max(np.abs(r @ m - np.eye(5))) <= 1e-8

    def test_block_structured_inverse(self, rng):
        # V = [[I, A], [0, I]] diag(D, M) [[I, 0], [A', I]] inverts to a matrix
        # whose off-block is -D^{-1} A and whose top-left is D^{-1}
        delta = np.diag([0.7, 1.9])
        a = rng.standard_normal((2, 3))
        m = rand_pd(3, rng)
        top = np.hstack([np.eye(2), a])
        bot = np.hstack([np.zeros((3, 2)), np.eye(3)])
        lmat = np.vstack([top, bot])
        core = np.block(
            [[delta, np.zeros((2, 3))], [np.zeros((3, 2)), m]]
        )
        v = matcore.sym_part(lmat @ core @ lmat.T)
        k = matcore.invert(v)
        dinv = np.diag(1.0 / np.diag(delta))
        assert np.max(np.abs(k[:2, :2] - dinv)) <= 1e-10
        assert np.max(np.abs(k[:2, 2:] - (-dinv @ a))) <= 1e-10


class TestPseudoCorrelation:
    def test_diagonal_matrix_gives_zero(self):
        assert matcore.pseudo_correlation(np.diag([2.0, 3.0]), 0, 1) == 0.0

    def test_mve_counterexample_value(self):
        v = (1.0 / np.sqrt(3.0)) * np.array([[4.0, -2.0], [-2.0, 4.0]])
        assert matcore.pseudo_correlation(v, 0, 1) == pytest.approx(-0.5, abs=1e-12)

    def test_discrete_weighted_cov_value(self):
        from robustscatter import exact_wcov

        atoms = []
        for a, pa in ((-0.5, 0.8), (2.0, 0.2)):
            for b, pb in ((-0.5, 0.8), (2.0, 0.2)):
                atoms.append(((a, b), pa * pb))
        w4 = exact_wcov(atoms, 4.0)
        rho = matcore.pseudo_correlation(w4, 0, 1)
        assert rho == pytest.approx(4.5 / 22.5625, abs=1e-12)

    def test_scale_invariance(self, rng):
        v = rand_pd(3, rng)
        r1 = matcore.pseudo_correlation(v, 0, 2)
        r2 = matcore.pseudo_correlation(17.3 * v, 0, 2)
        assert r1 == pytest.approx(r2, abs=1e-14)

    def test_zero_diagonal_rejected(self):
        with pytest.raises(errors.DegenerateScale):
            matcore.pseudo_correlation(np.diag([0.0, 1.0]), 0, 1)

    @settings(max_examples=40, deadline=None)
    @given(_sym_strategy())
    def test_bounded_for_psd(self, m):
        psd = m @ m.T + 1e-6 * np.eye(m.shape[0])
        r = matcore.pseudo_correlation(psd, 0, 1)
        assert -1.0 - 1e-12 <= r <= 1.0 + 1e-12


class TestMahalanobis:
    def test_zero_at_center(self):
        assert matcore.mahalanobis_sq([1.0, 2.0], [1.0, 2.0], np.eye(2)) == 0.0

    def test_unit_vector_identity(self):
        assert matcore.mahalanobis_sq([1.0, 0.0], [0.0, 0.0], np.eye(2)) == 1.0

    def test_hand_inverted_quadratic_form(self):
        # inv([[2,1],[1,2]]) = (1/3)[[2,-1],[-1,2]]; (1,1) gives 2/3
        vinv = matcore.invert([[2.0, 1.0], [1.0, 2.0]])
        d2 = matcore.mahalanobis_sq([1.0, 1.0], [0.0, 0.0], vinv)
        assert d2 == pytest.approx(2.0 / 3.0, abs=1e-12)

    def test_affine_consistency(self, rng):
        from conftest import rand_full_rank

        p = 3
        x = rng.standard_normal(p)
        c = rng.standard_normal(p)
        v = rand_pd(p, rng)
        a = rand_full_rank(p, rng)
        b = rng.standard_normal(p)
        d2 = matcore.mahalanobis_sq(x, c, matcore.invert(v))
        d2t = matcore.mahalanobis_sq(
            a @ x + b, a @ c + b, matcore.invert(matcore.sym_part(a @ v @ a.T))
        )
        assert d2t == pytest.approx(d2, abs=1e-8 * max(1.0, d2))

    def test_dimension_mismatch(self):
        with pytest.raises(errors.InvalidInput):
            matcore.mahalanobis_sq([1.0, 2.0, 3.0], [0.0, 0.0], np.eye(2))
