import itertools

import numpy as np
import pytest
import scipy.optimize

from robustscatter import (
    IRLSSettings,
    ScatterSpec,
    errors,
    invert,
    make_estimator,
    matcore,
    md_index,
    observational_regression,
    partial_correlation,
    randgen,
    two_scatter_ica,
)

from conftest import rand_full_rank, rand_pd

TIGHT = IRLSSettings(max_iter=2000, tol=1e-13)


def product_join(a, b):
    na, nb = a.shape[0], b.shape[0]
    return np.hstack([np.repeat(a, nb, axis=0), np.tile(b, (na, 1))])


class TestMdIndex:
    def test_identity_is_zero(self):
        assert md_index(np.eye(3)) == 0.0

    def test_permutation_times_diagonal_is_zero(self):
        g = np.eye(4)[[3, 1, 0, 2]] @ np.diag([2.0, -1.0, 0.3, 5.0])
        assert md_index(g) == pytest.approx(0.0, abs=1e-12)

    def test_against_per_permutation_least_squares(self, rng):
        # independent oracle: for each permutation minimize over the diagonal
        # numerically, then take the best permutation
        for _ in range(5):
            g = rand_full_rank(3, rng)
            best = np.inf
            for perm in itertools.permutations(range(3)):
                pg = g[list(perm), :]

                def objective(d, pg=pg):
                    return np.sum((np.diag(d) @ pg - np.eye(3)) ** 2)

                res = scipy.optimize.minimize(
                    objective, x0=1.0 / np.diag(pg).clip(1e-3), method="Nelder-Mead",
                    options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 20000},
                )
                best = min(best, res.fun)
            oracle = np.sqrt(best / (3 - 1))
            assert md_index(g) == pytest.approx(oracle, abs=1e-6)

    def test_range_and_worst_case(self):
        theta = np.pi / 4
        rot = np.array(
            [[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]
        )
        assert md_index(rot) == pytest.approx(1.0, abs=1e-12)

    def test_exact_invariance_under_pow2_scaling(self, rng):
        g = rand_full_rank(4, rng)
        base = md_index(g)
        d = np.diag([0.5, -2.0, 8.0, -0.25])
        perm = np.eye(4)[[1, 3, 2, 0]]
        assert md_index(perm @ d @ g) == base

    def test_zero_row_rejected(self):
        g = np.eye(3)
        g[1] = 0.0
        with pytest.raises(errors.InvalidInput):
            md_index(g)

    def test_dimension_cap(self):
        with pytest.raises(errors.Unsupported):
            md_index(np.eye(9))


class TestTwoScatterIca:
    def test_fobi_recovers_independent_sources(self):
        vals = []
        for r in range(100):
            x = randgen.independent_product(
                [randgen.chisq_std(1), randgen.chisq_std(2)],
                5000,
                randgen.mix_seed(99, r),
            )
            res = two_scatter_ica(x, "cov", make_estimator("wcov", alpha=2.0))
            vals.append(md_index(res.W))
        assert np.median(vals) < 0.1

    def test_affine_invariance_of_md(self, rng):
        x = randgen.independent_product(
            [randgen.chisq_std(1), randgen.chisq_std(2)], 2000, seed=123
        )
        a = rand_full_rank(2, rng)
        w_id = two_scatter_ica(x, "cov", make_estimator("wcov", alpha=2.0)).W
        w_mix = two_scatter_ica(x @ a.T, "cov", make_estimator("wcov", alpha=2.0)).W
        assert md_index(w_mix @ a) == pytest.approx(md_index(w_id), abs=1e-8)

    def test_scatter_pair_exchange(self):
        x = randgen.independent_product(
            [randgen.chisq_std(1), randgen.chisq_std(2)], 2000, seed=7
        )
        tyl = make_estimator("tyl", irls=TIGHT)
        hub = make_estimator("hub", irls=TIGHT)
        md_ab = md_index(two_scatter_ica(x, tyl, hub).W)
        md_ba = md_index(two_scatter_ica(x, hub, tyl).W)
        assert md_ab == pytest.approx(md_ba, abs=1e-6)

    def test_symmetric_sources_with_distinct_kurtosis(self):
        # both sources symmetric (uniform vs normal): every scatter of the
        # source vector is diagonal, so even pairs without the joint
        # independence property recover the components
        rng = np.random.default_rng(17)
        n = 4000
        s = np.column_stack(
            [
                rng.uniform(-np.sqrt(3), np.sqrt(3), n),
                rng.standard_normal(n),
            ]
        )
        pairs = [
            ("cov", make_estimator("wcov", alpha=2.0)),
            ("cau", "cov"),
            ("scau", "cov"),
            ("tyl", "hub"),
            ("styl", "shub"),
        ]
        for v1, v2 in pairs:
            md = md_index(two_scatter_ica(s, v1, v2).W)
            assert md < 0.25, (v1, v2, md)

    def test_eigenvalue_ties_warn(self, rng):
        x = rng.standard_normal((500, 2))
        white = (x - x.mean(axis=0)) @ matcore.inv_sqrt(np.cov(x, rowvar=False))
        with pytest.warns(errors.TieWarning):
            two_scatter_ica(white, "cov", "cov")

    def test_result_conventions(self):
        x = randgen.independent_product(
            [randgen.chisq_std(1), randgen.chisq_std(2)], 1500, seed=55
        )
        res = two_scatter_ica(x, "cov", make_estimator("wcov", alpha=2.0))
        assert np.all(np.diff(res.kurtosis_eigenvalues) <= 1e-12)
        for row in res.W:
            assert row[np.argmax(np.abs(row))] > 0
        assert res.v1_tag == "COV"


class TestObservationalRegression:
    def test_cov_matches_least_squares_population(self, rng):
        n = 3000
        x = rng.standard_normal((n, 2))
        b_true = np.array([[2.0], [-1.0]])
        y = x @ b_true + 0.5 * rng.standard_normal((n, 1))
        res = observational_regression(x, y, "cov")
        ls, *_ = np.linalg.lstsq(
            np.column_stack([x, np.ones(n)]), y, rcond=None
        )
        assert np.max(np.abs(res.B - ls[:2])) <= 1e-8
        assert res.alpha is not None

    def test_symmetric_errors_any_estimator_consistent(self):
        rng = np.random.default_rng(4)
        n = 2000
        x = rng.standard_normal((n, 1)) ** 3  # skewed regressors are fine
        eps = rng.standard_normal((n, 1))  # symmetric errors
        y = 3.0 * x + eps
        for name in ("cau", "tyl", "shub"):
            res = observational_regression(x, y, make_estimator(name))
            assert res.B[0, 0] == pytest.approx(3.0, abs=0.15)

    def test_equivariance_identities(self, rng):
        x = rng.standard_normal((50, 2))
        y = x @ np.array([[1.0, 0.5], [0.0, 2.0]]) + rng.standard_normal((50, 2))
        est = make_estimator("scau", irls=TIGHT)
        b0 = observational_regression(x, y, est).B
        c = rng.standard_normal((2, 2))
        m = rng.standard_normal((2, 2)) + 2 * np.eye(2)
        a = rand_full_rank(2, rng)
        assert np.allclose(
            observational_regression(x, y + x @ c, est).B, b0 + c, atol=1e-10
        )
        assert np.allclose(
            observational_regression(x, y @ m, est).B, b0 @ m, atol=1e-10
        )
        assert np.allclose(
            observational_regression(x @ a.T, y, est).B,
            np.linalg.solve(a.T, b0),
            atol=1e-10,
        )

    def test_exact_block_independent_construction(self, rng):
        # empirically exact independence of regressors and errors: the
        # symmetrized fit recovers the generating slope to numerical precision
        x_block = (rng.standard_normal((5, 1)) + 0.8) ** 3
        e_block = rng.standard_normal((5, 1)) ** 3
        joined = product_join(x_block, e_block)
        x = joined[:, :1]
        y = 2.5 * x + joined[:, 1:]
        for name in ("scov", "scau", "shub"):
            res = observational_regression(x, y, make_estimator(name, irls=TIGHT))
            assert res.B[0, 0] == pytest.approx(2.5, abs=1e-8)

    def test_symmetrized_alpha_not_identified(self, rng):
        x = rng.standard_normal((40, 1))
        y = x * 2.0 + rng.standard_normal((40, 1))
        res = observational_regression(x, y, "scau")
        assert res.alpha is None

    def test_row_mismatch_rejected(self, rng):
        with pytest.raises(errors.InvalidInput):
            observational_regression(
                rng.standard_normal((10, 2)), rng.standard_normal((11, 1)), "cov"
            )


class TestPartialCorrelation:
    def test_gaussian_analytic_value(self, rng):
        # z ~ N(0, S): rho_uv.x = -K_12/sqrt(K_11 K_22) with K = S^{-1}
        s = rand_pd(4, rng)
        k = invert(s)
        analytic = -k[0, 1] / np.sqrt(k[0, 0] * k[1, 1])
        z = randgen.sample(
            randgen.multivariate_normal(np.zeros(4), s), 60_000, seed=42
        )
        res = partial_correlation(z[:, 0], z[:, 1], z[:, 2:], "cov")
        assert res.rho == pytest.approx(analytic, abs=0.02)

    def test_two_route_agreement(self, rng):
        z = rng.standard_normal((300, 4)) ** 3
        for name in ("cov", "cau", "styl"):
            res = partial_correlation(z[:, 0], z[:, 1], z[:, 2:], make_estimator(name))
            assert res.rho == pytest.approx(res.rho_conditional, abs=1e-10)
            assert -1.0 <= res.rho <= 1.0

    def test_exact_block_independent_construction(self, rng):
        # u = 4x + e1, v = 5x + e2 with (x, e1, e2) empirically independent:
        # the symmetrized plug-in partial correlation vanishes identically
        xb = (rng.standard_normal((4, 1)) + 1.0) ** 3
        e1 = rng.standard_normal((4, 1)) ** 3
        e2 = rng.exponential(1.0, size=(4, 1))
        joined = product_join(product_join(xb, e1), e2)
        x, eps1, eps2 = joined[:, 0], joined[:, 1], joined[:, 2]
        u = 4.0 * x + eps1
        v = 5.0 * x + eps2
        for name in ("scov", "scau", "shub"):
            res = partial_correlation(u, v, x[:, None], make_estimator(name, irls=TIGHT))
            assert abs(res.rho) <= 1e-8

    def test_needs_conditioning_column(self, rng):
        with pytest.raises(errors.InvalidInput):
            partial_correlation(
                rng.standard_normal(10), rng.standard_normal(10),
                np.empty((10, 0)), "cov"
            )
