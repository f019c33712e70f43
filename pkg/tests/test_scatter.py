import itertools

import numpy as np
import pytest
import scipy.integrate
import scipy.stats

from robustscatter import (
    IRLSSettings,
    ScatterSpec,
    errors,
    exact_wcov,
    huber_tuning,
    m_estimate,
    matcore,
    randgen,
    sample_cov,
    wcov,
)

from conftest import rand_full_rank, rand_pd

TWO_POINT = ((-0.5, 0.8), (2.0, 0.2))


def two_point_product_atoms():
    atoms = []
    for a, pa in TWO_POINT:
        for b, pb in TWO_POINT:
            atoms.append(((a, b), pa * pb))
    return atoms


TIGHT = IRLSSettings(max_iter=2000, tol=1e-13)


class TestSampleCov:
    def test_two_points_hand_value(self):
        res = sample_cov(np.array([[0.0, 0.0], [2.0, 0.0]]))
        assert np.allclose(res.location, [1.0, 0.0])
        assert np.allclose(res.scatter, np.diag([1.0, 0.0]))

    def test_affine_equivariance_identity(self, rng):
        x = rng.standard_normal((40, 3))
        a = rand_full_rank(3, rng)
        b = rng.standard_normal(3)
        lhs = sample_cov(x @ a.T + b).scatter
        rhs = a @ sample_cov(x).scatter @ a.T
        assert np.max(np.abs(lhs - rhs)) <= 1e-10 * np.max(np.abs(rhs))

    def test_offdiagonals_shrink_with_n(self):
        meds = []
        for n in (500, 8000):
            vals = []
            for r in range(30):
                x = randgen.independent_product(
                    [randgen.chisq_std(1)] * 2, n, randgen.mix_seed(4, 100 * n + r)
                )
                vals.append(abs(sample_cov(x).scatter[0, 1]))
            meds.append(np.median(vals))
        # expected ratio sqrt(8000/500) = 4; allow generous slack
        assert meds[1] < 0.5 * meds[0]

    def test_fixed_location(self):
        x = np.array([[1.0, 0.0], [3.0, 0.0]])
        res = sample_cov(x, fixed_location=[0.0, 0.0])
        assert np.allclose(res.scatter, [[5.0, 0.0], [0.0, 0.0]])
        assert np.allclose(res.location, [0.0, 0.0])


class TestWcov:
    def test_alpha_zero_equals_cov_exactly(self, rng):
        x = rng.standard_normal((50, 3))
        np.testing.assert_array_equal(
            wcov(x, 0.0).scatter, sample_cov(x).scatter
        )

    def test_oracle_equivalence_on_empirical_atoms(self, rng):
        x = rng.standard_normal((40, 2)) ** 3
        atoms = [(row, 1.0 / 40) for row in x]
        for alpha in (-1.0, 0.5, 2.0, 4.0):
            lhs = wcov(x, alpha).scatter
            rhs = exact_wcov(atoms, alpha)
            assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.max(np.abs(rhs)))

    def test_singular_sample_cov_rejected(self):
        x = np.column_stack([np.arange(10.0), np.arange(10.0)])
        with pytest.raises(errors.SingularMatrix):
            wcov(x, 2.0)

    def test_needs_more_rows_than_columns(self):
        with pytest.raises(errors.InvalidInput):
            wcov(np.eye(3)[:2], 1.0)


class TestExactWcov:
    def test_two_point_product_alpha4(self):
        w4 = exact_wcov(two_point_product_atoms(), 4.0)
        assert w4[0, 1] == pytest.approx(4.5, abs=1e-12)
        assert w4[1, 0] == pytest.approx(4.5, abs=1e-12)
        # enumeration oracle: E(x^6) + 3 E(x^4) = 12.8125 + 9.75
        assert w4[0, 0] == pytest.approx(22.5625, abs=1e-12)
        assert w4[1, 1] == pytest.approx(22.5625, abs=1e-12)

    def test_alpha_zero_is_identity(self):
        w0 = exact_wcov(two_point_product_atoms(), 0.0)
        assert np.max(np.abs(w0 - np.eye(2))) <= 1e-12

    def test_alpha_two_diagonal_under_independence(self):
        w2 = exact_wcov(two_point_product_atoms(), 2.0)
        assert abs(w2[0, 1]) <= 1e-12

    def test_pairwise_independence_fails_for_kurtosis_matrix(self):
        # z1, z2, z3 i.i.d. two-point; x3 = 0.5 (z1+1)(z2+1) z3 keeps x1, x2
        # independent yet the kurtosis matrix picks up
        # 0.25 (E z^3 + 2)^2 = 0.25 * 3.5^2 in its (1,2) entry
        atoms = []
        zs = TWO_POINT
        for (z1, p1), (z2, p2), (z3, p3) in itertools.product(zs, zs, zs):
            x = (z1, z2, 0.5 * (z1 + 1.0) * (z2 + 1.0) * z3)
            atoms.append((x, p1 * p2 * p3))
        w2 = exact_wcov(atoms, 2.0)
        assert w2[0, 1] == pytest.approx(0.25 * 3.5**2, abs=1e-12)

    def test_singular_population_rejected(self):
        atoms = [((0.0, 0.0), 0.5), ((1.0, 1.0), 0.5)]
        with pytest.raises(errors.SingularMatrix):
            exact_wcov(atoms, 2.0)


class TestHuberTuning:
    def test_cutoff_is_quantile(self):
        c2, _ = huber_tuning(5, 0.7)
        assert c2 == pytest.approx(scipy.stats.chi2.ppf(0.7, 5), rel=1e-12)

    @pytest.mark.parametrize("p", [2, 5, 10])
    def test_consistency_constant_against_quadrature(self, p):
        # independent oracle: sigma^2 = E[min(s, c^2)]/p by numerical quadrature
        c2, sigma2 = huber_tuning(p, 0.7)
        integrand = lambda s: min(s, c2) * scipy.stats.chi2.pdf(s, p)
        upper = scipy.stats.chi2.ppf(1.0 - 1e-14, p)
        lo, _ = scipy.integrate.quad(integrand, 0, c2)
        hi, _ = scipy.integrate.quad(integrand, c2, upper)
        assert sigma2 == pytest.approx((lo + hi) / p, rel=1e-9)


class TestMEstimate:
    @pytest.mark.parametrize("family", ["m_cauchy", "m_huber", "tyler"])
    def test_axis_points_give_identity_multiple(self, family):
        # the 2p scaled unit vectors are closed under sign flips and
        # coordinate permutations: every estimate is c * I
        p = 3
        x = np.vstack([3.0 * np.eye(p), -3.0 * np.eye(p)])
        res = m_estimate(x, ScatterSpec(family))
        v = res.scatter
        assert np.max(np.abs(v - np.diag(np.diag(v)))) <= 1e-12 * np.max(np.abs(v))
        assert np.allclose(np.diag(v), v[0, 0])

    @pytest.mark.parametrize("family", ["m_cauchy", "m_huber", "tyler"])
    def test_affine_equivariance(self, family, rng):
        x = rng.standard_normal((60, 3)) + rng.standard_normal(3)
        a = rand_full_rank(3, rng)
        b = rng.standard_normal(3)
        spec = ScatterSpec(family, irls=TIGHT)
        v0 = m_estimate(x, spec).scatter
        v1 = m_estimate(x @ a.T + b, spec).scatter
        target = a @ v0 @ a.T
        if family == "tyler":
            target *= np.trace(v1) / np.trace(target)
        assert np.max(np.abs(v1 - target)) <= 1e-8 * np.max(np.abs(target))

    def test_cauchy_recovers_elliptical_cauchy_shape(self):
        gamma = np.array([[2.0, 0.8], [0.8, 1.0]])
        errs = []
        for n in (300, 5000):
            x = randgen.sample(randgen.elliptical_t(1.0, [1.0, -2.0], gamma), n, seed=31)
            res = m_estimate(x, ScatterSpec("m_cauchy"))
            v = res.scatter / np.trace(res.scatter)
            g = gamma / np.trace(gamma)
            errs.append(np.max(np.abs(v - g)) / np.max(np.abs(g)))
        assert errs[1] < errs[0]
        assert errs[1] < 0.1

    @pytest.mark.parametrize("family", ["m_cauchy", "m_huber", "tyler"])
    def test_ess_proportionality(self, family):
        # exchangeable sign-symmetric base: every scatter is proportional to
        # Gamma = Omega Omega'
        omega = np.array([[1.5, 0.3], [0.0, 0.8]])
        gamma = omega @ omega.T
        x = randgen.ess_sample("uniform", omega, [0.5, -0.5], 20_000, seed=77)
        res = m_estimate(x, ScatterSpec(family))
        v = res.scatter / np.trace(res.scatter)
        g = gamma / np.trace(gamma)
        assert np.max(np.abs(v - g)) <= 0.05 * np.max(np.abs(g))

    @pytest.mark.parametrize(
        "name,kwargs",
        [
            ("cov", {}),
            ("wcov", {"alpha": 4.0}),
            ("m_cauchy", {}),
            ("m_huber", {}),
            ("tyler", {}),
        ],
    )
    def test_sign_flip_augmentation_gives_diagonal(self, name, kwargs, rng):
        base = rng.standard_normal((8, 3)) + [1.0, 0.3, -0.5]
        rows = []
        for s1 in (1.0, -1.0):
            for s2 in (1.0, -1.0):
                rows.append(base * np.array([1.0, s1, s2]))
        x = np.vstack(rows)
        spec = ScatterSpec(name, **kwargs)
        if name in ("cov",):
            res = sample_cov(x)
        elif name == "wcov":
            res = wcov(x, kwargs["alpha"])
        else:
            res = m_estimate(x, spec)
        v = res.scatter
        off = np.max(np.abs(v - np.diag(np.diag(v))))
        assert off <= 1e-10 * max(1.0, np.max(np.abs(v)))

    def test_tyler_trace_normalized(self, rng):
        x = rng.standard_normal((40, 4))
        res = m_estimate(x, ScatterSpec("tyler"))
        assert np.trace(res.scatter) == pytest.approx(4.0, abs=1e-10)

    def test_iterates_remain_pd(self, rng):
        x = rng.standard_normal((30, 3)) ** 3
        res = m_estimate(x, ScatterSpec("m_cauchy"))
        assert res.converged
        vals, _ = matcore.eig_sym(res.scatter)
        assert vals[-1] > 0

    def test_convergence_failure_carries_iterate(self, rng):
        x = rng.standard_normal((30, 3))
        spec = ScatterSpec(
            "m_cauchy", irls=IRLSSettings(max_iter=2, tol=1e-14, raise_on_failure=True)
        )
        with pytest.raises(errors.ConvergenceFailure) as exc_info:
            m_estimate(x, spec)
        carried = exc_info.value.result
        assert carried is not None and not carried.converged
        assert carried.scatter.shape == (3, 3)

    def test_nonconvergence_flag_without_raise(self, rng):
        x = rng.standard_normal((30, 3))
        res = m_estimate(x, ScatterSpec("m_cauchy", irls=IRLSSettings(max_iter=2, tol=1e-14)))
        assert not res.converged
        assert res.iterations == 2

    def test_tyler_duplicate_location_points_dropped(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((20, 2))
        mean = x.mean(axis=0)
        x_dup = np.vstack([x, mean[None, :]])  # one point exactly at the location
        res = m_estimate(
            x_dup, ScatterSpec("tyler", fixed_location=tuple(mean))
        )
        assert res.n_dropped == 1
        assert res.converged

    def test_tyler_all_points_at_location_rejected(self):
        x = np.ones((6, 2))
        with pytest.raises(errors.DegenerateObservation):
            m_estimate(
                x, ScatterSpec("tyler", fixed_location=(1.0, 1.0))
            )

    def test_fixed_location_respected(self, rng):
        x = rng.standard_normal((30, 2)) + 5.0
        res = m_estimate(x, ScatterSpec("m_cauchy", fixed_location=(5.0, 5.0)))
        assert np.allclose(res.location, [5.0, 5.0])


class TestScatterSpec:
    def test_bad_family(self):
        with pytest.raises(errors.InvalidInput):
            ScatterSpec("median")

    def test_wcov_needs_alpha(self):
        with pytest.raises(errors.InvalidInput):
            ScatterSpec("wcov")

    def test_huber_q_range(self):
        with pytest.raises(errors.InvalidInput):
            ScatterSpec("m_huber", q=1.5)

    def test_tags(self):
        assert ScatterSpec("m_cauchy").tag == "CAU"
        assert ScatterSpec("m_cauchy", symmetrized=True).tag == "sCAU"
        assert ScatterSpec("wcov", alpha=2.0).tag == "WCOV(2)"
