"""Exact-algebra invariant suite behind the `selftest` CLI command.

Every check is a finite-sample statement that holds to numerical precision
by construction (sign-flip/product augmentation, block algebra, closed-form
identities), so failures indicate real defects rather than Monte Carlo
noise. Tolerances can be scaled through ROBUSTSCATTER_SELFTEST_TOL_SCALE
(values < 1 tighten them; used to verify the suite can fail).
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass

import numpy as np

from . import matcore
from .estimators import make_estimator
from .plugin import md_index, observational_regression
from .scatter import IRLSSettings, ScatterSpec
from .symmetrize import SymmetrizedSpec, symmetrized_estimate

TOL_ENV = "ROBUSTSCATTER_SELFTEST_TOL_SCALE"

# Equivariance identities hold exactly at the IRLS fixed point; iterate to a
# tolerance well below the acceptance tolerances so the stopping rule does
# not dominate the comparison.
_TIGHT = IRLSSettings(max_iter=2000, tol=1e-13)


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    tolerance: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name}: worst {self.worst:.3e} vs tol {self.tolerance:.3e}"


def _tol(base: float) -> float:
    scale = float(os.environ.get(TOL_ENV, "1.0"))
    return base * scale


def _sign_flip_augment(base: np.ndarray, keep: int) -> np.ndarray:
    """All sign patterns over coordinates except `keep`, applied row-wise."""
    p = base.shape[1]
    flip_coords = [j for j in range(p) if j != keep]
    rows = []
    for signs in itertools.product((1.0, -1.0), repeat=len(flip_coords)):
        j = np.ones(p)
        for c, s in zip(flip_coords, signs):
            j[c] = s
        rows.append(base * j)
    return np.vstack(rows)


def _product_join(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Rows (a_i, b_j) over all index combinations: exact block independence."""
    na, nb = a.shape[0], b.shape[0]
    left = np.repeat(a, nb, axis=0)
    right = np.tile(b, (na, 1))
    return np.hstack([left, right])


def _max_offdiag(v: np.ndarray) -> float:
    return float(np.max(np.abs(v - np.diag(np.diag(v)))))


def _estimator_bank(subset_seed: int = 11):
    return [
        make_estimator("cov"),
        make_estimator("wcov", alpha=3.0),
        make_estimator("cau", irls=_TIGHT),
        make_estimator("hub", irls=_TIGHT),
        make_estimator("tyl", irls=_TIGHT),
        make_estimator("mve", subset_seed=subset_seed),
        make_estimator("mcd", subset_seed=subset_seed),
        make_estimator("scov"),
        make_estimator("swcov", alpha=3.0),
        make_estimator("scau", irls=_TIGHT),
        make_estimator("shub", irls=_TIGHT),
        make_estimator("styl", irls=_TIGHT),
    ]


def check_sign_flip_diagonality() -> CheckResult:
    """Data exactly invariant under sign flips sparing one coordinate give a
    diagonal estimate for every scatter family (subset estimators excepted:
    their subset selection is tie-ambiguous on symmetric data)."""
    rng = np.random.default_rng(42)
    base = rng.standard_normal((6, 3)) + np.array([1.5, 0.2, -0.4])
    x = _sign_flip_augment(base, keep=0)
    worst = 0.0
    for name, kw in [
        ("cov", {}),
        ("wcov", {"alpha": 4.0}),
        ("cau", {}),
        ("hub", {}),
        ("tyl", {}),
        ("scov", {}),
        ("scau", {}),
        ("shub", {}),
        ("styl", {}),
    ]:
        res = make_estimator(name, **kw).fit(x)
        scale = max(1.0, float(np.max(np.abs(res.scatter))))
        worst = max(worst, _max_offdiag(res.scatter) / scale)
    tol = _tol(1e-10)
    return CheckResult("sign-flip diagonality", worst <= tol, worst, tol)


def check_block_independence() -> CheckResult:
    """Product-joined blocks: symmetrized estimates are block diagonal; with
    one block flip-augmented, plain M-estimates are block diagonal too."""
    rng = np.random.default_rng(43)
    a = rng.standard_normal((6, 2)) + [0.7, -0.2]  # skewed block 1
    b = rng.standard_normal((6, 1)) ** 3  # skewed block 2
    x = _product_join(a, b)
    x_aug = np.vstack([x, x * np.array([1.0, 1.0, -1.0])])
    worst = 0.0
    for name in ("scov", "scau", "shub", "styl"):
        res = make_estimator(name).fit(x)
        scale = max(1.0, float(np.max(np.abs(res.scatter))))
        worst = max(worst, float(np.max(np.abs(res.scatter[:2, 2:]))) / scale)
    for name in ("cov", "cau", "hub", "tyl"):
        res = make_estimator(name).fit(x_aug)
        scale = max(1.0, float(np.max(np.abs(res.scatter))))
        worst = max(worst, float(np.max(np.abs(res.scatter[:2, 2:]))) / scale)
    tol = _tol(1e-10)
    return CheckResult("block-independence block diagonality", worst <= tol, worst, tol)


def check_precision_block_inverse() -> CheckResult:
    """Scatter assembled from independent error/regressor blocks has a zero
    (1,2) precision entry: K = V^{-1} with V = L blockdiag(D, M) L'."""
    rng = np.random.default_rng(44)
    p_x = 3
    delta = np.diag(rng.uniform(0.5, 2.0, size=2))
    m_half = rng.standard_normal((p_x, p_x))
    m = m_half @ m_half.T + 0.5 * np.eye(p_x)
    a = rng.standard_normal((2, p_x))
    top = np.hstack([np.eye(2), a])
    bottom = np.hstack([np.zeros((p_x, 2)), np.eye(p_x)])
    lmat = np.vstack([top, bottom])
    core = np.zeros((2 + p_x, 2 + p_x))
    core[:2, :2] = delta
    core[2:, 2:] = m
    v = matcore.sym_part(lmat @ core @ lmat.T)
    k = matcore.invert(v)
    worst = abs(float(k[0, 1])) / max(1.0, float(np.max(np.abs(k))))
    tol = _tol(1e-12)
    return CheckResult("precision block-inverse zero entry", worst <= tol, worst, tol)


def check_regression_equivariance() -> CheckResult:
    """Slope functional is regression, scale and design equivariant."""
    rng = np.random.default_rng(45)
    n, p, q = 40, 2, 2
    x = rng.standard_normal((n, p))
    y = x @ rng.standard_normal((p, q)) + 0.3 * rng.standard_normal((n, q))
    c = rng.standard_normal((p, q))
    m = rng.standard_normal((q, q)) + 2.0 * np.eye(q)
    a = rng.standard_normal((p, p)) + 2.0 * np.eye(p)
    worst = 0.0
    for est in (make_estimator("cov"), make_estimator("shub", irls=_TIGHT)):
        b0 = observational_regression(x, y, est).B
        b_reg = observational_regression(x, y + x @ c, est).B
        worst = max(worst, float(np.max(np.abs(b_reg - (b0 + c)))))
        b_scale = observational_regression(x, y @ m, est).B
        worst = max(worst, float(np.max(np.abs(b_scale - b0 @ m))))
        b_design = observational_regression(x @ a.T, y, est).B
        worst = max(worst, float(np.max(np.abs(b_design - np.linalg.solve(a.T, b0)))))
    tol = _tol(1e-10)
    return CheckResult("regression equivariance identities", worst <= tol, worst, tol)


def _relative_equivariance_error(res_t, res_o, a) -> float:
    target = a @ res_o.scatter @ a.T
    got = res_t.scatter
    if res_t.family_tag in ("TYL", "sTYL"):
        target = target * (np.trace(got) / np.trace(target))
    return float(np.max(np.abs(got - target)) / np.max(np.abs(target)))


def check_affine_equivariance() -> CheckResult:
    """estimate(AX + b) equals A estimate(X) A' (proportionally for shapes)."""
    rng = np.random.default_rng(46)
    n, p = 30, 3
    x = rng.standard_normal((n, p)) @ np.diag([1.0, 2.0, 0.7]) + rng.standard_normal(p)
    a = rng.standard_normal((p, p)) + 1.5 * np.eye(p)
    b = rng.standard_normal(p)
    xt = x @ a.T + b
    worst = 0.0
    for est in _estimator_bank():
        worst = max(
            worst, _relative_equivariance_error(est.fit(xt), est.fit(x), a)
        )
    tol = _tol(1e-8)
    return CheckResult("affine equivariance (all estimators)", worst <= tol, worst, tol)


def check_md_invariance() -> CheckResult:
    """Permutation/diagonal rescaling leaves the minimum-distance index fixed;
    bit-exact for power-of-two scalings and signed permutations."""
    rng = np.random.default_rng(47)
    g = rng.standard_normal((4, 4)) + 2.0 * np.eye(4)
    base = md_index(g)
    perm = np.eye(4)[[2, 0, 3, 1]]
    d_exact = np.diag([2.0, -0.5, 4.0, -0.25])  # powers of two: exact scaling
    exact_ok = md_index(perm @ d_exact @ g) == base
    d_rand = np.diag(rng.uniform(0.5, 2.0, size=4) * np.sign(rng.standard_normal(4)))
    worst = abs(md_index(perm @ d_rand @ g) - base)
    if not exact_ok:
        worst = max(worst, 1.0)
    tol = _tol(1e-12)
    return CheckResult("md-index permutation/scale invariance", worst <= tol, worst, tol)


def check_symmetrized_cov_identity() -> CheckResult:
    """Pairwise-difference covariance equals twice the unbiased covariance."""
    rng = np.random.default_rng(48)
    x = rng.standard_normal((50, 3)) * [1.0, 0.5, 2.0] + [4.0, -2.0, 0.0]
    res = symmetrized_estimate(x, SymmetrizedSpec(inner=ScatterSpec("cov")))
    target = 2.0 * np.cov(x, rowvar=False)
    worst = float(np.max(np.abs(res.scatter - target)) / np.max(np.abs(target)))
    tol = _tol(1e-10)
    return CheckResult("symmetrized-cov identity", worst <= tol, worst, tol)


def check_parallel_determinism() -> CheckResult:
    """Thread count never changes an estimate."""
    rng = np.random.default_rng(49)
    x = rng.standard_normal((80, 3))
    serial = symmetrized_estimate(
        x, SymmetrizedSpec(inner=ScatterSpec("m_cauchy"), parallel=False)
    )
    threaded = symmetrized_estimate(
        x, SymmetrizedSpec(inner=ScatterSpec("m_cauchy"), parallel=True, threads=4)
    )
    worst = float(np.max(np.abs(serial.scatter - threaded.scatter)))
    tol = _tol(1e-12)
    return CheckResult("parallel/serial determinism", worst <= tol, worst, tol)


ALL_CHECKS = (
    check_sign_flip_diagonality,
    check_block_independence,
    check_precision_block_inverse,
    check_regression_equivariance,
    check_affine_equivariance,
    check_md_invariance,
    check_symmetrized_cov_identity,
    check_parallel_determinism,
)


def run_selftest() -> list[CheckResult]:
    return [check() for check in ALL_CHECKS]
