"""Closed-form predictions for misaligned teacher/student kernels, with the
general linear-solve path as ground truth.

Nothing here adds jitter or repairs matrices: a formula that only holds
after numerical patching is a formula that is wrong.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy.special import ndtr


@dataclass(frozen=True)
class TwoTrainSpec:
    """Two training points and one test point.

    ``c0_g``/``c1_g`` are train-test covariances, ``c_p`` the train-train
    covariance, ``sigma0_sq``/``sigma1_sq`` the training variances.
    """

    c0_g: float
    c1_g: float
    c_p: float
    sigma0_sq: float
    sigma1_sq: float
    y0: float
    y1: float

    @property
    def denominator(self) -> float:
        return self.sigma0_sq * self.sigma1_sq - self.c_p ** 2

    def system(self):
        K = np.array([[self.sigma0_sq, self.c_p], [self.c_p, self.sigma1_sq]])
        K_star = np.array([[self.c0_g], [self.c1_g]])
        return K, K_star, np.array([self.y0, self.y1])


@dataclass(frozen=True)
class EquicorrelatedSpec:
    n_train: int
    m_test: int
    c_p: float
    c_g: float
    y_p: tuple

    def __post_init__(self):
        _check_equicorrelated(self.n_train, self.c_p)
        if self.m_test < 1:
            raise ValueError("need at least one test point")
        if len(self.y_p) != self.n_train:
            raise ValueError("y_p length must equal n_train")


def _check_equicorrelated(n, c_p):
    if n < 1:
        raise ValueError("need at least one training point")
    lower = -1.0 / (n - 1) if n > 1 else -np.inf
    if not lower < c_p < 1.0:
        raise ValueError(f"c_p={c_p} makes the {n}x{n} equicorrelated "
                         "matrix singular or indefinite")


def gp_mean_general(K, K_star, y) -> np.ndarray:
    """``K_star' K^{-1} y`` by an exact LU solve."""
    K = np.asarray(K, dtype=float)
    K_star = np.asarray(K_star, dtype=float)
    if K_star.ndim == 1:
        K_star = K_star[:, None]
    y = np.asarray(y, dtype=float)
    if np.linalg.matrix_rank(K) < K.shape[0]:
        raise np.linalg.LinAlgError("K is singular")
    return K_star.T @ np.linalg.solve(K, y)


def two_train_prediction(spec: TwoTrainSpec) -> float:
    s = spec
    den = s.denominator
    if den == 0:
        raise ZeroDivisionError("sigma0^2 sigma1^2 - c_p^2 is zero")
    num = (s.c0_g * s.y0 * s.sigma1_sq - s.c0_g * s.y1 * s.c_p
           + s.c1_g * s.y1 * s.sigma0_sq - s.c1_g * s.y0 * s.c_p)
    return num / den


def _simplified(spec):
    if spec.c0_g != spec.c1_g or spec.sigma0_sq != spec.sigma1_sq:
        raise ValueError("requires equal train-test covariances and variances")
    return spec.c0_g, spec.sigma0_sq, spec.c_p, spec.y0 + spec.y1


def error_kstar(epsilon: float, spec: TwoTrainSpec) -> float:
    """Prediction gap when only the train-test covariance is off by ``epsilon``."""
    _, var, c_p, total = _simplified(spec)
    if var + c_p == 0:
        raise ZeroDivisionError("sigma^2 + c_p is zero")
    return abs(epsilon * total / (var + c_p))


def error_k(epsilon: float, spec: TwoTrainSpec) -> float:
    """Prediction gap when the student's train-train covariance is
    ``spec.c_p + epsilon``; ``spec`` describes the teacher."""
    c_g, var, c_t, total = _simplified(spec)
    c_s = c_t + epsilon
    if var + c_t == 0 or var + c_s == 0:
        raise ZeroDivisionError("sigma^2 + c_p is zero")
    return abs(epsilon * c_g * total / ((var + c_s) * (var + c_t)))


def equicorrelated_matrix(n: int, c_p: float) -> np.ndarray:
    return (1.0 - c_p) * np.eye(n) + c_p * np.ones((n, n))


def equicorrelated_inverse(n: int, c_p: float) -> np.ndarray:
    """Sherman-Morrison inverse of ``(1 - c) I + c e e'``."""
    _check_equicorrelated(n, c_p)
    return (np.eye(n) - c_p / (1.0 + (n - 1) * c_p) * np.ones((n, n))) / (1.0 - c_p)


def equicorrelated_prediction(spec: EquicorrelatedSpec) -> np.ndarray:
    """Test-point predictions from the general solve; all entries are equal."""
    K = equicorrelated_matrix(spec.n_train, spec.c_p)
    K_star = np.full((spec.n_train, spec.m_test), spec.c_g)
    return gp_mean_general(K, K_star, spec.y_p)


def equicorrelated_coefficient(n: int, c_p: float, c_g: float) -> float:
    """Closed-form weight ``w`` with every prediction equal to ``w * sum(y_p)``.

    Follows from ``K e = (1 + (n-1) c_p) e``: ``w = c_g / (1 + (n-1) c_p)``.
    """
    _check_equicorrelated(n, c_p)
    return c_g / (1.0 + (n - 1) * c_p)


def chebyshev_check(rho0: float, sigma: float, c: float, trials: int, rng):
    """Monte Carlo exceedance of ``|K_S - K_T| > c sigma sqrt(2(1 - rho0))``.

    Entries are modelled as zero-mean bivariate normal with common variance
    ``sigma**2`` and correlation ``rho0``. Returns ``(empirical, 1 / c**2)``.
    Strict exceedance is used; for a continuous law it equals ``>=``, and
    at ``rho0 = 1`` it gives the degenerate answer 0 instead of 1.
    """
    if not -1.0 <= rho0 <= 1.0:
        raise ValueError(f"rho0 must lie in [-1, 1], got {rho0}")
    if c <= 0 or sigma <= 0 or trials < 1:
        raise ValueError("c, sigma and trials must be positive")
    rng = np.random.default_rng(rng)
    z1 = rng.standard_normal(trials)
    z2 = rng.standard_normal(trials)
    k_t = sigma * z1
    k_s = sigma * (rho0 * z1 + np.sqrt(max(0.0, 1.0 - rho0 ** 2)) * z2)
    threshold = c * sigma * np.sqrt(2.0 * (1.0 - rho0))
    empirical = float(np.mean(np.abs(k_s - k_t) > threshold))
    return empirical, 1.0 / c ** 2


def gaussian_exceedance(c: float) -> float:
    """Exact ``P(|Z| > c)`` for a standard normal, the Chebyshev target."""
    return float(2.0 * ndtr(-c))


# -- scans ------------------------------------------------------------------

DEFAULT_EPSILONS = tuple(np.round(np.arange(0.0, 0.5001, 0.05), 10))


def random_simplified_spec(rng, max_epsilon=0.5) -> TwoTrainSpec:
    """Random unit-variance spec with nonnegative covariances whose 3x3 joint
    covariance stays positive definite when ``c_p`` grows by ``max_epsilon``."""
    c_p = rng.uniform(0.0, 0.95 - max_epsilon)
    c_g = rng.uniform(0.0, 0.99) * np.sqrt((1.0 + c_p) / 2.0)
    y0, y1 = rng.normal(size=2)
    return TwoTrainSpec(c_g, c_g, c_p, 1.0, 1.0, y0, y1)


@dataclass
class ScanReport:
    checked: int = 0
    violations: list = None

    def __post_init__(self):
        if self.violations is None:
            self.violations = []

    @property
    def ok(self) -> bool:
        return not self.violations


def monotonicity_scan(specs, epsilons=DEFAULT_EPSILONS,
                      kstar_error: Callable = error_kstar,
                      k_error: Callable = error_k,
                      atol: float = 1e-12) -> ScanReport:
    """Check, per spec, that both errors are non-decreasing in epsilon and
    that the train-test error dominates the train-train error pointwise.

    The error functions are injectable so a broken formula can be shown to
    be caught.
    """
    report = ScanReport()
    eps = np.asarray(epsilons, dtype=float)
    for idx, spec in enumerate(specs):
        ks = np.array([kstar_error(e, spec) for e in eps])
        kk = np.array([k_error(e, spec) for e in eps])
        report.checked += 1
        for name, vals in (("kstar", ks), ("k", kk)):
            drops = np.flatnonzero(np.diff(vals) < -atol)
            if drops.size:
                report.violations.append(
                    f"spec {idx}: {name} error decreases at epsilon={eps[drops[0] + 1]:g}")
        under = np.flatnonzero(ks < kk - atol)
        if under.size:
            report.violations.append(
                f"spec {idx}: kstar error below k error at epsilon={eps[under[0]]:g}")
    return report


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def run_theory_checks(seed: int = 0, n_specs: int = 10_000,
                      chebyshev_trials: int = 1_000_000) -> list:
    """Every theory oracle, as a list of named pass/fail results."""
    rng = np.random.default_rng(seed)
    results = []

    # two-train analytic prediction vs the general solve
    worst = 0.0
    for _ in range(n_specs):
        var0, var1 = rng.uniform(0.5, 2.0, size=2)
        c_p = rng.uniform(-0.9, 0.9) * np.sqrt(var0 * var1)
        c0, c1 = rng.uniform(-1.0, 1.0, size=2)
        y0, y1 = rng.normal(size=2)
        spec = TwoTrainSpec(c0, c1, c_p, var0, var1, y0, y1)
        K, K_star, y = spec.system()
        general = gp_mean_general(K, K_star, y)[0]
        closed = two_train_prediction(spec)
        worst = max(worst, abs(general - closed) / max(1.0, abs(general)))
    results.append(CheckResult("two_train_vs_general", worst <= 1e-12,
                               f"max error {worst:.3g} over {n_specs} specs (tol 1e-12)"))

    # Sherman-Morrison inverse
    worst = 0.0
    for n in range(2, 21):
        lower = -1.0 / (n - 1)
        for c_p in np.r_[np.linspace(lower + 0.02, 0.95, 25), rng.uniform(lower + 0.02, 0.95, 5)]:
            K = equicorrelated_matrix(n, c_p)
            err = np.abs(K @ equicorrelated_inverse(n, c_p) - np.eye(n)).max()
            worst = max(worst, err)
    results.append(CheckResult("equicorrelated_inverse", worst <= 1e-10,
                               f"max |K K^-1 - I| = {worst:.3g} for n=2..20 (tol 1e-10)"))

    # closed-form equicorrelated weight vs general solve
    worst = 0.0
    for _ in range(500):
        n = int(rng.integers(2, 21))
        m = int(rng.integers(1, 6))
        c_p = rng.uniform(-1.0 / (n - 1) + 0.02, 0.95)
        c_g = rng.uniform(-1.0, 1.0)
        y = rng.normal(size=n)
        pred = equicorrelated_prediction(EquicorrelatedSpec(n, m, c_p, c_g, tuple(y)))
        closed = equicorrelated_coefficient(n, c_p, c_g) * y.sum()
        worst = max(worst, np.abs(pred - closed).max() / max(1.0, abs(closed)))
    results.append(CheckResult("equicorrelated_prediction", worst <= 1e-10,
                               f"max error {worst:.3g}; weight c_g/(1+(n-1)c_p) (tol 1e-10)"))

    # linearity of the train-test error, sublinearity of the train-train error
    specs = [random_simplified_spec(rng) for _ in range(100)]
    eps = np.asarray(DEFAULT_EPSILONS)[1:]
    lin_worst = 0.0
    sub_bad = 0
    for spec in specs:
        ks = np.array([error_kstar(e, spec) for e in eps])
        slope = ks / eps
        lin_worst = max(lin_worst, np.ptp(slope) / max(1e-300, abs(slope).max()))
        ratio = np.array([error_k(e, spec) for e in eps]) / eps
        sub_bad += int(np.any(np.diff(ratio) > 1e-12 * max(1.0, ratio.max())))
    results.append(CheckResult("kstar_error_linear", lin_worst <= 1e-12,
                               f"max relative spread of error/epsilon {lin_worst:.3g}"))
    results.append(CheckResult("k_error_sublinear", sub_bad == 0,
                               f"{sub_bad} of {len(specs)} specs with error/epsilon increasing"))

    scan = monotonicity_scan(specs)
    detail = f"{scan.checked} specs, {len(scan.violations)} violations"
    if scan.violations:
        detail += f"; first: {scan.violations[0]}"
    results.append(CheckResult("kstar_dominates_k_monotone", scan.ok, detail))

    # Chebyshev bound on the (rho0, c) grid
    failures = []
    for rho0 in (0.0, 0.25, 0.5, 0.75, 0.9):
        for c in (1.5, 2.0, 3.0):
            emp, bound = chebyshev_check(rho0, 1.0, c, chebyshev_trials, rng)
            se = np.sqrt(bound * (1.0 - bound) / chebyshev_trials)
            if emp > bound + 3.0 * se:
                failures.append(f"rho0={rho0}, c={c}: {emp:.4g} > {bound:.4g}")
    results.append(CheckResult("chebyshev_bound", not failures,
                               "15 grid points within bound" if not failures
                               else "; ".join(failures)))
    return results
