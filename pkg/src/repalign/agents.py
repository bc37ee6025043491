"""Bandit agents that predict rewards through a frozen similarity kernel.

All agents aggregate repeated observations of the same action into a count
and a mean, so the linear systems they solve never exceed the number of
distinct actions. Kernel agents centre rewards on the running observed mean
(or on ``prior_mean`` before any data arrives) and pick actions by Thompson
sampling from per-action Gaussian predictions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .accel import kernel_posterior, svr_smo
from .domain import (CHOLESKY_JITTER, PSD_FLOOR, SimilarityMatrix,
                     ValueScores, nearest_psd, validate_kernel)

KINDS = ("gp", "kernel_ridge", "svr", "thompson_baseline")
KERNEL_KINDS = ("gp", "kernel_ridge", "svr")


class FrozenAgentError(RuntimeError):
    pass


class InvalidKernelError(ValueError):
    pass


@dataclass(frozen=True)
class AgentConfig:
    kind: str = "gp"
    ridge_lambda: float = 0.1
    noise_variance: float = 1.0
    svr_c: float = 1.0
    svr_epsilon: float = 0.1
    svr_tolerance: float = 1e-3
    svr_max_passes: int = 1000
    exploration_variance: float = 1.0
    jitter: float = CHOLESKY_JITTER
    prior_mean: float = 0.0
    center_on_observed: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown agent kind {self.kind!r}")
        for name in ("ridge_lambda", "noise_variance", "svr_c", "svr_tolerance",
                     "exploration_variance", "jitter"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.svr_epsilon < 0:
            raise ValueError("svr_epsilon must be nonnegative")
        if self.svr_max_passes < 1:
            raise ValueError("svr_max_passes must be at least 1")


@dataclass(frozen=True)
class Prediction:
    mean: float
    standard_deviation: float


class ObservationStore:
    """Per-action counts and reward sums plus the chronological log."""

    def __init__(self, n: int):
        self.counts = np.zeros(n, dtype=np.int64)
        self.sums = np.zeros(n)
        self.log = []

    def add(self, action: int, reward: float):
        self.counts[action] += 1
        self.sums[action] += reward
        self.log.append((len(self.log), action, reward))

    @property
    def total(self) -> int:
        return len(self.log)

    def observed(self) -> np.ndarray:
        return np.flatnonzero(self.counts)

    def means(self, ids) -> np.ndarray:
        return self.sums[ids] / self.counts[ids]

    def overall_mean(self) -> float:
        return float(self.sums.sum() / self.counts.sum())


class Agent:
    """Shared bookkeeping: observation store, freezing, cache invalidation."""

    kind = None

    def __init__(self, n: int, config: AgentConfig):
        self.n = n
        self.config = config
        self.store = ObservationStore(n)
        self.frozen = False
        self._fit_cache = None

    def observe(self, action: int, reward: float) -> "Agent":
        if self.frozen:
            raise FrozenAgentError("agent is frozen; observations are refused")
        if not 0 <= action < self.n:
            raise IndexError(f"action {action} out of range [0, {self.n})")
        if not np.isfinite(reward):
            raise ValueError("reward must be finite")
        self.store.add(int(action), float(reward))
        self._fit_cache = None
        return self

    def freeze(self) -> "Agent":
        self.frozen = True
        return self

    def predict(self, targets: Sequence[int]) -> list:
        mean, std = self.predict_arrays(np.asarray(targets, dtype=np.intp))
        return [Prediction(float(m), float(s)) for m, s in zip(mean, std)]

    def predict_arrays(self, targets):
        raise NotImplementedError

    def _sample(self, targets, rng):
        mean, std = self.predict_arrays(targets)
        return mean + std * rng.standard_normal(targets.size)

    def select_action(self, available, rng) -> int:
        """Thompson step: one posterior draw per available action, take the max."""
        available = np.asarray(available, dtype=np.intp)
        if available.size == 0:
            raise ValueError("no actions available")
        draws = self._sample(available, rng)
        best = np.flatnonzero(draws == draws.max())
        if best.size > 1:
            return int(available[best[rng.integers(best.size)]])
        return int(available[best[0]])


class KernelAgent(Agent):
    def __init__(self, kernel: SimilarityMatrix, config: AgentConfig):
        super().__init__(kernel.n, config)
        self.kernel = kernel
        self._K = np.asarray(kernel.entries)
        self._diag = np.diag(self._K).copy()

    def _center(self) -> float:
        if self.store.total and self.config.center_on_observed:
            return self.store.overall_mean()
        return self.config.prior_mean

    def _fit(self):
        if self._fit_cache is None:
            self._fit_cache = self._build_fit()
        return self._fit_cache

    def _build_fit(self):
        raise NotImplementedError

    def _heuristic_std(self, targets):
        return np.sqrt(self.config.exploration_variance
                       / (1.0 + self.store.counts[targets]))


def _posterior(K, obs, diag_add, resid, targets, want_var, jitter, attempts=6):
    """Posterior solve, escalating diagonal jitter tenfold on Cholesky failure."""
    extra = 0.0
    for _ in range(attempts):
        out = kernel_posterior(K, obs, diag_add + extra, resid, targets, want_var)
        if out is not None:
            return out
        extra = jitter if not extra else extra * 10.0
    raise np.linalg.LinAlgError(
        f"Cholesky failed even with {extra:g} added to the diagonal")


class GPAgent(KernelAgent):
    """Gaussian-process regression with per-action heteroscedastic noise.

    An action seen ``c`` times enters once, with its mean reward and noise
    ``noise_variance / c``; this is the exact posterior for repeated
    Gaussian observations.
    """

    kind = "gp"

    def effective_diagonal(self, obs):
        cfg = self.config
        return cfg.noise_variance / self.store.counts[obs] + cfg.jitter

    def _build_fit(self):
        obs = self.store.observed()
        resid = self.store.means(obs) - self._center() if obs.size else None
        return obs, self._center(), resid

    def predict_arrays(self, targets):
        targets = np.asarray(targets, dtype=np.intp)
        obs, center, resid = self._fit()
        if obs.size == 0:
            mean = np.full(targets.size, center)
            var = self._diag[targets]
        else:
            offset, var = _posterior(self._K, obs, self.effective_diagonal(obs),
                                     resid, targets, True, self.config.jitter)
            mean = center + offset
            var = np.maximum(var, 0.0)
        return mean, np.sqrt(self.config.exploration_variance * var)


class KernelRidgeAgent(KernelAgent):
    """Kernel ridge regression on per-action mean rewards."""

    kind = "kernel_ridge"

    def _build_fit(self):
        obs = self.store.observed()
        resid = self.store.means(obs) - self._center() if obs.size else None
        return obs, self._center(), resid

    def predict_arrays(self, targets):
        targets = np.asarray(targets, dtype=np.intp)
        obs, center, resid = self._fit()
        if obs.size == 0:
            mean = np.full(targets.size, center)
        else:
            lam = np.full(obs.size, self.config.ridge_lambda)
            offset, _ = _posterior(self._K, obs, lam, resid, targets, False,
                                   self.config.jitter)
            mean = center + offset
        return mean, self._heuristic_std(targets)


@dataclass(frozen=True)
class SVRFit:
    support: np.ndarray
    coef: np.ndarray
    bias: float
    center: float
    converged: bool
    iterations: int


class SVRAgent(KernelAgent):
    """Epsilon-insensitive support-vector regression, refit on every change.

    The dual is warm-started from the previous coefficients, which remain
    feasible when a new action joins the training set with coefficient 0.
    """

    kind = "svr"

    def __init__(self, kernel, config):
        super().__init__(kernel, config)
        self._beta = np.zeros(self.n)

    def _build_fit(self):
        obs = self.store.observed()
        center = self._center()
        if obs.size == 0:
            return SVRFit(obs, np.zeros(0), 0.0, center, True, 0)
        cfg = self.config
        resid = self.store.means(obs) - center
        beta, bias, converged, iters = svr_smo(
            self._K[np.ix_(obs, obs)], resid, cfg.svr_c, cfg.svr_epsilon,
            cfg.svr_tolerance, cfg.svr_max_passes * obs.size, self._beta[obs])
        self._beta[obs] = beta
        return SVRFit(obs, beta, bias, center, converged, iters)

    def fit(self) -> SVRFit:
        return self._fit()

    def predict_arrays(self, targets):
        targets = np.asarray(targets, dtype=np.intp)
        fit = self._fit()
        if fit.support.size == 0:
            mean = np.full(targets.size, fit.center)
        else:
            mean = (fit.center + fit.bias
                    + self._K[np.ix_(targets, fit.support)] @ fit.coef)
        return mean, self._heuristic_std(targets)


class ThompsonBaseline(Agent):
    """Beta-Bernoulli Thompson sampling that ignores the kernel entirely.

    Rewards are read as success fractions in [0, 1]; a binary reward adds
    one success or one failure.
    """

    kind = "thompson_baseline"

    def __init__(self, n, config):
        super().__init__(n, config)
        self.successes = np.zeros(n)
        self.failures = np.zeros(n)

    def observe(self, action, reward):
        if not 0.0 <= reward <= 1.0:
            raise ValueError(f"baseline rewards must lie in [0, 1], got {reward}")
        super().observe(action, reward)
        self.successes[action] += reward
        self.failures[action] += 1.0 - reward
        return self

    def posterior(self, targets):
        targets = np.asarray(targets, dtype=np.intp)
        return 1.0 + self.successes[targets], 1.0 + self.failures[targets]

    def predict_arrays(self, targets):
        a, b = self.posterior(targets)
        s = a + b
        return a / s, np.sqrt(a * b / (s * s * (s + 1.0)))

    def _sample(self, targets, rng):
        a, b = self.posterior(targets)
        return rng.beta(a, b)


_CLASSES = {"gp": GPAgent, "kernel_ridge": KernelRidgeAgent, "svr": SVRAgent}


def agent_new(kernel: Optional[SimilarityMatrix], config: AgentConfig,
              n: Optional[int] = None, psd_floor: float = PSD_FLOOR) -> Agent:
    """Build a fresh agent.

    Kernel agents validate the kernel and clip its spectrum at ``psd_floor``.
    The baseline needs only the number of arms, from ``kernel`` or ``n``.
    """
    if config.kind == "thompson_baseline":
        if kernel is not None:
            n = kernel.n
        if n is None:
            raise ValueError("baseline needs a kernel or an arm count")
        return ThompsonBaseline(n, config)
    if kernel is None:
        raise InvalidKernelError(f"{config.kind} agent needs a kernel")
    problems = validate_kernel(kernel)
    if problems:
        raise InvalidKernelError("; ".join(problems))
    return _CLASSES[config.kind](nearest_psd(kernel, psd_floor), config)


def _require(state, cls):
    if not isinstance(state, cls):
        raise TypeError(f"expected a {cls.kind} agent, got {type(state).__name__}")


def gp_predict(state: Agent, targets) -> list:
    _require(state, GPAgent)
    return state.predict(targets)


def kernel_ridge_predict(state: Agent, targets) -> list:
    _require(state, KernelRidgeAgent)
    return state.predict(targets)


def svr_fit(state: Agent) -> SVRFit:
    _require(state, SVRAgent)
    if state.store.total == 0:
        raise ValueError("svr_fit needs at least one observation")
    return state.fit()


def select_action(state: Agent, available, rng) -> int:
    return state.select_action(available, rng)


def observe(state: Agent, action: int, reward: float) -> Agent:
    return state.observe(action, reward)


def freeze(state: Agent) -> Agent:
    return state.freeze()


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def env_success_probability(score: float, scores: ValueScores) -> float:
    """Success probability for the Bernoulli environment.

    The score is standardised to ``(score - midpoint) / (span / 4)`` before
    the sigmoid, so the scale ends map to sigmoid(-2) and sigmoid(2).
    """
    z = (score - scores.midpoint) / (scores.span / 4.0)
    return float(sigmoid(z))
