"""Bandit environment, episode loops, experiment protocols and campaigns.

Every run draws all of its randomness from a seed derived from
``(master_seed, cell, run)`` through :class:`numpy.random.SeedSequence`, so
a campaign's results do not depend on execution order or worker count.
Agent kind is deliberately not part of the derivation: different agents
given the same run index face the same environment.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .agents import (KERNEL_KINDS, KINDS, AgentConfig, agent_new,
                     env_success_probability)
from .alignment import AlignmentVariant, UndefinedCorrelationError, alignment
from .domain import (RunMetrics, SimilarityMatrix, ValueScores, split_random,
                     synthetic_scores)
from .kernels import (CorruptionSpec, corrupt_scores, interpolate_kernel,
                      score_kernel)


@dataclass(frozen=True)
class EpisodeConfig:
    max_steps: int = 1000
    subset_size: int = 10
    reward_noise_sd: float = 1.0
    convergence_streak: int = 5
    reward_mode: str = "gaussian"
    stop_at_convergence: bool = False

    def __post_init__(self):
        if self.reward_mode not in ("gaussian", "bernoulli"):
            raise ValueError(f"unknown reward mode {self.reward_mode!r}")
        if self.convergence_streak < 1:
            raise ValueError("convergence_streak must be at least 1")
        if self.max_steps < 1 or self.subset_size < 1:
            raise ValueError("max_steps and subset_size must be positive")
        if self.reward_noise_sd < 0:
            raise ValueError("reward_noise_sd must be nonnegative")


def episode_for(kind: str, cfg: EpisodeConfig) -> EpisodeConfig:
    """The baseline learns from binary rewards; kernel agents from Gaussian ones."""
    mode = "bernoulli" if kind == "thompson_baseline" else "gaussian"
    return cfg if cfg.reward_mode == mode else replace(cfg, reward_mode=mode)


def agent_config_for(kind: str, base: AgentConfig, scores: ValueScores) -> AgentConfig:
    return replace(base, kind=kind, prior_mean=scores.midpoint)


@dataclass
class Trajectory:
    offered: np.ndarray
    chosen: np.ndarray
    rewards: np.ndarray
    was_bad: np.ndarray
    was_non_optimal: np.ndarray

    def __len__(self):
        return self.chosen.size


def env_reward(action: int, scores: ValueScores, cfg: EpisodeConfig, rng) -> float:
    m = scores.scores[action]
    if cfg.reward_mode == "gaussian":
        if cfg.reward_noise_sd == 0:
            return float(m)
        return float(rng.normal(m, cfg.reward_noise_sd))
    return float(rng.random() < env_success_probability(m, scores))


def _episode(agent, scores, actions, cfg, rng, learn):
    actions = np.asarray(actions, dtype=np.intp)
    if actions.size < cfg.subset_size:
        raise ValueError(f"{actions.size} actions cannot fill a subset of "
                         f"{cfg.subset_size}")
    s = scores.scores
    threshold = scores.bad_threshold
    steps = cfg.max_steps
    offered = np.empty((steps, cfg.subset_size), dtype=np.intp)
    chosen = np.empty(steps, dtype=np.intp)
    rewards = np.empty(steps)
    bad = np.empty(steps, dtype=bool)
    non_opt = np.empty(steps, dtype=bool)
    streak = 0
    converged_at = None
    t = 0
    while t < steps:
        subset = actions[rng.choice(actions.size, cfg.subset_size, replace=False)]
        x = agent.select_action(subset, rng)
        r = env_reward(x, scores, cfg, rng)
        if learn:
            agent.observe(x, r)
        offered[t] = subset
        chosen[t] = x
        rewards[t] = r
        bad[t] = s[x] < threshold
        non_opt[t] = s[x] < s[subset].max()
        t += 1
        streak = 0 if non_opt[t - 1] else streak + 1
        if converged_at is None and streak >= cfg.convergence_streak:
            converged_at = t
            if cfg.stop_at_convergence:
                break
    traj = Trajectory(offered[:t], chosen[:t], rewards[:t], bad[:t], non_opt[:t])
    metrics = RunMetrics(
        mean_reward=float(traj.rewards.sum() / t),
        bad_actions=int(traj.was_bad.sum()),
        non_optimal_actions=int(traj.was_non_optimal.sum()),
        iterations_to_convergence=converged_at if learn else None,
        unique_actions=int(np.unique(traj.chosen).size),
        converged=converged_at is not None and learn,
        steps=t,
    )
    return traj, metrics


def run_personalization(agent, scores: ValueScores, actions, cfg: EpisodeConfig, rng):
    """One learning episode; the agent observes every reward it receives."""
    traj, metrics = _episode(agent, scores, actions, cfg, rng, learn=True)
    return agent, traj, metrics


def run_generalization(agent, scores: ValueScores, actions, cfg: EpisodeConfig, rng):
    """Evaluation episode with the agent frozen (it is frozen here if not already)."""
    agent.freeze()
    return _episode(agent, scores, actions, cfg, rng, learn=False)


# -- experiment protocols ---------------------------------------------------

def _streams(seed, k=4):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(k)]


@dataclass(frozen=True)
class SyntheticResult:
    alignment: float
    metrics: RunMetrics
    k: int


def run_synthetic_experiment(agent_kind: str, k: int, seed: int, n: int = 50,
                             episode: EpisodeConfig = EpisodeConfig(),
                             agent_config: AgentConfig = AgentConfig()):
    """Corrupt ``k`` of ``n`` ground-truth scores, build the agent's kernel from
    the corrupted scores and run personalization on all actions until the
    agent converges or hits ``episode.max_steps``.

    Returns ``(alignment, metrics)``.
    """
    env_rng, corrupt_rng, run_rng, _ = _streams(seed)
    scores = synthetic_scores(n, env_rng)
    true_kernel = score_kernel(scores)
    kernel = score_kernel(corrupt_scores(scores, CorruptionSpec(k), corrupt_rng))
    align = alignment(true_kernel, kernel)
    cfg = episode_for(agent_kind, replace(episode, stop_at_convergence=True))
    agent = agent_new(kernel, agent_config_for(agent_kind, agent_config, scores))
    _, _, metrics = run_personalization(agent, scores, np.arange(n), cfg, run_rng)
    return align, replace(metrics, alignment=align)


@dataclass(frozen=True)
class ValueRunRecord:
    alignment_full: float
    alignment_pers: float
    alignment_cross: float
    personalization: RunMetrics
    generalization: RunMetrics


def _safe_alignment(a, b, variant):
    try:
        return alignment(a, b, variant)
    except UndefinedCorrelationError:
        return math.nan


def run_value_experiment(kernel: SimilarityMatrix, scores: ValueScores,
                         human_kernel: SimilarityMatrix,
                         cfg: EpisodeConfig = EpisodeConfig(), seed: int = 0,
                         agent_config: AgentConfig = AgentConfig(kind="kernel_ridge")):
    """Personalize on a random half of the actions, freeze, generalize on the rest."""
    if not kernel.n == scores.n == human_kernel.n:
        raise ValueError("kernel, scores and reference kernel sizes differ")
    split_rng, pers_rng, gen_rng, _ = _streams(seed)
    split = split_random(kernel.n, split_rng)
    full = _safe_alignment(kernel, human_kernel, AlignmentVariant("full"))
    pers = _safe_alignment(kernel, human_kernel, AlignmentVariant("pers", split))
    cross = _safe_alignment(kernel, human_kernel, AlignmentVariant("cross", split))
    kind = agent_config.kind
    ep = episode_for(kind, cfg)
    agent = agent_new(kernel, agent_config_for(kind, agent_config, scores))
    _, _, p_metrics = run_personalization(
        agent, scores, split.personalization_ids, ep, pers_rng)
    _, g_metrics = run_generalization(
        agent, scores, split.generalization_ids, ep, gen_rng)
    return ValueRunRecord(full, pers, cross,
                          replace(p_metrics, alignment=full),
                          replace(g_metrics, alignment=full))


# -- campaigns --------------------------------------------------------------

RUN_COLUMNS = (
    "run_index", "cell", "seed", "agent",
    "alignment_full", "alignment_pers", "alignment_cross",
    "mean_reward", "bad_actions", "non_optimal_actions", "unique_actions",
    "iterations_to_convergence", "converged", "phase", "steps", "error",
)
METRICS = ("mean_reward", "bad_actions", "non_optimal_actions",
           "unique_actions", "iterations_to_convergence")


def derive_seed(master_seed: int, *key: int) -> int:
    """Stable 63-bit seed for one run, independent of scheduling."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(2, np.uint64)[0] >> np.uint64(1))


def _row(index, cell, seed, agent, phase, metrics=None, align=(math.nan,) * 3,
         error=""):
    row = dict.fromkeys(RUN_COLUMNS)
    row.update(run_index=index, cell=cell, seed=seed, agent=agent, phase=phase,
               alignment_full=align[0], alignment_pers=align[1],
               alignment_cross=align[2], error=error)
    if metrics is not None:
        row.update(mean_reward=metrics.mean_reward,
                   bad_actions=metrics.bad_actions,
                   non_optimal_actions=metrics.non_optimal_actions,
                   unique_actions=metrics.unique_actions,
                   iterations_to_convergence=metrics.iterations_to_convergence,
                   converged=metrics.converged, steps=metrics.steps)
    return row


@dataclass(frozen=True)
class SyntheticCampaign:
    """Corruption campaign.

    With ``levels`` the grid is agents x levels x ``runs``; without, each of
    ``runs`` runs per agent draws its corruption count uniformly from
    ``0..n``.
    """

    agents: tuple = KERNEL_KINDS
    runs: int = 600
    master_seed: int = 0
    levels: Optional[tuple] = None
    n: int = 50
    episode: EpisodeConfig = EpisodeConfig()
    agent_config: AgentConfig = AgentConfig()

    def tasks(self):
        out = []
        if self.levels is None:
            cells = [(None, r) for r in range(self.runs)]
        else:
            cells = [(li, r) for li in range(len(self.levels))
                     for r in range(self.runs)]
        for agent in self.agents:
            for li, r in cells:
                if li is None:
                    seed = derive_seed(self.master_seed, r)
                    k = int(np.random.default_rng(
                        derive_seed(self.master_seed, r, 1)).integers(0, self.n + 1))
                else:
                    seed = derive_seed(self.master_seed, li, r)
                    k = int(self.levels[li])
                out.append((agent, k, seed))
        return out

    def execute(self, index, task):
        agent, k, seed = task
        cell = f"k={k}"
        try:
            align, m = run_synthetic_experiment(agent, k, seed, self.n,
                                                self.episode, self.agent_config)
        except Exception as exc:  # recorded per row; the campaign goes on
            return [_row(index, cell, seed, agent, "personalization",
                         error=f"{type(exc).__name__}: {exc}")]
        return [_row(index, cell, seed, agent, "personalization", m,
                     (align, math.nan, math.nan))]


@dataclass(frozen=True)
class ValueCampaign:
    """Personalization + generalization runs over named kernels and rewards.

    ``reference`` is the kernel alignment is measured against (the human
    kernel); ``None`` means "the score kernel of the reward being learned".
    """

    kernels: dict
    rewards: dict
    reference: Optional[SimilarityMatrix] = None
    agents: tuple = ("kernel_ridge",)
    runs: int = 100
    master_seed: int = 0
    episode: EpisodeConfig = EpisodeConfig()
    agent_config: AgentConfig = AgentConfig()
    random_kernel: bool = False

    def tasks(self):
        out = []
        names = sorted(self.kernels)
        if self.random_kernel:
            names = names + ["random"]
        for agent in self.agents:
            for reward in sorted(self.rewards):
                for kname in names:
                    for r in range(self.runs):
                        out.append((agent, kname, reward, derive_seed(self.master_seed, r)))
        return out

    def _kernel(self, name, scores, seed):
        if name == "random":
            rng = np.random.default_rng(derive_seed(seed, 7))
            noise = scores.with_scores(rng.uniform(scores.scale_min, scores.scale_max,
                                                   scores.n))
            return score_kernel(noise)
        return self.kernels[name]

    def execute(self, index, task):
        agent, kname, reward, seed = task
        cell = kname if len(self.rewards) == 1 else f"{kname}|{reward}"
        scores = self.rewards[reward]
        try:
            kernel = self._kernel(kname, scores, seed)
            ref = self.reference if self.reference is not None else score_kernel(scores)
            rec = run_value_experiment(kernel, scores, ref, self.episode, seed,
                                       replace(self.agent_config, kind=agent))
        except Exception as exc:
            err = f"{type(exc).__name__}: {exc}"
            return [_row(index, cell, seed, agent, ph, error=err)
                    for ph in ("personalization", "generalization")]
        align = (rec.alignment_full, rec.alignment_pers, rec.alignment_cross)
        return [_row(index, cell, seed, agent, "personalization", rec.personalization, align),
                _row(index, cell, seed, agent, "generalization", rec.generalization, align)]


@dataclass(frozen=True)
class InterpolationCampaign:
    """Sweep a kernel linearly toward a target and run value experiments.

    Without files, every run builds its own stand-in: synthetic ground-truth
    scores, their score kernel as the target, and a base kernel from the
    scores with ``corrupt`` actions resampled (default: all of them).
    """

    alphas: tuple = tuple(np.linspace(0.0, 1.0, 11))
    runs: int = 100
    master_seed: int = 0
    agents: tuple = ("kernel_ridge",)
    base: Optional[SimilarityMatrix] = None
    target: Optional[SimilarityMatrix] = None
    scores: Optional[ValueScores] = None
    n: int = 50
    corrupt: Optional[int] = None
    episode: EpisodeConfig = EpisodeConfig()
    agent_config: AgentConfig = AgentConfig()

    def tasks(self):
        return [(agent, float(a), derive_seed(self.master_seed, r))
                for agent in self.agents for a in self.alphas
                for r in range(self.runs)]

    def _setup(self, seed):
        if self.scores is not None:
            return self.base, self.target, self.scores
        env_rng, corrupt_rng, _, _ = _streams(derive_seed(seed, 3))
        scores = synthetic_scores(self.n, env_rng)
        k = self.n if self.corrupt is None else self.corrupt
        base = score_kernel(corrupt_scores(scores, CorruptionSpec(k), corrupt_rng))
        return base, score_kernel(scores), scores

    def execute(self, index, task):
        agent, a, seed = task
        cell = f"alpha={a:.4g}"
        try:
            base, target, scores = self._setup(seed)
            kernel = interpolate_kernel(base, target, a)
            rec = run_value_experiment(kernel, scores, target, self.episode, seed,
                                       replace(self.agent_config, kind=agent))
        except Exception as exc:
            err = f"{type(exc).__name__}: {exc}"
            return [_row(index, cell, seed, agent, ph, error=err)
                    for ph in ("personalization", "generalization")]
        align = (rec.alignment_full, rec.alignment_pers, rec.alignment_cross)
        return [_row(index, cell, seed, agent, "personalization", rec.personalization, align),
                _row(index, cell, seed, agent, "generalization", rec.generalization, align)]


_WORKER_CAMPAIGN = None


def _init_worker(campaign):
    global _WORKER_CAMPAIGN
    _WORKER_CAMPAIGN = campaign


def _work(item):
    index, task = item
    return _WORKER_CAMPAIGN.execute(index, task)


def run_campaign(campaign, parallelism: int = 1) -> list:
    """Execute every task of ``campaign``; return rows in task order."""
    items = list(enumerate(campaign.tasks()))
    if parallelism <= 1 or len(items) < 2:
        chunks = [campaign.execute(i, t) for i, t in items]
    else:
        chunksize = max(1, len(items) // (parallelism * 8))
        with ProcessPoolExecutor(parallelism, initializer=_init_worker,
                                 initargs=(campaign,)) as pool:
            chunks = list(pool.map(_work, items, chunksize=chunksize))
    return [row for chunk in chunks for row in chunk]
