"""Command-line entry point: ``repalign <subcommand> [flags]``.

Exit status is 0 on success, 1 on a usage or validation error (bad flag,
malformed input file, failed theory check) and 2 on a runtime failure
(including any campaign run that raised).
"""

from __future__ import annotations

import argparse
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .agents import KERNEL_KINDS, KINDS
from .alignment import AlignmentVariant, UndefinedCorrelationError, alignment
from .domain import ValueScores, normalize_kernel, split_random
from .formats import (FormatError, default_actions, emit_results,
                      parse_actions, parse_kernel, parse_scores,
                      score_values, write_actions, write_kernel, write_scores)
from .kernels import (CorruptionSpec, corrupt_scores, length_kernel,
                      length_scores, score_kernel)
from .simulation import (EpisodeConfig, InterpolationCampaign, SyntheticCampaign,
                         ValueCampaign, run_campaign)
from .theory import run_theory_checks

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; we reserve 2 for runtime failures."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _agents(values, default):
    if not values:
        return tuple(default)
    if "all" in values:
        return tuple(KINDS)
    return tuple(dict.fromkeys(values))


def _episode(args) -> EpisodeConfig:
    return EpisodeConfig(max_steps=args.max_steps, subset_size=args.subset_size,
                         reward_noise_sd=args.noise_sd)


def _common(p, runs, out):
    p.add_argument("--runs", type=int, default=runs,
                   help=f"runs per cell (default {runs})")
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--jobs", type=int, default=1,
                   help="worker processes; output does not depend on it (default 1)")
    p.add_argument("--out", type=Path, default=Path(out),
                   help=f"output directory (default {out})")
    p.add_argument("--max-steps", type=int, default=1000,
                   help="steps per episode (default 1000)")
    p.add_argument("--subset-size", type=int, default=10,
                   help="actions offered per step (default 10)")
    p.add_argument("--noise-sd", type=float, default=1.0,
                   help="sd of Gaussian reward noise (default 1.0)")
    p.add_argument("--permutations", type=int, default=10_000,
                   help="shuffles per permutation test (default 10000)")
    p.add_argument("--bin-width", type=float, default=0.05,
                   help="alignment bin width for binned.tsv (default 0.05)")


def _agent_flag(p, default):
    p.add_argument("--agent", action="append", choices=KINDS + ("all",),
                   help=f"agent kind, repeatable (default: {', '.join(default)})")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="repalign", description=(
        "Kernel bandit simulations of learning value functions under "
        "varying representational alignment."))
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synthetic", help="corruption campaign on synthetic scores",
                       description="Corrupt k of n synthetic scores, build each "
                       "agent's kernel from them and relate alignment to safety "
                       "and speed of learning.")
    _agent_flag(p, KERNEL_KINDS)
    _common(p, 600, "results/synthetic")
    p.add_argument("--n", type=int, default=50, help="number of actions (default 50)")
    p.add_argument("--levels", type=int, nargs="+",
                   help="fixed corruption counts; default draws k uniformly from 0..n per run")

    p = sub.add_parser("human-values", help="per-value campaign over kernel files",
                       description="Personalize on half the actions and generalize "
                       "to the rest, for every kernel file in --kernels-dir.")
    _agent_flag(p, ("kernel_ridge",))
    _common(p, 100, "results/human-values")
    p.add_argument("--value", action="append", required=True,
                   help="value name in the scores file, repeatable; 'all' for every value")
    p.add_argument("--scores", type=Path, required=True,
                   help="scores file with header action_id,value_name,score")
    p.add_argument("--kernels-dir", type=Path, required=True,
                   help="directory of kernel CSV files; the file stem names the kernel")
    p.add_argument("--human-kernel", type=Path, required=True,
                   help="reference kernel that alignment is measured against")
    p.add_argument("--actions", type=Path, default=None,
                   help="actions file (default: the shipped 50 actions)")

    p = sub.add_parser("theory-check", help="run every closed-form oracle",
                       description="Exit 0 only if every theory check passes.")
    p.add_argument("--seed", type=int, default=0, help="seed (default 0)")
    p.add_argument("--specs", type=int, default=10_000,
                   help="random two-train specs (default 10000)")
    p.add_argument("--trials", type=int, default=1_000_000,
                   help="Monte Carlo trials per Chebyshev grid point (default 1000000)")

    p = sub.add_parser("interpolate", help="sweep a kernel toward a target",
                       description="Value experiments on (1 - a) base + a target "
                       "for a on an even grid. Without files, every run uses a "
                       "fully corrupted synthetic kernel moving toward the true one.")
    _agent_flag(p, ("kernel_ridge",))
    _common(p, 100, "results/interpolate")
    p.add_argument("--steps", type=int, default=11,
                   help="grid points from 0 to 1 inclusive (default 11)")
    p.add_argument("--base", type=Path, help="starting kernel file")
    p.add_argument("--target", type=Path, help="target kernel file")
    p.add_argument("--scores", type=Path, help="scores file (with --value)")
    p.add_argument("--value", help="value name to learn")
    p.add_argument("--corrupt", type=int, default=None,
                   help="synthetic mode: scores resampled in the base kernel (default all)")

    p = sub.add_parser("control", help="length kernel / reward cross grid",
                       description="Length-based kernel and reward crossed with "
                       "a kernel of independent random scores and, when given, "
                       "a human kernel and value.")
    _agent_flag(p, ("kernel_ridge",))
    _common(p, 100, "results/control")
    p.add_argument("--actions", type=Path, default=None,
                   help="actions file (default: the shipped 50 actions)")
    p.add_argument("--human-kernel", type=Path, help="optional human kernel file")
    p.add_argument("--scores", type=Path, help="optional scores file (with --value)")
    p.add_argument("--value", help="value name used as the second reward")

    p = sub.add_parser("align", help="alignment between two kernel files",
                       description="Print full, personalization and cross "
                       "alignment; the split is drawn from --seed.")
    p.add_argument("kernel_a", type=Path)
    p.add_argument("kernel_b", type=Path)
    p.add_argument("--seed", type=int, default=0, help="split seed (default 0)")

    p = sub.add_parser("demo-data", help="write a synthetic dataset for trying the CLI",
                       description="Writes actions.csv, scores.csv, human_kernel.csv "
                       "and kernels/*.csv with varying alignment.")
    p.add_argument("--out", type=Path, default=Path("demo"),
                   help="output directory (default demo)")
    p.add_argument("--seed", type=int, default=0, help="seed (default 0)")
    p.add_argument("--values", nargs="+", default=["morality", "fairness", "honesty"],
                   help="value names to generate")
    p.add_argument("--models", type=int, default=6, help="model kernels (default 6)")
    return parser


# -- subcommands ----------------------------------------------------------------

def _finish(rows, args, started) -> int:
    paths = emit_results(rows, args.out, args.bin_width, args.permutations, args.seed)
    errors = [r for r in rows if r.get("error")]
    print(f"{len(rows)} rows in {time.perf_counter() - started:.1f}s; "
          f"wrote {', '.join(str(p) for p in paths.values())}")
    if errors:
        print(f"{len(errors)} runs failed; first: {errors[0]['error']}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _print_summary(path: Path, metric="mean_reward"):
    import csv
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            if row["variant"] == "full" and row["metric"] == metric:
                print(f"  {row['agent']:<18}{row['phase']:<16}"
                      f"rho={float(row['spearman']):+.3f}  p={float(row['p_value']):.2g}")


def _positive(name, value):
    if value < 1:
        raise ValueError(f"--{name} must be at least 1")


def cmd_synthetic(args) -> int:
    _positive("runs", args.runs)
    if args.levels and any(not 0 <= k <= args.n for k in args.levels):
        raise ValueError(f"--levels must lie in 0..{args.n}")
    campaign = SyntheticCampaign(
        agents=_agents(args.agent, KERNEL_KINDS), runs=args.runs,
        master_seed=args.seed, levels=tuple(args.levels) if args.levels else None,
        n=args.n, episode=_episode(args))
    started = time.perf_counter()
    rows = run_campaign(campaign, args.jobs)
    code = _finish(rows, args, started)
    _print_summary(args.out / "summary.csv")
    return code


def _kernel_file(path, n):
    return normalize_kernel(parse_kernel(path, n))


def _actions(path):
    return default_actions() if path is None else parse_actions(path)


def _values(path, names, n):
    if "all" in names:
        names = score_values(path)
    return {v: parse_scores(path, v, n) for v in names}


def cmd_human_values(args) -> int:
    _positive("runs", args.runs)
    n = _actions(args.actions).n
    files = sorted(args.kernels_dir.glob("*.csv"))
    if not files:
        raise ValueError(f"no *.csv kernel files in {args.kernels_dir}")
    kernels = {f.stem: _kernel_file(f, n) for f in files}
    campaign = ValueCampaign(
        kernels=kernels, rewards=_values(args.scores, args.value, n),
        reference=_kernel_file(args.human_kernel, n),
        agents=_agents(args.agent, ("kernel_ridge",)), runs=args.runs,
        master_seed=args.seed, episode=_episode(args))
    started = time.perf_counter()
    return _finish(run_campaign(campaign, args.jobs), args, started)


def cmd_theory_check(args) -> int:
    started = time.perf_counter()
    results = run_theory_checks(args.seed, args.specs, args.trials)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.detail}")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} passed "
          f"in {time.perf_counter() - started:.1f}s")
    return EXIT_OK if failed == 0 else EXIT_INVALID


def cmd_interpolate(args) -> int:
    _positive("runs", args.runs)
    if args.steps < 2:
        raise ValueError("--steps must be at least 2")
    files = (args.base, args.target, args.scores, args.value)
    alphas = tuple(float(a) for a in np.linspace(0.0, 1.0, args.steps))
    kw = dict(alphas=alphas, runs=args.runs, master_seed=args.seed,
              agents=_agents(args.agent, ("kernel_ridge",)), episode=_episode(args),
              corrupt=args.corrupt)
    if any(x is not None for x in files):
        if any(x is None for x in files):
            raise ValueError("--base, --target, --scores and --value go together")
        base = normalize_kernel(parse_kernel(args.base))
        target = normalize_kernel(parse_kernel(args.target, base.n))
        kw.update(base=base, target=target,
                  scores=parse_scores(args.scores, args.value, base.n), n=base.n)
    started = time.perf_counter()
    return _finish(run_campaign(InterpolationCampaign(**kw), args.jobs), args, started)


def cmd_control(args) -> int:
    _positive("runs", args.runs)
    actions = _actions(args.actions)
    kernels = {"length": length_kernel(actions)}
    rewards = {"length": length_scores(actions)}
    if args.human_kernel is not None:
        kernels["human"] = _kernel_file(args.human_kernel, actions.n)
    if (args.scores is None) != (args.value is None):
        raise ValueError("--scores and --value go together")
    if args.scores is not None:
        rewards[args.value] = parse_scores(args.scores, args.value, actions.n)
    campaign = ValueCampaign(
        kernels=kernels, rewards=rewards, agents=_agents(args.agent, ("kernel_ridge",)),
        runs=args.runs, master_seed=args.seed, episode=_episode(args),
        random_kernel=True)
    started = time.perf_counter()
    rows = run_campaign(campaign, args.jobs)
    code = _finish(rows, args, started)
    print("mean reward by cell and phase:")
    cells = {}
    for r in rows:
        if not r.get("error"):
            cells.setdefault((r["agent"], r["cell"], r["phase"]), []).append(r["mean_reward"])
    for (agent, cell, phase), vals in sorted(cells.items()):
        print(f"  {agent:<14}{cell:<22}{phase:<16}{np.mean(vals):8.3f}")
    return code


def cmd_align(args) -> int:
    a = parse_kernel(args.kernel_a)
    b = parse_kernel(args.kernel_b, a.n)
    split = split_random(a.n, np.random.default_rng(args.seed))
    for kind in ("full", "pers", "cross"):
        variant = AlignmentVariant(kind, None if kind == "full" else split)
        try:
            value = f"{alignment(a, b, variant):.6f}"
        except UndefinedCorrelationError:
            value = "undefined"
        print(f"{kind}\t{value}")
    return EXIT_OK


def cmd_demo_data(args) -> int:
    """Synthetic stand-in data: the first value's score kernel plays the
    human kernel, and model kernels corrupt a growing share of its scores."""
    rng = np.random.default_rng(args.seed)
    out = args.out
    (out / "kernels").mkdir(parents=True, exist_ok=True)
    actions = default_actions()
    n = actions.n
    write_actions(out / "actions.csv", actions)
    values = []
    for name in args.values:
        values.append(ValueScores(name, np.round(rng.uniform(0, 100, n), 2), 0.0, 100.0, 50.0))
    write_scores(out / "scores.csv", values)
    human = score_kernel(values[0])
    write_kernel(out / "human_kernel.csv", human)
    for i, k in enumerate(np.linspace(0, n, args.models).round().astype(int)):
        corrupted = corrupt_scores(values[0], CorruptionSpec(int(k)), rng)
        write_kernel(out / "kernels" / f"model_{i:02d}_k{k}.csv", score_kernel(corrupted))
    print(f"wrote demo data for {n} actions, values {', '.join(args.values)}, "
          f"{args.models} model kernels to {out}")
    return EXIT_OK


COMMANDS = {
    "synthetic": cmd_synthetic,
    "human-values": cmd_human_values,
    "theory-check": cmd_theory_check,
    "interpolate": cmd_interpolate,
    "control": cmd_control,
    "align": cmd_align,
    "demo-data": cmd_demo_data,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = _show_warning
            return COMMANDS[args.command](args)
    except (FormatError, ValueError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
