"""Flat-text file formats: actions, scores, kernels and campaign results.

Every parser reports the 1-based line number of the first bad row. Floats
are written with ``repr`` so a written file parses back bit-identically.
"""

from __future__ import annotations

import csv
import math
import warnings
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .alignment import (UndefinedCorrelationError, bin_series,
                        spearman_permutation_test)
from .domain import (HUMAN_SCALE, ActionSet, SimilarityMatrix, ValueScores)
from .simulation import METRICS, RUN_COLUMNS

SYMMETRY_TOLERANCE = 1e-9
VARIANTS = ("full", "pers", "cross")
SUMMARY_COLUMNS = ("agent", "phase", "variant", "metric", "n", "spearman",
                   "p_value")
BINNED_COLUMNS = ("agent", "phase", "variant", "metric", "bin_width",
                  "bin_center", "mean", "standard_error", "count")


class FormatError(ValueError):
    def __init__(self, path, line: Optional[int], message: str):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


class KernelSymmetryWarning(UserWarning):
    pass


def _rows(path):
    """Yield ``(line_number, fields)`` for non-blank records."""
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f, strict=True)
        try:
            for fields in reader:
                if fields and any(x.strip() for x in fields):
                    yield reader.line_num, fields
        except csv.Error as exc:
            raise FormatError(path, reader.line_num, f"malformed row: {exc}") from None


def _header(path, rows, expected):
    try:
        line, head = next(rows)
    except StopIteration:
        raise FormatError(path, None, "file is empty") from None
    if [h.strip() for h in head] != list(expected):
        raise FormatError(path, line, f"header must be {','.join(expected)}, "
                          f"got {','.join(head)}")


def _int(path, line, text, what):
    try:
        return int(text.strip())
    except ValueError:
        raise FormatError(path, line, f"{what} {text!r} is not an integer") from None


def _float(path, line, text, what):
    try:
        v = float(text.strip())
    except ValueError:
        raise FormatError(path, line, f"{what} {text!r} is not a number") from None
    if not math.isfinite(v):
        raise FormatError(path, line, f"{what} {text!r} is not finite")
    return v


# -- actions ------------------------------------------------------------------

def parse_actions(path) -> ActionSet:
    """Read ``id,description`` rows; ids must run 0..N-1 in order."""
    rows = _rows(path)
    _header(path, rows, ("id", "description"))
    descriptions = []
    for line, fields in rows:
        if len(fields) != 2:
            raise FormatError(path, line, f"expected 2 fields, got {len(fields)}")
        i = _int(path, line, fields[0], "id")
        if i != len(descriptions):
            raise FormatError(path, line, f"expected id {len(descriptions)}, got {i}")
        if not fields[1].strip():
            raise FormatError(path, line, "empty description")
        descriptions.append(fields[1].strip())
    if not descriptions:
        raise FormatError(path, None, "no actions after the header")
    return ActionSet(tuple(descriptions))


def default_actions_path() -> Path:
    return Path(str(resources.files("repalign") / "data" / "actions.csv"))


def default_actions() -> ActionSet:
    """The shipped set of 50 action descriptions."""
    return parse_actions(default_actions_path())


def write_actions(path, actions: ActionSet):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id", "description"])
        for i, d in enumerate(actions.descriptions):
            w.writerow([i, d])


# -- scores -------------------------------------------------------------------

def parse_scores(path, value_name: str, n_actions: Optional[int] = None,
                 scale: tuple = HUMAN_SCALE,
                 bad_threshold: Optional[float] = None) -> ValueScores:
    """Read ``action_id,value_name,score`` rows for one value.

    ``n_actions`` fixes the required id range; by default it is one past the
    largest id seen. ``bad_threshold`` defaults to the scale midpoint.
    """
    lo, hi = scale
    rows = _rows(path)
    _header(path, rows, ("action_id", "value_name", "score"))
    found = {}
    for line, fields in rows:
        if len(fields) != 3:
            raise FormatError(path, line, f"expected 3 fields, got {len(fields)}")
        if fields[1].strip() != value_name:
            continue
        i = _int(path, line, fields[0], "action_id")
        s = _float(path, line, fields[2], "score")
        if i < 0 or (n_actions is not None and i >= n_actions):
            raise FormatError(path, line, f"action_id {i} out of range")
        if i in found:
            raise FormatError(path, line, f"duplicate row for action {i}")
        if not lo <= s <= hi:
            raise FormatError(path, line, f"score {s} outside [{lo}, {hi}]")
        found[i] = s
    if not found:
        raise FormatError(path, None, f"no rows for value {value_name!r}")
    n = n_actions if n_actions is not None else max(found) + 1
    missing = [i for i in range(n) if i not in found]
    if missing:
        raise FormatError(path, None, f"value {value_name!r} missing action ids "
                          f"{missing[:10]}{' ...' if len(missing) > 10 else ''}")
    threshold = 0.5 * (lo + hi) if bad_threshold is None else bad_threshold
    return ValueScores(value_name, np.array([found[i] for i in range(n)]),
                       lo, hi, threshold)


def score_values(path) -> list:
    """Distinct value names in a scores file, in first-seen order."""
    rows = _rows(path)
    _header(path, rows, ("action_id", "value_name", "score"))
    names = []
    for line, fields in rows:
        if len(fields) != 3:
            raise FormatError(path, line, f"expected 3 fields, got {len(fields)}")
        if fields[1].strip() not in names:
            names.append(fields[1].strip())
    return names


def write_scores(path, scores: Iterable[ValueScores]):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["action_id", "value_name", "score"])
        for vs in scores:
            for i, s in enumerate(vs.scores):
                w.writerow([i, vs.value_name, repr(float(s))])


# -- kernels ------------------------------------------------------------------

def parse_kernel(path, n_actions: Optional[int] = None) -> SimilarityMatrix:
    """Read an N x N grid whose first row lists the action ids 0..N-1.

    Asymmetry above ``SYMMETRY_TOLERANCE`` is averaged away with a
    :class:`KernelSymmetryWarning`; smaller asymmetry is averaged silently.
    """
    rows = _rows(path)
    try:
        line, head = next(rows)
    except StopIteration:
        raise FormatError(path, None, "file is empty") from None
    ids = [_int(path, line, h, "header id") for h in head]
    if ids != list(range(len(ids))):
        raise FormatError(path, line, "header must list ids 0..N-1 in order")
    n = len(ids)
    if n_actions is not None and n != n_actions:
        raise FormatError(path, line, f"kernel has {n} columns, expected {n_actions}")
    grid = []
    for line, fields in rows:
        if len(fields) != n:
            raise FormatError(path, line, f"ragged row: {len(fields)} cells, expected {n}")
        grid.append([_float(path, line, x, "cell") for x in fields])
    if len(grid) != n:
        raise FormatError(path, None, f"kernel has {len(grid)} rows, expected {n}")
    m = np.array(grid)
    asym = float(np.abs(m - m.T).max())
    if asym > SYMMETRY_TOLERANCE:
        warnings.warn(f"{path}: kernel asymmetric by up to {asym:.3g}; "
                      "replaced with (m + m^T) / 2", KernelSymmetryWarning,
                      stacklevel=2)
    if asym > 0:
        m = 0.5 * (m + m.T)
    return SimilarityMatrix(m, "file")


def write_kernel(path, m: SimilarityMatrix):
    entries = np.asarray(m.entries)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(range(entries.shape[0]))
        for row in entries:
            w.writerow([repr(float(x)) for x in row])


# -- results ------------------------------------------------------------------

def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_runs(path, rows: Sequence[dict]):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(RUN_COLUMNS)
        for row in rows:
            w.writerow([_cell(row.get(c)) for c in RUN_COLUMNS])


def read_runs(path) -> list:
    """Inverse of :func:`write_runs`, with numeric columns converted."""
    ints = ("run_index", "seed", "bad_actions", "non_optimal_actions",
            "unique_actions", "iterations_to_convergence", "steps")
    floats = ("alignment_full", "alignment_pers", "alignment_cross", "mean_reward")
    out = []
    with open(path, newline="", encoding="utf-8") as f:
        for raw in csv.DictReader(f):
            row = {}
            for k, v in raw.items():
                if v == "":
                    row[k] = None if k != "error" else ""
                elif k in ints:
                    row[k] = int(v)
                elif k in floats:
                    row[k] = float(v)
                elif k == "converged":
                    row[k] = v == "true"
                else:
                    row[k] = v
            out.append(row)
    return out


def metric_value(row: dict, metric: str) -> float:
    """Metric used in correlations. Runs that never converged are censored
    at the number of steps they took."""
    v = row.get(metric)
    if metric == "iterations_to_convergence" and v is None:
        v = row.get("steps")
    return math.nan if v is None else float(v)


def _groups(rows):
    groups = {}
    for row in rows:
        if row.get("error"):
            continue
        groups.setdefault((row["agent"], row["phase"]), []).append(row)
    return groups


def summarize(rows: Sequence[dict], n_permutations: int = 10_000,
              seed: int = 0) -> list:
    """Spearman(alignment, metric) and permutation p per agent, phase,
    alignment variant and metric."""
    out = []
    rng = np.random.default_rng(seed)
    for (agent, phase), group in sorted(_groups(rows).items()):
        for variant in VARIANTS:
            a = np.array([_nan(r[f"alignment_{variant}"]) for r in group])
            for metric in METRICS:
                if phase == "generalization" and metric == "iterations_to_convergence":
                    continue
                y = np.array([metric_value(r, metric) for r in group])
                keep = np.isfinite(a) & np.isfinite(y)
                rho = p = math.nan
                if keep.sum() >= 2:
                    try:
                        rho, p = spearman_permutation_test(
                            a[keep], y[keep], n_permutations, rng)
                    except UndefinedCorrelationError:
                        pass
                out.append(dict(agent=agent, phase=phase, variant=variant,
                                metric=metric, n=int(keep.sum()),
                                spearman=rho, p_value=p))
    return out


def _nan(v):
    return math.nan if v is None else float(v)


def binned(rows: Sequence[dict], bin_width: float = 0.05) -> list:
    out = []
    for (agent, phase), group in sorted(_groups(rows).items()):
        for variant in VARIANTS:
            a = np.array([_nan(r[f"alignment_{variant}"]) for r in group])
            for metric in METRICS:
                y = np.array([metric_value(r, metric) for r in group])
                keep = np.isfinite(a) & np.isfinite(y)
                series = bin_series(zip(a[keep], y[keep]), bin_width)
                for b in series.bins:
                    out.append(dict(agent=agent, phase=phase, variant=variant,
                                    metric=metric, bin_width=bin_width,
                                    bin_center=round(b.center, 12), mean=b.mean,
                                    standard_error=b.standard_error, count=b.count))
    return out


def emit_results(rows: Sequence[dict], out_dir, bin_width: float = 0.05,
                 n_permutations: int = 10_000, seed: int = 0) -> dict:
    """Write ``runs.csv``, ``summary.csv`` and ``binned.tsv`` to ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {name: out / name for name in ("runs.csv", "summary.csv", "binned.tsv")}
    write_runs(paths["runs.csv"], rows)
    with open(paths["summary.csv"], "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for s in summarize(rows, n_permutations, seed):
            w.writerow([_cell(s[c]) for c in SUMMARY_COLUMNS])
    with open(paths["binned.tsv"], "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, delimiter="\t", lineterminator="\n")
        w.writerow(BINNED_COLUMNS)
        for b in binned(rows, bin_width):
            w.writerow([_cell(b[c]) for c in BINNED_COLUMNS])
    return paths
