"""Rank-correlation statistics between proxy scores and true accuracies.

kendall_tau, spearman, and pearson accept either two 1-d arrays or a single
PairedSeries. Kendall is tau-a by default: ties contribute zero to the
numerator and the denominator stays C(M,2); pass tie_correction=True for the
tau-b denominator used by most statistics libraries.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np


class MissingArchError(ValueError):
    """A sampled arch_id has no entry in the accuracy table."""


@dataclass(frozen=True)
class PairedSeries:
    """Aligned proxy scores and ground-truth targets for a set of architectures."""

    arch_ids: tuple[str, ...]
    scores: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        targets = np.asarray(self.targets, dtype=np.float64)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "targets", targets)
        m = len(self.arch_ids)
        if scores.shape != (m,) or targets.shape != (m,):
            raise ValueError("arch_ids, scores, and targets must have equal length")
        if m < 3:
            raise ValueError(f"a paired series needs at least 3 entries, got {m}")
        if len(set(self.arch_ids)) != m:
            raise ValueError("arch_ids must be unique")
        if not (np.isfinite(scores).all() and np.isfinite(targets).all()):
            raise ValueError("scores and targets must be finite")


def _as_xy(series, scores=None) -> tuple[np.ndarray, np.ndarray]:
    if scores is None:
        if not isinstance(series, PairedSeries):
            raise TypeError("pass a PairedSeries or two arrays")
        return series.targets, series.scores
    x = np.asarray(series, dtype=np.float64)
    y = np.asarray(scores, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        raise ValueError(f"need two equal-length 1-d arrays, got {x.shape} and {y.shape}")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValueError("inputs must be finite")
    return x, y


def _is_constant(x: np.ndarray) -> bool:
    return bool(np.all(x == x[0]))


def kendall_tau(series, scores=None, *, tie_correction: bool = False) -> float:
    """Pairwise concordance: sum of sgn(dx)*sgn(dy) over pairs, / C(M,2).

    With tie_correction the denominator becomes the tau-b geometric mean of
    tie-adjusted pair counts.
    """
    x, y = _as_xy(series, scores)
    m = len(x)
    if m < 2:
        raise ValueError("kendall_tau needs at least 2 entries")
    if _is_constant(x) or _is_constant(y):
        warnings.warn("kendall_tau of a constant series is 0 by convention", RuntimeWarning, stacklevel=2)
        return 0.0
    dx = np.sign(x[:, None] - x[None, :])
    dy = np.sign(y[:, None] - y[None, :])
    upper = np.triu_indices(m, k=1)
    concordance = float((dx[upper] * dy[upper]).sum())
    n_pairs = m * (m - 1) / 2
    if not tie_correction:
        return concordance / n_pairs

    def tie_pairs(v: np.ndarray) -> float:
        _, counts = np.unique(v, return_counts=True)
        return float((counts * (counts - 1) / 2).sum())

    denom = np.sqrt((n_pairs - tie_pairs(x)) * (n_pairs - tie_pairs(y)))
    return concordance / denom


def average_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks; tied values share the mean of their positions."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x))
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def pearson(series, scores=None) -> float:
    x, y = _as_xy(series, scores)
    if len(x) < 3:
        raise ValueError("pearson needs at least 3 entries")
    if _is_constant(x) or _is_constant(y):
        raise ValueError("pearson is undefined for a zero-variance series")
    xc = x - x.mean()
    yc = y - y.mean()
    return float((xc * yc).sum() / np.sqrt((xc**2).sum() * (yc**2).sum()))


def spearman(series, scores=None) -> float:
    """Pearson correlation of the average ranks."""
    x, y = _as_xy(series, scores)
    if len(x) < 3:
        raise ValueError("spearman needs at least 3 entries")
    if _is_constant(x) or _is_constant(y):
        warnings.warn("spearman of a constant series is 0 by convention", RuntimeWarning, stacklevel=2)
        return 0.0
    return pearson(average_ranks(x), average_ranks(y))


@dataclass(frozen=True)
class CoefficientSummary:
    mean: float
    std: float


@dataclass(frozen=True)
class CorrelationReport:
    proxy_name: str
    kendall_tau: CoefficientSummary
    spearman: CoefficientSummary
    pearson: CoefficientSummary
    n_seeds: int
    n_archs: int


def _summary(values: list[float]) -> CoefficientSummary:
    arr = np.asarray(values, dtype=np.float64)
    return CoefficientSummary(float(arr.mean()), float(arr.std()))


def _series_from_rows(rows, accuracy: Mapping[str, float], sample_size, rng) -> PairedSeries:
    ids = [r.arch_id for r in rows]
    if len(set(ids)) != len(ids):
        dup = next(i for i in ids if ids.count(i) > 1)
        raise ValueError(f"duplicate arch_id {dup!r} within one seed's scores")
    if sample_size is not None and sample_size < len(ids):
        if rng is None:
            raise ValueError("subsampling needs an rng")
        picked = rng.choice(len(ids), size=sample_size, replace=False)
        rows = [rows[int(i)] for i in np.sort(picked)]
        ids = [r.arch_id for r in rows]
    targets = []
    for i in ids:
        if i not in accuracy:
            raise MissingArchError(f"arch_id {i!r} missing from the accuracy table")
        targets.append(accuracy[i])
    if len(ids) < 3:
        raise ValueError(f"need at least 3 joined rows per seed, got {len(ids)}")
    return PairedSeries(tuple(ids), np.array([r.value for r in rows]), np.array(targets))


def evaluate_proxy(
    score_csv_paths: Sequence[str | Path],
    accuracy_table: Mapping[str, float] | str | Path,
    sample_size: int | None = None,
    rng: np.random.Generator | None = None,
    n_repeats: int | None = None,
) -> list[CorrelationReport]:
    """Correlate each proxy found in the score CSVs against the accuracy table.

    Rows are grouped into per-seed series by (file, seed column). Each series
    is sampled down to sample_size without replacement (when given), joined
    on arch_id, and reduced to the three coefficients; means and stds
    (population) aggregate over series. n_repeats, when given, runs that many
    sampling repetitions, cycling over the available series; this is how one
    score file can back several subsampled evaluations.
    """
    from .data import load_accuracy_csv, read_scores_csv

    if isinstance(accuracy_table, (str, Path)):
        accuracy_table = load_accuracy_csv(accuracy_table)

    by_proxy: dict[str, dict[tuple[int, int], list]] = {}
    for path_idx, path in enumerate(score_csv_paths):
        for row in read_scores_csv(path):
            by_proxy.setdefault(row.proxy, {}).setdefault((path_idx, row.seed), []).append(row)

    if not by_proxy:
        raise ValueError("no score rows found")

    reports = []
    for proxy in sorted(by_proxy):
        groups = [by_proxy[proxy][key] for key in sorted(by_proxy[proxy])]
        repeats = len(groups) if n_repeats is None else n_repeats
        if repeats < 1:
            raise ValueError("n_repeats must be >= 1")
        taus, rhos, rs, sizes = [], [], [], []
        for rep in range(repeats):
            series = _series_from_rows(groups[rep % len(groups)], accuracy_table, sample_size, rng)
            taus.append(kendall_tau(series))
            rhos.append(spearman(series))
            rs.append(pearson(series))
            sizes.append(len(series.arch_ids))
        if len(set(sizes)) != 1:
            raise ValueError(f"inconsistent join sizes across seeds for {proxy!r}: {sorted(set(sizes))}")
        reports.append(
            CorrelationReport(proxy, _summary(taus), _summary(rhos), _summary(rs), repeats, sizes[0])
        )
    return reports


def report_rows(reports: Sequence[CorrelationReport]) -> list[tuple]:
    """Flatten reports to (proxy, metric, mean%, std%, n_seeds, n_archs) rows."""
    rows = []
    for rep in reports:
        for metric, summ in (
            ("kendall_tau", rep.kendall_tau),
            ("spearman", rep.spearman),
            ("pearson", rep.pearson),
        ):
            rows.append(
                (rep.proxy_name, metric, 100 * summ.mean, 100 * summ.std, rep.n_seeds, rep.n_archs)
            )
    return rows


def format_report_table(reports: Sequence[CorrelationReport]) -> str:
    """Human-readable table, coefficients as percent mean +- std."""
    header = f"{'proxy':<12} {'kendall_tau':>18} {'spearman':>18} {'pearson':>18}  seeds archs"
    lines = [header, "-" * len(header)]
    for rep in reports:
        cells = [
            f"{100 * s.mean:.2f} +- {100 * s.std:.2f}"
            for s in (rep.kendall_tau, rep.spearman, rep.pearson)
        ]
        lines.append(
            f"{rep.proxy_name:<12} {cells[0]:>18} {cells[1]:>18} {cells[2]:>18}  "
            f"{rep.n_seeds:>5} {rep.n_archs:>5}"
        )
    return "\n".join(lines)
