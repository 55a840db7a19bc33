"""Detection and selective-prediction metrics with bootstrap uncertainty.

AUROC/AUPRC treat label 1 (hallucination) as the positive class and expect
higher risk for positives. The risk--coverage machinery uses exact step
integrals over the discrete acceptance sets induced by unique risk values
(ties enter together), so the oracle-excess e_aurc has an exact zero case and
is never negative.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .policy import apply_policy, calibrate_threshold, selective_risk

BOOTSTRAP_ITERATIONS = 200
TCE_FALLBACKS = ("per_alpha", "whole_range")


@dataclass(frozen=True)
class RcCurve:
    """Risk--coverage curve points (coverage ascending, last point coverage 1)."""

    points: tuple[tuple[float, float], ...]
    aurc: float
    e_aurc: float

    @property
    def coverages(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    @property
    def selective_risks(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])


@dataclass(frozen=True)
class MetricReport:
    """Per-method metric summary; each value is (bootstrap mean, bootstrap std)."""

    method: str
    auroc: tuple[float, float]
    auprc: tuple[float, float]
    e_aurc: tuple[float, float]
    tce: tuple[float, float]
    base_accuracy: float
    spearman_vs: dict[str, float] = field(default_factory=dict)
    model: str = ""
    dataset: str = ""

    def __post_init__(self):
        for name in ("auroc", "auprc", "e_aurc", "tce"):
            mean, std = getattr(self, name)
            if not 0.0 <= mean <= 1.0:
                raise ValueError(f"{name} mean {mean} outside [0, 1]")
            if std < 0.0:
                raise ValueError(f"{name} std {std} must be >= 0")


def _midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the average rank of their group."""
    order = np.argsort(values, kind="stable")
    sorted_vals = values[order]
    ranks = np.empty(values.size, dtype=float)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _check_binary(labels: np.ndarray) -> tuple[int, int]:
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos + n_neg != labels.size:
        raise ValueError("labels must be 0/1")
    return n_pos, n_neg


def auroc(risks, labels) -> float:
    """Mann-Whitney AUROC: P(random positive outranks random negative), ties 1/2."""
    r = np.asarray(risks, dtype=float)
    y = np.asarray(labels, dtype=int)
    n_pos, n_neg = _check_binary(y)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both classes must be present for AUROC")
    ranks = _midranks(r)
    rank_sum = ranks[y == 1].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def auprc(risks, labels) -> float:
    """Average precision over descending-risk thresholds, ties entering together."""
    r = np.asarray(risks, dtype=float)
    y = np.asarray(labels, dtype=int)
    n_pos, _ = _check_binary(y)
    if n_pos == 0:
        raise ValueError("at least one positive required for AUPRC")
    order = np.argsort(-r, kind="stable")
    sorted_risks = r[order]
    cum_tp = np.cumsum(y[order])
    boundaries = np.flatnonzero(np.diff(sorted_risks) != 0)
    last = np.append(boundaries, r.size - 1)
    tp = cum_tp[last].astype(float)
    counts = (last + 1).astype(float)
    precision = tp / counts
    recall = tp / n_pos
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    return float(((recall - prev_recall) * precision).sum())


def rc_curve(risks, labels) -> RcCurve:
    """Risk--coverage curve from an ascending sweep over unique risk values.

    aurc integrates selective risk against coverage increments. The oracle
    term uses the same coverage grid with the best achievable selective risk
    at each point (all correct examples accepted before any hallucination), so
    e_aurc is termwise non-negative and exactly zero for oracle rankings.
    """
    r = np.asarray(risks, dtype=float)
    y = np.asarray(labels, dtype=float)
    n = r.size
    if n == 0:
        raise ValueError("need at least one example")
    order = np.argsort(r, kind="stable")
    sorted_risks = r[order]
    cum_halluc = np.cumsum(y[order])
    boundaries = np.flatnonzero(np.diff(sorted_risks) != 0)
    last = np.append(boundaries, n - 1)
    counts = last + 1
    coverages = counts / n
    sel_risks = cum_halluc[last] / counts

    n_correct = n - int(y.sum())
    oracle_risks = np.maximum(0, counts - n_correct) / counts

    deltas = np.diff(np.concatenate([[0.0], coverages]))
    aurc = float((sel_risks * deltas).sum())
    e_aurc = float(((sel_risks - oracle_risks) * deltas).sum())
    points = tuple((float(c), float(s)) for c, s in zip(coverages, sel_risks))
    return RcCurve(points=points, aurc=aurc, e_aurc=e_aurc)


def realized_test_risks(
    risks_cal,
    labels_cal,
    risks_test,
    labels_test,
    alpha_grid,
) -> tuple[np.ndarray, np.ndarray]:
    """Test selective risk per target alpha after calibrating on the calibration split.

    Returns (realized risks, covered mask). Zero-coverage alphas carry the
    test base hallucination rate; the mask marks which alphas actually
    answered anything.
    """
    grid = np.asarray(alpha_grid, dtype=float)
    if grid.size == 0 or np.any(grid <= 0) or np.any(grid >= 1):
        raise ValueError("alpha grid must be non-empty within (0, 1)")
    test_labels = np.asarray(labels_test, dtype=float)
    if np.asarray(risks_cal).size == 0 or test_labels.size == 0:
        raise ValueError("calibration and test sets must be non-empty")
    base_rate = float(test_labels.mean())

    realized = np.empty(grid.size)
    covered = np.empty(grid.size, dtype=bool)
    for i, alpha in enumerate(grid):
        policy = calibrate_threshold(risks_cal, labels_cal, float(alpha))
        answered = apply_policy(policy, risks_test)
        covered[i] = bool(answered.any())
        realized[i] = selective_risk(answered, test_labels) if covered[i] else base_rate
    return realized, covered


def tce(
    risks_cal,
    labels_cal,
    risks_test,
    labels_test,
    alpha_grid,
    fallback: str = "per_alpha",
) -> float:
    """Mean absolute gap between realized test selective risk and target alpha.

    ``fallback`` picks the zero-coverage rule: "per_alpha" (default)
    substitutes the test base hallucination rate for each zero-coverage alpha
    before averaging; "whole_range" reports the base rate itself as the TCE
    when coverage is zero over the entire grid, and otherwise behaves like
    "per_alpha" for isolated zeros (the only well-defined extension).
    """
    if fallback not in TCE_FALLBACKS:
        raise ValueError(f"fallback must be one of {TCE_FALLBACKS}")
    grid = np.asarray(alpha_grid, dtype=float)
    realized, covered = realized_test_risks(
        risks_cal, labels_cal, risks_test, labels_test, grid
    )
    if fallback == "whole_range" and not covered.any():
        return float(np.asarray(labels_test, dtype=float).mean())
    return float(np.abs(realized - grid).mean())


def spearman(risks_a, risks_b) -> float:
    """Spearman rank correlation: Pearson correlation of midranks."""
    a = np.asarray(risks_a, dtype=float)
    b = np.asarray(risks_b, dtype=float)
    if a.size != b.size or a.size < 2:
        raise ValueError("need two equal-length vectors with n >= 2")
    ra = _midranks(a)
    rb = _midranks(b)
    ra -= ra.mean()
    rb -= rb.mean()
    denom = math.sqrt(float(ra @ ra) * float(rb @ rb))
    if denom == 0.0:
        raise ValueError("rank correlation undefined for a constant input")
    return float(ra @ rb / denom)


def _iteration_seed(seed: int, iteration: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=seed, spawn_key=(iteration,))


def bootstrap_indices(
    n: int,
    seed: int,
    iteration: int,
    labels=None,
    max_redraws: int = 100,
) -> np.ndarray:
    """Resample indices for one bootstrap iteration, derived only from (seed, iteration).

    When ``labels`` is given, single-class resamples are redrawn (bounded)
    from the same per-iteration stream, keeping every iteration independently
    reproducible under any execution order.
    """
    rng = np.random.default_rng(_iteration_seed(seed, iteration))
    labels = None if labels is None else np.asarray(labels)
    for _ in range(max_redraws):
        idx = rng.integers(0, n, size=n)
        if labels is None or np.unique(labels[idx]).size > 1:
            return idx
    raise ValueError(f"could not draw a two-class resample in {max_redraws} tries")


def bootstrap(
    metric,
    n: int,
    *,
    iterations: int = BOOTSTRAP_ITERATIONS,
    seed: int = 0,
    labels=None,
) -> tuple[float, float]:
    """(mean, population std) of ``metric(indices)`` over seeded resamples."""
    if n <= 0:
        raise ValueError("data must be non-empty")
    values = np.empty(iterations)
    for i in range(iterations):
        values[i] = metric(bootstrap_indices(n, seed, i, labels=labels))
    mean = float(values.mean())
    std = float(np.sqrt(((values - mean) ** 2).mean()))
    return mean, std


def method_metric_seed(base_seed: int, method: str, metric_name: str) -> int:
    """Stable per-(method, metric) bootstrap seed, independent of run order."""
    digest = hashlib.sha256(f"{base_seed}:{method}:{metric_name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def write_metrics_csv(reports: list[MetricReport], path: str | Path) -> None:
    """One row per (method, metric): method,metric,mean,std."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", "metric", "mean", "std"])
        for report in reports:
            for name in ("auroc", "auprc", "e_aurc", "tce"):
                mean, std = getattr(report, name)
                writer.writerow([report.method, name, repr(float(mean)), repr(float(std))])


def write_rc_csv(curve: RcCurve, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["coverage", "selective_risk"])
        for coverage, risk in curve.points:
            writer.writerow([repr(float(coverage)), repr(float(risk))])
