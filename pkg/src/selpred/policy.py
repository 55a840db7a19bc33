"""Selective-prediction policy: calibrate a risk threshold to a target, then decide.

A policy answers exactly when r(x) <= tau. Calibration picks the largest tau
whose answered-set hallucination rate on the calibration split stays at or
below the target alpha; the candidate taus are the observed unique risk
values plus -inf (answer nothing), which covers every distinct policy the
calibration set can induce. The hallucination rate of an empty answered set
is 0, so tau = -inf satisfies any target.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class SelectivePolicy:
    score_name: str
    tau: float
    target_alpha: float
    calibration_coverage: float
    calibration_risk: float


def calibrate_threshold(
    risks, hallucination_labels, alpha: float, score_name: str = ""
) -> SelectivePolicy:
    """Largest threshold meeting the target risk on the calibration split.

    Ties in risk value are accepted or rejected together. Returns tau = -inf
    (coverage 0) when no observed value meets the target.
    """
    r = np.asarray(risks, dtype=float)
    y = np.asarray(hallucination_labels, dtype=float)
    if r.size == 0:
        raise ValueError("calibration set must be non-empty")
    if r.shape != y.shape:
        raise ValueError("risks and labels must have equal length")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")

    order = np.argsort(r, kind="stable")
    sorted_risks = r[order]
    cum_halluc = np.cumsum(y[order])
    # last position of each tied group = candidate acceptance set
    boundaries = np.flatnonzero(np.diff(sorted_risks) != 0)
    last = np.append(boundaries, r.size - 1)
    counts = last + 1
    rates = cum_halluc[last] / counts

    admissible = np.flatnonzero(rates <= alpha)
    if admissible.size == 0:
        return SelectivePolicy(
            score_name=score_name,
            tau=-math.inf,
            target_alpha=alpha,
            calibration_coverage=0.0,
            calibration_risk=0.0,
        )
    best = admissible[-1]
    return SelectivePolicy(
        score_name=score_name,
        tau=float(sorted_risks[last[best]]),
        target_alpha=alpha,
        calibration_coverage=float(counts[best] / r.size),
        calibration_risk=float(rates[best]),
    )


def apply_policy(policy: SelectivePolicy, risks) -> np.ndarray:
    """Boolean decisions per example: True = answer (risk <= tau, ties answered)."""
    return np.asarray(risks, dtype=float) <= policy.tau


def selective_risk(answered: np.ndarray, hallucination_labels) -> float:
    """Hallucination rate among answered examples; 0 when nothing is answered."""
    answered = np.asarray(answered, dtype=bool)
    if not answered.any():
        return 0.0
    return float(np.asarray(hallucination_labels, dtype=float)[answered].mean())


def _tau_to_json(tau: float):
    if math.isinf(tau):
        return "-inf" if tau < 0 else "inf"
    return tau


def _tau_from_json(value) -> float:
    if value == "-inf":
        return -math.inf
    if value == "inf":
        return math.inf
    return float(value)


def policy_to_json(policy: SelectivePolicy) -> dict:
    return {
        "score_name": policy.score_name,
        "tau": _tau_to_json(policy.tau),
        "target_alpha": policy.target_alpha,
        "calibration_stats": {
            "coverage": policy.calibration_coverage,
            "selective_risk": policy.calibration_risk,
        },
    }


def policy_from_json(obj: dict) -> SelectivePolicy:
    return SelectivePolicy(
        score_name=obj["score_name"],
        tau=_tau_from_json(obj["tau"]),
        target_alpha=float(obj["target_alpha"]),
        calibration_coverage=float(obj["calibration_stats"]["coverage"]),
        calibration_risk=float(obj["calibration_stats"]["selective_risk"]),
    )


def save_policy(policy: SelectivePolicy, path: str | Path) -> None:
    Path(path).write_text(json.dumps(policy_to_json(policy), sort_keys=True) + "\n", encoding="utf-8")


def load_policy(path: str | Path) -> SelectivePolicy:
    return policy_from_json(json.loads(Path(path).read_text(encoding="utf-8")))
