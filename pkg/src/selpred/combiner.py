"""Fusion of an entropy risk proxy with the PC risk proxy into one scalar risk.

The production combiner is a two-feature L2 logistic regression (c = 0.1 as
for the probes) over [u_ent, u_pc]; a shallow tanh MLP is kept as an ablation.
Both emit a predicted hallucination probability used directly as the risk.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .probes import Standardizer, _sigmoid, fit_logistic, fit_standardizer

ENTROPY_SOURCES = ("nll", "semantic_entropy", "se_probe")
COMBINER_KINDS = ("logistic", "mlp")

MLP_HIDDEN = 8
MLP_EPOCHS = 2000
MLP_LEARNING_RATE = 0.1


@dataclass(frozen=True)
class CombinedScorer:
    """Fitted two-feature risk fuser; feature order is (u_ent, u_pc)."""

    kind: str
    entropy_source: str
    standardizer: Standardizer
    weights: np.ndarray  # logistic: (2,); mlp: hidden-to-output (h,)
    bias: float
    hidden_weights: np.ndarray | None = None  # mlp only, (2, h)
    hidden_bias: np.ndarray | None = None  # mlp only, (h,)


def _stack(u_ent, u_pc) -> np.ndarray:
    return np.column_stack([np.asarray(u_ent, dtype=float), np.asarray(u_pc, dtype=float)])


def _mlp_forward(z: np.ndarray, scorer: CombinedScorer) -> np.ndarray:
    hidden = np.tanh(z @ scorer.hidden_weights + scorer.hidden_bias)
    return hidden @ scorer.weights + scorer.bias


def _fit_mlp(z: np.ndarray, y01: np.ndarray, seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """Full-batch gradient descent on the mean log-loss, seeded init, fixed epochs."""
    rng = np.random.default_rng(seed)
    n = z.shape[0]
    w1 = rng.normal(scale=0.5, size=(2, MLP_HIDDEN))
    b1 = np.zeros(MLP_HIDDEN)
    w2 = rng.normal(scale=0.5, size=MLP_HIDDEN)
    b2 = 0.0
    y = y01.astype(float)
    for _ in range(MLP_EPOCHS):
        hidden = np.tanh(z @ w1 + b1)
        p = _sigmoid(hidden @ w2 + b2)
        delta = (p - y) / n
        grad_w2 = hidden.T @ delta
        grad_b2 = delta.sum()
        back = np.outer(delta, w2) * (1.0 - hidden**2)
        grad_w1 = z.T @ back
        grad_b1 = back.sum(axis=0)
        w1 -= MLP_LEARNING_RATE * grad_w1
        b1 -= MLP_LEARNING_RATE * grad_b1
        w2 -= MLP_LEARNING_RATE * grad_w2
        b2 -= MLP_LEARNING_RATE * grad_b2
    return w1, b1, w2, float(b2)


def train_combiner(
    u_ent,
    u_pc,
    hallucination_labels,
    kind: str = "logistic",
    *,
    entropy_source: str = "semantic_entropy",
    c: float = 0.1,
    seed: int = 0,
) -> CombinedScorer:
    """Fit the combiner on training-split scores and hallucination labels.

    The PC predictions are deliberately in-sample (probe and combiner share
    the training split); strong regularization mitigates the optimism.
    """
    if kind not in COMBINER_KINDS:
        raise ValueError(f"kind must be one of {COMBINER_KINDS}")
    if entropy_source not in ENTROPY_SOURCES:
        raise ValueError(f"entropy_source must be one of {ENTROPY_SOURCES}")
    y01 = np.asarray(hallucination_labels)
    if set(np.unique(y01).tolist()) != {0, 1}:
        raise ValueError("labels must contain both classes 0 and 1")
    x = _stack(u_ent, u_pc)
    standardizer = fit_standardizer(x)
    z = standardizer.transform(x)

    if kind == "logistic":
        fit = fit_logistic(z, y01, c=c)
        return CombinedScorer(
            kind=kind,
            entropy_source=entropy_source,
            standardizer=standardizer,
            weights=fit.weights,
            bias=fit.bias,
        )

    w1, b1, w2, b2 = _fit_mlp(z, y01, seed)
    return CombinedScorer(
        kind=kind,
        entropy_source=entropy_source,
        standardizer=standardizer,
        weights=w2,
        bias=b2,
        hidden_weights=w1,
        hidden_bias=b1,
    )


def combined_risk(scorer: CombinedScorer, u_ent, u_pc) -> np.ndarray:
    """Predicted hallucination probability in (0, 1), used directly as risk."""
    z = scorer.standardizer.transform(_stack(np.atleast_1d(u_ent), np.atleast_1d(u_pc)))
    if scorer.kind == "logistic":
        logits = z @ scorer.weights + scorer.bias
    else:
        logits = _mlp_forward(z, scorer)
    return _sigmoid(logits)


def combiner_to_json(scorer: CombinedScorer) -> dict:
    obj = {
        "kind": scorer.kind,
        "entropy_source": scorer.entropy_source,
        "mean": [float(v) for v in scorer.standardizer.mean],
        "scale": [float(v) for v in scorer.standardizer.scale],
        "weights": [float(v) for v in scorer.weights],
        "bias": float(scorer.bias),
    }
    if scorer.kind == "mlp":
        obj["hidden_weights"] = [[float(v) for v in row] for row in scorer.hidden_weights]
        obj["hidden_bias"] = [float(v) for v in scorer.hidden_bias]
    return obj


def combiner_from_json(obj: dict) -> CombinedScorer:
    return CombinedScorer(
        kind=obj["kind"],
        entropy_source=obj["entropy_source"],
        standardizer=Standardizer(
            mean=np.array(obj["mean"], dtype=float),
            scale=np.array(obj["scale"], dtype=float),
        ),
        weights=np.array(obj["weights"], dtype=float),
        bias=float(obj["bias"]),
        hidden_weights=(
            np.array(obj["hidden_weights"], dtype=float) if obj["kind"] == "mlp" else None
        ),
        hidden_bias=(
            np.array(obj["hidden_bias"], dtype=float) if obj["kind"] == "mlp" else None
        ),
    )


def save_combiner(scorer: CombinedScorer, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(combiner_to_json(scorer), sort_keys=True) + "\n", encoding="utf-8"
    )


def load_combiner(path: str | Path) -> CombinedScorer:
    return combiner_from_json(json.loads(Path(path).read_text(encoding="utf-8")))
