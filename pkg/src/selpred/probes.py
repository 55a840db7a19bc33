"""Linear probes on hidden states: standardization, L2 logistic training, layer selection.

The training objective is

    J(w, b) = 0.5 ||w||^2 + c * sum_i log(1 + exp(-y_i (w . x_i + b)))

with y in {-1, +1} and an unpenalized bias. ``c`` plays the role usually
written C (default 0.1). The solver is a deterministic full-batch damped
Newton iteration, so the returned optimum carries a gradient-norm certificate.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .entropy import binarize_se_targets, record_semantic_entropy
from .metrics import auroc
from .records import GenerationRecord, deterministic_order

SCALE_FLOOR = 1e-12
GRAD_TOL = 1e-8
MAX_ITER = 10_000

PROBE_TARGETS = ("correctness", "binarized_se")


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Standardizer:
    """Per-feature shift/scale fitted on the training split only."""

    mean: np.ndarray
    scale: np.ndarray

    def transform(self, features) -> np.ndarray:
        x = np.atleast_2d(np.asarray(features, dtype=float))
        if x.shape[1] != self.mean.shape[0]:
            raise ValueError(f"expected {self.mean.shape[0]} features, got {x.shape[1]}")
        return (x - self.mean) / self.scale


@dataclass(frozen=True)
class LinearProbe:
    weights: np.ndarray
    bias: float
    standardizer: Standardizer
    layer: int
    target: str
    regularization_c: float = 0.1


@dataclass(frozen=True)
class LayerSelection:
    """Cross-validated layer choice plus the probe refit on the full training split."""

    chosen_layer: int
    cv_scores: dict[int, float]
    probe: LinearProbe


def fit_standardizer(features) -> Standardizer:
    """Column means and population standard deviations, floored at 1e-12."""
    x = np.asarray(features, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need a 2-d feature matrix with n >= 2 rows")
    mean = x.mean(axis=0)
    scale = np.maximum(x.std(axis=0), SCALE_FLOOR)
    return Standardizer(mean=mean, scale=scale)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_objective(weights, bias, features, labels01, c) -> float:
    """J(w, b) for labels in {0, 1}; the loss term uses a stable log1p(exp)."""
    w = np.asarray(weights, dtype=float)
    x = np.asarray(features, dtype=float)
    y = np.where(np.asarray(labels01) > 0, 1.0, -1.0)
    margins = y * (x @ w + bias)
    return float(0.5 * w @ w + c * np.logaddexp(0.0, -margins).sum())


def logistic_gradient(weights, bias, features, labels01, c) -> tuple[np.ndarray, float]:
    w = np.asarray(weights, dtype=float)
    x = np.asarray(features, dtype=float)
    y = np.where(np.asarray(labels01) > 0, 1.0, -1.0)
    margins = y * (x @ w + bias)
    # d/dm log(1+exp(-m)) = -sigmoid(-m)
    coeff = -y * _sigmoid(-margins)
    grad_w = w + c * (x.T @ coeff)
    grad_b = c * coeff.sum()
    return grad_w, float(grad_b)


@dataclass(frozen=True)
class LogisticFit:
    weights: np.ndarray
    bias: float
    converged: bool
    grad_inf_norm: float
    n_iter: int


def fit_logistic(
    features,
    labels01,
    c: float = 0.1,
    tol: float = GRAD_TOL,
    max_iter: int = MAX_ITER,
) -> LogisticFit:
    """Minimize the L2 logistic objective by damped Newton with backtracking.

    Requires both classes present. If the gradient infinity-norm does not
    reach ``tol`` within ``max_iter`` iterations, warns and returns the final
    iterate anyway.
    """
    x = np.asarray(features, dtype=float)
    if x.ndim != 2:
        raise ValueError("features must be a 2-d matrix")
    y01 = np.asarray(labels01)
    if set(np.unique(y01).tolist()) != {0, 1}:
        raise ValueError("labels must contain both classes 0 and 1")
    if c <= 0:
        raise ValueError("regularization c must be > 0")
    n, d = x.shape
    y = np.where(y01 > 0, 1.0, -1.0)

    w = np.zeros(d)
    b = 0.0
    value = logistic_objective(w, b, x, y01, c)
    grad_w, grad_b = logistic_gradient(w, b, x, y01, c)
    grad_inf = max(np.abs(grad_w).max(initial=0.0), abs(grad_b))
    best = (w.copy(), b, grad_inf)
    stalled = 0
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        if grad_inf <= tol:
            return LogisticFit(w, float(b), True, float(grad_inf), n_iter - 1)

        p = _sigmoid(x @ w + b)
        weight = p * (1.0 - p)
        xw = x * weight[:, None]
        hess = np.empty((d + 1, d + 1))
        hess[:d, :d] = np.eye(d) + c * (x.T @ xw)
        hess[:d, d] = c * xw.sum(axis=0)
        hess[d, :d] = hess[:d, d]
        hess[d, d] = c * weight.sum()
        grad = np.append(grad_w, grad_b)

        step = None
        damping = 0.0
        for _ in range(8):
            try:
                step = np.linalg.solve(hess + damping * np.eye(d + 1), -grad)
            except np.linalg.LinAlgError:
                step = None
            if step is not None and np.isfinite(step).all():
                break
            damping = 1e-10 if damping == 0.0 else damping * 100.0
            step = None
        if step is None:
            step = -grad  # steepest descent as a last resort

        if grad_inf < 1e-5:
            # Quadratic-convergence zone: objective decrements are below float
            # resolution here, so a line search cannot certify progress. Take
            # pure Newton steps and stop once the gradient stops shrinking.
            w_new = w + step[:d]
            b_new = float(b + step[d])
            gw_new, gb_new = logistic_gradient(w_new, b_new, x, y01, c)
            g_new = max(np.abs(gw_new).max(initial=0.0), abs(gb_new))
            if g_new < grad_inf:
                w, b = w_new, b_new
                grad_w, grad_b, grad_inf = gw_new, gb_new, g_new
                if grad_inf < best[2]:
                    best = (w.copy(), b, grad_inf)
                stalled = 0
            else:
                stalled += 1
                if stalled >= 3:
                    break
            continue

        # backtracking Armijo line search on J
        t = 1.0
        slope = grad @ step
        if slope >= 0:  # rounding flipped the direction; fall back to -grad
            step = -grad
            slope = -(grad @ grad)
        accepted = False
        for _ in range(60):
            w_new = w + t * step[:d]
            b_new = b + t * step[d]
            value_new = logistic_objective(w_new, b_new, x, y01, c)
            if value_new <= value + 1e-4 * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break  # no further progress representable
        w, b, value = w_new, float(b_new), value_new
        grad_w, grad_b = logistic_gradient(w, b, x, y01, c)
        grad_inf = max(np.abs(grad_w).max(initial=0.0), abs(grad_b))
        if grad_inf < best[2]:
            best = (w.copy(), b, grad_inf)

    w, b, grad_inf = best
    if grad_inf <= tol:
        return LogisticFit(w, float(b), True, float(grad_inf), n_iter)
    warnings.warn(
        f"logistic fit stopped after {n_iter} iterations with gradient "
        f"inf-norm {grad_inf:.3e} > {tol:.0e}",
        ConvergenceWarning,
    )
    return LogisticFit(w, float(b), False, float(grad_inf), n_iter)


def train_probe(
    features,
    labels,
    c: float = 0.1,
    *,
    layer: int = 0,
    target: str = "correctness",
    standardizer: Standardizer | None = None,
) -> LinearProbe:
    """Standardize (fitted from the same data unless given) and fit the probe."""
    if target not in PROBE_TARGETS:
        raise ValueError(f"target must be one of {PROBE_TARGETS}")
    x = np.asarray(features, dtype=float)
    if standardizer is None:
        standardizer = fit_standardizer(x)
    fit = fit_logistic(standardizer.transform(x), labels, c=c)
    return LinearProbe(
        weights=fit.weights,
        bias=fit.bias,
        standardizer=standardizer,
        layer=layer,
        target=target,
        regularization_c=c,
    )


def probe_decision(probe: LinearProbe, features) -> np.ndarray:
    """Pre-sigmoid decision value w . standardize(x) + b."""
    z = probe.standardizer.transform(features)
    if z.shape[1] != probe.weights.shape[0]:
        raise ValueError(f"expected {probe.weights.shape[0]} features, got {z.shape[1]}")
    return z @ probe.weights + probe.bias


def probe_predict(probe: LinearProbe, features) -> np.ndarray:
    """Predicted probability of the probe's positive class, in (0, 1)."""
    return _sigmoid(probe_decision(probe, features))


def pc_risk(p_correct: float) -> float:
    """Risk proxy 1 - p for a probability of correctness."""
    if not 0.0 <= p_correct <= 1.0:
        raise ValueError(f"probability out of range: {p_correct}")
    return 1.0 - p_correct


def features_at_layer(records: list[GenerationRecord], layer: int) -> np.ndarray:
    rows = []
    for r in records:
        if layer not in r.hidden_states:
            raise ValueError(f"record {r.id!r} has no hidden state for layer {layer}")
        rows.append(r.hidden_states[layer])
    return np.array(rows, dtype=float)


def probe_labels(records: list[GenerationRecord], target: str) -> np.ndarray:
    """Training labels for a probe target.

    correctness: 1 iff the answer is correct. binarized_se: 1 iff the record's
    semantic entropy is strictly above the median over ``records`` (so pass the
    training split only).
    """
    if target == "correctness":
        return np.array([int(r.correct) for r in records])
    if target == "binarized_se":
        labels, _ = binarize_se_targets([record_semantic_entropy(r) for r in records])
        return np.array(labels)
    raise ValueError(f"target must be one of {PROBE_TARGETS}")


def stratified_fold_ids(
    ids: list[str], labels, folds: int, seed: int
) -> np.ndarray:
    """Deterministic stratified fold assignment (fold index per position).

    Within each label stratum, ids are dealt round-robin in the seeded hash
    order, so every fold's class balance matches the whole within one record.
    """
    labels = np.asarray(labels)
    fold_of = np.empty(len(ids), dtype=int)
    for label in (0, 1):
        positions = [i for i in range(len(ids)) if labels[i] == label]
        keys = [ids[i] for i in positions]
        order = deterministic_order(keys, seed, f"fold-{label}")
        for dealt, j in enumerate(order):
            fold_of[positions[j]] = dealt % folds
    return fold_of


def select_layer(
    records: list[GenerationRecord],
    target: str,
    folds: int = 5,
    c: float = 0.1,
    seed: int = 0,
) -> LayerSelection:
    """Pick the best layer by stratified k-fold CV on the training split.

    Per layer and fold, the standardizer and probe are fitted on the
    fold-train portion only and scored by validation AUROC; the chosen layer
    maximizes the mean score (ties break to the lowest index) and the returned
    probe is refit on all of ``records`` at that layer. If the smaller class
    cannot populate ``folds`` folds, the fold count shrinks to its size; under
    two folds is an error.
    """
    if not records:
        raise ValueError("records must be non-empty")
    layers = sorted(records[0].hidden_states)
    if len(layers) < 2:
        raise ValueError("need at least 2 layers to select between")
    labels = probe_labels(records, target)
    ids = [r.id for r in records]
    class_counts = [int((labels == 0).sum()), int((labels == 1).sum())]
    effective_folds = min(folds, min(class_counts))
    if effective_folds < 2:
        raise ValueError(
            f"cannot form stratified folds: class counts {class_counts}"
        )
    fold_of = stratified_fold_ids(ids, labels, effective_folds, seed)

    cv_scores: dict[int, float] = {}
    for layer in layers:
        x = features_at_layer(records, layer)
        scores = []
        for fold in range(effective_folds):
            val = fold_of == fold
            probe = train_probe(x[~val], labels[~val], c=c, layer=layer, target=target)
            predictions = probe_predict(probe, x[val])
            scores.append(auroc(predictions, labels[val]))
        cv_scores[layer] = float(np.mean(scores))

    chosen = max(layers, key=lambda l: (cv_scores[l], -l))
    final = train_probe(
        features_at_layer(records, chosen), labels, c=c, layer=chosen, target=target
    )
    return LayerSelection(chosen_layer=chosen, cv_scores=cv_scores, probe=final)


def probe_to_json(probe: LinearProbe) -> dict:
    return {
        "target": probe.target,
        "layer": probe.layer,
        "c": probe.regularization_c,
        "mean": [float(v) for v in probe.standardizer.mean],
        "scale": [float(v) for v in probe.standardizer.scale],
        "weights": [float(v) for v in probe.weights],
        "bias": float(probe.bias),
    }


def probe_from_json(obj: dict) -> LinearProbe:
    return LinearProbe(
        weights=np.array(obj["weights"], dtype=float),
        bias=float(obj["bias"]),
        standardizer=Standardizer(
            mean=np.array(obj["mean"], dtype=float),
            scale=np.array(obj["scale"], dtype=float),
        ),
        layer=int(obj["layer"]),
        target=obj["target"],
        regularization_c=float(obj["c"]),
    )


def save_probe(probe: LinearProbe, path: str | Path) -> None:
    Path(path).write_text(json.dumps(probe_to_json(probe), sort_keys=True) + "\n", encoding="utf-8")


def load_probe(path: str | Path) -> LinearProbe:
    return probe_from_json(json.loads(Path(path).read_text(encoding="utf-8")))
