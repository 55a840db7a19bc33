"""Command-line pipeline: validate | split | synth | score | train-probe |
train-combiner | calibrate | evaluate | report.

Every subcommand reads ``--input`` and writes under ``--out``; ``--seed`` and
``--config`` are global. Identical inputs and seed produce byte-identical
output directories. Failures exit nonzero with a one-line JSON error object
on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import combiner as combiner_mod
from . import entropy, metrics, policy, probes, records, report, synth

METHODS = ("nll", "se", "se_probe", "pc_probe", "pc+nll", "pc+se", "pc+se_probe")
COMBINED = {"pc+nll": "nll", "pc+se": "semantic_entropy", "pc+se_probe": "se_probe"}
SOURCE_OF = {"nll": "nll", "se": "semantic_entropy", "se_probe": "se_probe"}


class CliError(Exception):
    def __init__(self, message: str, kind: str = "error", **extra):
        super().__init__(message)
        self.kind = kind
        self.extra = extra


@dataclass(frozen=True)
class EvalConfig:
    alpha_min: float = 0.05
    alpha_max: float = 0.30
    alpha_step: float = 0.01
    bootstrap_iters: int = 200
    probe_c: float = 0.1
    folds: int = 5
    high_trust_alpha: float = 0.15
    tce_fallback: str = "per_alpha"

    def alpha_grid(self) -> np.ndarray:
        count = int(round((self.alpha_max - self.alpha_min) / self.alpha_step)) + 1
        return np.round(self.alpha_min + self.alpha_step * np.arange(count), 10)


def load_config(path: str | None) -> EvalConfig:
    if path is None:
        return EvalConfig()
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    unknown = set(obj) - set(EvalConfig.__dataclass_fields__)
    if unknown:
        raise CliError(f"unknown config keys: {sorted(unknown)}", kind="bad_config")
    return replace(EvalConfig(), **obj)


def _require(path: Path, produced_by: str) -> Path:
    if not path.exists():
        raise CliError(
            f"missing {path.name}; run the `{produced_by}` subcommand first",
            kind="missing_prerequisite",
            prerequisite=produced_by,
        )
    return path


def _load_records(path: str) -> list[records.GenerationRecord]:
    try:
        return records.load_records(path)
    except records.RecordError as exc:
        raise CliError(str(exc), kind="invalid_records") from exc


def _split_masks(
    recs: list[records.GenerationRecord], split_of: dict[str, str]
) -> dict[str, np.ndarray]:
    missing = [r.id for r in recs if r.id not in split_of]
    if missing:
        raise CliError(
            f"{len(missing)} record ids missing from the split file (e.g. {missing[0]!r})",
            kind="invalid_splits",
        )
    names = np.array([split_of[r.id] for r in recs])
    return {name: names == name for name in records.SPLIT_NAMES}


@dataclass
class Scores:
    """Per-record score vectors (aligned with the record list) and fitted models."""

    u_nll: np.ndarray
    u_se: np.ndarray
    u_sep: np.ndarray
    u_pc: np.ndarray
    pc_logit: np.ndarray
    pc_selection: probes.LayerSelection
    sep_selection: probes.LayerSelection
    combiners: dict[str, combiner_mod.CombinedScorer]

    def method_risks(self, method: str) -> np.ndarray:
        if method == "nll":
            return self.u_nll
        if method == "se":
            return self.u_se
        if method == "se_probe":
            return self.u_sep
        if method == "pc_probe":
            return self.u_pc
        if method in COMBINED:
            ent = {"pc+nll": self.u_nll, "pc+se": self.u_se, "pc+se_probe": self.u_sep}[method]
            return combiner_mod.combined_risk(self.combiners[method], ent, self.u_pc)
        raise ValueError(f"unknown method {method!r}")


def compute_scores(
    recs: list[records.GenerationRecord],
    train_mask: np.ndarray,
    config: EvalConfig,
    seed: int,
) -> Scores:
    """Train probes and combiners on the training split; score every record."""
    train = [r for r, m in zip(recs, train_mask) if m]
    u_nll = np.array([entropy.sequence_nll(r.answer_token_logprobs).value for r in recs])
    u_se = np.array([entropy.record_semantic_entropy(r) for r in recs])

    pc_selection = probes.select_layer(
        train, "correctness", folds=config.folds, c=config.probe_c, seed=seed
    )
    pc_features = probes.features_at_layer(recs, pc_selection.chosen_layer)
    p_correct = probes.probe_predict(pc_selection.probe, pc_features)
    pc_logit = probes.probe_decision(pc_selection.probe, pc_features)
    u_pc = 1.0 - p_correct

    sep_selection = probes.select_layer(
        train, "binarized_se", folds=config.folds, c=config.probe_c, seed=seed
    )
    u_sep = probes.probe_predict(
        sep_selection.probe, probes.features_at_layer(recs, sep_selection.chosen_layer)
    )

    halluc_train = np.array([int(r.hallucinated) for r in train])
    combiners = {}
    for method, source in COMBINED.items():
        u_ent = {"nll": u_nll, "semantic_entropy": u_se, "se_probe": u_sep}[source]
        combiners[method] = combiner_mod.train_combiner(
            u_ent[train_mask],
            u_pc[train_mask],
            halluc_train,
            kind="logistic",
            entropy_source=source,
            c=config.probe_c,
            seed=seed,
        )
    return Scores(
        u_nll=u_nll,
        u_se=u_se,
        u_sep=u_sep,
        u_pc=u_pc,
        pc_logit=pc_logit,
        pc_selection=pc_selection,
        sep_selection=sep_selection,
        combiners=combiners,
    )


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def cmd_validate(args, config: EvalConfig) -> int:
    rep = records.validate_records(args.input)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = {"count": rep.count, "errors": [[line, msg] for line, msg in rep.errors]}
    (out / "validation.json").write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    print(f"{rep.count} valid records, {len(rep.errors)} errors")
    return 0


def cmd_split(args, config: EvalConfig) -> int:
    recs = _load_records(args.input)
    try:
        assignments = records.split_records(recs, args.seed)
    except ValueError as exc:
        raise CliError(str(exc), kind="split_error") from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records.write_splits(assignments, out / "splits.csv")
    print(f"wrote {out / 'splits.csv'} ({len(assignments)} rows)")
    return 0


def cmd_synth(args, config: EvalConfig) -> int:
    if args.input:
        synth_config = synth.config_from_json(args.input)
    else:
        synth_config = synth.SynthConfig(seed=args.seed)
    try:
        recs = synth.generate(synth_config)
    except ValueError as exc:
        raise CliError(str(exc), kind="bad_synth_config") from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records.write_records(recs, out / "records.jsonl")
    print(f"wrote {out / 'records.jsonl'} ({len(recs)} records)")
    return 0


def cmd_score(args, config: EvalConfig) -> int:
    recs = _load_records(args.input)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = [
        [
            r.id,
            repr(entropy.sequence_nll(r.answer_token_logprobs).value),
            repr(entropy.record_semantic_entropy(r)),
        ]
        for r in recs
    ]
    _write_csv(out / "scores.csv", ["id", "nll", "semantic_entropy"], rows)
    print(f"wrote {out / 'scores.csv'}")
    return 0


def _probe_path(out: Path, target: str) -> Path:
    return out / ("probe_pc.json" if target == "correctness" else "probe_sep.json")


def cmd_train_probe(args, config: EvalConfig) -> int:
    recs = _load_records(args.input)
    out = Path(args.out)
    split_of = records.read_splits(_require(out / "splits.csv", "split"))
    masks = _split_masks(recs, split_of)
    train = [r for r, m in zip(recs, masks["train"]) if m]
    selection = probes.select_layer(
        train, args.target, folds=config.folds, c=config.probe_c, seed=args.seed
    )
    probes.save_probe(selection.probe, _probe_path(out, args.target))
    cv = {str(layer): selection.cv_scores[layer] for layer in sorted(selection.cv_scores)}
    print(json.dumps({"target": args.target, "chosen_layer": selection.chosen_layer, "cv_auroc": cv}))
    return 0


def cmd_train_combiner(args, config: EvalConfig) -> int:
    recs = _load_records(args.input)
    out = Path(args.out)
    split_of = records.read_splits(_require(out / "splits.csv", "split"))
    masks = _split_masks(recs, split_of)
    train_mask = masks["train"]
    source = args.entropy_source

    pc_probe = probes.load_probe(_require(_probe_path(out, "correctness"), "train-probe"))
    u_pc = 1.0 - probes.probe_predict(pc_probe, probes.features_at_layer(recs, pc_probe.layer))
    if source == "nll":
        u_ent = np.array([entropy.sequence_nll(r.answer_token_logprobs).value for r in recs])
    elif source == "semantic_entropy":
        u_ent = np.array([entropy.record_semantic_entropy(r) for r in recs])
    else:
        sep = probes.load_probe(_require(_probe_path(out, "binarized_se"), "train-probe"))
        u_ent = probes.probe_predict(sep, probes.features_at_layer(recs, sep.layer))

    labels = np.array([int(r.hallucinated) for r, m in zip(recs, train_mask) if m])
    scorer = combiner_mod.train_combiner(
        u_ent[train_mask],
        u_pc[train_mask],
        labels,
        kind=args.kind,
        entropy_source=source,
        c=config.probe_c,
        seed=args.seed,
    )
    path = out / f"combiner_{source}.json"
    combiner_mod.save_combiner(scorer, path)
    print(f"wrote {path}")
    return 0


def _risks_from_artifacts(
    method: str, recs: list[records.GenerationRecord], out: Path
) -> np.ndarray:
    if method == "nll":
        return np.array([entropy.sequence_nll(r.answer_token_logprobs).value for r in recs])
    if method == "se":
        return np.array([entropy.record_semantic_entropy(r) for r in recs])
    if method == "se_probe":
        sep = probes.load_probe(_require(_probe_path(out, "binarized_se"), "train-probe"))
        return probes.probe_predict(sep, probes.features_at_layer(recs, sep.layer))
    if method == "pc_probe":
        pc = probes.load_probe(_require(_probe_path(out, "correctness"), "train-probe"))
        return 1.0 - probes.probe_predict(pc, probes.features_at_layer(recs, pc.layer))
    if method in COMBINED:
        source = COMBINED[method]
        scorer = combiner_mod.load_combiner(
            _require(out / f"combiner_{source}.json", "train-combiner")
        )
        base = "nll" if source == "nll" else ("se" if source == "semantic_entropy" else "se_probe")
        u_ent = _risks_from_artifacts(base, recs, out)
        u_pc = _risks_from_artifacts("pc_probe", recs, out)
        return combiner_mod.combined_risk(scorer, u_ent, u_pc)
    raise CliError(f"unknown method {method!r}", kind="bad_method")


def cmd_calibrate(args, config: EvalConfig) -> int:
    recs = _load_records(args.input)
    out = Path(args.out)
    split_of = records.read_splits(_require(out / "splits.csv", "split"))
    masks = _split_masks(recs, split_of)
    risks = _risks_from_artifacts(args.method, recs, out)
    cal = masks["calibration"]
    labels = np.array([int(r.hallucinated) for r in recs])
    pol = policy.calibrate_threshold(
        risks[cal], labels[cal], args.alpha, score_name=args.method
    )
    path = out / f"policy_{args.method}.json"
    policy.save_policy(pol, path)
    print(f"wrote {path} (tau={pol.tau}, coverage={pol.calibration_coverage})")
    return 0


def cmd_evaluate(args, config: EvalConfig) -> int:
    recs = _load_records(args.input)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    split_of = records.read_splits(_require(out / "splits.csv", "split"))
    masks = _split_masks(recs, split_of)
    scores = compute_scores(recs, masks["train"], config, args.seed)

    labels = np.array([int(r.hallucinated) for r in recs])
    cal, test = masks["calibration"], masks["test"]
    labels_cal, labels_test = labels[cal], labels[test]
    grid = config.alpha_grid()
    base_accuracy = float(1.0 - labels_test.mean())

    reports: list[metrics.MetricReport] = []
    test_risks: dict[str, np.ndarray] = {}
    calibration_rows = []
    for method in METHODS:
        risks = scores.method_risks(method)
        r_cal, r_test = risks[cal], risks[test]
        test_risks[method] = r_test

        def boot(metric_name, fn, class_labels=None):
            return metrics.bootstrap(
                fn,
                r_test.size,
                iterations=config.bootstrap_iters,
                seed=metrics.method_metric_seed(args.seed, method, metric_name),
                labels=class_labels,
            )

        report_row = metrics.MetricReport(
            method=method,
            auroc=boot("auroc", lambda i: metrics.auroc(r_test[i], labels_test[i]), labels_test),
            auprc=boot("auprc", lambda i: metrics.auprc(r_test[i], labels_test[i]), labels_test),
            e_aurc=boot("e_aurc", lambda i: metrics.rc_curve(r_test[i], labels_test[i]).e_aurc),
            tce=boot(
                "tce",
                lambda i: metrics.tce(
                    r_cal, labels_cal, r_test[i], labels_test[i], grid,
                    fallback=config.tce_fallback,
                ),
            ),
            base_accuracy=base_accuracy,
            model=recs[0].model,
            dataset=recs[0].dataset,
        )
        reports.append(report_row)

        metrics.write_rc_csv(metrics.rc_curve(r_test, labels_test), out / f"rc_{method}.csv")
        realized, _ = metrics.realized_test_risks(r_cal, labels_cal, r_test, labels_test, grid)
        calibration_rows.extend(
            [repr(float(a)), method, repr(float(v))] for a, v in zip(grid, realized)
        )

    metrics.write_metrics_csv(reports, out / "metrics.csv")
    _write_csv(out / "calibration.csv", ["alpha", "method", "realized_risk"], calibration_rows)

    spearman_rows = []
    for i, a in enumerate(METHODS):
        for b in METHODS[i + 1:]:
            rho = metrics.spearman(test_risks[a], test_risks[b])
            spearman_rows.append([a, b, repr(rho)])
    _write_csv(out / "spearman.csv", ["method_a", "method_b", "spearman"], spearman_rows)

    scatter_rows = [
        [repr(float(se)), repr(float(logit)), int(1 - lab)]
        for se, logit, lab in zip(
            scores.u_se[test], scores.pc_logit[test], labels_test
        )
    ]
    _write_csv(out / "scatter.csv", ["semantic_entropy", "pc_logit", "correct"], scatter_rows)

    summary = {
        "model": recs[0].model,
        "dataset": recs[0].dataset,
        "base_accuracy": base_accuracy,
        "n": {name: int(mask.sum()) for name, mask in masks.items()},
        "methods": list(METHODS),
        "pc_layer": scores.pc_selection.chosen_layer,
        "sep_layer": scores.sep_selection.chosen_layer,
        "seed": args.seed,
        "config": asdict(config),
    }
    (out / "summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    print(f"wrote {out / 'metrics.csv'} ({len(reports)} methods)")
    return 0


def _read_metrics_csv(path: Path) -> dict[str, dict[str, tuple[float, float]]]:
    table: dict[str, dict[str, tuple[float, float]]] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            table.setdefault(row["method"], {})[row["metric"]] = (
                float(row["mean"]),
                float(row["std"]),
            )
    return table


def cmd_report(args, config: EvalConfig) -> int:
    src = Path(args.input)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = json.loads(_require(src / "summary.json", "evaluate").read_text(encoding="utf-8"))
    table = _read_metrics_csv(_require(src / "metrics.csv", "evaluate"))
    model, dataset = summary["model"], summary["dataset"]
    prefix = f"{model}_{dataset}_"

    reports = [
        metrics.MetricReport(
            method=method,
            auroc=values["auroc"],
            auprc=values["auprc"],
            e_aurc=values["e_aurc"],
            tce=values["tce"],
            base_accuracy=summary["base_accuracy"],
            model=model,
            dataset=dataset,
        )
        for method, values in table.items()
    ]
    report.emit_tables(reports, out, prefix=prefix)

    curves = []
    for method in summary["methods"]:
        rc_path = _require(src / f"rc_{method}.csv", "evaluate")
        with open(rc_path, "r", encoding="utf-8", newline="") as fh:
            points = tuple(
                (float(row["coverage"]), float(row["selective_risk"]))
                for row in csv.DictReader(fh)
            )
        curves.append((method, metrics.RcCurve(points=points, aurc=0.0, e_aurc=0.0)))
    report.plot_rc(curves, out / f"{prefix}rc.svg", high_trust_alpha=config.high_trust_alpha)

    realized: dict[str, list[float]] = {}
    alphas: list[float] = []
    with open(_require(src / "calibration.csv", "evaluate"), "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            realized.setdefault(row["method"], []).append(float(row["realized_risk"]))
            if row["method"] == summary["methods"][0]:
                alphas.append(float(row["alpha"]))
    report.plot_calibration(alphas, realized, out / f"{prefix}calibration.svg")

    with open(_require(src / "scatter.csv", "evaluate"), "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    report.plot_scatter(
        [float(r["semantic_entropy"]) for r in rows],
        [float(r["pc_logit"]) for r in rows],
        [bool(int(r["correct"])) for r in rows],
        out / f"{prefix}scatter.svg",
    )

    challengers = [m for m in summary["methods"] if m != args.baseline]
    report.emit_relative_bars(args.baseline, challengers, reports, out / f"{prefix}bars.svg")
    print(f"wrote report artifacts under {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="selpred",
        description="Selective-prediction evaluation toolkit",
    )
    parser.add_argument("--seed", type=int, default=0, help="global seed (default 0)")
    parser.add_argument("--config", type=str, default=None, help="pipeline config JSON")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.add_argument("--input", type=str, default=None, help="input path")
        p.add_argument("--out", type=str, required=True, help="output directory")
        p.set_defaults(fn=fn)
        return p

    add("validate", cmd_validate, help="validate a JSONL record file")
    add("split", cmd_split, help="write the deterministic stratified split")
    add("synth", cmd_synth, help="generate synthetic records (optional --input: config JSON)")
    add("score", cmd_score, help="write per-record entropy scores")
    p = add("train-probe", cmd_train_probe, help="cross-validate layers and fit a probe")
    p.add_argument("--target", choices=probes.PROBE_TARGETS, default="correctness")
    p = add("train-combiner", cmd_train_combiner, help="fit a two-feature combiner")
    p.add_argument("--entropy-source", choices=combiner_mod.ENTROPY_SOURCES, default="semantic_entropy")
    p.add_argument("--kind", choices=combiner_mod.COMBINER_KINDS, default="logistic")
    p = add("calibrate", cmd_calibrate, help="calibrate a threshold to a target risk")
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--alpha", type=float, default=0.1)
    add("evaluate", cmd_evaluate, help="run the full method matrix with bootstrap")
    p = add("report", cmd_report, help="emit tables and SVG plots from evaluate outputs")
    p.add_argument("--baseline", choices=METHODS, default="se")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        needs_input = args.command not in ("synth",)
        if needs_input and not args.input:
            raise CliError(f"`{args.command}` requires --input", kind="usage")
        return args.fn(args, config)
    except CliError as exc:
        payload = {"error": exc.kind, "message": str(exc), **exc.extra}
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
        return 1
    except (OSError, ValueError, records.RecordError) as exc:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
