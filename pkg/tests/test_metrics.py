import math

import numpy as np
import pytest

from selpred.metrics import (
    RcCurve,
    auprc,
    auroc,
    bootstrap,
    bootstrap_indices,
    rc_curve,
    realized_test_risks,
    spearman,
    tce,
    write_metrics_csv,
    write_rc_csv,
)
from selpred.metrics import MetricReport

from oracles import (
    auprc_thresholds,
    auroc_pairwise,
    rc_prefix_enumeration,
    spearman_rank_pearson,
)


def random_instance(rng, n=None, tie_prob=0.3):
    n = n or int(rng.integers(4, 200))
    risks = rng.standard_normal(n)
    if rng.random() < tie_prob:
        risks = np.round(risks, 1)  # force ties
    labels = rng.integers(0, 2, n)
    if labels.min() == labels.max():
        labels[0] = 1 - labels[0]
    return risks, labels


class TestAuroc:
    def test_perfect_separation(self):
        assert auroc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0

    def test_all_ties(self):
        assert auroc([0.5] * 6, [0, 1, 0, 1, 0, 1]) == 0.5

    def test_matches_pairwise_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            risks, labels = random_instance(rng)
            assert auroc(risks, labels) == pytest.approx(
                auroc_pairwise(risks.tolist(), labels.tolist()), abs=1e-12
            )

    def test_invariant_under_monotone_transform(self):
        rng = np.random.default_rng(12)
        risks, labels = random_instance(rng)
        transformed = np.exp(3.0 * risks) + 7.0
        assert auroc(risks, labels) == auroc(transformed, labels)

    def test_single_class_raises(self):
        with pytest.raises(ValueError):
            auroc([0.1, 0.2], [1, 1])


class TestAuprc:
    def test_perfect_ranking(self):
        assert auprc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0

    def test_constant_risks_give_prevalence(self):
        assert auprc([0.3] * 10, [1, 0, 0, 1, 0, 0, 0, 0, 0, 0]) == pytest.approx(0.2)

    def test_matches_threshold_oracle(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            risks, labels = random_instance(rng)
            assert auprc(risks, labels) == pytest.approx(
                auprc_thresholds(risks.tolist(), labels.tolist()), abs=1e-12
            )

    def test_no_positives_raises(self):
        with pytest.raises(ValueError):
            auprc([0.1, 0.2], [0, 0])


class TestRcCurve:
    def test_oracle_ordering_has_zero_excess(self):
        curve = rc_curve([0.1, 0.2, 0.3, 0.9], [0, 0, 0, 1])
        assert curve.e_aurc == 0.0

    def test_all_correct(self):
        curve = rc_curve([0.3, 0.1, 0.2], [0, 0, 0])
        assert curve.aurc == 0.0
        assert all(risk == 0.0 for _, risk in curve.points)

    def test_anti_oracle_hand_enumeration(self):
        # hallucination ranked safest among 3 correct: 4 prefixes by hand
        risks = [0.1, 0.2, 0.3, 0.4]
        labels = [1, 0, 0, 0]
        curve = rc_curve(risks, labels)
        expected_aurc = (1.0 + 1 / 2 + 1 / 3 + 1 / 4) / 4
        expected_oracle = (0 + 0 + 0 + 1 / 4) / 4
        assert curve.aurc == pytest.approx(expected_aurc, abs=1e-12)
        assert curve.e_aurc == pytest.approx(expected_aurc - expected_oracle, abs=1e-12)

    def test_last_point_is_base_rate(self):
        rng = np.random.default_rng(14)
        risks, labels = random_instance(rng)
        curve = rc_curve(risks, labels)
        coverage, risk = curve.points[-1]
        assert coverage == 1.0
        assert risk == pytest.approx(labels.mean(), abs=1e-15)

    def test_matches_prefix_enumeration(self):
        rng = np.random.default_rng(15)
        for _ in range(50):
            risks, labels = random_instance(rng, n=int(rng.integers(4, 40)))
            _, aurc, e_aurc = rc_prefix_enumeration(risks.tolist(), labels.tolist())
            curve = rc_curve(risks, labels)
            assert curve.aurc == pytest.approx(aurc, abs=1e-12)
            assert curve.e_aurc == pytest.approx(e_aurc, abs=1e-12)

    def test_excess_never_negative(self):
        rng = np.random.default_rng(16)
        for _ in range(200):
            risks, labels = random_instance(rng, n=int(rng.integers(1, 30)))
            assert rc_curve(risks, labels).e_aurc >= 0.0

    def test_zero_excess_for_separated_scores_with_within_class_ties(self):
        labels = np.array([0] * 5 + [1] * 3)
        risks = np.array([0.2] * 5 + [0.8] * 3)
        assert rc_curve(risks, labels).e_aurc == 0.0

    def test_positive_excess_when_classes_interleave(self):
        for risks, labels in [
            ([1, 2, 3, 4], [0, 1, 0, 0]),
            ([1, 2, 3, 4], [0, 1, 0, 1]),
            ([1, 2, 2, 3], [0, 1, 0, 0]),  # cross-class tie below full coverage
        ]:
            assert rc_curve(risks, labels).e_aurc > 0.0

    def test_permutation_invariant(self):
        rng = np.random.default_rng(17)
        risks, labels = random_instance(rng)
        perm = rng.permutation(risks.size)
        a = rc_curve(risks, labels)
        b = rc_curve(risks[perm], labels[perm])
        assert a.points == b.points
        assert a.aurc == b.aurc and a.e_aurc == b.e_aurc


class TestTce:
    GRID6 = [0.05, 0.10, 0.15, 0.20, 0.25, 0.30]

    def test_zero_coverage_fallback_matches_arithmetic(self):
        # all calibration examples hallucinated: no tau ever admissible
        cal_risks = [0.4, 0.5, 0.6, 0.7]
        cal_labels = [1, 1, 1, 1]
        test_risks = np.linspace(0, 1, 10)
        test_labels = [1, 1, 1, 0, 0, 0, 0, 0, 0, 0]  # base rate 0.3
        value = tce(cal_risks, cal_labels, test_risks, test_labels, self.GRID6)
        expected = np.mean([abs(0.3 - a) for a in self.GRID6])
        assert value == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.125, abs=1e-12)
        # the same construction over the 5-point grid 0.05..0.25
        grid5 = self.GRID6[:-1]
        assert tce(cal_risks, cal_labels, test_risks, test_labels, grid5) == pytest.approx(
            0.15, abs=1e-12
        )

    def test_whole_range_fallback_reports_base_rate(self):
        value = tce(
            [0.4, 0.5], [1, 1], [0.1, 0.2, 0.3, 0.4], [1, 0, 0, 0],
            self.GRID6, fallback="whole_range",
        )
        assert value == pytest.approx(0.25, abs=1e-15)

    def test_oracle_score_with_high_prevalence(self):
        # risk = label separates perfectly; prevalence 0.5 > 0.30 keeps
        # realized risk at 0 for every alpha in the grid
        rng = np.random.default_rng(18)
        labels = np.array([0, 1] * 20)
        risks = labels.astype(float)
        perm = rng.permutation(40)
        value = tce(risks[perm], labels[perm], risks, labels, self.GRID6)
        assert value == pytest.approx(np.mean(self.GRID6), abs=1e-12)

    def test_identical_cal_and_test_stay_below_alpha(self):
        rng = np.random.default_rng(19)
        risks = rng.random(80)
        labels = (rng.random(80) < risks).astype(int)
        realized, covered = realized_test_risks(risks, labels, risks, labels, self.GRID6)
        assert covered.all()
        assert (realized <= np.array(self.GRID6) + 1e-15).all()
        value = tce(risks, labels, risks, labels, self.GRID6)
        assert value == pytest.approx(np.mean(np.array(self.GRID6) - realized), abs=1e-12)

    def test_bad_grid_raises(self):
        with pytest.raises(ValueError):
            tce([0.1], [0], [0.1], [0], [])
        with pytest.raises(ValueError):
            tce([0.1], [0], [0.1], [0], [0.0, 0.5])

    def test_bad_fallback_raises(self):
        with pytest.raises(ValueError):
            tce([0.1], [0], [0.1], [0], [0.1], fallback="never")


class TestSpearman:
    def test_identical_and_reversed(self):
        v = [3.0, 1.0, 2.0, 5.0]
        assert spearman(v, v) == 1.0
        assert spearman(v, [-x for x in v]) == -1.0

    def test_matches_rank_pearson_oracle(self):
        rng = np.random.default_rng(20)
        for _ in range(50):
            n = int(rng.integers(5, 60))
            a = np.round(rng.standard_normal(n), 1)
            b = np.round(rng.standard_normal(n), 1)
            assert spearman(a, b) == pytest.approx(
                spearman_rank_pearson(a.tolist(), b.tolist()), abs=1e-12
            )

    def test_constant_input_raises(self):
        with pytest.raises(ValueError):
            spearman([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])


class TestBootstrap:
    def test_constant_metric_has_zero_std(self):
        mean, std = bootstrap(lambda idx: 0.7, 50, seed=1)
        assert (mean, std) == (0.7, 0.0)

    def test_same_seed_bit_identical(self):
        rng = np.random.default_rng(21)
        risks, labels = random_instance(rng, n=120)
        metric = lambda idx: auroc(risks[idx], labels[idx])
        first = bootstrap(metric, 120, seed=5, labels=labels)
        second = bootstrap(metric, 120, seed=5, labels=labels)
        assert first == second

    def test_schedule_independent_aggregation(self):
        # evaluating iterations in any order reproduces the sequential result
        rng = np.random.default_rng(22)
        risks, labels = random_instance(rng, n=80)
        metric = lambda idx: auroc(risks[idx], labels[idx])
        sequential = bootstrap(metric, 80, iterations=100, seed=9, labels=labels)
        order = rng.permutation(100)
        values = np.empty(100)
        for i in order:
            values[i] = metric(bootstrap_indices(80, 9, int(i), labels=labels))
        mean = float(values.mean())
        std = float(np.sqrt(((values - mean) ** 2).mean()))
        assert (mean, std) == sequential

    def test_redraw_guarantees_both_classes(self):
        labels = np.array([1] + [0] * 19)
        for i in range(50):
            idx = bootstrap_indices(20, 3, i, labels=labels)
            assert len(set(labels[idx].tolist())) == 2

    def test_std_shrinks_with_sample_size(self):
        rng = np.random.default_rng(23)

        def make(n):
            labels = rng.integers(0, 2, n)
            risks = labels + rng.standard_normal(n)
            return risks, labels

        r1, l1 = make(200)
        r2, l2 = make(2000)
        _, std_small = bootstrap(lambda i: auroc(r1[i], l1[i]), 200, seed=2, labels=l1)
        _, std_big = bootstrap(lambda i: auroc(r2[i], l2[i]), 2000, seed=2, labels=l2)
        ratio = std_small / std_big
        assert 1.8 < ratio < 5.5  # ~sqrt(10) with bootstrap noise


def test_csv_writers_roundtrip(tmp_path):
    report = MetricReport(
        method="se",
        auroc=(0.8, 0.01),
        auprc=(0.7, 0.02),
        e_aurc=(0.1, 0.005),
        tce=(0.05, 0.001),
        base_accuracy=0.6,
    )
    path = tmp_path / "metrics.csv"
    write_metrics_csv([report], path)
    lines = path.read_text().splitlines()
    assert lines[0] == "method,metric,mean,std"
    assert lines[1] == "se,auroc,0.8,0.01"

    curve = RcCurve(points=((0.5, 0.0), (1.0, 0.25)), aurc=0.125, e_aurc=0.0)
    rc_path = tmp_path / "rc.csv"
    write_rc_csv(curve, rc_path)
    assert rc_path.read_text() == "coverage,selective_risk\n0.5,0.0\n1.0,0.25\n"
