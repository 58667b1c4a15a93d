import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stockformer.errors import (
    DegenerateTruthError,
    LengthMismatchError,
    NoValidPairsError,
)
from stockformer.metrics import (
    EvalReport,
    EvalSeries,
    directional_accuracy,
    evaluate,
    mse,
    r2,
    regression_auc,
)
from stockformer.rng import Rng

# Brute-force loop oracles.


def oracle_mse(x, y):
    total = 0.0
    for a, b in zip(x, y):
        total += (a - b) ** 2
    return total / len(x)


def oracle_r2(x, y):
    xbar = sum(x) / len(x)
    num = sum((a - b) ** 2 for a, b in zip(x, y))
    den = sum((a - xbar) ** 2 for a in x)
    return 1.0 - num / den


def oracle_auc(x, y):
    score = 0.0
    pairs = 0
    for i in range(len(x)):
        for j in range(len(x)):
            if x[i] > x[j]:
                pairs += 1
                if y[i] > y[j]:
                    score += 1.0
                elif y[i] == y[j]:
                    score += 0.5
    return score / pairs


def oracle_dir_acc(x, y, prior):
    hits = 0
    for a, b, p in zip(x, y, prior):
        if (a >= p and b >= p) or (a < p and b < p):
            hits += 1
    return hits / len(x)


def test_mse_identical_is_zero():
    assert mse([1.0, 2.0], [1.0, 2.0]) == 0.0


def test_mse_unit_offset():
    assert mse([0.0, 0.0], [1.0, 1.0]) == 1.0


def test_mse_length_mismatch():
    with pytest.raises(LengthMismatchError):
        mse([1.0], [1.0, 2.0])


def test_r2_perfect_fit():
    x = [1.0, 2.0, 3.0]
    assert r2(x, x) == 1.0


def test_r2_mean_predictor_is_zero():
    x = [1.0, 2.0, 3.0, 6.0]
    xbar = sum(x) / len(x)
    assert r2(x, [xbar] * 4) == pytest.approx(0.0, abs=1e-15)


def test_r2_constant_truth_rejected():
    with pytest.raises(DegenerateTruthError):
        r2([2.0, 2.0, 2.0], [1.0, 2.0, 3.0])


def test_auc_monotone_is_one():
    x = [1.0, 2.0, 3.0, 4.0]
    y = [10.0, 20.0, 30.0, 40.0]
    assert regression_auc(x, y) == 1.0


def test_auc_constant_predictions_half():
    assert regression_auc([1.0, 2.0, 3.0], [5.0, 5.0, 5.0]) == 0.5


def test_auc_reversed_is_zero():
    assert regression_auc([1.0, 2.0, 3.0], [3.0, 2.0, 1.0]) == 0.0


def test_auc_no_valid_pairs():
    with pytest.raises(NoValidPairsError):
        regression_auc([2.0, 2.0], [1.0, 3.0])


def test_dir_acc_same_series_is_one():
    x = [1.0, 2.0, 3.0]
    assert directional_accuracy(x, x, [0.5, 2.5, 2.5]) == 1.0


def test_dir_acc_opposite_is_zero():
    prior = [1.0, 1.0]
    x = [2.0, 3.0]  # always up
    y = [0.5, 0.2]  # always down
    assert directional_accuracy(x, y, prior) == 0.0


def test_dir_acc_equality_counts_as_up():
    # truth equal to prior and prediction above it: both on the >= side
    assert directional_accuracy([1.0], [1.5], [1.0]) == 1.0


@pytest.mark.parametrize("seed", range(6))
def test_metrics_match_oracles_on_random_instances(seed):
    rng = Rng(seed + 50)
    x = list(rng.normal(100))
    y = list(rng.normal(100))
    prior = list(rng.normal(100))
    assert mse(x, y) == pytest.approx(oracle_mse(x, y), rel=1e-12)
    assert r2(x, y) == pytest.approx(oracle_r2(x, y), rel=1e-12)
    assert regression_auc(x[:50], y[:50]) == oracle_auc(x[:50], y[:50])
    assert directional_accuracy(x, y, prior) == oracle_dir_acc(x, y, prior)


def test_auc_handles_prediction_ties_exactly():
    rng = Rng(77)
    x = list(rng.normal(40))
    y = [round(v) for v in rng.normal(40)]  # plenty of ties
    assert regression_auc(x, y) == oracle_auc(x, y)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_auc_antisymmetry_on_tie_free_instances(seed):
    rng = Rng(seed)
    x = rng.normal(30)
    y = rng.normal(30)  # continuous draws: ties have probability zero
    assert regression_auc(x, y) + regression_auc(x, -y) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_dir_acc_invariant_under_monotone_transform(seed):
    rng = Rng(seed)
    x = rng.normal(50)
    y = rng.normal(50)
    prior = rng.normal(50)

    def warp(v):
        return np.exp(v / 2.0) + v  # strictly increasing

    assert directional_accuracy(x, y, prior) == directional_accuracy(
        warp(x), warp(y), warp(prior)
    )


def test_mse_nonnegative_r2_at_most_one():
    rng = Rng(5)
    for _ in range(20):
        x = rng.normal(30)
        y = rng.normal(30)
        assert mse(x, y) >= 0.0
        assert r2(x, y) <= 1.0


def test_eval_series_alignment_enforced():
    with pytest.raises(LengthMismatchError):
        EvalSeries([1.0, 2.0], [1.0], [0.0, 0.0])


def test_evaluate_fills_report():
    rng = Rng(9)
    series = EvalSeries(rng.normal(60), rng.normal(60), rng.normal(60))
    report = evaluate(series, model="stockformer", lag=4, seed=1)
    assert report.n_samples == 60
    assert 0.0 <= report.auc <= 1.0 and 0.0 <= report.dir_acc <= 1.0
    assert report.csv_row()[0] == "stockformer"


def test_eval_report_validates_ranges():
    with pytest.raises(ValueError):
        EvalReport("m", 4, 1, 10, 0.1, 0.5, 1.5, 0.5)
