from itertools import combinations

import numpy as np
import pytest

from splitig.autodiff import forward
from splitig.errors import (
    InputShapeError,
    PreconditionError,
    UndefinedRatioError,
    UndefinedSensitivityError,
    UndefinedSimilarityError,
)
from splitig.metrics import (
    MetricsReport,
    abpc,
    abpc_curves,
    aggregate,
    cosine_similarity,
    evaluate_split,
    norm_ratio,
    sensitivity,
    sensitivity_by_variant,
    split_procedure,
)
from splitig.model_zoo import make_analytic, to_graph
from splitig.path_integrator import PathSpec, integrated_gradients


def brute_force_abpc(graph, x, scores, baseline, n_increments):
    """Materialise every ablated input by enumerating feature subsets."""
    x = np.asarray(x, dtype=np.float64)
    baseline = np.asarray(baseline, dtype=np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    d = x.size

    def ablate(subset):
        point = x.copy()
        for j in subset:
            point[j] = baseline[j]
        return forward(graph, point)

    f_x = forward(graph, x)
    f_full = forward(graph, baseline)
    top = [f_x]
    bottom = [f_x]
    for k in range(1, n_increments + 1):
        m = (k * d) // n_increments
        subsets = list(combinations(range(d), m))
        best = min(subsets, key=lambda s: (-sum(scores[j] for j in s), s))
        worst = min(subsets, key=lambda s: (sum(scores[j] for j in s), s))
        top.append(ablate(best))
        bottom.append(ablate(worst))

    top = np.array(top)
    bottom = np.array(bottom)
    if f_x != f_full:
        top = (top - f_full) / (f_x - f_full)
        bottom = (bottom - f_full) / (f_x - f_full)
    fractions = np.arange(n_increments + 1) / n_increments
    gap = bottom - top
    area = 0.0
    for k in range(n_increments):
        area += (gap[k] + gap[k + 1]) * 0.5 * (fractions[k + 1] - fractions[k])
    return area


@pytest.fixture
def linear_4d():
    return to_graph(make_analytic('linear', [4.0, 3.0, 2.0, 1.0]))


def test_norm_ratio_examples():
    assert norm_ratio([6.0, 8.0], [3.0, 4.0], 2) == 2.0
    assert norm_ratio([6.0, 8.0], [3.0, 4.0], 1) == 2.0
    assert norm_ratio([0.0, 0.0], [3.0, 4.0], 2) == 0.0
    with pytest.raises(UndefinedRatioError):
        norm_ratio([1.0, 1.0], [0.0, 0.0], 2)
    with pytest.raises(PreconditionError):
        norm_ratio([1.0], [1.0], 3)
    with pytest.raises(InputShapeError):
        norm_ratio([1.0, 1.0], [1.0], 2)


def test_cosine_examples():
    assert cosine_similarity([1.0, 2.0], [1.0, 2.0]) == pytest.approx(1.0, abs=1e-15)
    assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == 0.0
    assert cosine_similarity([1.0, 2.0], [2.0, 4.0]) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(UndefinedSimilarityError):
        cosine_similarity([0.0, 0.0], [1.0, 2.0])


def test_cosine_symmetry_and_scaling():
    rng = np.random.default_rng(4)
    for _ in range(20):
        a, b = rng.normal(size=(2, 7))
        c = cosine_similarity(a, b)
        assert -1.0 <= c <= 1.0
        assert cosine_similarity(b, a) == pytest.approx(c, abs=1e-12)
        assert cosine_similarity(3.5 * a, b) == pytest.approx(c, abs=1e-12)


def test_abpc_linear_oracle(linear_4d):
    x = np.ones(4)
    attribution = integrated_gradients(linear_4d, PathSpec(np.zeros(4), x))
    value = abpc(linear_4d, x, attribution, np.zeros(4), n_increments=4)
    assert value == brute_force_abpc(linear_4d, x, attribution.values, np.zeros(4), 4)
    assert value > 0


def test_abpc_anti_faithful_is_negative(linear_4d):
    x = np.ones(4)
    reversed_scores = [1.0, 2.0, 3.0, 4.0]
    value = abpc(linear_4d, x, reversed_scores, np.zeros(4), n_increments=4)
    assert value == brute_force_abpc(linear_4d, x, reversed_scores, np.zeros(4), 4)
    assert value < 0


def test_abpc_input_equals_baseline(linear_4d):
    assert abpc(linear_4d, np.zeros(4), [4.0, 3.0, 2.0, 1.0], np.zeros(4)) == 0.0


def test_abpc_ties_follow_index_order():
    graph = to_graph(make_analytic('linear', [1.0, -2.0, 3.0, 0.5, 2.0, -1.0]))
    x = np.array([1.0, 2.0, -1.0, 3.0, 0.5, 1.5])
    baseline = np.full(6, 0.25)
    for scores in ([1.0, 1.0, 0.0, 0.0, 2.0, 2.0], [0.0] * 6, [3.0, -1.0, 3.0, -1.0, 0.0, 0.0]):
        for n_increments in (3, 4, 10):
            value = abpc(graph, x, scores, baseline, n_increments)
            assert value == brute_force_abpc(graph, x, scores, baseline, n_increments)
    assert abpc_curves(graph, x, [0.0] * 6, baseline).ties
    assert not abpc_curves(graph, x, [1.0, 2.0, 3.0, 4.0, 5.0, 6.0], baseline).ties


def test_abpc_mlp_oracle(blob_mlp_6d, blob_data_6d):
    for i in range(4):
        graph = to_graph(blob_mlp_6d, int(blob_data_6d.labels[i]))
        x = blob_data_6d.inputs[i]
        attribution = integrated_gradients(graph, PathSpec(np.zeros(6), x))
        for n_increments in (4, 6, 10):
            value = abpc(graph, x, attribution, np.zeros(6), n_increments)
            assert value == brute_force_abpc(graph, x, attribution.values, np.zeros(6), n_increments)


def test_abpc_curve_endpoints(linear_4d):
    curves = abpc_curves(linear_4d, np.ones(4), [4.0, 3.0, 2.0, 1.0], np.zeros(4), n_increments=4)
    assert curves.normalized
    assert curves.top[0] == 1.0 and curves.bottom[0] == 1.0
    assert curves.top[-1] == 0.0 and curves.bottom[-1] == 0.0
    np.testing.assert_allclose(curves.top, [1.0, 0.6, 0.3, 0.1, 0.0], atol=1e-15)


def test_abpc_validation(linear_4d):
    with pytest.raises(PreconditionError):
        abpc(linear_4d, np.ones(4), np.ones(4), np.zeros(4), n_increments=0)
    with pytest.raises(InputShapeError):
        abpc(linear_4d, np.ones(4), np.ones(3), np.zeros(4))


def test_sensitivity_constant_attribution(linear_graph):
    value = sensitivity(lambda model, x: np.array([1.0, 2.0]), linear_graph, [1.0, 1.0], seed=0)
    assert value == 0.0


def test_sensitivity_identity_bound(linear_graph):
    x = np.array([3.0, 4.0])
    value = sensitivity(lambda model, point: point, linear_graph, x, r=0.05, n_samples=50, seed=1)
    assert 0.0 < value <= np.sqrt(2) * 0.05 / 5.0 + 1e-15


def test_sensitivity_is_deterministic_and_monotone(logistic_graph):
    path = PathSpec([0.0], [0.4])

    def ig(model, x):
        return integrated_gradients(model, path.with_input(x))

    first = sensitivity(ig, logistic_graph, [0.4], n_samples=10, seed=42)
    assert sensitivity(ig, logistic_graph, [0.4], n_samples=10, seed=42) == first
    assert sensitivity(ig, logistic_graph, [0.4], n_samples=5, seed=42) <= first
    assert sensitivity(ig, logistic_graph, [0.4], n_samples=20, seed=42) >= first


def test_sensitivity_validation(linear_graph):
    with pytest.raises(UndefinedSensitivityError):
        sensitivity(lambda model, x: np.zeros(2), linear_graph, [1.0, 1.0])
    with pytest.raises(PreconditionError):
        sensitivity(lambda model, x: x, linear_graph, [1.0, 1.0], r=0.0)
    with pytest.raises(PreconditionError):
        sensitivity(lambda model, x: x, linear_graph, [1.0, 1.0], n_samples=0)


def test_sensitivity_by_variant_shares_draws(linear_graph):
    path = PathSpec([0.0, 0.0], [1.0, 1.0])
    values = sensitivity_by_variant(split_procedure(path, 0.9), linear_graph, [1.0, 1.0], seed=3)
    assert set(values) == {'left', 'right', 'full'}
    single = sensitivity(
        lambda model, x: integrated_gradients(model, path.with_input(x)), linear_graph, [1.0, 1.0], seed=3
    )
    assert values['full'] == pytest.approx(single, abs=1e-12)


def test_evaluate_split_linear(linear_graph):
    report = evaluate_split(linear_graph, PathSpec([0.0, 0.0], [1.0, 1.0]), 0.9, sample_index=0, seed=1)
    assert report.alpha_star == pytest.approx(0.905)
    assert report.norm_ratio_l2 == pytest.approx(0.095 / 0.905, rel=1e-12)
    assert report.norm_ratio_l1 == pytest.approx(0.095 / 0.905, rel=1e-12)
    assert report.cosine_left_right == pytest.approx(1.0, abs=1e-12)
    assert set(report.abpc) == {'left', 'right', 'full'}
    assert report.sensitivity['left'] >= 0.0


def test_evaluate_split_is_reproducible(blob_mlp_6d, blob_data_6d):
    graph = to_graph(blob_mlp_6d, int(blob_data_6d.labels[3]))
    path = PathSpec(np.zeros(6), blob_data_6d.inputs[3])
    a = evaluate_split(graph, path, 0.9, sample_index=3, seed=7)
    b = evaluate_split(graph, path, 0.9, sample_index=3, seed=7)
    assert a.to_dict() == b.to_dict()
    c = evaluate_split(graph, path, 0.9, sample_index=4, seed=7)
    assert c.sensitivity != a.sensitivity


def test_evaluate_split_undefined_ratio(linear_graph):
    report = evaluate_split(linear_graph, PathSpec([0.0, 0.0], [0.0, 0.0]), 0.9,
                            with_abpc=False, with_sensitivity=False)
    assert report.norm_ratio_l2 is None
    assert report.cosine_left_right is None
    assert report.at_endpoint == 1


def test_aggregate_single_report():
    report = MetricsReport(psi=0.9, alpha_star=0.4, norm_ratio_l2=2.0, abpc={'left': 0.3})
    summary = aggregate([report])
    assert summary.alpha_star == 0.4
    assert summary.norm_ratio_l2 == 2.0
    assert summary.abpc['left'] == 0.3
    assert summary.n_samples == 1


def test_aggregate_means_and_skips():
    reports = [
        MetricsReport(psi=0.9, alpha_star=0.2, norm_ratio_l2=1.0, abpc={'left': 0.1}),
        MetricsReport(psi=0.9, alpha_star=0.4, norm_ratio_l2=None, abpc={'left': 0.3}),
    ]
    summary = aggregate(reports)
    assert summary.abpc['left'] == pytest.approx(0.2)
    assert summary.alpha_star == pytest.approx(0.3)
    assert summary.norm_ratio_l2 == 1.0
    assert summary.skip_counts['norm_ratio_l2'] == 1
    assert summary.cosine_left_right is None
    assert summary.skip_counts['cosine_left_right'] == 2


def test_aggregate_validation():
    with pytest.raises(PreconditionError):
        aggregate([])
    with pytest.raises(PreconditionError):
        aggregate([MetricsReport(psi=0.9), MetricsReport(psi=0.95)])


def test_report_row_and_dict():
    report = MetricsReport(psi=0.9, alpha_star=0.5, abpc={'left': 0.2, 'right': -0.1, 'full': 0.05},
                           sensitivity={'left': 0.01}, sample_index=2)
    row = report.to_row()
    assert row['abpc_right'] == -0.1
    assert row['sensitivity_right'] is None
    assert row['sample_index'] == 2
    assert 'skipped_abpc_left' in row
    data = report.to_dict()
    assert data['abpc']['full'] == 0.05
    assert data['sensitivity'] == {'left': 0.01, 'right': None, 'full': None}
