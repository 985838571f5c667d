import numpy as np
import pytest

from splitig.autodiff import evaluate, forward
from splitig.errors import (
    InvalidSpecError,
    ModelFileParseError,
    ModelFileVersionError,
    PreconditionError,
    TrainingDivergedError,
)
from splitig.model_zoo import (
    Dataset,
    accuracy,
    gen_synthetic,
    load_dataset_csv,
    load_model,
    logit_graph,
    make_analytic,
    predict,
    save_dataset_csv,
    save_model,
    to_graph,
    train_mlp,
)


def test_analytic_models(linear_graph, logistic_graph):
    assert forward(linear_graph, [1.0, 1.0]) == 3.0
    assert forward(logistic_graph, [0.0]) == 0.5
    assert forward(logistic_graph, [2.0]) == pytest.approx(1.0 / (1.0 + np.exp(-20.0)), abs=1e-15)


def test_analytic_model_validation():
    with pytest.raises(InvalidSpecError):
        make_analytic('mlp-classifier', [1.0])
    with pytest.raises(PreconditionError):
        make_analytic('logistic-saturator', [1.0], scale=0.0)
    with pytest.raises(InvalidSpecError):
        make_analytic('linear', [])


def test_target_index_out_of_range(linear_spec):
    with pytest.raises(InvalidSpecError):
        to_graph(linear_spec, target_index=1)


def test_gen_synthetic_is_deterministic():
    a = gen_synthetic(7, 50, 4, 3)
    b = gen_synthetic(7, 50, 4, 3)
    np.testing.assert_array_equal(a.inputs, b.inputs)
    np.testing.assert_array_equal(a.labels, np.arange(50) % 3)
    assert a.inputs.shape == (50, 4)
    assert not np.array_equal(a.inputs, gen_synthetic(8, 50, 4, 3).inputs)


def test_gen_synthetic_one_feature():
    data = gen_synthetic(1, 30, 1, 3)
    class_means = [data.inputs[data.labels == c, 0].mean() for c in range(3)]
    assert class_means[0] < class_means[1] < class_means[2]


def test_gen_synthetic_validation():
    with pytest.raises(PreconditionError):
        gen_synthetic(0, 10, 2, 1)
    with pytest.raises(PreconditionError):
        gen_synthetic(0, 0, 2, 2)


def test_fixture_training_accuracy(blob_mlp, blob_mlp_6d, blob_data_6d):
    assert blob_mlp.metadata['training_accuracy'] >= 0.95
    assert blob_mlp_6d.metadata['training_accuracy'] >= 0.95
    assert accuracy(blob_mlp_6d, blob_data_6d) == blob_mlp_6d.metadata['training_accuracy']
    assert blob_mlp_6d.layer_sizes == (6, 16, 3)


def test_training_is_deterministic():
    data = gen_synthetic(3, 60, 2, 2)
    a = train_mlp(data, (2, 4, 2), epochs=50, seed=1)
    b = train_mlp(data, (2, 4, 2), epochs=50, seed=1)
    for name in a.parameters:
        np.testing.assert_array_equal(a.parameters[name], b.parameters[name])


def test_training_layer_validation():
    data = gen_synthetic(3, 20, 2, 2)
    with pytest.raises(InvalidSpecError):
        train_mlp(data, (3, 4, 2))
    with pytest.raises(InvalidSpecError):
        train_mlp(data, (2, 4, 1))
    with pytest.raises(PreconditionError):
        train_mlp(data, (2, 4, 2), epochs=0)


def test_non_finite_loss_is_reported():
    data = Dataset(inputs=np.full((4, 2), np.nan), labels=[0, 1, 0, 1])
    with pytest.raises(TrainingDivergedError):
        train_mlp(data, (2, 8, 2), epochs=5)


def test_model_file_round_trip(tmp_path, blob_mlp):
    path = save_model(blob_mlp, tmp_path / 'model.txt')
    loaded = load_model(path)
    assert loaded.kind == 'mlp-classifier'
    assert loaded.layer_sizes == blob_mlp.layer_sizes
    assert loaded.metadata['training_accuracy'] == blob_mlp.metadata['training_accuracy']
    for name, array in blob_mlp.parameters.items():
        np.testing.assert_array_equal(loaded.parameters[name], array)

    again = save_model(loaded, tmp_path / 'again.txt')
    assert again.read_bytes() == path.read_bytes()


def test_analytic_model_file_round_trip(tmp_path, logistic_spec):
    loaded = load_model(save_model(logistic_spec, tmp_path / 'logistic.txt'))
    assert forward(to_graph(loaded), [0.3]) == forward(to_graph(logistic_spec), [0.3])


def test_model_file_unknown_version(tmp_path, linear_spec):
    path = save_model(linear_spec, tmp_path / 'model.txt')
    path.write_text(path.read_text().replace('format_version: 1', 'format_version: 9'))
    with pytest.raises(ModelFileVersionError):
        load_model(path)


def test_model_file_unknown_kind(tmp_path, linear_spec):
    path = save_model(linear_spec, tmp_path / 'model.txt')
    path.write_text(path.read_text().replace('kind: linear', 'kind: transformer'))
    with pytest.raises(ModelFileVersionError):
        load_model(path)


def test_model_file_truncated(tmp_path, blob_mlp):
    path = save_model(blob_mlp, tmp_path / 'model.txt')
    lines = path.read_text().splitlines()
    path.write_text('\n'.join(lines[:-5]) + '\n')
    with pytest.raises(ModelFileParseError) as info:
        load_model(path)
    assert info.value.line is not None


def test_model_file_bad_number(tmp_path, linear_spec):
    path = save_model(linear_spec, tmp_path / 'model.txt')
    lines = path.read_text().splitlines()
    index = next(i for i, line in enumerate(lines) if line.startswith('param w'))
    lines[index + 1] = 'abc'
    path.write_text('\n'.join(lines) + '\n')
    with pytest.raises(ModelFileParseError) as info:
        load_model(path)
    assert info.value.field == 'w'
    assert info.value.line == index + 2


def test_not_a_model_file(tmp_path):
    path = tmp_path / 'model.txt'
    path.write_text('hello\n')
    with pytest.raises(ModelFileParseError):
        load_model(path)


def test_dataset_csv_round_trip(tmp_path):
    data = gen_synthetic(5, 40, 3, 2)
    loaded = load_dataset_csv(save_dataset_csv(data, tmp_path / 'data.csv'))
    np.testing.assert_array_equal(loaded.inputs, data.inputs)
    np.testing.assert_array_equal(loaded.labels, data.labels)


def test_dataset_validation():
    with pytest.raises(InvalidSpecError):
        Dataset(inputs=np.zeros((3, 2)), labels=[0, 1])


def test_predict_matches_labels_on_training_blobs(blob_mlp):
    data = gen_synthetic(7, 200, 2, 2)
    assert np.mean(predict(blob_mlp, data.inputs) == data.labels) >= 0.95


def test_analytic_graphs_match_closed_form(linear_spec, logistic_spec):
    rng = np.random.default_rng(11)
    linear = to_graph(linear_spec)
    logistic = to_graph(logistic_spec)
    for x in rng.uniform(-3.0, 3.0, size=(100, 2)):
        assert forward(linear, x) == pytest.approx(x[0] + 2.0 * x[1], abs=1e-12)
        assert forward(logistic, x[:1]) == pytest.approx(1.0 / (1.0 + np.exp(-10.0 * x[0])), abs=1e-12)


def test_mlp_matches_layer_by_layer_oracle(blob_mlp):
    p = blob_mlp.parameters
    x = np.array([0.37, -1.42])
    expected = p['W1'] @ np.tanh(p['W0'] @ x + p['b0']) + p['b1']
    np.testing.assert_allclose(evaluate(logit_graph(blob_mlp), x), expected, rtol=1e-12, atol=1e-12)
    for k in range(blob_mlp.output_size):
        assert forward(to_graph(blob_mlp, k), x) == pytest.approx(expected[k], rel=1e-12, abs=1e-12)


def test_fixture_saturates_along_the_path(blob_mlp_6d, blob_data_6d):
    saturated = 0
    for i in range(30):
        graph = to_graph(blob_mlp_6d, int(blob_data_6d.labels[i]))
        x = blob_data_6d.inputs[i]
        start, late, end = (forward(graph, a * x) for a in (0.0, 0.8, 1.0))
        if abs(end - late) < 0.1 * abs(end - start):
            saturated += 1
    assert saturated >= 15


def test_model_file_not_text(tmp_path):
    path = tmp_path / 'model.txt'
    path.write_bytes(b'\xff\xfe\x00garbage')
    with pytest.raises(ModelFileParseError) as info:
        load_model(path)
    assert info.value.line == 1


def test_dataset_csv_non_numeric(tmp_path):
    path = tmp_path / 'data.csv'
    path.write_text('f0,f1,label\n1,abc,0\n')
    with pytest.raises(InvalidSpecError, match='data.csv'):
        load_dataset_csv(path)


def test_dataset_csv_unparseable(tmp_path):
    path = tmp_path / 'data.csv'
    path.write_text('f0,f1,label\n1,2,0\n1,2,0,5,6\n')
    with pytest.raises(InvalidSpecError):
        load_dataset_csv(path)
