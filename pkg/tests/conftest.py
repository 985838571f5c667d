import numpy as np
import pytest

from splitig import logging_utils
from splitig.autodiff import GraphBuilder
from splitig.cli import fixture_dataset, fixture_model
from splitig.model_zoo import make_analytic, to_graph


@pytest.fixture(autouse=True)
def isolated_logs(tmp_path, monkeypatch):
    """Keep log lines and env-driven config out of the working tree."""
    monkeypatch.setattr(logging_utils, 'LOG_FILE', tmp_path / 'logs' / 'splitig.log')
    monkeypatch.delenv('SPLITIG_CONFIG', raising=False)


@pytest.fixture
def linear_spec():
    return make_analytic('linear', [1.0, 2.0])


@pytest.fixture
def linear_graph(linear_spec):
    return to_graph(linear_spec)


@pytest.fixture
def logistic_spec():
    return make_analytic('logistic-saturator', [1.0], scale=10.0)


@pytest.fixture
def logistic_graph(logistic_spec):
    return to_graph(logistic_spec)


@pytest.fixture(scope='session')
def blob_mlp():
    return fixture_model('blob-mlp')


@pytest.fixture(scope='session')
def blob_mlp_6d():
    return fixture_model('blob-mlp-6d')


@pytest.fixture(scope='session')
def blob_data_6d():
    return fixture_dataset('blob-mlp-6d')


def random_tanh_graph(rng, sizes, head='select', index=0):
    """Random tanh MLP graph; head is 'select', 'softmax' or None (logit vector)."""
    builder = GraphBuilder(sizes[0])
    for k in range(len(sizes) - 1):
        W = rng.normal(0.0, 1.0 / np.sqrt(sizes[k]), size=(sizes[k + 1], sizes[k]))
        b = rng.normal(0.0, 0.1, size=sizes[k + 1])
        builder.affine(W, b)
        if k < len(sizes) - 2:
            builder.add('tanh')
    if head == 'softmax':
        builder.add('softmax')
        builder.add('select', index=index)
    elif head == 'select':
        builder.add('select', index=index)
    return builder.build()


@pytest.fixture
def tanh_graph():
    return random_tanh_graph
