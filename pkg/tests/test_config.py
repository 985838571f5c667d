import pytest

from splitig.config import RunConfig, parse_value, read_config_file, resolve_config
from splitig.errors import ConfigError


def test_defaults():
    config = resolve_config()
    assert config.psi == (0.9, 0.95, 0.99)
    assert config.n_steps == 200
    assert config.rule == 'right-riemann'
    assert config.baseline == 'zero'


def test_parse_values():
    assert parse_value('psi', '0.9, 0.99') == (0.9, 0.99)
    assert parse_value('psi', [0.5]) == (0.5,)
    assert parse_value('layer_sizes', '2,8,2') == (2, 8, 2)
    assert parse_value('exclude_misclassified', 'yes') is True
    assert parse_value('n_steps', '50') == 50
    assert parse_value('r', '0.1') == 0.1
    assert parse_value('target', '2') == '2'
    with pytest.raises(ValueError):
        parse_value('abpc', 'maybe')


def test_file_then_overrides(tmp_path):
    path = tmp_path / 'run.cfg'
    path.write_text('# comment\nPSI=0.8,0.9\nRULE=trapezoid\nN_STEPS=10\n')
    assert read_config_file(path)['psi'] == '0.8,0.9'

    config = resolve_config(path, {'n_steps': '25', 'rule': None})
    assert config.psi == (0.8, 0.9)
    assert config.rule == 'trapezoid'
    assert config.n_steps == 25


def test_environment_config_path(tmp_path, monkeypatch):
    path = tmp_path / 'env.cfg'
    path.write_text('SEED=11\n')
    monkeypatch.setenv('SPLITIG_CONFIG', str(path))
    assert resolve_config().seed == 11


@pytest.mark.parametrize('overrides', [
    {'psi': '0.0'},
    {'psi': ''},
    {'quality_psi': '1'},
    {'n_steps': '0'},
    {'baseline': 'median'},
    {'target': 'best'},
    {'target': '-1'},
    {'r': '0'},
    {'layer_sizes': '6'},
    {'activation': 'gelu'},
    {'workers': '0'},
    {'n_steps': 'ten'},
    {'colour': 'blue'},
])
def test_invalid_values(overrides):
    with pytest.raises(ConfigError):
        resolve_config(overrides=overrides)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        resolve_config(tmp_path / 'nope.cfg')


def test_to_dict_leaves_out_runtime_fields():
    data = RunConfig(output_dir='somewhere', workers=4).to_dict()
    assert 'output_dir' not in data and 'workers' not in data
    assert data['psi'] == [0.9, 0.95, 0.99]
    assert RunConfig().to_dict(include_runtime=True)['workers'] >= 1
