import os
import pytest

from thsgr.config import RunConfig, load_config, parse_assignments
from thsgr.utils.errors import ConfigError

CONFIG_DIR = os.path.join(os.path.dirname(__file__), '..', 'configs')


def write_config(tmp_path, text: str, name: str = 'run.cfg') -> str:
    path = tmp_path / name
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return str(path)


def test_defaults():
    cfg = load_config()
    assert cfg == RunConfig()
    assert cfg.uses_synthetic_scene
    assert cfg.hsi_widths == [8, 16, 32]


def test_file_values_are_typed(tmp_path):
    path = write_config(
        tmp_path,
        '# toy run\n'
        'name = toy\n'
        'patch_size = 7   # odd\n'
        '\n'
        'lr = 0.005\n'
        'graph_encoder = false\n'
        'hsi_widths = [4, 8, 8]\n'
        'ff_hidden = null\n',
    )
    cfg = load_config(path)
    assert cfg.name == 'toy'
    assert cfg.patch_size == 7
    assert cfg.lr == 0.005
    assert cfg.graph_encoder is False
    assert cfg.hsi_widths == [4, 8, 8]
    assert cfg.ff_hidden is None


def test_overrides_win(tmp_path):
    path = write_config(tmp_path, 'seed = 1\nepochs = 5\n')
    assert load_config(path, ['seed=3']).seed == 3
    assert load_config(path, {'epochs': 9}).epochs == 9
    assert load_config(path).seed == 1


def test_unknown_key_reports_line(tmp_path):
    path = write_config(tmp_path, 'seed = 1\n\nbogus = 2\n')
    with pytest.raises(ConfigError) as info:
        load_config(path)
    assert info.value.field == 'bogus'
    assert f'{path}:3' in str(info.value)


def test_malformed_line(tmp_path):
    path = write_config(tmp_path, 'seed 1\n')
    with pytest.raises(ConfigError) as info:
        load_config(path)
    assert info.value.field == f'{path}:1'


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(str(tmp_path / 'nope.cfg'))
    assert info.value.field == 'config'


@pytest.mark.parametrize(
    'line, field',
    [
        ('patch_size = 7.5', 'patch_size'),
        ('graph_encoder = 1', 'graph_encoder'),
        ('lr = fast', 'lr'),
        ('hsi_widths = 8', 'hsi_widths'),
        ('split_mode = 3', 'split_mode'),
    ],
    ids=['int', 'bool', 'number', 'list', 'string'],
)
def test_type_errors(tmp_path, line, field):
    with pytest.raises(ConfigError) as info:
        load_config(write_config(tmp_path, line + '\n'))
    assert info.value.field == field


@pytest.mark.parametrize(
    'overrides, field',
    [
        ({'patch_size': 0}, 'patch_size'),
        ({'lr': 0.0}, 'lr'),
        ({'seed': -1}, 'seed'),
        ({'split_mode': 'grid'}, 'split_mode'),
        ({'spectral_padding': 'full'}, 'spectral_padding'),
        ({'hsi_path': 'a.thsg'}, 'hsi_path'),
        ({'train_regions': [[0, 1, 2]]}, 'train_regions'),
    ],
    ids=['positive', 'lr', 'seed', 'split', 'padding', 'paths', 'regions'],
)
def test_validation_errors(overrides, field):
    with pytest.raises(ConfigError) as info:
        load_config(overrides=overrides)
    assert info.value.field == field


def test_validation_errors_cite_the_line(tmp_path):
    path = write_config(tmp_path, 'seed = 1\npatch_size = 0\n')
    with pytest.raises(ConfigError) as info:
        load_config(path)
    assert info.value.field == 'patch_size'
    assert f'{path}:2: must be positive' in str(info.value)

    path = write_config(tmp_path, '# widths\n\nhsi_widths = 8\n')
    with pytest.raises(ConfigError) as info:
        load_config(path)
    assert f'{path}:3: expected a list' in str(info.value)

    with pytest.raises(ConfigError, match='--set:2: must be non-negative'):
        load_config(overrides=['epochs=3', 'seed=-1'])


def test_override_drops_the_file_line(tmp_path):
    path = write_config(tmp_path, 'patch_size = 7\n')
    with pytest.raises(ConfigError) as info:
        load_config(path, {'patch_size': 0})
    assert f'{path}:1' not in str(info.value)
    with pytest.raises(ConfigError, match='--set:1'):
        load_config(path, {'patch_size': 0}, origins={'patch_size': '--set:1'})


def test_relative_paths_follow_the_file(tmp_path):
    path = write_config(
        tmp_path,
        'hsi_path = data/hsi.thsg\nlidar_path = data/lidar.thsg\nlabels_path = /abs/labels.thsg\n',
        name='scene/run.cfg',
    )
    cfg = load_config(path)
    assert cfg.hsi_path == os.path.join(str(tmp_path / 'scene'), 'data/hsi.thsg')
    assert cfg.lidar_path == os.path.join(str(tmp_path / 'scene'), 'data/lidar.thsg')
    assert cfg.labels_path == '/abs/labels.thsg'
    assert not cfg.uses_synthetic_scene


def test_parse_assignments():
    values = parse_assignments(['# header', 'seed=4', 'split_margin = 2 # px', 'ff_hidden ='], 'test')
    assert values == {'seed': 4, 'split_margin': 2, 'ff_hidden': None}


def test_ablation_switches():
    cfg = RunConfig().with_ablation(False, True, False)
    model = cfg.model_config(num_classes=4, lidar_channels=2)
    assert (model.graph_encoder, model.modulator, model.mean_forward) == (False, True, False)
    assert model.num_classes == 4 and model.lidar_channels == 2
    assert model.hsi_widths == (8, 16, 32)


@pytest.mark.parametrize('name', ['toy', 'collision', 'augsburg', 'houston2013', 'berlin'])
def test_shipped_configs_load(name):
    cfg = load_config(os.path.join(CONFIG_DIR, f'{name}.cfg'))
    assert cfg.name == name
    assert cfg.uses_synthetic_scene == (name in ('toy', 'collision'))
