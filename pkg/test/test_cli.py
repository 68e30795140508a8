import os
import pytest
import numpy as onp
import pandas as pd
from dataclasses import replace

from thsgr.cli import build_parser, config_from_args, main
from thsgr.config import load_config
from thsgr.dataloading import generate_scene, nearest_prototype_oa
from thsgr.model import ThsgrModel
from thsgr.training import save_checkpoint
from thsgr.utils.errors import ConfigError

CONFIG_DIR = os.path.join(os.path.dirname(__file__), '..', 'configs')

TINY = {
    'n_per_class': 5,
    'patch_size': 5,
    'num_pcs': 8,
    'spectral_padding': 'same',
    'hsi_widths': '[2, 2, 2]',
    'sar_hidden': 4,
    'width': 8,
    'embed_dim': 8,
    'epochs': 2,
    'batch_size': 16,
    'eval_batch_size': 256,
}


def tiny_args(command: str, out, **extra) -> list:
    args = [command, '--out', str(out), '--seed', '0']
    for key, value in {**TINY, **extra}.items():
        args += ['--set', f'{key}={value}']
    return args


def read_bytes(path) -> bytes:
    with open(path, 'rb') as f:
        return f.read()


def test_flags_map_to_fields(tmp_path):
    args = build_parser().parse_args(
        ['train', '--seed', '7', '--out', str(tmp_path), '--threads', '2', '--ablate-graph', '--ablate-meanforward']
    )
    cfg = config_from_args(args)
    assert cfg.seed == 7 and cfg.out_dir == str(tmp_path) and cfg.threads == 2
    assert (cfg.graph_encoder, cfg.modulator, cfg.mean_forward) == (False, True, False)


def test_set_errors_cite_the_argument(tmp_path):
    args = build_parser().parse_args(
        ['train', '--out', str(tmp_path), '--set', 'seed=1', '--set', 'patch_size=0']
    )
    with pytest.raises(ConfigError, match='--set:2: must be positive'):
        config_from_args(args)


def test_config_error_exit_code(tmp_path):
    assert main(['train', '--out', str(tmp_path), '--set', 'bogus=1']) == 2
    assert main(['train', '--out', str(tmp_path), '--set', 'patch_size=4']) == 2
    # 32 components requested from a 16-band synthetic cube
    assert main(['train', '--out', str(tmp_path), '--set', 'num_pcs=32']) == 2


def test_data_error_exit_code(tmp_path):
    assert main(tiny_args('eval', tmp_path)) == 1
    missing = str(tmp_path / 'missing.thsg')
    args = tiny_args('train', tmp_path, hsi_path=missing, lidar_path=missing, labels_path=missing)
    assert main(args) == 1


def test_synth_writes_scene(tmp_path):
    assert main(['synth', '--out', str(tmp_path), '--seed', '0']) == 0
    for name in ('hsi.thsg', 'lidar.thsg', 'labels.thsg', 'oracle.csv'):
        assert os.path.exists(tmp_path / name), name
    oracle = pd.read_csv(tmp_path / 'oracle.csv')
    assert oracle['spectral_oracle_oa'][0] >= 0.99


def test_train_then_eval(tmp_path):
    assert main(tiny_args('train', tmp_path)) == 0
    for name in (
        'model.npz',
        'loss_curve.csv',
        'eval_confusion.csv',
        'eval_summary.csv',
        'eval_map.pgm',
        'eval_map.csv',
        'log_train.csv',
    ):
        assert os.path.exists(tmp_path / name), name
    curve = pd.read_csv(tmp_path / 'loss_curve.csv')
    assert list(curve['epoch']) == [0, 1]
    trained = pd.read_csv(tmp_path / 'eval_summary.csv')

    assert main(tiny_args('eval', tmp_path)) == 0
    evaluated = pd.read_csv(tmp_path / 'eval_summary.csv')
    assert evaluated['oa'][0] == trained['oa'][0]
    assert evaluated['kappa'][0] == trained['kappa'][0]


def test_untrained_model_scores_chance(tmp_path):
    extra = dict(synth_classes=6, synth_regions=48, synth_seed=0)
    cfg = config_from_args(build_parser().parse_args(tiny_args('eval', tmp_path, **extra)))
    checkpoint = str(tmp_path / 'untrained.npz')
    scores = []
    for seed in range(8):
        model = ThsgrModel(replace(cfg, seed=seed).model_config(num_classes=6, lidar_channels=1))
        save_checkpoint(model, checkpoint)
        assert main(tiny_args('eval', tmp_path, checkpoint=checkpoint, **extra)) == 0
        scores.append(pd.read_csv(tmp_path / 'eval_summary.csv')['oa'][0])
    assert abs(onp.mean(scores) - 1 / 6) <= 0.15, f'untrained OA {scores}'


def test_eval_rejects_mismatched_patch_size(tmp_path):
    assert main(tiny_args('train', tmp_path)) == 0
    assert main(tiny_args('eval', tmp_path, patch_size=7)) == 2


def test_train_from_synth_files(tmp_path):
    scene_dir = tmp_path / 'scene'
    assert main(['synth', '--out', str(scene_dir), '--seed', '0']) == 0
    files = {
        'hsi_path': str(scene_dir / 'hsi.thsg'),
        'lidar_path': str(scene_dir / 'lidar.thsg'),
        'labels_path': str(scene_dir / 'labels.thsg'),
    }
    assert main(tiny_args('train', tmp_path / 'files', **files)) == 0
    assert main(tiny_args('train', tmp_path / 'memory')) == 0
    assert read_bytes(tmp_path / 'files' / 'eval_map.pgm') == read_bytes(tmp_path / 'memory' / 'eval_map.pgm')


def test_train_is_deterministic(tmp_path):
    for run in ('a', 'b'):
        assert main(tiny_args('train', tmp_path / run)) == 0
    for name in ('loss_curve.csv', 'eval_confusion.csv', 'eval_map.pgm', 'eval_map.csv'):
        assert read_bytes(tmp_path / 'a' / name) == read_bytes(tmp_path / 'b' / name), name
    a, b = (pd.read_csv(tmp_path / run / 'eval_summary.csv') for run in ('a', 'b'))
    assert a.drop(columns='runtime_s').equals(b.drop(columns='runtime_s'))


def test_profile_command(tmp_path):
    assert main(['profile', '--out', str(tmp_path)]) == 0
    frame = pd.read_csv(tmp_path / 'profile.csv')
    assert (frame['flops_measured'] == frame['flops_closed_form']).all()
    assert set(frame['block']) == {'msa', 'modulator'}
    assert len(frame) == 2 * 6


def test_sweep_command(tmp_path):
    args = tiny_args('sweep', tmp_path, epochs=1)
    args += ['--set', 'sweep_patch_sizes=[5, 7]', '--set', 'sweep_num_pcs=[6, 8]']
    assert main(args) == 0
    frame = pd.read_csv(tmp_path / 'sweep.csv')
    assert list(frame.columns) == ['k', 'p', 'oa', 'kappa', 'runtime_s']
    assert frame[['k', 'p']].values.tolist() == [[5, 6], [5, 8], [7, 6], [7, 8]]


@pytest.mark.slow
def test_gradcheck_command(tmp_path):
    assert main(['gradcheck', '--out', str(tmp_path)]) == 0
    frame = pd.read_csv(tmp_path / 'gradcheck.csv')
    assert frame['passed'].all()
    assert len(frame) == 9


### desk-scale acceptance runs ###


@pytest.mark.slow
def test_toy_scene_is_learned(tmp_path):
    assert main(['train', '--config', os.path.join(CONFIG_DIR, 'toy.cfg'), '--out', str(tmp_path)]) == 0
    curve = pd.read_csv(tmp_path / 'loss_curve.csv')
    assert len(curve) == 200
    assert curve['acc'].max() >= 0.95, f'best train OA {curve["acc"].max():.3f}'


@pytest.mark.slow
def test_collision_scene_beats_spectral_oracle(tmp_path):
    path = os.path.join(CONFIG_DIR, 'collision.cfg')
    assert main(['train', '--config', path, '--out', str(tmp_path)]) == 0
    oracle = nearest_prototype_oa(generate_scene(load_config(path).synth_spec()), use_elevation=False)
    oa = pd.read_csv(tmp_path / 'eval_summary.csv')['oa'][0]
    assert oa >= oracle + 0.20, f'model OA {oa:.3f}, spectral oracle {oracle:.3f}'


@pytest.mark.slow
def test_ablation_ladder(tmp_path):
    path = os.path.join(CONFIG_DIR, 'collision.cfg')
    assert main(['ablate', '--config', path, '--out', str(tmp_path)]) == 0
    frame = pd.read_csv(tmp_path / 'ablation.csv')
    assert list(frame['rung']) == ['backbone', '+graph', '+graph+modulator', 'full']
    oa = frame['oa'].to_numpy()
    assert onp.all(onp.diff(oa) >= -0.01), f'ablation OA {oa}'
