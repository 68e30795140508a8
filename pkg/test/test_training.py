import math
import os
import pytest
import numpy as onp
import pandas as pd

import jax.numpy as jnp
import optax
from sklearn.metrics import cohen_kappa_score

from thsgr.autodiff import Tensor
from thsgr.dataloading import PatchDataset
from thsgr.model import ModelConfig, ThsgrModel
from thsgr.preprocess import SplitSpec, make_split
from thsgr.training import (
    EvalReport,
    OptConfig,
    adam_step,
    cross_entropy,
    evaluate,
    init_adam,
    kappa_from_confusion,
    load_model,
    one_hot,
    predict_dataset,
    save_checkpoint,
    train,
)
from thsgr.utils.errors import ConfigError, DataError, DimensionError
from thsgr.utils.logging import Logger

from utils import assert_is_close, set_jax_testing_config, toy_scene


set_jax_testing_config()


TOY_MODEL = dict(
    num_pcs=8,
    lidar_channels=1,
    patch_size=5,
    num_classes=3,
    hsi_widths=(2, 2, 2),
    sar_hidden=4,
    width=8,
    embed_dim=8,
    ff_hidden=16,
    spectral_padding='same',
)


@pytest.fixture(scope='module')
def toy_data():
    scene = toy_scene(num_pcs=8)
    train_pixels, test_pixels = make_split(scene.labels, SplitSpec(n_per_class=10, seed=0))
    return PatchDataset(scene, train_pixels, 5), PatchDataset(scene, test_pixels, 5)


### loss ###


def test_one_hot():
    assert onp.array_equal(one_hot(2, 4), [0.0, 0.0, 1.0, 0.0])
    assert one_hot(0, 3).sum() == 1.0
    with pytest.raises(DataError):
        one_hot(4, 4)
    with pytest.raises(DataError):
        one_hot(-1, 4)


def test_cross_entropy_uniform():
    for C in (2, 5, 7):
        loss = cross_entropy(Tensor(onp.zeros((3, C))), onp.array([0, 1, 1]))
        assert_is_close(loss.item(), math.log(C), tolerance=1e-12, name=f'C={C}')


def test_cross_entropy_confident():
    loss = cross_entropy(Tensor([[60.0, 0.0, 0.0]]), onp.array([0]))
    assert 0.0 <= loss.item() < 1e-12


def test_cross_entropy_two_samples():
    first = onp.log([0.5, 0.5 / 3, 0.5 / 3, 0.5 / 3])
    second = onp.zeros(4)
    loss = cross_entropy(Tensor(onp.stack([first, second])), onp.array([0, 2]))
    assert_is_close(loss.item(), 1.0397207708, tolerance=1e-10, absolute=True)


def test_cross_entropy_errors():
    with pytest.raises(DataError):
        cross_entropy(Tensor(onp.zeros((2, 3))), onp.array([0, 3]))
    with pytest.raises(DimensionError):
        cross_entropy(Tensor(onp.zeros((2, 3))), onp.array([0]))


### optimizer ###


def scalar_param(value=1.0):
    return {'w': Tensor(onp.array([value]), requires_grad=True)}


def test_adam_first_step():
    params = scalar_param()
    state = init_adam(params.items())
    params['w'].grad = onp.array([1.0])
    adam_step(params.items(), state, OptConfig(learning_rate=0.01, weight_decay=0.0))
    assert_is_close(params['w'].data[0] - 1.0, -0.01, tolerance=1e-6, absolute=True)
    assert state.t == 1


def test_adam_zero_gradient():
    params = scalar_param(0.3)
    state = init_adam(params.items())
    for _ in range(5):
        params['w'].grad = onp.zeros(1)
        adam_step(params.items(), state, OptConfig(weight_decay=0.0))
    assert params['w'].data[0] == 0.3
    # a missing gradient counts as zero
    params['w'].grad = None
    adam_step(params.items(), state, OptConfig(weight_decay=0.0))
    assert params['w'].data[0] == 0.3


def test_adam_matches_optax():
    rng = onp.random.default_rng(0)
    config = OptConfig(learning_rate=0.01, weight_decay=0.001)
    init = {'a': rng.normal(size=(3, 2)), 'b': rng.normal(size=4)}
    grads = [{k: rng.normal(size=v.shape) for k, v in init.items()} for _ in range(6)]

    params = {k: Tensor(v.copy(), requires_grad=True) for k, v in init.items()}
    state = init_adam(params.items())
    for g in grads:
        for k, p in params.items():
            p.grad = g[k]
        adam_step(params.items(), state, config)

    tx = optax.adamw(
        config.learning_rate, b1=config.b1, b2=config.b2, eps=config.eps, weight_decay=config.weight_decay
    )
    reference = {k: jnp.asarray(v) for k, v in init.items()}
    opt_state = tx.init(reference)
    for g in grads:
        updates, opt_state = tx.update({k: jnp.asarray(v) for k, v in g.items()}, opt_state, reference)
        reference = optax.apply_updates(reference, updates)

    for k in init:
        assert_is_close(params[k].data, onp.asarray(reference[k]), tolerance=1e-12, absolute=True, name=k)


def test_adam_is_deterministic():
    def run():
        params = scalar_param(0.5)
        state = init_adam(params.items())
        for g in (0.3, -1.2, 0.7):
            params['w'].grad = onp.array([g])
            adam_step(params.items(), state, OptConfig())
        return params['w'].data, state

    (pa, sa), (pb, sb) = run(), run()
    assert onp.array_equal(pa, pb)
    assert onp.array_equal(sa.m['w'], sb.m['w']) and onp.array_equal(sa.v['w'], sb.v['w'])


def test_opt_config_errors():
    with pytest.raises(ConfigError):
        OptConfig(learning_rate=0.0)
    with pytest.raises(ConfigError):
        OptConfig(b1=1.0)
    assert OptConfig.from_dict({'learning_rate': 0.1, 'name': 'ignored'}).learning_rate == 0.1


### metrics ###


def test_metrics_hand_computed():
    report = EvalReport.from_confusion([[30, 10], [20, 40]])
    assert_is_close(report.oa, 0.70, tolerance=1e-12, absolute=True)
    assert_is_close(report.kappa, 0.40, tolerance=1e-12, absolute=True)
    assert report.per_class_accuracy == [0.75, 40 / 60]
    assert report.num_samples == 100


def test_metrics_perfect():
    report = EvalReport.from_predictions(onp.array([0, 1, 2, 2]), onp.array([0, 1, 2, 2]), 3)
    assert report.oa == 1.0 and report.kappa == 1.0
    assert kappa_from_confusion([[5, 0], [0, 0]]) == 1.0


def test_metrics_chance_level():
    true = onp.array([0] * 50 + [1] * 50)
    report = EvalReport.from_predictions(true, onp.zeros(100, dtype=int), 2)
    assert report.kappa == 0.0
    assert report.oa == 0.5


def test_kappa_matches_sklearn():
    rng = onp.random.default_rng(1)
    true = rng.integers(0, 4, size=300)
    pred = onp.where(rng.uniform(size=300) < 0.6, true, rng.integers(0, 4, size=300))
    report = EvalReport.from_predictions(true, pred, 4)
    assert_is_close(report.kappa, cohen_kappa_score(true, pred), tolerance=1e-12, absolute=True)


def test_report_csv(tmp_path):
    report = EvalReport.from_confusion([[3, 1], [0, 4]], runtime_s=1.5)
    report.to_csv(str(tmp_path / 'confusion.csv'), str(tmp_path / 'summary.csv'))
    confusion = pd.read_csv(tmp_path / 'confusion.csv', index_col=0)
    assert list(confusion.columns) == ['pred_0', 'pred_1', 'accuracy']
    assert confusion.loc['true_0', 'pred_1'] == 1
    summary = pd.read_csv(tmp_path / 'summary.csv')
    assert list(summary.columns) == ['oa', 'aa', 'kappa', 'runtime_s']
    assert summary['oa'][0] == 7 / 8


### training ###


def test_training_reduces_loss(toy_data):
    train_set, _ = toy_data
    model = ThsgrModel(ModelConfig(**TOY_MODEL))
    result = train(model, train_set, OptConfig(learning_rate=0.005), epochs=10, batch_size=16, progress=False)
    assert len(result.loss) == 10
    assert result.loss[-1] < result.loss[0], f'loss curve {result.loss}'
    assert all(onp.isfinite(result.loss))
    assert [row['epoch'] for row in result.curve()] == list(range(10))


def test_training_is_deterministic(toy_data):
    train_set, test_set = toy_data

    def run():
        model = ThsgrModel(ModelConfig(**TOY_MODEL, seed=1))
        result = train(model, train_set, OptConfig(), epochs=2, batch_size=16, seed=1, progress=False)
        return result, evaluate(model, test_set, batch_size=64), model.state_dict()

    (ra, ea, sa), (rb, eb, sb) = run(), run()
    assert ra.loss == rb.loss and ra.accuracy == rb.accuracy
    assert onp.array_equal(ea.confusion, eb.confusion)
    assert all(onp.array_equal(sa[k], sb[k]) for k in sa)


def test_training_logs(toy_data, tmp_path):
    train_set, _ = toy_data
    logger = Logger(str(tmp_path), verbose=False)
    train(ThsgrModel(ModelConfig(**TOY_MODEL)), train_set, OptConfig(), 2, 16, logger=logger, progress=False)
    logger.flush()
    assert sorted(os.listdir(tmp_path)) == ['log_train.csv']
    frame = pd.read_csv(tmp_path / 'log_train.csv')
    assert list(frame.columns) == ['epoch', 'loss', 'acc']
    assert len(frame) == 2


def test_threaded_prediction_matches_serial(toy_data):
    _, test_set = toy_data
    model = ThsgrModel(ModelConfig(**TOY_MODEL))
    serial = predict_dataset(model, test_set, batch_size=100, threads=1)
    threaded = predict_dataset(model, test_set, batch_size=100, threads=3)
    assert onp.array_equal(serial.pred, threaded.pred)
    assert onp.array_equal(serial.locations, threaded.locations)
    assert len(serial.pred) == len(test_set)


def test_checkpoint_round_trip(toy_data, tmp_path):
    train_set, test_set = toy_data
    model = ThsgrModel(ModelConfig(**TOY_MODEL))
    train(model, train_set, OptConfig(), epochs=1, batch_size=16, progress=False)
    path = str(tmp_path / 'model.npz')
    save_checkpoint(model, path)
    restored = load_model(path)
    assert restored.config == model.config
    a = predict_dataset(model, test_set, batch_size=128)
    b = predict_dataset(restored, test_set, batch_size=128)
    assert onp.array_equal(a.pred, b.pred)
    with pytest.raises(DataError):
        load_model(str(tmp_path / 'missing.npz'))
