import pytest
import numpy as onp

from thsgr.analysis import (
    count_flops_modulator,
    count_flops_msa,
    count_params,
    params_modulator,
    params_msa,
    profile_blocks,
    run_gradcheck_suite,
    scene_profile_configs,
    verify_modulator_factorization,
    verify_msa_factorization,
)
from thsgr.analysis.factorization import stem_regime
from thsgr.analysis.flops import closed_form_flops, measure_block
from thsgr.model.nn import Conv, ConvModulator, MultiHeadSelfAttention
from thsgr.utils.errors import ParameterError


### FLOPs and parameters ###


@pytest.mark.parametrize('N, D', [(4, 8), (16, 16), (50, 16)], ids=['tiny', 'square', 'toy'])
@pytest.mark.parametrize('bias', [True, False], ids=['bias', 'bare'])
def test_msa_flops_closed_form(N, D, bias):
    block = MultiHeadSelfAttention(D, 4, onp.random.default_rng(0), bias=bias, out_projection=bias)
    measured = measure_block(block, N, D)
    assert measured.total == closed_form_flops(block, N), f'{measured.by_op}'
    if bias:
        assert measured.total == 8 * N * D * D + 4 * N * N * D + 6 * 4 * N * N + 4 * N * D
    else:
        assert measured.total == 6 * N * D * D + 4 * N * N * D + 6 * 4 * N * N


@pytest.mark.parametrize('N, D', [(4, 8), (16, 16), (50, 16)], ids=['tiny', 'square', 'toy'])
@pytest.mark.parametrize('depthwise', [True, False], ids=['depthwise', 'dense'])
def test_modulator_flops_closed_form(N, D, depthwise):
    block = ConvModulator(D, onp.random.default_rng(0), kernel_size=3, depthwise=depthwise)
    measured = measure_block(block, N, D)
    assert measured.total == count_flops_modulator(N, D, 3, depthwise), f'{measured.by_op}'
    assert set(measured.by_tag) == {'modulator'}
    spatial = 2 * N * 3 * D * (1 if depthwise else D)
    assert measured.total == 6 * N * D * D + spatial + 15 * N * D


def test_msa_attention_tags():
    N, D = 10, 8
    block = MultiHeadSelfAttention(D, 2, onp.random.default_rng(0))
    measured = measure_block(block, N, D)
    assert measured.by_tag['attention'] == 4 * N * N * D + 6 * 2 * N * N
    assert measured.by_tag['msa'] == 8 * N * D * D + 4 * N * D


def test_parameter_counts():
    D = 16
    rng = onp.random.default_rng(0)
    assert count_params(Conv(D, D, (1,), rng)) == D * D + D
    assert count_params(MultiHeadSelfAttention(D, 4, rng)) == params_msa(D) == 4 * D * D + 4 * D
    assert count_params(ConvModulator(D, rng)) == params_modulator(D, 3) == 3 * D * D + 7 * D
    assert count_params(ConvModulator(D, rng, depthwise=False)) == params_modulator(D, 3, False)
    assert params_msa(D, bias=False, out_projection=False) == 3 * D * D


def test_closed_forms_leading_terms():
    D = 64
    N = 15 * 15 + 1
    msa = count_flops_msa(N, D, 4)
    modulator = count_flops_modulator(N, D, 3)
    assert msa > modulator
    assert abs(modulator - 6 * N * D * D) / modulator < 0.1, 'modulator is dominated by N D^2'


def test_doubling_tokens():
    D, h = 64, 4
    for N in (226, 362):
        assert count_flops_modulator(2 * N, D, 3) == 2 * count_flops_modulator(N, D, 3)
        quadratic = [count_flops_msa(n, D, h) - n * (8 * D * D + 4 * D) for n in (N, 2 * N)]
        assert quadratic[1] == 4 * quadratic[0]
        assert count_flops_msa(2 * N, D, h) > 2 * count_flops_msa(N, D, h)


def test_profile_consistency():
    report = profile_blocks([(4, 8), (16, 16)] + list(scene_profile_configs(16).values()))
    assert report.consistent
    frame = report.to_frame()
    assert list(frame.columns) == [
        'block',
        'config_N',
        'config_D',
        'flops_measured',
        'flops_closed_form',
        'params',
    ]
    assert len(report.pairs()) == 5
    for msa, modulator in report.pairs()[2:]:
        assert modulator.flops_measured < msa.flops_measured, f'N={msa.config_N}'
        assert modulator.params < msa.params


def test_scene_profile_configs():
    configs = scene_profile_configs()
    assert configs == {'augsburg': (226, 64), 'houston2013': (226, 64), 'berlin': (362, 64)}


### algebraic rewrites ###


def bare_msa(D=4, heads=2, seed=0):
    return MultiHeadSelfAttention(
        D, heads, onp.random.default_rng(seed), bias=False, out_projection=False
    )


def test_msa_factorization_random():
    X = onp.random.default_rng(1).normal(size=(6, 4))
    report = verify_msa_factorization(X, bare_msa())
    assert report.passed and report.holds, f'max abs diff {report.max_abs_diff:.2e}'
    assert report.max_abs_diff <= 1e-12


def test_msa_factorization_many_shapes():
    rng = onp.random.default_rng(11)
    worst = 0.0
    for _ in range(100):
        N = int(rng.integers(1, 17))
        D = int(rng.choice([2, 4, 8, 16, 32]))
        heads = int(rng.choice([1, 2]))
        X = rng.normal(size=(N, D))
        report = verify_msa_factorization(X, bare_msa(D, heads, int(rng.integers(1 << 30))))
        worst = max(worst, report.max_abs_diff)
    assert worst <= 1e-12, f'max abs diff {worst:.2e}'


def test_msa_factorization_zero():
    report = verify_msa_factorization(onp.zeros((6, 4)), bare_msa())
    assert report.max_abs_diff == 0.0


def test_msa_factorization_needs_bare_block():
    with pytest.raises(ParameterError):
        verify_msa_factorization(onp.zeros((6, 4)), MultiHeadSelfAttention(4, 2, onp.random.default_rng(0)))


def test_modulator_factorization_scalar():
    modulator = ConvModulator(1, onp.random.default_rng(0))
    X = onp.random.default_rng(1).normal(size=(2, 7, 1))
    report = verify_modulator_factorization(X, modulator)
    assert report.regime == 'scalar'
    assert report.max_abs_diff <= 1e-12, f'{report.max_abs_diff:.2e}'
    assert report.passed


def test_modulator_factorization_diagonal():
    D = 4
    rng = onp.random.default_rng(2)
    modulator = ConvModulator(D, rng, depthwise=True)
    modulator.w4.weight.data = onp.diag(rng.normal(size=D))[:, :, None]
    report = verify_modulator_factorization(rng.normal(size=(1, 9, D)), modulator)
    assert report.regime == 'diagonal'
    assert report.max_abs_diff <= 1e-12, f'{report.max_abs_diff:.2e}'
    assert report.note == 'identity exact'


def test_modulator_factorization_dense():
    rng = onp.random.default_rng(3)
    modulator = ConvModulator(2, rng, depthwise=False)
    report = verify_modulator_factorization(rng.normal(size=(1, 8, 2)), modulator)
    assert report.regime == 'dense'
    assert report.max_abs_diff > 1e-6
    assert not report.holds
    assert report.passed
    assert report.note == 'identity not exact in dense case'


def test_stem_regime():
    assert stem_regime(onp.eye(3) * 2.0) == 'scalar'
    assert stem_regime(onp.diag([1.0, 2.0])) == 'diagonal'
    assert stem_regime(onp.ones((2, 2))) == 'dense'


### gradient checks ###


@pytest.fixture(scope='module')
def gradcheck_reports():
    return {r.name: r for r in run_gradcheck_suite()}


def test_gradcheck_suite_lists_every_block(gradcheck_reports):
    assert set(gradcheck_reports) == {
        'hsi_branch',
        'sar_branch',
        'graph_representation',
        'patch_to_embedding',
        'modulator_forward',
        'mean_forward',
        'classify_head',
        'cross_entropy',
        'end_to_end',
    }


@pytest.mark.parametrize(
    'name',
    [
        'hsi_branch',
        'sar_branch',
        'graph_representation',
        'patch_to_embedding',
        'modulator_forward',
        'mean_forward',
        'classify_head',
        'cross_entropy',
        'end_to_end',
    ],
)
def test_gradcheck_block(gradcheck_reports, name):
    report = gradcheck_reports[name]
    assert report.passed, str(report)
    assert report.checked > 0
