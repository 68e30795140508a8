"""
Finite-difference checks of every block of the classifier and of the full
model, run at a toy configuration in double precision.
"""

import numpy as onp

from thsgr.autodiff import GradCheckReport, Tensor, grad_check, ops
from thsgr.model import ModelConfig, ThsgrModel
from thsgr.model.nn import (
    ClassifierHead,
    ConvModulator,
    GraphEncoder,
    HsiBranch,
    MeanForward,
    Module,
    PatchEmbedding,
    SarBranch,
)
from thsgr.training.loss import cross_entropy

from typing import Callable, Dict, List

TOY_MODEL = dict(
    num_pcs=16,
    lidar_channels=2,
    patch_size=7,
    num_classes=3,
    hsi_widths=(2, 2, 2),
    sar_hidden=4,
    width=16,
    embed_dim=16,
    ff_hidden=32,
)


def _projected_sum(out: Tensor, weights: onp.ndarray) -> Tensor:
    return ops.sum(ops.mul(out, weights))


def _check_block(
    name: str,
    block: Module,
    inputs: List[Tensor],
    rng: onp.random.Generator,
    h: float,
    tol: float,
    max_checks: int | None,
    seed: int,
    output: Callable = lambda out: out,
) -> GradCheckReport:
    """
    Scalar loss sum(out * R) for a fixed random R, differentiated with respect
    to the block inputs and all its parameters.
    """
    n = len(inputs)
    weights = rng.standard_normal(output(block(*inputs)).shape)

    def f(*args):
        return _projected_sum(output(block(*args[:n])), weights)

    return grad_check(f, inputs + block.parameters(), h, tol, max_checks, seed, name)


def run_gradcheck_suite(
    overrides: Dict | None = None,
    batch_size: int = 2,
    h: float = 1e-5,
    tol: float = 1e-4,
    max_checks: int | None = 6,
    seed: int = 0,
) -> List[GradCheckReport]:
    config = ModelConfig(**{**TOY_MODEL, 'seed': seed, **(overrides or {})})
    rng = onp.random.default_rng(seed)
    B, k, D, E = batch_size, config.patch_size, config.width, config.embed_dim
    N = config.num_tokens

    def tensor(*shape, name: str) -> Tensor:
        return Tensor(rng.standard_normal(shape), name=name)

    hsi = tensor(B, 1, config.num_pcs, k, k, name='x_hsi')
    lidar = tensor(B, config.lidar_channels, k, k, name='x_lidar')
    o1, o2 = tensor(B, D, k, k, name='o1'), tensor(B, D, k, k, name='o2')
    G = tensor(B, D, k, k, name='G')
    tokens = tensor(B, N + 1, E, name='tokens')
    labels = rng.integers(0, config.num_classes, size=B)

    kw = dict(rng=rng, h=h, tol=tol, max_checks=max_checks, seed=seed)
    reports = [
        _check_block(
            'hsi_branch',
            HsiBranch(config.num_pcs, D, rng, config.hsi_widths, config.spectral_padding),
            [hsi],
            **kw,
        ),
        _check_block('sar_branch', SarBranch(D, rng, hidden=config.sar_hidden), [lidar], **kw),
        _check_block(
            'graph_representation',
            GraphEncoder(D, N, rng),
            [o1, o2],
            output=lambda r: r.G,
            **kw,
        ),
        _check_block('patch_to_embedding', PatchEmbedding(D, E, N, rng), [G], **kw),
        _check_block('modulator_forward', ConvModulator(E, rng), [tokens], **kw),
        _check_block('mean_forward', MeanForward(E, rng, hidden=config.ff_hidden), [tokens], **kw),
        _check_block('classify_head', ClassifierHead(E, config.num_classes, rng), [tokens], **kw),
    ]

    logits = tensor(B, config.num_classes, name='logits')
    reports.append(
        grad_check(lambda z: cross_entropy(z, labels), logits, h, tol, None, seed, 'cross_entropy')
    )

    model = ThsgrModel(config)

    def end_to_end(x_hsi, x_lidar, *params):
        return cross_entropy(model(x_hsi, x_lidar), labels)

    reports.append(
        grad_check(end_to_end, [hsi, lidar] + model.parameters(), h, tol, max_checks, seed, 'end_to_end')
    )
    return reports
