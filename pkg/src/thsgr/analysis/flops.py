"""
FLOP and parameter accounting.

Convention, shared with the counters in thsgr.autodiff.ops:
    multiply-add                        2
    add / mul / div / scale / bias      1 per output element
    LeakyReLU                           1 per element
    sigmoid                             4 per element
    softmax, log-softmax                5 per element
    GELU (erf)                          10 per element
    batch norm                          8 per element
    sum / mean                          1 per input element
    reshape / transpose / concat / index / pad  0
"""

import numpy as onp
from dataclasses import dataclass

from thsgr.autodiff import Tape, Tensor, ops
from thsgr.model.nn import ConvModulator, Module, MultiHeadSelfAttention

from typing import Callable, Dict

FLOPS_MULTIPLY_ADD = 2
FLOPS_ELEMENTWISE = 1
FLOPS_SIGMOID = ops.FLOPS_SIGMOID
FLOPS_SOFTMAX = ops.FLOPS_SOFTMAX
FLOPS_GELU = ops.FLOPS_GELU
FLOPS_BATCH_NORM = ops.FLOPS_BATCH_NORM


def count_flops_msa(N: int, D: int, h: int, bias: bool = True, out_projection: bool = True) -> int:
    """
    Q, K, V projections 6ND^2 (+3ND bias), scores and A V 4N^2 D, scaling hN^2,
    softmax 5hN^2, output projection 2ND^2 (+ND bias).
    """
    projections = 3 * FLOPS_MULTIPLY_ADD * N * D * D
    attention = 2 * FLOPS_MULTIPLY_ADD * N * N * D + (1 + FLOPS_SOFTMAX) * h * N * N
    total = projections + attention
    if bias:
        total += 3 * N * D
    if out_projection:
        total += FLOPS_MULTIPLY_ADD * N * D * D + (N * D if bias else 0)
    return total


def count_flops_msa_attention(N: int, D: int, h: int) -> int:
    """
    The N^2 part of the block: scores, scaling, softmax and A V.
    """
    return 2 * FLOPS_MULTIPLY_ADD * N * N * D + (1 + FLOPS_SOFTMAX) * h * N * N


def count_flops_modulator(N: int, D: int, W_kernel: int, depthwise: bool = True) -> int:
    """
    Three dense kernel-1 convs 6ND^2, the kernel-W conv 2NWD (depthwise) or
    2NWD^2 (dense), and 15ND for four biases, GELU and the Hadamard product.
    """
    pointwise = 3 * FLOPS_MULTIPLY_ADD * N * D * D
    spatial = FLOPS_MULTIPLY_ADD * N * W_kernel * D * (1 if depthwise else D)
    rest = (4 + FLOPS_GELU + 1) * N * D
    return pointwise + spatial + rest


def params_msa(D: int, bias: bool = True, out_projection: bool = True) -> int:
    n = 3 * D * D + (3 * D if bias else 0)
    if out_projection:
        n += D * D + (D if bias else 0)
    return n


def params_modulator(D: int, W_kernel: int, depthwise: bool = True) -> int:
    spatial = W_kernel * D * (1 if depthwise else D) + D
    return 3 * (D * D + D) + spatial


def count_params(block: Module) -> int:
    return sum(p.size for _, p in block.named_parameters())


@dataclass
class FlopsMeasurement:
    total: int
    by_tag: Dict[str | None, int]
    by_op: Dict[str | None, int]


def measure_flops(fn: Callable[..., Tensor], *inputs) -> FlopsMeasurement:
    """
    Runs fn once on a counting tape that records constant computations too.
    """
    with Tape(record_all=True) as tape:
        fn(*inputs)
    return FlopsMeasurement(tape.flops, tape.flops_by('tag'), tape.flops_by('op'))


def measure_block(block: Module, N: int, D: int, seed: int = 0) -> FlopsMeasurement:
    x = Tensor(onp.random.default_rng(seed).standard_normal((1, N, D)), name='tokens')
    return measure_flops(block, x)


def closed_form_flops(block: Module, N: int) -> int:
    if isinstance(block, MultiHeadSelfAttention):
        return count_flops_msa(
            N,
            block.dim,
            block.num_heads,
            bias=block.use_bias,
            out_projection=block.out_projection,
        )
    if isinstance(block, ConvModulator):
        return count_flops_modulator(N, block.dim, block.kernel_size, block.depthwise)
    raise TypeError(f'no closed form for {type(block).__name__}')
