import numpy as onp

from thsgr.utils.errors import ParameterError, DimensionError
from typing import Sequence, Tuple


def same_padding(kernel_size: Sequence[int]) -> Tuple[int, ...]:
    """
    Padding that preserves the spatial extent of a stride-1 convolution with an
    odd kernel.
    """
    return tuple(k // 2 for k in kernel_size)


def conv_output_size(size: int, kernel: int, pad: int, stride: int = 1) -> int:
    return (size + 2 * pad - kernel) // stride + 1


def conv_output_shape(
    spatial: Sequence[int],
    kernel: Sequence[int],
    padding: Sequence[int],
    stride: Sequence[int],
) -> Tuple[int, ...]:
    out = []
    for s, k, p, st in zip(spatial, kernel, padding, stride):
        if k > s + 2 * p:
            raise DimensionError(
                'conv', tuple(spatial), tuple(kernel), detail='kernel exceeds padded input'
            )
        out.append(conv_output_size(s, k, p, st))
    return tuple(out)


def reflect_pad(cube: onp.ndarray, margin: int) -> onp.ndarray:
    """
    Mirror padding of the two leading (spatial) axes, the edge pixel is not repeated:
    padded[-1] == cube[1].
    """
    if margin == 0:
        return cube
    if margin >= min(cube.shape[0], cube.shape[1]):
        raise ParameterError(
            f'reflect padding of {margin} needs a scene larger than {cube.shape[:2]}'
        )
    pad_width = [(margin, margin), (margin, margin)] + [(0, 0)] * (cube.ndim - 2)
    return onp.pad(cube, pad_width, mode='reflect')
