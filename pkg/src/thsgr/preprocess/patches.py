import numpy as onp

from thsgr.autodiff import Tensor, ops
from thsgr.utils.errors import DataError, ParameterError
from thsgr.utils.pad import reflect_pad
from thsgr.utils.typing import FloatBxKxKxC, FloatHxWxC, FloatKxKxC, IntBx2

from typing import overload


def check_patch_size(k: int) -> None:
    if k < 1 or k % 2 == 0:
        raise ParameterError(f'patch size must be a positive odd integer, got {k}')


def extract_patch(cube: FloatHxWxC, row: int, col: int, k: int) -> FloatKxKxC:
    """
    k x k x C neighbourhood centred at (row, col). Pixels outside the scene are
    mirrored without repeating the edge.
    """
    check_patch_size(k)
    H, W = cube.shape[:2]
    if not (0 <= row < H and 0 <= col < W):
        raise DataError(f'pixel ({row}, {col}) lies outside a {H} x {W} scene')
    r = k // 2
    padded = reflect_pad(cube, r)
    return padded[row : row + k, col : col + k].copy()


class PatchExtractor:
    """
    Pads a scene once and cuts patches for many locations.
    """

    def __init__(self, cube: FloatHxWxC, k: int) -> None:
        check_patch_size(k)
        self.k = k
        self.shape = cube.shape
        self.padded = reflect_pad(cube, k // 2)

    def __call__(self, row: int, col: int) -> FloatKxKxC:
        return self.padded[row : row + self.k, col : col + self.k]

    def batch(self, locations: IntBx2) -> FloatBxKxKxC:
        return onp.stack([self(int(r), int(c)) for r, c in locations])


@overload
def lidar_preprocess(x: Tensor, axis: int = -1) -> Tensor: ...
@overload
def lidar_preprocess(x: onp.ndarray, axis: int = -1) -> onp.ndarray: ...


def lidar_preprocess(x, axis: int = -1):
    """
    Channel mean of a multi-channel SAR/LiDAR patch, identity for a single
    channel. The channel axis is kept with extent 1.
    """
    if x.shape[axis] == 1:
        return x
    if isinstance(x, Tensor):
        return ops.mean(x, axis=axis, keepdims=True)
    return x.mean(axis=axis, keepdims=True)
