"""
Scene-level transforms: per-band min-max normalization and PCA band reduction.
"""

import numpy as onp
from dataclasses import dataclass
from einops import rearrange
from scipy import linalg

from thsgr.utils.errors import DimensionError, ParameterError
from thsgr.utils.typing import PRECISION, FloatCxC, FloatHxWxC, FloatPxC, IntHxW

from typing import Tuple


@dataclass
class SceneCube:
    """
    H x W x C raster with optional H x W labels (0 = unlabeled, 1..C_cls classes).
    """

    data: FloatHxWxC
    labels: IntHxW | None = None

    def __post_init__(self) -> None:
        if self.data.ndim != 3:
            raise DimensionError('SceneCube', self.data.shape, detail='expected H x W x C')
        if self.labels is not None and self.labels.shape != self.data.shape[:2]:
            raise DimensionError('SceneCube', self.data.shape, self.labels.shape)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.data.shape  # type: ignore

    def pixels(self) -> FloatPxC:
        return rearrange(self.data, 'h w c -> (h w) c')


def normalize(cube: SceneCube) -> SceneCube:
    """
    Scales every band independently to [0, 1]. Constant bands map to 0.
    """
    if cube.data.size == 0:
        raise ParameterError('normalize: empty cube')
    data = cube.data.astype(PRECISION.preprocess)
    lo = data.min(axis=(0, 1), keepdims=True)
    span = data.max(axis=(0, 1), keepdims=True) - lo
    constant = span == 0
    out = (data - lo) / onp.where(constant, 1.0, span)
    out = onp.where(constant, 0.0, onp.clip(out, 0.0, 1.0))
    return SceneCube(out, cube.labels)


@dataclass
class PcaBasis:
    mean: onp.ndarray  # C
    components: onp.ndarray  # p x C, orthonormal rows
    explained_variance: onp.ndarray  # p
    total_variance: float

    @property
    def num_components(self) -> int:
        return self.components.shape[0]

    @property
    def explained_variance_ratio(self) -> onp.ndarray:
        if self.total_variance == 0:
            return onp.zeros_like(self.explained_variance)
        return self.explained_variance / self.total_variance

    def transform(self, pixels: FloatPxC) -> FloatPxC:
        return (pixels - self.mean) @ self.components.T

    def inverse_transform(self, projected: FloatPxC) -> FloatPxC:
        return projected @ self.components + self.mean


def covariance(pixels: FloatPxC) -> FloatCxC:
    centered = pixels - pixels.mean(axis=0)
    return centered.T @ centered / (pixels.shape[0] - 1)


def fit_pca(pixels: FloatPxC, p: int) -> PcaBasis:
    """
    Leading p eigenvectors of the band covariance, ordered by descending
    eigenvalue. Each component is signed so that its largest-magnitude
    coefficient is positive.
    """
    n, c = pixels.shape
    if not 1 <= p <= c:
        raise ParameterError(f'pca: number of components must be in [1, {c}], got {p}')
    if n < p + 1:
        raise ParameterError(f'pca: {p} components need at least {p + 1} pixels, got {n}')
    pixels = pixels.astype(PRECISION.preprocess)
    cov = covariance(pixels)
    eigval, eigvec = linalg.eigh(cov)
    order = onp.argsort(eigval)[::-1][:p]
    eigval = onp.clip(eigval[order], 0.0, None)
    components = eigvec[:, order].T
    pivot = onp.argmax(onp.abs(components), axis=1)
    signs = onp.sign(components[onp.arange(p), pivot])
    components = components * signs[:, None]
    return PcaBasis(pixels.mean(axis=0), components, eigval, float(onp.trace(cov)))


def pca_reduce(cube: SceneCube, p: int) -> SceneCube:
    """
    Projects every pixel of the cube onto its first p principal components.
    """
    basis = fit_pca(cube.pixels(), p)
    projected = basis.transform(cube.pixels().astype(PRECISION.preprocess))
    data = rearrange(projected, '(h w) c -> h w c', h=cube.height, w=cube.width)
    return SceneCube(data, cube.labels)
