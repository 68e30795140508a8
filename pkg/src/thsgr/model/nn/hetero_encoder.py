"""
Modality-specific stems. The HSI branch stacks three 3-D convolutions with
spectral depths 7, 5 and 3 (each conv -> LeakyReLU -> BN), folds the remaining
spectral axis into channels and finishes with a 3x3 conv + LeakyReLU. The
SAR/LiDAR branch averages channels and applies two 3x3 conv -> LeakyReLU -> BN
blocks. Spatial extent is preserved everywhere.
"""

import numpy as onp

from thsgr.autodiff import Tensor, as_tensor, ops
from thsgr.model.nn.base import BatchNorm, Conv, Module
from thsgr.preprocess.patches import lidar_preprocess
from thsgr.utils.errors import ConfigError, DimensionError

from typing import Literal, Sequence

SpectralPadding = Literal['valid', 'same']

SPECTRAL_KERNELS = (7, 5, 3)


def spectral_extent(num_pcs: int, padding: SpectralPadding) -> int:
    if padding == 'same':
        return num_pcs
    if padding == 'valid':
        return num_pcs - sum(k - 1 for k in SPECTRAL_KERNELS)
    raise ConfigError('spectral_padding', f'unknown mode {padding!r}')


class ConvBlock(Module):
    """
    conv -> LeakyReLU -> BN, the order of the original formulation.
    """

    def __init__(
        self,
        channels_in: int,
        channels_out: int,
        kernel_size: Sequence[int],
        rng: onp.random.Generator,
        padding,
        alpha: float,
        bn_momentum: float = 0.1,
    ) -> None:
        super().__init__()
        self.alpha = alpha
        self.conv = Conv(channels_in, channels_out, kernel_size, rng, padding=padding)
        self.bn = BatchNorm(channels_out, momentum=bn_momentum)

    def forward(self, x: Tensor) -> Tensor:
        return self.bn(ops.leaky_relu(self.conv(x), self.alpha))


class HsiBranch(Module):
    def __init__(
        self,
        num_pcs: int,
        channels_out: int,
        rng: onp.random.Generator,
        widths: Sequence[int] = (8, 16, 32),
        spectral_padding: SpectralPadding = 'valid',
        alpha: float = 100.0,
        bn_momentum: float = 0.1,
    ) -> None:
        super().__init__()
        if len(widths) != len(SPECTRAL_KERNELS):
            raise ConfigError('hsi_widths', f'need {len(SPECTRAL_KERNELS)} widths, got {widths}')
        self.num_pcs = num_pcs
        self.spectral = spectral_extent(num_pcs, spectral_padding)
        if self.spectral < 1:
            raise ConfigError(
                'num_pcs',
                f'{num_pcs} components are too few for spectral kernels {SPECTRAL_KERNELS} '
                f'without spectral padding (need at least {num_pcs - self.spectral + 1})',
            )
        self.alpha = alpha
        channels = 1
        for i, (k, w) in enumerate(zip(SPECTRAL_KERNELS, widths)):
            pad = (k // 2 if spectral_padding == 'same' else 0, 1, 1)
            block = ConvBlock(channels, w, (k, 3, 3), rng, pad, alpha, bn_momentum)
            setattr(self, f'f{i + 1}', block)
            channels = w
        self.folded_channels = channels * self.spectral
        self.conv2d = Conv(self.folded_channels, channels_out, (3, 3), rng)

    def forward(self, x: Tensor) -> Tensor:
        x = as_tensor(x)
        if x.ndim != 5 or x.shape[1] != 1 or x.shape[2] != self.num_pcs:
            raise DimensionError(
                'hsi_branch', x.shape, detail=f'expected B x 1 x {self.num_pcs} x k x k'
            )
        f = self.f3(self.f2(self.f1(x)))
        B, _, _, H, W = f.shape
        folded = ops.reshape(f, (B, self.folded_channels, H, W))
        return ops.leaky_relu(self.conv2d(folded), self.alpha)


class SarBranch(Module):
    def __init__(
        self,
        channels_out: int,
        rng: onp.random.Generator,
        hidden: int = 32,
        alpha: float = 100.0,
        bn_momentum: float = 0.1,
    ) -> None:
        super().__init__()
        self.g1 = ConvBlock(1, hidden, (3, 3), rng, 'same', alpha, bn_momentum)
        self.g2 = ConvBlock(hidden, channels_out, (3, 3), rng, 'same', alpha, bn_momentum)

    def forward(self, x: Tensor) -> Tensor:
        x = as_tensor(x)
        if x.ndim != 4:
            raise DimensionError('sar_branch', x.shape, detail='expected B x C_L x k x k')
        return self.g2(self.g1(lidar_preprocess(x, axis=1)))


def hsi_branch(x: Tensor, params: HsiBranch) -> Tensor:
    return params(x)


def sar_branch(x: Tensor, params: SarBranch) -> Tensor:
    return params(x)
