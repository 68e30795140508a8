"""
Self-attention-free multi-convolutional modulator over the token axis:

    o4 = W2 * gelu(W1 x)            left branch, kernels 1 and 3
    o5 = W4 (o4 . (W3 x))           right branch kernel 1, stem kernel 1

Tokens are channels-D sequences of length N + 1 (class token included), the
kernel-3 conv uses same padding along that axis. W2 is depthwise unless
`depthwise=False`.
"""

import numpy as onp

from thsgr.autodiff import Tensor, as_tensor, ops, tagged
from thsgr.model.nn.base import Conv, Module
from thsgr.utils.errors import DimensionError


class ConvModulator(Module):
    def __init__(
        self,
        dim: int,
        rng: onp.random.Generator,
        kernel_size: int = 3,
        depthwise: bool = True,
    ) -> None:
        super().__init__()
        self.dim = dim
        self.kernel_size = kernel_size
        self.depthwise = depthwise
        self.w1 = Conv(dim, dim, (1,), rng)
        self.w2 = Conv(dim, dim, (kernel_size,), rng, groups=dim if depthwise else 1)
        self.w3 = Conv(dim, dim, (1,), rng)
        self.w4 = Conv(dim, dim, (1,), rng)

    def left_branch(self, x: Tensor) -> Tensor:
        return self.w2(ops.gelu_erf(self.w1(x)))

    def forward(self, o3: Tensor) -> Tensor:
        o3 = as_tensor(o3)
        if o3.shape[-1] != self.dim:
            raise DimensionError('modulator', o3.shape, detail=f'width {self.dim}')
        with tagged('modulator'):
            x = ops.transpose(o3, (0, 2, 1))  # B x D x N
            o4 = self.left_branch(x)
            o5 = self.w4(ops.hadamard(o4, self.w3(x)))
            return ops.transpose(o5, (0, 2, 1))


def modulator_forward(o3: Tensor, params: ConvModulator) -> Tensor:
    return params(o3)
