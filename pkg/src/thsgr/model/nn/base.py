"""
Parameter containers and the pointwise layers the encoders are assembled from.
Parameters are leaf Tensors with requires_grad=True; non-learnable state (BN
running statistics) lives in buffers. Child modules are registered by
attribute assignment.
"""

import math
import numpy as onp

from thsgr.autodiff import Tensor, ops
from thsgr.utils.errors import DimensionError, ParameterError
from thsgr.utils.pad import same_padding
from thsgr.utils.typing import PRECISION, NnState

from typing import Iterator, List, Sequence, Tuple


def lecun_normal(
    rng: onp.random.Generator, shape: Sequence[int], fan_in: int
) -> onp.ndarray:
    return rng.standard_normal(shape) / math.sqrt(fan_in)


class Module:
    training: bool = True

    def __init__(self) -> None:
        object.__setattr__(self, '_params', {})
        object.__setattr__(self, '_buffers', {})
        object.__setattr__(self, '_children', {})

    def __setattr__(self, name: str, value) -> None:
        if isinstance(value, Module):
            self._children[name] = value
        object.__setattr__(self, name, value)

    def add_param(self, name: str, data: onp.ndarray) -> Tensor:
        tensor = Tensor(data, requires_grad=True, name=name)
        self._params[name] = tensor
        object.__setattr__(self, name, tensor)
        return tensor

    def add_buffer(self, name: str, data: onp.ndarray) -> onp.ndarray:
        data = onp.asarray(data, dtype=PRECISION.training)
        self._buffers[name] = data
        object.__setattr__(self, name, data)
        return data

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def named_parameters(self, prefix: str = '') -> Iterator[Tuple[str, Tensor]]:
        for name, p in self._params.items():
            yield prefix + name, p
        for name, child in self._children.items():
            yield from child.named_parameters(f'{prefix}{name}.')

    def named_buffers(self, prefix: str = '') -> Iterator[Tuple[str, onp.ndarray]]:
        for name, b in self._buffers.items():
            yield prefix + name, b
        for name, child in self._children.items():
            yield from child.named_buffers(f'{prefix}{name}.')

    def parameters(self) -> List[Tensor]:
        return [p for _, p in self.named_parameters()]

    def num_params(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def train(self, mode: bool = True) -> 'Module':
        object.__setattr__(self, 'training', mode)
        for child in self._children.values():
            child.train(mode)
        return self

    def eval(self) -> 'Module':
        return self.train(False)

    def state_dict(self) -> NnState:
        state = {f'param:{k}': p.data.copy() for k, p in self.named_parameters()}
        state.update({f'buffer:{k}': b.copy() for k, b in self.named_buffers()})
        return state

    def load_state_dict(self, state: NnState) -> None:
        params = dict(self.named_parameters())
        buffers = dict(self.named_buffers())
        expected = {f'param:{k}' for k in params} | {f'buffer:{k}' for k in buffers}
        missing = expected - set(state)
        if missing:
            raise ParameterError(f'state is missing entries: {sorted(missing)[:5]}')
        for k, p in params.items():
            value = state[f'param:{k}']
            if value.shape != p.shape:
                raise DimensionError(f'load {k}', p.shape, value.shape)
            p.data = onp.array(value, dtype=PRECISION.training)
        for k, b in buffers.items():
            value = state[f'buffer:{k}']
            if value.shape != b.shape:
                raise DimensionError(f'load {k}', b.shape, value.shape)
            b[...] = value  # in place, layers hold references


class Identity(Module):
    def forward(self, x: Tensor) -> Tensor:
        return x


class Dense(Module):
    """
    Affine map over the last axis: y = x W + b, W of shape in x out.
    """

    def __init__(
        self, features_in: int, features_out: int, rng: onp.random.Generator, bias: bool = True
    ) -> None:
        super().__init__()
        self.features_in = features_in
        self.features_out = features_out
        self.add_param('weight', lecun_normal(rng, (features_in, features_out), features_in))
        self.use_bias = bias
        if bias:
            self.add_param('bias', onp.zeros(features_out))

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.features_in:
            raise DimensionError('dense', x.shape, self.weight.shape)
        y = ops.matmul(x, self.weight)
        if self.use_bias:
            y = ops.add(y, self.bias)
        return y


class Conv(Module):
    """
    n-dimensional convolution, stride 1. padding='same' keeps every axis,
    an int or tuple pads explicitly (0 is 'valid').
    """

    def __init__(
        self,
        channels_in: int,
        channels_out: int,
        kernel_size: Sequence[int],
        rng: onp.random.Generator,
        padding: str | int | Sequence[int] = 'same',
        groups: int = 1,
        bias: bool = True,
    ) -> None:
        super().__init__()
        kernel_size = tuple(kernel_size)
        if channels_in % groups or channels_out % groups:
            raise ParameterError(
                f'conv: channels {channels_in} -> {channels_out} not divisible by groups={groups}'
            )
        if padding == 'same':
            if any(k % 2 == 0 for k in kernel_size):
                raise ParameterError(f'conv: same padding needs odd kernels, got {kernel_size}')
            padding = same_padding(kernel_size)
        elif padding == 'valid':
            padding = 0
        self.padding = padding
        self.groups = groups
        self.kernel_size = kernel_size
        fan_in = channels_in // groups * math.prod(kernel_size)
        shape = (channels_out, channels_in // groups, *kernel_size)
        self.add_param('weight', lecun_normal(rng, shape, fan_in))
        self.use_bias = bias
        if bias:
            self.add_param('bias', onp.zeros(channels_out))

    def forward(self, x: Tensor) -> Tensor:
        b = self.bias if self.use_bias else None
        op = f'conv{len(self.kernel_size)}d'
        return ops.conv_nd(
            x, self.weight, b, padding=self.padding, groups=self.groups, op=op
        )


class BatchNorm(Module):
    def __init__(self, features: int, eps: float = 1e-5, momentum: float = 0.1) -> None:
        super().__init__()
        self.eps = eps
        self.momentum = momentum
        self.add_param('gamma', onp.ones(features))
        self.add_param('beta', onp.zeros(features))
        self.add_buffer('running_mean', onp.zeros(features))
        self.add_buffer('running_var', onp.ones(features))

    def forward(self, x: Tensor) -> Tensor:
        return ops.batch_norm(
            x,
            self.gamma,
            self.beta,
            self.running_mean,
            self.running_var,
            eps=self.eps,
            momentum=self.momentum,
            training=self.training,
        )
