"""
Differentiable primitives. Every function takes Tensors (or array-likes, which
become constants), computes the forward value with numpy/scipy and hands a
vector-Jacobian product plus its FLOP count to `apply`.

FLOP convention (kept in sync with thsgr.analysis.flops):
    multiply-add = 2, elementwise op = 1 per output element,
    sigmoid = 4, softmax / log-softmax = 5, GELU = 10, batch norm = 8 per element,
    reductions = 1 per input element, layout ops = 0.
"""

import math
import numpy as onp
from numpy.lib.stride_tricks import sliding_window_view
from scipy import special

from thsgr.autodiff.tensor import Tensor, apply, as_tensor
from thsgr.utils.errors import DimensionError, ParameterError
from thsgr.utils.pad import conv_output_shape
from thsgr.utils.typing import Array, Shape

from typing import Sequence, Tuple

FLOPS_SIGMOID = 4
FLOPS_SOFTMAX = 5
FLOPS_GELU = 10
FLOPS_BATCH_NORM = 8

_SQRT_2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _unbroadcast(g: Array, shape: Shape) -> Array:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> Shape:
    try:
        return onp.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(op, a.shape, b.shape) from None


### elementwise ###


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    shape = _broadcast_shape('add', a, b)

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return apply('add', a.data + b.data, (a, b), vjp, math.prod(shape))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    shape = _broadcast_shape('sub', a, b)

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return apply('sub', a.data - b.data, (a, b), vjp, math.prod(shape))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    shape = _broadcast_shape('mul', a, b)

    def vjp(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return apply('mul', a.data * b.data, (a, b), vjp, math.prod(shape))


hadamard = mul


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    shape = _broadcast_shape('div', a, b)

    def vjp(g):
        return (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * a.data / b.data**2, b.shape),
        )

    return apply('div', a.data / b.data, (a, b), vjp, math.prod(shape))


### linear algebra ###


def matmul(a, b) -> Tensor:
    """
    Batched matrix product over the last two axes, batch axes broadcast.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError('matmul', a.shape, b.shape)
    try:
        batch = onp.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise DimensionError('matmul', a.shape, b.shape) from None
    n, k, m = a.shape[-2], a.shape[-1], b.shape[-1]

    def vjp(g):
        ga = g @ onp.swapaxes(b.data, -1, -2)
        gb = onp.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    flops = 2 * math.prod(batch) * n * k * m
    return apply('matmul', a.data @ b.data, (a, b), vjp, flops)


### reductions ###


def _norm_axes(axis, ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def sum(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    axes = _norm_axes(axis, x.ndim)
    out = x.data.sum(axis=axes, keepdims=keepdims)

    def vjp(g):
        if not keepdims:
            g = onp.expand_dims(g, axes)
        return (onp.broadcast_to(g, x.shape).copy(),)

    return apply('sum', onp.asarray(out), (x,), vjp, x.size)


def mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    axes = _norm_axes(axis, x.ndim)
    count = math.prod(x.shape[a] for a in axes)
    out = x.data.mean(axis=axes, keepdims=keepdims)

    def vjp(g):
        if not keepdims:
            g = onp.expand_dims(g, axes)
        return (onp.broadcast_to(g / count, x.shape).copy(),)

    return apply('mean', onp.asarray(out), (x,), vjp, x.size)


### layout ###


def reshape(x, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise DimensionError('reshape', x.shape, tuple(shape)) from None

    def vjp(g):
        return (g.reshape(x.shape),)

    return apply('reshape', out, (x,), vjp, 0)


def transpose(x, axes: Sequence[int] | None = None) -> Tensor:
    x = as_tensor(x)
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    axes = tuple(axes)
    inverse = tuple(onp.argsort(axes))

    def vjp(g):
        return (onp.transpose(g, inverse),)

    return apply('transpose', onp.transpose(x.data, axes), (x,), vjp, 0)


def broadcast_to(x, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    try:
        out = onp.broadcast_to(x.data, tuple(shape)).copy()
    except ValueError:
        raise DimensionError('broadcast_to', x.shape, tuple(shape)) from None

    def vjp(g):
        return (_unbroadcast(g, x.shape),)

    return apply('broadcast_to', out, (x,), vjp, 0)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    ndim = tensors[0].ndim
    axis = axis % ndim
    for t in tensors[1:]:
        if t.ndim != ndim or any(
            t.shape[i] != tensors[0].shape[i] for i in range(ndim) if i != axis
        ):
            raise DimensionError('concat', tensors[0].shape, t.shape)
    sizes = [t.shape[axis] for t in tensors]
    splits = onp.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(onp.split(g, splits, axis=axis))

    out = onp.concatenate([t.data for t in tensors], axis=axis)
    return apply('concat', out, tensors, vjp, 0)


def getitem(x, index) -> Tensor:
    x = as_tensor(x)
    out = onp.array(x.data[index])

    def vjp(g):
        full = onp.zeros_like(x.data)
        onp.add.at(full, index, g)
        return (full,)

    return apply('getitem', out, (x,), vjp, 0)


### activations ###


def leaky_relu(x, alpha: float = 100.0) -> Tensor:
    """
    y = x for x >= 0 and y = x / alpha otherwise, alpha in (1, inf).
    """
    if not alpha > 1:
        raise ParameterError(f'leaky_relu: alpha must be > 1, got {alpha}')
    x = as_tensor(x)
    positive = x.data >= 0
    slope = onp.where(positive, 1.0, 1.0 / alpha)

    def vjp(g):
        return (g * slope,)

    return apply('leaky_relu', x.data * slope, (x,), vjp, x.size)


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    y = special.expit(x.data)

    def vjp(g):
        return (g * y * (1.0 - y),)

    return apply('sigmoid', y, (x,), vjp, FLOPS_SIGMOID * x.size)


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    if not -x.ndim <= axis < x.ndim:
        raise ParameterError(f'softmax: axis {axis} out of range for shape {x.shape}')
    y = special.softmax(x.data, axis=axis)

    def vjp(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return apply('softmax', y, (x,), vjp, FLOPS_SOFTMAX * x.size)


def log_softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    y = special.log_softmax(x.data, axis=axis)

    def vjp(g):
        return (g - onp.exp(y) * g.sum(axis=axis, keepdims=True),)

    return apply('log_softmax', y, (x,), vjp, FLOPS_SOFTMAX * x.size)


def gelu_erf(x) -> Tensor:
    """
    Exact GELU: 0.5 x + 0.5 x erf(x / sqrt(2)).
    """
    x = as_tensor(x)
    cdf = 0.5 * (1.0 + special.erf(x.data / _SQRT_2))

    def vjp(g):
        pdf = _INV_SQRT_2PI * onp.exp(-0.5 * x.data**2)
        return (g * (cdf + x.data * pdf),)

    return apply('gelu', x.data * cdf, (x,), vjp, FLOPS_GELU * x.size)


### normalization ###


def batch_norm(
    x,
    gamma,
    beta,
    running_mean: Array | None = None,
    running_var: Array | None = None,
    eps: float = 1e-5,
    momentum: float = 0.1,
    training: bool = True,
) -> Tensor:
    """
    Normalizes every feature (axis 1) over the batch and all trailing axes.
    In training mode the batch statistics are used and the running statistics
    (updated in place) follow an exponential moving average, in evaluation mode
    the running statistics are used.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if x.ndim < 2 or gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise DimensionError('batch_norm', x.shape, gamma.shape, beta.shape)
    axes = (0,) + tuple(range(2, x.ndim))
    bshape = (1, x.shape[1]) + (1,) * (x.ndim - 2)
    if training:
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        if running_mean is not None and running_var is not None:
            running_mean *= 1.0 - momentum
            running_mean += momentum * mu
            running_var *= 1.0 - momentum
            running_var += momentum * var
    else:
        if running_mean is None or running_var is None:
            raise ParameterError('batch_norm: evaluation mode needs running statistics')
        mu, var = running_mean, running_var
    inv_std = 1.0 / onp.sqrt(var + eps)
    x_hat = (x.data - mu.reshape(bshape)) * inv_std.reshape(bshape)
    out = gamma.data.reshape(bshape) * x_hat + beta.data.reshape(bshape)
    count = x.size // x.shape[1]

    def vjp(g):
        g_gamma = (g * x_hat).sum(axis=axes)
        g_beta = g.sum(axis=axes)
        g_hat = g * gamma.data.reshape(bshape)
        if training:
            g_x = (
                inv_std.reshape(bshape)
                / count
                * (
                    count * g_hat
                    - g_hat.sum(axis=axes, keepdims=True)
                    - x_hat * (g_hat * x_hat).sum(axis=axes, keepdims=True)
                )
            )
        else:
            g_x = g_hat * inv_std.reshape(bshape)
        return g_x, g_gamma, g_beta

    return apply('batch_norm', out, (x, gamma, beta), vjp, FLOPS_BATCH_NORM * x.size)


### convolution ###

_OUT_AXES = 'xyz'
_KERNEL_AXES = 'uvw'


def _as_tuple(value: int | Sequence[int], n: int, name: str) -> Tuple[int, ...]:
    if isinstance(value, int):
        return (value,) * n
    value = tuple(value)
    if len(value) != n:
        raise ParameterError(f'{name} needs {n} entries, got {value}')
    return value


def conv_nd(
    x,
    w,
    b=None,
    stride: int | Sequence[int] = 1,
    padding: int | Sequence[int] = 0,
    groups: int = 1,
    op: str = 'conv',
    n_spatial: int | None = None,
) -> Tensor:
    """
    Cross-correlation over the trailing n spatial axes of x [B, C_in, *S] with a
    kernel w [C_out, C_in / groups, *K], zero padding, optional bias [C_out].
    Implemented as a strided window view contracted with einsum.
    """
    x, w = as_tensor(x), as_tensor(w)
    n = w.ndim - 2
    if n < 1 or x.ndim != n + 2 or (n_spatial is not None and n != n_spatial):
        raise DimensionError(op, x.shape, w.shape, detail=f'expected {n} spatial axes')
    B, C_in = x.shape[:2]
    C_out, C_in_g = w.shape[:2]
    G = groups
    if C_in != C_in_g * G or C_out % G != 0:
        raise DimensionError(op, x.shape, w.shape, detail=f'groups={G}')
    if b is not None:
        b = as_tensor(b)
        if b.shape != (C_out,):
            raise DimensionError(op, w.shape, b.shape, detail='bias')
    stride = _as_tuple(stride, n, 'stride')
    padding = _as_tuple(padding, n, 'padding')
    K = w.shape[2:]
    O = conv_output_shape(x.shape[2:], K, padding, stride)

    xp = onp.pad(x.data, [(0, 0), (0, 0)] + [(p, p) for p in padding])
    windows = sliding_window_view(xp, K, axis=tuple(range(2, 2 + n)))
    windows = windows[(slice(None), slice(None)) + tuple(slice(None, None, s) for s in stride)]
    windows = windows.reshape(B, G, C_in_g, *O, *K)
    w_g = w.data.reshape(G, C_out // G, C_in_g, *K)

    o, k = _OUT_AXES[:n], _KERNEL_AXES[:n]
    out = onp.einsum(f'bgc{o}{k},gqc{k}->bgq{o}', windows, w_g, optimize=True)
    out = out.reshape(B, C_out, *O)
    if b is not None:
        out = out + b.data.reshape((1, C_out) + (1,) * n)

    def vjp(g):
        g_g = g.reshape(B, G, C_out // G, *O)
        g_w = onp.einsum(f'bgq{o},bgc{o}{k}->gqc{k}', g_g, windows, optimize=True)
        g_xp = onp.zeros((B, G, C_in_g) + xp.shape[2:], dtype=g.dtype)
        for offset in onp.ndindex(*K):
            region = tuple(
                slice(offset[i], offset[i] + stride[i] * (O[i] - 1) + 1, stride[i])
                for i in range(n)
            )
            g_xp[(slice(None),) * 3 + region] += onp.einsum(
                f'bgq{o},gqc->bgc{o}', g_g, w_g[(Ellipsis,) + offset], optimize=True
            )
        g_xp = g_xp.reshape(xp.shape)
        crop = tuple(slice(p, p + s) for p, s in zip(padding, x.shape[2:]))
        g_x = g_xp[(slice(None), slice(None)) + crop]
        grads = [g_x, g_w.reshape(w.shape)]
        if b is not None:
            grads.append(g.sum(axis=(0,) + tuple(range(2, 2 + n))))
        return grads

    flops = 2 * B * C_out * C_in_g * math.prod(K) * math.prod(O)
    inputs = (x, w) if b is None else (x, w, b)
    if b is not None:
        flops += B * C_out * math.prod(O)
    return apply(op, out, inputs, vjp, flops)


def conv1d(x, w, b=None, stride=1, padding=0, groups: int = 1) -> Tensor:
    return conv_nd(x, w, b, stride, padding, groups, op='conv1d', n_spatial=1)


def conv2d(x, w, b=None, stride=1, padding=0, groups: int = 1) -> Tensor:
    return conv_nd(x, w, b, stride, padding, groups, op='conv2d', n_spatial=2)


def conv3d(x, w, b=None, stride=1, padding=0, groups: int = 1) -> Tensor:
    return conv_nd(x, w, b, stride, padding, groups, op='conv3d', n_spatial=3)
