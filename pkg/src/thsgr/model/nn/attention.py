import math
import numpy as onp

from thsgr.autodiff import Tensor, as_tensor, ops, tagged
from thsgr.model.nn.base import Dense, Identity, Module
from thsgr.utils.errors import ParameterError


class MultiHeadSelfAttention(Module):
    """
    Scaled dot-product attention softmax(Q K^T / sqrt(d)) V per head, heads
    concatenated. `bias=False, out_projection=False` gives the bare form used
    for algebraic checks.
    """

    def __init__(
        self,
        dim: int,
        num_heads: int,
        rng: onp.random.Generator,
        bias: bool = True,
        out_projection: bool = True,
    ) -> None:
        super().__init__()
        if num_heads < 1 or dim % num_heads != 0:
            raise ParameterError(f'width {dim} is not divisible by {num_heads} heads')
        self.dim = dim
        self.num_heads = num_heads
        self.head_dim = dim // num_heads
        self.scale = 1.0 / math.sqrt(self.head_dim)
        self.use_bias = bias
        self.out_projection = out_projection
        self.query = Dense(dim, dim, rng, bias=bias)
        self.key = Dense(dim, dim, rng, bias=bias)
        self.value = Dense(dim, dim, rng, bias=bias)
        self.out = Dense(dim, dim, rng, bias=bias) if out_projection else Identity()

    def _split_heads(self, x: Tensor) -> Tensor:
        # ... x N x D -> ... x h x N x d
        lead, N = x.shape[:-2], x.shape[-2]
        x = ops.reshape(x, lead + (N, self.num_heads, self.head_dim))
        n = len(lead)
        return ops.transpose(x, tuple(range(n)) + (n + 1, n, n + 2))

    def _merge_heads(self, x: Tensor) -> Tensor:
        lead, N = x.shape[:-3], x.shape[-2]
        n = len(lead)
        x = ops.transpose(x, tuple(range(n)) + (n + 1, n, n + 2))
        return ops.reshape(x, lead + (N, self.dim))

    def forward(self, x: Tensor) -> Tensor:
        x = as_tensor(x)
        with tagged('msa'):
            q = self._split_heads(self.query(x))
            k = self._split_heads(self.key(x))
            v = self._split_heads(self.value(x))
            with tagged('attention'):
                scores = ops.mul(ops.matmul(q, ops.transpose(k, _swap_last(k.ndim))), self.scale)
                heads = ops.matmul(ops.softmax(scores, axis=-1), v)
            return self.out(self._merge_heads(heads))


def _swap_last(ndim: int):
    return tuple(range(ndim - 2)) + (ndim - 1, ndim - 2)


def msa_reference(X: Tensor, params: MultiHeadSelfAttention) -> Tensor:
    return params(X)
