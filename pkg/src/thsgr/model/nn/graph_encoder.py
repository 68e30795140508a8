"""
Multimodal heterogeneous graph encoder.

Every spatial position of the k x k patch is a node (N = k^2), D is the shared
width of the two stems. With tokens laid out as N x D:

    V   = tokens(o1)                              N x D
    Q   = tokens(conv1x1_q(o1))                   N x D
    K   = o2 as D x N
    T   = tokens(conv1x1_f(o2) * sigmoid(conv1x1_m(o2)))   N x D
    A   = softmax_rows(Q K)                       N x N
    M_r = sigmoid(K T)                            D x D
    W   = conv1d_k1(A V)  (N channels -> D)       D x D
    G   = (A V) W M_r                             N x D -> D x k x k

A follows token permutations as P A P^T while M_r is invariant to them.
"""

import numpy as onp
from dataclasses import dataclass

from thsgr.autodiff import Tensor, as_tensor, ops
from thsgr.model.nn.base import Conv, Module
from thsgr.utils.errors import ConfigError, DimensionError


@dataclass
class GraphRepr:
    G: Tensor  # B x D x k x k
    A: Tensor  # B x N x N
    M_r: Tensor  # B x D x D
    W: Tensor  # B x D x D
    T: Tensor  # B x N x D


def to_tokens(x: Tensor) -> Tensor:
    """
    B x D x k x k -> B x N x D
    """
    B, D, H, W = x.shape
    return ops.transpose(ops.reshape(x, (B, D, H * W)), (0, 2, 1))


def from_tokens(x: Tensor, height: int, width: int) -> Tensor:
    B, N, D = x.shape
    return ops.reshape(ops.transpose(x, (0, 2, 1)), (B, D, height, width))


def relationship_matrix(K: Tensor, T: Tensor) -> Tensor:
    if K.shape[-1] != T.shape[-2]:
        raise DimensionError('relationship_matrix', K.shape, T.shape)
    return ops.sigmoid(ops.matmul(K, T))


def attention_map(Q: Tensor, K: Tensor) -> Tensor:
    if Q.shape[-1] != K.shape[-2]:
        raise DimensionError('attention_map', Q.shape, K.shape)
    return ops.softmax(ops.matmul(Q, K), axis=-1)


class GraphEncoder(Module):
    def __init__(self, width: int, num_tokens: int, rng: onp.random.Generator) -> None:
        super().__init__()
        self.width = width
        self.num_tokens = num_tokens
        self.mask_conv = Conv(width, width, (1, 1), rng)
        self.feature_conv = Conv(width, width, (1, 1), rng)
        self.query_conv = Conv(width, width, (1, 1), rng)
        self.weight_conv = Conv(num_tokens, width, (1,), rng)

    def make_mask(self, x: Tensor) -> Tensor:
        return ops.sigmoid(self.mask_conv(x))

    def masked_features(self, x: Tensor) -> Tensor:
        """
        Gated 1x1 features of x as B x N x D tokens.
        """
        return to_tokens(ops.hadamard(self.feature_conv(x), self.make_mask(x)))

    def dynamic_weight(self, A: Tensor, V: Tensor) -> Tensor:
        """
        Kernel-1 conv over A V read as N channels of length D.
        """
        return self.weight_conv(ops.matmul(A, V))

    def _check(self, o1: Tensor, o2: Tensor) -> None:
        for name, o in (('o1', o1), ('o2', o2)):
            if o.ndim != 4:
                raise DimensionError('graph_encoder', o.shape, detail=f'{name} must be B x D x k x k')
            if o.shape[1] != self.width:
                raise ConfigError(
                    'graph_width', f'{name} has {o.shape[1]} channels, encoder width is {self.width}'
                )
        if o1.shape != o2.shape:
            raise DimensionError('graph_encoder', o1.shape, o2.shape)
        if o1.shape[2] * o1.shape[3] != self.num_tokens:
            raise ConfigError(
                'patch_size',
                f'{o1.shape[2]} x {o1.shape[3]} patch does not give {self.num_tokens} tokens',
            )

    def forward(self, o1: Tensor, o2: Tensor) -> GraphRepr:
        o1, o2 = as_tensor(o1), as_tensor(o2)
        self._check(o1, o2)
        B, D, H, W = o1.shape
        V = to_tokens(o1)
        Q = to_tokens(self.query_conv(o1))
        K = ops.reshape(o2, (B, D, H * W))
        T = self.masked_features(o2)
        A = attention_map(Q, K)
        M_r = relationship_matrix(K, T)
        AV = ops.matmul(A, V)
        W_dyn = self.weight_conv(AV)
        G = ops.matmul(ops.matmul(AV, W_dyn), M_r)
        return GraphRepr(from_tokens(G, H, W), A, M_r, W_dyn, T)


def graph_representation(o1: Tensor, o2: Tensor, params: GraphEncoder) -> GraphRepr:
    return params(o1, o2)
