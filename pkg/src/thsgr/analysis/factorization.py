"""
Numerical checks of two algebraic rewrites:

- attention scores Q K^T = X (W_Q W_K^T) X^T, per head, which holds exactly;
- folding the stem of the modulator into its kernel-3 conv,
  W4 ((W2 a) . b) = (W4 W2 a) . b, which holds only when W4 commutes with the
  Hadamard product, i.e. when W4 is scalar or diagonal (or D = 1).
"""

import numpy as onp
from dataclasses import dataclass
from scipy import special

from thsgr.autodiff import Tensor, as_tensor, ops
from thsgr.model.nn import ConvModulator, MultiHeadSelfAttention, msa_reference
from thsgr.utils.errors import DimensionError, ParameterError

from typing import Literal

Regime = Literal['exact', 'scalar', 'diagonal', 'dense']


@dataclass
class FactorizationReport:
    name: str
    regime: Regime
    max_abs_diff: float
    tol: float

    @property
    def exact_expected(self) -> bool:
        return self.regime != 'dense'

    @property
    def holds(self) -> bool:
        return self.max_abs_diff <= self.tol

    @property
    def passed(self) -> bool:
        """
        False only if an identity that should hold exactly is violated.
        """
        return self.holds or not self.exact_expected

    @property
    def note(self) -> str:
        if self.exact_expected:
            return 'identity exact'
        return 'identity not exact in dense case'

    def __bool__(self) -> bool:
        return self.passed


def _tokens(X) -> onp.ndarray:
    X = as_tensor(X).data
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3:
        raise DimensionError('factorization', X.shape, detail='expected N x D or B x N x D')
    return X


def factorized_attention(X: onp.ndarray, params: MultiHeadSelfAttention) -> onp.ndarray:
    """
    softmax(X W_h X^T / sqrt(d)) X W_V per head with W_h = W_Q,h W_K,h^T.
    """
    h, d = params.num_heads, params.head_dim
    Wq, Wk, Wv = params.query.weight.data, params.key.weight.data, params.value.weight.data
    heads = []
    for i in range(h):
        cols = slice(i * d, (i + 1) * d)
        W = Wq[:, cols] @ Wk[:, cols].T
        scores = X @ W @ onp.swapaxes(X, -1, -2) * params.scale
        heads.append(special.softmax(scores, axis=-1) @ (X @ Wv[:, cols]))
    return onp.concatenate(heads, axis=-1)


def verify_msa_factorization(
    X, params: MultiHeadSelfAttention, tol: float = 1e-12
) -> FactorizationReport:
    if params.use_bias or params.out_projection:
        raise ParameterError('the factorized form is defined for the bare block (no biases, no W_O)')
    X = _tokens(X)
    standard = msa_reference(Tensor(X), params).data
    diff = float(onp.abs(standard - factorized_attention(X, params)).max())
    return FactorizationReport('msa', 'exact', diff, tol)


def stem_regime(W4: onp.ndarray, atol: float = 0.0) -> Regime:
    D = W4.shape[0]
    off_diagonal = W4 - onp.diag(onp.diag(W4))
    if onp.abs(off_diagonal).max(initial=0.0) > atol:
        return 'dense'
    if D == 1 or onp.allclose(onp.diag(W4), W4[0, 0], rtol=0.0, atol=atol):
        return 'scalar'
    return 'diagonal'


def _dense_kernel(params: ConvModulator) -> onp.ndarray:
    """
    W2 as a dense D x D x K kernel.
    """
    w2 = params.w2.weight.data
    if not params.depthwise:
        return w2
    D, _, K = w2.shape
    dense = onp.zeros((D, D, K))
    dense[onp.arange(D), onp.arange(D)] = w2[:, 0]
    return dense


def verify_modulator_factorization(
    X, params: ConvModulator, tol: float = 1e-12
) -> FactorizationReport:
    """
    Compares W4((W2 gelu(W1 x)) . (W3 x)) with (W' gelu(W1 x)) . (W3 x),
    W' = W4 W2, all biases omitted. The residual is reported in every regime.
    """
    x = onp.swapaxes(_tokens(X), 1, 2)  # B x D x N
    pad = params.kernel_size // 2
    W1, W3, W4 = (params.w1.weight.data, params.w3.weight.data, params.w4.weight.data)
    W2 = _dense_kernel(params)
    W_prime = onp.einsum('oc,cik->oik', W4[:, :, 0], W2)

    a = ops.gelu_erf(ops.conv1d(x, W1)).data
    b = ops.conv1d(x, W3).data
    lhs = ops.conv1d(ops.conv1d(a, W2, padding=pad).data * b, W4).data
    rhs = ops.conv1d(a, W_prime, padding=pad).data * b
    diff = float(onp.abs(lhs - rhs).max())
    return FactorizationReport('modulator', stem_regime(W4[:, :, 0]), diff, tol)
