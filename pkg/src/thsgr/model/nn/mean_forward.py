import numpy as onp

from thsgr.autodiff import Tensor, as_tensor, ops, tagged
from thsgr.model.nn.base import Dense, Module


class MeanForward(Module):
    """
    Feedforward f(gelu(f(x))) whose tokens are pulled halfway towards the
    per-sample token mean (class token included). With `average=False` only
    the feedforward remains.
    """

    def __init__(
        self,
        dim: int,
        rng: onp.random.Generator,
        hidden: int | None = None,
        average: bool = True,
    ) -> None:
        super().__init__()
        hidden = 4 * dim if hidden is None else hidden
        self.average = average
        self.fc1 = Dense(dim, hidden, rng)
        self.fc2 = Dense(hidden, dim, rng)

    def feedforward(self, x: Tensor) -> Tensor:
        return self.fc2(ops.gelu_erf(self.fc1(x)))

    def forward(self, x: Tensor) -> Tensor:
        with tagged('mean_forward'):
            o6 = self.feedforward(as_tensor(x))
            if not self.average:
                return o6
            return token_average(o6)


def token_average(o6: Tensor) -> Tensor:
    """
    o_i <- 0.5 (mean_j o_j + o_i) over the token axis (-2).
    """
    return ops.mul(ops.add(ops.mean(o6, axis=-2, keepdims=True), o6), 0.5)


def mean_forward(x: Tensor, params: MeanForward) -> Tensor:
    return params(x)
