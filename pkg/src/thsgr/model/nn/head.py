import numpy as onp

from thsgr.autodiff import Tensor, as_tensor, ops, tagged
from thsgr.model.nn.base import Dense, Module


class ClassifierHead(Module):
    def __init__(self, dim: int, num_classes: int, rng: onp.random.Generator) -> None:
        super().__init__()
        self.num_classes = num_classes
        self.linear = Dense(dim, num_classes, rng)

    def forward(self, tokens: Tensor) -> Tensor:
        with tagged('head'):
            return self.linear(ops.getitem(as_tensor(tokens), (slice(None), 0)))


def classify_head(tokens: Tensor, params: ClassifierHead) -> Tensor:
    return params(tokens)
