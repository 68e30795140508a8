import numpy as onp
from dataclasses import dataclass, field, fields

from thsgr.autodiff import Tensor
from thsgr.utils.errors import ConfigError

from typing import Any, Dict, Iterable, Tuple


@dataclass
class OptConfig:
    learning_rate: float = 0.01
    weight_decay: float = 0.001
    b1: float = 0.9
    b2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self) -> None:
        if not self.learning_rate > 0:
            raise ConfigError('lr', f'must be positive, got {self.learning_rate}')
        if self.weight_decay < 0:
            raise ConfigError('weight_decay', f'must be non-negative, got {self.weight_decay}')
        for name in ('b1', 'b2'):
            if not 0 <= getattr(self, name) < 1:
                raise ConfigError(name, f'must be in [0, 1), got {getattr(self, name)}')

    @staticmethod
    def from_dict(config: Dict[str, Any]) -> 'OptConfig':
        names = {f.name for f in fields(OptConfig)}
        return OptConfig(**{k: v for k, v in config.items() if k in names})


@dataclass
class AdamState:
    m: Dict[str, onp.ndarray] = field(default_factory=dict)
    v: Dict[str, onp.ndarray] = field(default_factory=dict)
    t: int = 0


def init_adam(params: Iterable[Tuple[str, Tensor]]) -> AdamState:
    state = AdamState()
    for name, p in params:
        state.m[name] = onp.zeros_like(p.data)
        state.v[name] = onp.zeros_like(p.data)
    return state


def adam_step(
    params: Iterable[Tuple[str, Tensor]],
    state: AdamState,
    config: OptConfig,
) -> AdamState:
    """
    Bias-corrected Adam with decoupled weight decay, applied in place to the
    parameters from their `.grad` (missing gradients count as zero):

        p <- p - lr (m_hat / (sqrt(v_hat) + eps) + wd p)
    """
    state.t += 1
    t = state.t
    c1 = 1.0 - config.b1**t
    c2 = 1.0 - config.b2**t
    for name, p in params:
        g = p.grad if p.grad is not None else onp.zeros_like(p.data)
        m = state.m[name] = config.b1 * state.m[name] + (1.0 - config.b1) * g
        v = state.v[name] = config.b2 * state.v[name] + (1.0 - config.b2) * g * g
        update = (m / c1) / (onp.sqrt(v / c2) + config.eps) + config.weight_decay * p.data
        p.data = p.data - config.learning_rate * update
    return state
