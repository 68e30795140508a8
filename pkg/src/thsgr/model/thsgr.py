"""
The full classifier: hetero-encoder stems, graph encoder, patch embedding,
token mixer, mean forward and the class-token head.

Ablation switches:
    graph_encoder=False  the stems are fused by addition, G = o1 + o2
    modulator=False      tokens are mixed by standard multi-head self-attention
    mean_forward=False   the feedforward is kept, the token averaging dropped
With all three off the model is the backbone of the ablation ladder.
"""

import numpy as onp
from dataclasses import dataclass, asdict, fields

from thsgr.autodiff import Tensor, as_tensor, ops, tagged
from thsgr.model.nn import (
    ClassifierHead,
    ConvModulator,
    GraphEncoder,
    GraphRepr,
    HsiBranch,
    MeanForward,
    Module,
    MultiHeadSelfAttention,
    PatchEmbedding,
    SarBranch,
)
from thsgr.model.nn.hetero_encoder import SpectralPadding, spectral_extent
from thsgr.utils.errors import ConfigError

from typing import Any, Dict, Tuple


@dataclass
class ModelConfig:
    num_pcs: int = 32
    lidar_channels: int = 1
    patch_size: int = 15
    num_classes: int = 7
    hsi_widths: Tuple[int, ...] = (8, 16, 32)
    sar_hidden: int = 32
    width: int = 64  # C1 = C2 = D_g
    embed_dim: int = 64
    ff_hidden: int | None = None  # 4 * embed_dim
    num_heads: int = 4
    modulator_kernel: int = 3
    modulator_depthwise: bool = True
    spectral_padding: SpectralPadding = 'valid'
    leaky_alpha: float = 100.0
    bn_momentum: float = 0.1
    graph_encoder: bool = True
    modulator: bool = True
    mean_forward: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        self.hsi_widths = tuple(self.hsi_widths)
        self.validate()

    def validate(self) -> None:
        positive = (
            'num_pcs',
            'lidar_channels',
            'patch_size',
            'num_classes',
            'sar_hidden',
            'width',
            'embed_dim',
            'num_heads',
            'modulator_kernel',
        )
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(name, f'must be positive, got {getattr(self, name)}')
        if self.patch_size < 3 or self.patch_size % 2 == 0:
            raise ConfigError('patch_size', f'must be odd and >= 3, got {self.patch_size}')
        if self.num_classes < 2:
            raise ConfigError('num_classes', f'need at least 2 classes, got {self.num_classes}')
        if self.modulator_kernel % 2 == 0:
            raise ConfigError('modulator_kernel', f'must be odd, got {self.modulator_kernel}')
        if any(w < 1 for w in self.hsi_widths):
            raise ConfigError('hsi_widths', f'must be positive, got {self.hsi_widths}')
        if self.ff_hidden is not None and self.ff_hidden < 1:
            raise ConfigError('ff_hidden', f'must be positive, got {self.ff_hidden}')
        if not self.leaky_alpha > 1:
            raise ConfigError('leaky_alpha', f'must be > 1, got {self.leaky_alpha}')
        if not 0 < self.bn_momentum <= 1:
            raise ConfigError('bn_momentum', f'must be in (0, 1], got {self.bn_momentum}')
        if not self.modulator and self.embed_dim % self.num_heads != 0:
            raise ConfigError(
                'num_heads', f'embed_dim {self.embed_dim} not divisible by {self.num_heads} heads'
            )
        if spectral_extent(self.num_pcs, self.spectral_padding) < 1:
            raise ConfigError(
                'num_pcs',
                f'{self.num_pcs} components are too few for spectral kernels 7/5/3 '
                "with spectral_padding='valid'",
            )

    @property
    def num_tokens(self) -> int:
        return self.patch_size**2

    @classmethod
    def from_dict(cls, config: Dict[str, Any]) -> 'ModelConfig':
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in config.items() if k in names})

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


class ThsgrModel(Module):
    def __init__(self, config: ModelConfig) -> None:
        super().__init__()
        self.config = config
        rng = onp.random.default_rng(config.seed)
        c = config
        self.hsi = HsiBranch(
            c.num_pcs,
            c.width,
            rng,
            widths=c.hsi_widths,
            spectral_padding=c.spectral_padding,
            alpha=c.leaky_alpha,
            bn_momentum=c.bn_momentum,
        )
        self.sar = SarBranch(
            c.width, rng, hidden=c.sar_hidden, alpha=c.leaky_alpha, bn_momentum=c.bn_momentum
        )
        if c.graph_encoder:
            self.graph = GraphEncoder(c.width, c.num_tokens, rng)
        self.embedding = PatchEmbedding(c.width, c.embed_dim, c.num_tokens, rng)
        if c.modulator:
            self.mixer = ConvModulator(
                c.embed_dim, rng, kernel_size=c.modulator_kernel, depthwise=c.modulator_depthwise
            )
        else:
            self.mixer = MultiHeadSelfAttention(c.embed_dim, c.num_heads, rng)
        self.mean_forward = MeanForward(
            c.embed_dim, rng, hidden=c.ff_hidden, average=c.mean_forward
        )
        self.head = ClassifierHead(c.embed_dim, c.num_classes, rng)

    def encode(self, hsi: Tensor, lidar: Tensor) -> Tuple[Tensor, Tensor]:
        with tagged('hsi_branch'):
            o1 = self.hsi(hsi)
        with tagged('sar_branch'):
            o2 = self.sar(lidar)
        return o1, o2

    def graph_map(self, o1: Tensor, o2: Tensor) -> Tuple[Tensor, GraphRepr | None]:
        if not self.config.graph_encoder:
            with tagged('fusion'):
                return ops.add(o1, o2), None
        with tagged('graph_encoder'):
            graph = self.graph(o1, o2)
        return graph.G, graph

    def forward(self, hsi: Tensor, lidar: Tensor) -> Tensor:
        """
        hsi: B x 1 x C_p x k x k, lidar: B x C_L x k x k -> logits B x C_cls
        """
        hsi, lidar = as_tensor(hsi), as_tensor(lidar)
        o1, o2 = self.encode(hsi, lidar)
        G, _ = self.graph_map(o1, o2)
        with tagged('embedding'):
            o3 = self.embedding(G)
        o5 = self.mixer(o3)
        o6 = self.mean_forward(o5)
        return self.head(o6)

    def predict(self, hsi: onp.ndarray, lidar: onp.ndarray) -> onp.ndarray:
        return onp.argmax(self.forward(hsi, lidar).data, axis=-1)

    def blocks(self) -> Dict[str, Module]:
        return dict(self._children)
