import numpy as onp

from thsgr.autodiff import Tensor, as_tensor, ops
from thsgr.model.nn.base import Dense, Module
from thsgr.model.nn.graph_encoder import to_tokens
from thsgr.utils.errors import ConfigError


class PatchEmbedding(Module):
    """
    o3 = E_class || (E_i M_p) + E_pos: every spatial position of the graph map
    becomes a token, projected to the embedding width, with a learned class token
    in front and learned position embeddings on all N + 1 tokens.
    """

    def __init__(
        self,
        channels_in: int,
        dim: int,
        num_tokens: int,
        rng: onp.random.Generator,
        init_scale: float = 0.02,
    ) -> None:
        super().__init__()
        self.dim = dim
        self.num_tokens = num_tokens
        self.projection = Dense(channels_in, dim, rng, bias=False)
        self.add_param('class_embedding', init_scale * rng.standard_normal(dim))
        self.add_param('position_embedding', init_scale * rng.standard_normal((num_tokens + 1, dim)))

    def project(self, G: Tensor) -> Tensor:
        """
        B x C x k x k -> B x N x D without class token or positions.
        """
        G = as_tensor(G)
        if G.shape[2] * G.shape[3] != self.num_tokens:
            raise ConfigError(
                'patch_size',
                f'{G.shape[2]} x {G.shape[3]} map does not match {self.num_tokens} position embeddings',
            )
        return self.projection(to_tokens(G))

    def forward(self, G: Tensor) -> Tensor:
        tokens = self.project(G)
        B = tokens.shape[0]
        cls = ops.broadcast_to(ops.reshape(self.class_embedding, (1, 1, self.dim)), (B, 1, self.dim))
        return ops.add(ops.concat([cls, tokens], axis=1), self.position_embedding)


def patch_to_embedding(G: Tensor, params: PatchEmbedding) -> Tensor:
    return params(G)
