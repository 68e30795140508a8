from .base import Module, Dense, Conv, BatchNorm, Identity, lecun_normal
from .hetero_encoder import HsiBranch, SarBranch, hsi_branch, sar_branch
from .graph_encoder import (
    GraphEncoder,
    GraphRepr,
    graph_representation,
    attention_map,
    relationship_matrix,
)
from .embedding import PatchEmbedding, patch_to_embedding
from .modulator import ConvModulator, modulator_forward
from .attention import MultiHeadSelfAttention, msa_reference
from .mean_forward import MeanForward, mean_forward, token_average
from .head import ClassifierHead, classify_head
