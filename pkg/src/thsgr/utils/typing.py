import numpy as onp
from types import SimpleNamespace

from typing import Dict, Tuple
from jaxtyping import Bool, Float, Int

### TYPING LEGEND: ###
# B: batch
# C: channels (C_H, C_L raw bands, C_p principal components)
# S: spectral extent inside the 3-D branch
# H, W: scene height and width
# K: patch size (k)
# N: tokens (k * k, +1 with the class token)
# D: embedding / graph width
# F: feedforward hidden width
# CLS: number of classes

Array = onp.ndarray

# General
FloatN = Float[Array, 'N']
BoolHxW = Bool[Array, 'H W']

# Scene related
FloatHxWxC = Float[Array, 'H W C']
IntHxW = Int[Array, 'H W']
FloatPxC = Float[Array, 'P C']  # pixels x bands
FloatCxC = Float[Array, 'C C']

# Patch related
FloatKxKxC = Float[Array, 'K K C']
FloatBxKxKxC = Float[Array, 'B K K C']
IntB = Int[Array, 'B']
IntBx2 = Int[Array, 'B 2']

# Model related
IntCLSxCLS = Int[Array, 'CLS CLS']

Shape = Tuple[int, ...]

__HIGH_PRECISION = 'float64'
__LOW_PRECISION = 'float32'

PRECISION = SimpleNamespace(
    autodiff=__HIGH_PRECISION,
    training=__HIGH_PRECISION,
    preprocess=__HIGH_PRECISION,
    raster=__LOW_PRECISION,
)

NnState = Dict[str, Array]
