import numpy as onp

from thsgr.autodiff import Tensor
from thsgr.dataloading.synth import SynthSceneSpec, generate_scene
from thsgr.dataloading.dataset import Scene, prepare_scene
from .errors import relative_error, is_close, assert_is_close


def set_jax_testing_config():
    """
    jax is only used as an independent oracle; match the float64 arithmetic
    of the tape.
    """
    from jax import config

    config.update('jax_enable_x64', True)
    config.update('jax_platform_name', 'cpu')


def random_tensor(rng: onp.random.RandomState, *shape: int, requires_grad=False, name=None):
    return Tensor(rng.normal(size=shape), requires_grad=requires_grad, name=name)


def toy_scene(seed: int = 0, num_pcs: int = 8, **overrides) -> Scene:
    """
    Small prepared synthetic scene, 32 x 32 pixels and 3 classes by default.
    """
    spec = SynthSceneSpec(seed=seed, **overrides)
    synth = generate_scene(spec)
    return prepare_scene(Scene(synth.hsi, synth.lidar, synth.labels), num_pcs)
