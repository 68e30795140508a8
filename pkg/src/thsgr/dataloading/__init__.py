from .raster import read_raster, write_raster, read_labels, write_labels
from .synth import (
    SynthSceneSpec,
    SynthScene,
    generate_scene,
    nearest_prototype_oa,
    write_scene,
)
from .dataset import Scene, ModalSample, PatchDataset, prepare_scene, get_dataloader
