"""
Seeded synthetic multimodal scenes: Voronoi land-cover regions, one spectral
prototype and one elevation level per class, Gaussian noise on both modalities.
"""

import os
import numpy as onp
from dataclasses import dataclass, asdict
from einops import rearrange
from scipy.spatial import cKDTree

from thsgr.dataloading.raster import write_labels, write_raster
from thsgr.utils.errors import ConfigError
from thsgr.utils.typing import PRECISION, FloatHxWxC, IntHxW

from typing import Dict

HSI_FILE = 'hsi.thsg'
LIDAR_FILE = 'lidar.thsg'
LABELS_FILE = 'labels.thsg'


@dataclass
class SynthSceneSpec:
    height: int = 32
    width: int = 32
    num_classes: int = 3
    hsi_bands: int = 16
    lidar_channels: int = 1
    spectral_noise: float = 0.02
    elevation_noise: float = 0.02
    num_regions: int = 12
    # classes 2j and 2j+1 share one spectral prototype and differ only in elevation
    spectral_collision: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ('height', 'width', 'num_classes', 'hsi_bands', 'lidar_channels'):
            if getattr(self, name) < 1:
                raise ConfigError(name, f'must be positive, got {getattr(self, name)}')
        if self.num_regions < self.num_classes:
            raise ConfigError(
                'num_regions',
                f'{self.num_regions} regions cannot host {self.num_classes} classes',
            )
        if self.spectral_noise < 0 or self.elevation_noise < 0:
            raise ConfigError('noise', 'noise levels must be non-negative')
        if self.spectral_collision and self.num_classes % 2 != 0:
            raise ConfigError('num_classes', 'spectral collisions pair classes, use an even count')

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class SynthScene:
    hsi: FloatHxWxC
    lidar: FloatHxWxC
    labels: IntHxW  # 1-indexed, 0 = unlabeled
    spectral_prototypes: onp.ndarray  # num_classes x C_H
    elevation_prototypes: onp.ndarray  # num_classes x C_L


def voronoi_regions(height: int, width: int, num_regions: int, rng: onp.random.Generator) -> IntHxW:
    centers = rng.uniform((0, 0), (height, width), size=(num_regions, 2))
    rows, cols = onp.meshgrid(onp.arange(height), onp.arange(width), indexing='ij')
    grid = rearrange(onp.stack([rows, cols], axis=-1), 'h w d -> (h w) d')
    _, region = cKDTree(centers).query(grid)
    return region.reshape(height, width)


def assign_classes(region: IntHxW, num_regions: int, num_classes: int) -> IntHxW:
    """
    Greedy area balancing: regions in order of decreasing area go to the class
    with the smallest area so far. Every class receives at least one region.
    """
    areas = onp.bincount(region.ravel(), minlength=num_regions)
    class_area = onp.zeros(num_classes, dtype=onp.int64)
    region_class = onp.zeros(num_regions, dtype=onp.int64)
    for r in onp.argsort(-areas, kind='stable'):
        c = int(onp.argmin(class_area))
        region_class[r] = c
        class_area[c] += areas[r]
    return region_class[region]


def generate_scene(spec: SynthSceneSpec) -> SynthScene:
    rng = onp.random.default_rng(spec.seed)
    region = voronoi_regions(spec.height, spec.width, spec.num_regions, rng)
    classes = assign_classes(region, spec.num_regions, spec.num_classes)

    spectra = rng.uniform(0.1, 0.9, size=(spec.num_classes, spec.hsi_bands))
    if spec.spectral_collision:
        spectra[1::2] = spectra[0::2]
    levels = onp.linspace(0.1, 0.9, spec.num_classes)[rng.permutation(spec.num_classes)]
    elevation = onp.repeat(levels[:, None], spec.lidar_channels, axis=1)

    hsi = spectra[classes] + spec.spectral_noise * rng.standard_normal(
        (spec.height, spec.width, spec.hsi_bands)
    )
    lidar = elevation[classes] + spec.elevation_noise * rng.standard_normal(
        (spec.height, spec.width, spec.lidar_channels)
    )
    return SynthScene(
        hsi.astype(PRECISION.raster),
        lidar.astype(PRECISION.raster),
        (classes + 1).astype(onp.uint16),
        spectra,
        elevation,
    )


def nearest_prototype_predict(scene: SynthScene, use_elevation: bool = False) -> IntHxW:
    """
    0-indexed class of the closest prototype per pixel. Equal distances resolve
    to the lower class index.
    """
    features = scene.hsi.astype(PRECISION.preprocess)
    prototypes = scene.spectral_prototypes
    if use_elevation:
        features = onp.concatenate([features, scene.lidar], axis=-1)
        prototypes = onp.concatenate([prototypes, scene.elevation_prototypes], axis=-1)
    dist = ((features[..., None, :] - prototypes) ** 2).sum(axis=-1)
    return onp.argmin(dist, axis=-1)


def nearest_prototype_oa(scene: SynthScene, use_elevation: bool = False) -> float:
    labelled = scene.labels > 0
    pred = nearest_prototype_predict(scene, use_elevation)
    return float((pred[labelled] == scene.labels[labelled].astype(int) - 1).mean())


def write_scene(scene: SynthScene, out_dir: str) -> Dict[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        'hsi': os.path.join(out_dir, HSI_FILE),
        'lidar': os.path.join(out_dir, LIDAR_FILE),
        'labels': os.path.join(out_dir, LABELS_FILE),
    }
    write_raster(paths['hsi'], scene.hsi)
    write_raster(paths['lidar'], scene.lidar)
    write_labels(paths['labels'], scene.labels)
    return paths
