import numpy as onp
import grain.python as grain
from dataclasses import dataclass
from einops import rearrange

from thsgr.dataloading.raster import read_labels, read_raster
from thsgr.preprocess import PatchExtractor, PixelSet, SceneCube, normalize, pca_reduce
from thsgr.utils.errors import DataError, DimensionError
from thsgr.utils.typing import PRECISION, FloatHxWxC, IntHxW

from typing import Dict, Iterator, Sequence, SupportsIndex, TypedDict


class ModalSample(TypedDict):
    hsi: onp.ndarray  # k x k x C_p
    lidar: onp.ndarray  # k x k x C_L
    label: int  # 0-indexed
    location: onp.ndarray  # (row, col)


@dataclass
class Scene:
    """
    Co-registered HSI and SAR/LiDAR cubes with a shared 1-indexed label map.
    """

    hsi: FloatHxWxC
    lidar: FloatHxWxC
    labels: IntHxW

    def __post_init__(self) -> None:
        if self.hsi.shape[:2] != self.lidar.shape[:2] or self.hsi.shape[:2] != self.labels.shape:
            raise DimensionError('Scene', self.hsi.shape, self.lidar.shape, self.labels.shape)

    @property
    def num_classes(self) -> int:
        return int(self.labels.max())

    @classmethod
    def from_files(cls, hsi_path: str, lidar_path: str, labels_path: str) -> 'Scene':
        return cls(read_raster(hsi_path), read_raster(lidar_path), read_labels(labels_path))


def prepare_scene(scene: Scene, num_pcs: int) -> Scene:
    """
    Normalizes both modalities and reduces the HSI cube to num_pcs principal
    components (normalized again afterwards).
    """
    hsi = normalize(SceneCube(scene.hsi.astype(PRECISION.preprocess)))
    hsi = normalize(pca_reduce(hsi, num_pcs))
    lidar = normalize(SceneCube(scene.lidar.astype(PRECISION.preprocess)))
    return Scene(hsi.data, lidar.data, scene.labels)


class PatchDataset(grain.RandomAccessDataSource):
    """
    Lazily cuts paired patches around the pixels of a PixelSet.
    """

    def __init__(self, scene: Scene, pixels: PixelSet, k: int) -> None:
        if len(pixels) == 0:
            raise DataError('dataset contains no labelled pixels')
        self.hsi = PatchExtractor(scene.hsi, k)
        self.lidar = PatchExtractor(scene.lidar, k)
        self.pixels = pixels
        self.k = k

    def __len__(self) -> int:
        return len(self.pixels)

    def __getitem__(self, idx: SupportsIndex) -> ModalSample:  # type: ignore
        i = int(idx)  # type: ignore
        row, col = (int(v) for v in self.pixels.locations[i])
        return ModalSample(
            hsi=self.hsi(row, col).astype(PRECISION.training),
            lidar=self.lidar(row, col).astype(PRECISION.training),
            label=int(self.pixels.labels[i]),
            location=onp.array([row, col]),
        )

    def __repr__(self) -> str:
        return f'PatchDataset(n={len(self)}, k={self.k})'


class ToModelLayout(grain.MapTransform):
    """
    Batched channels-last patches to the layouts the encoders consume:
    hsi B x 1 x C_p x k x k, lidar B x C_L x k x k.
    """

    def map(self, batch: Dict[str, onp.ndarray]) -> Dict[str, onp.ndarray]:  # type: ignore
        return {
            'hsi': rearrange(batch['hsi'], 'b h w c -> b 1 c h w'),
            'lidar': rearrange(batch['lidar'], 'b h w c -> b c h w'),
            'label': onp.asarray(batch['label'], dtype=onp.int64),
            'location': onp.asarray(batch['location']),
        }


class IndexWrapper(grain.RandomAccessDataSource):
    def __init__(self, dataset: grain.RandomAccessDataSource, indices: Sequence[int]) -> None:
        self.__dataset = dataset
        self.__indices = list(indices)

    def __getitem__(self, idx: SupportsIndex) -> ModalSample:  # type: ignore
        return self.__dataset[self.__indices[int(idx)]]  # type: ignore

    def __len__(self) -> int:
        return len(self.__indices)


def get_dataloader(
    dataset: grain.RandomAccessDataSource,
    batch_size: int,
    shuffle: bool,
    seed: int,
) -> grain.DataLoader:
    """
    Single pass over the dataset. Callers pass seed + epoch to reshuffle.
    """
    sampler = grain.IndexSampler(
        num_records=len(dataset),
        shard_options=grain.NoSharding(),
        shuffle=shuffle,
        num_epochs=1,
        seed=seed,
    )
    return grain.DataLoader(
        data_source=dataset,
        operations=[grain.Batch(batch_size=batch_size, drop_remainder=False), ToModelLayout()],
        sampler=sampler,
        worker_count=0,
    )


def iterate_batches(
    dataset: grain.RandomAccessDataSource, batch_size: int, shuffle: bool = False, seed: int = 0
) -> Iterator[Dict[str, onp.ndarray]]:
    yield from get_dataloader(dataset, batch_size, shuffle, seed)


def num_batches(dataset: grain.RandomAccessDataSource, batch_size: int) -> int:
    return -(-len(dataset) // batch_size)
