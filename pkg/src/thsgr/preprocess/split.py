"""
Train/test sampling: a fixed number of random pixels per class, or spatially
disjoint rectangular regions.
"""

import numpy as onp
from dataclasses import dataclass, field

from thsgr.utils.constants import UNLABELED
from thsgr.utils.errors import ConfigError, DataError
from thsgr.utils.typing import BoolHxW, IntB, IntBx2, IntHxW

from typing import List, Literal, Sequence, Tuple

SplitMode = Literal['random', 'disjoint']
Region = Tuple[int, int, int, int]  # row_start, row_stop, col_start, col_stop (half-open)


@dataclass
class SplitSpec:
    mode: SplitMode = 'random'
    n_per_class: int = 50
    seed: int = 0
    train_regions: Sequence[Region] = field(default_factory=list)
    test_regions: Sequence[Region] = field(default_factory=list)
    margin: int = 0  # test pixels closer than this to a train region are dropped

    def __post_init__(self) -> None:
        if self.mode not in ('random', 'disjoint'):
            raise ConfigError('split_mode', f'unknown mode {self.mode!r}')
        if self.mode == 'random' and self.n_per_class < 1:
            raise ConfigError('n_per_class', f'must be positive, got {self.n_per_class}')
        if self.mode == 'disjoint' and len(self.train_regions) == 0:
            raise ConfigError('train_regions', 'disjoint split needs at least one region')
        if self.margin < 0:
            raise ConfigError('split_margin', f'must be non-negative, got {self.margin}')


@dataclass
class PixelSet:
    """
    Labelled pixel locations; labels are 0-indexed classes.
    """

    locations: IntBx2
    labels: IntB

    def __len__(self) -> int:
        return len(self.labels)

    def as_set(self) -> set:
        return {(int(r), int(c)) for r, c in self.locations}


def region_mask(shape: Tuple[int, int], regions: Sequence[Region], margin: int = 0) -> BoolHxW:
    mask = onp.zeros(shape, dtype=bool)
    for r0, r1, c0, c1 in regions:
        if not (0 <= r0 < r1 <= shape[0] and 0 <= c0 < c1 <= shape[1]):
            raise ConfigError('regions', f'region {(r0, r1, c0, c1)} outside scene {shape}')
        mask[max(r0 - margin, 0) : r1 + margin, max(c0 - margin, 0) : c1 + margin] = True
    return mask


def _pixel_set(labels: IntHxW, mask: BoolHxW) -> PixelSet:
    rows, cols = onp.nonzero(mask & (labels != UNLABELED))
    return PixelSet(
        onp.stack([rows, cols], axis=1).astype(onp.int64),
        labels[rows, cols].astype(onp.int64) - 1,
    )


def _random_split(
    labels: IntHxW, spec: SplitSpec, num_classes: int
) -> Tuple[PixelSet, PixelSet]:
    rng = onp.random.RandomState(spec.seed)
    train_mask = onp.zeros(labels.shape, dtype=bool)
    for c in range(1, num_classes + 1):
        rows, cols = onp.nonzero(labels == c)
        if len(rows) < spec.n_per_class:
            raise DataError(
                f'class {c} has {len(rows)} labelled pixels, '
                f'{spec.n_per_class} are required for training'
            )
        chosen = rng.permutation(len(rows))[: spec.n_per_class]
        train_mask[rows[chosen], cols[chosen]] = True
    return _pixel_set(labels, train_mask), _pixel_set(labels, ~train_mask)


def _disjoint_split(labels: IntHxW, spec: SplitSpec) -> Tuple[PixelSet, PixelSet]:
    train_mask = region_mask(labels.shape, spec.train_regions)
    guard = region_mask(labels.shape, spec.train_regions, spec.margin)
    if len(spec.test_regions) > 0:
        test_mask = region_mask(labels.shape, spec.test_regions) & ~guard
    else:
        test_mask = ~guard
    train, test = _pixel_set(labels, train_mask), _pixel_set(labels, test_mask)
    if len(train) == 0:
        raise DataError('train regions contain no labelled pixels')
    return train, test


def make_split(
    labels: IntHxW, spec: SplitSpec, num_classes: int | None = None
) -> Tuple[PixelSet, PixelSet]:
    """
    Splits the labelled pixels of a scene into disjoint train and test sets.
    Both sets are returned in raster order. Classes are 1..num_classes
    (default: the largest label); in random mode every one of them must have
    n_per_class labelled pixels, including classes absent from the raster.
    """
    top = int(labels.max(initial=UNLABELED))
    num_classes = top if num_classes is None else num_classes
    if top > num_classes:
        raise DataError(f'label {top} exceeds the {num_classes} classes of the scene')
    if spec.mode == 'random':
        return _random_split(labels, spec, num_classes)
    return _disjoint_split(labels, spec)


def class_counts(pixels: PixelSet, num_classes: int) -> List[int]:
    return onp.bincount(pixels.labels, minlength=num_classes).tolist()
