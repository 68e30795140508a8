"""
Classification maps as binary PGM (P5, maxval 255) images. Class c (0-indexed)
of C is drawn at gray level round((c + 1) * 255 / C); pixels without a label
or without a prediction are 0. A CSV next to the image lists
row, col, pred, true with 1-indexed classes.
"""

import os
import numpy as onp
import pandas as pd

from thsgr.utils.errors import DimensionError, RasterFormatError
from thsgr.utils.typing import IntHxW

NO_PREDICTION = -1


def gray_levels(num_classes: int) -> onp.ndarray:
    return onp.round(onp.arange(1, num_classes + 1) * 255 / num_classes).astype(onp.uint8)


def prediction_grid(shape, locations: onp.ndarray, pred: onp.ndarray) -> IntHxW:
    grid = onp.full(shape, NO_PREDICTION, dtype=onp.int64)
    grid[locations[:, 0], locations[:, 1]] = pred
    return grid


def export_map(predictions: IntHxW, labels: IntHxW, path: str, num_classes: int) -> str:
    """
    Writes `path` (PGM) and the CSV with the same stem, returns the CSV path.
    predictions are 0-indexed with -1 for none, labels 1-indexed with 0 for
    unlabeled.
    """
    if predictions.shape != labels.shape:
        raise DimensionError('export_map', predictions.shape, labels.shape)
    if num_classes < 1 or num_classes > 255:
        raise RasterFormatError(path, 'maxval', f'{num_classes} classes do not fit 8-bit gray')
    visible = (predictions != NO_PREDICTION) & (labels != 0)
    image = onp.zeros(predictions.shape, dtype=onp.uint8)
    image[visible] = gray_levels(num_classes)[predictions[visible]]
    H, W = image.shape
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'wb') as f:
        f.write(f'P5\n{W} {H}\n255\n'.encode('ascii'))
        f.write(image.tobytes())

    rows, cols = onp.nonzero(predictions != NO_PREDICTION)
    frame = pd.DataFrame(
        {
            'row': rows,
            'col': cols,
            'pred': predictions[rows, cols] + 1,
            'true': labels[rows, cols].astype(onp.int64),
        }
    )
    csv_path = os.path.splitext(path)[0] + '.csv'
    frame.to_csv(csv_path, index=False)
    return csv_path


def read_pgm(path: str) -> onp.ndarray:
    with open(path, 'rb') as f:
        raw = f.read()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos : pos + 1] == b'#':
            pos = raw.find(b'\n', pos) + 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise RasterFormatError(path, 'header', 'truncated PGM header')
        tokens.append(raw[start:pos])
    if tokens[0] != b'P5':
        raise RasterFormatError(path, 'magic', f'expected P5, got {tokens[0]!r}')
    W, H, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise RasterFormatError(path, 'maxval', f'expected 255, got {maxval}')
    body = raw[pos + 1 :]
    if len(body) != H * W:
        raise RasterFormatError(path, 'body', f'expected {H * W} bytes, got {len(body)}')
    return onp.frombuffer(body, dtype=onp.uint8).reshape(H, W)


def read_class_map(path: str, num_classes: int) -> IntHxW:
    """
    Inverse of the gray coding: 0-indexed classes, -1 where the map is 0.
    """
    image = read_pgm(path).astype(onp.int64)
    classes = onp.round(image * num_classes / 255).astype(onp.int64) - 1
    return onp.where(image == 0, NO_PREDICTION, classes)
