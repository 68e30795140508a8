import pytest
import numpy as onp
import pandas as pd

from thsgr.utils.errors import DimensionError, RasterFormatError
from thsgr.visualization import export_map, prediction_grid, read_class_map
from thsgr.visualization.maps import read_pgm


def test_two_by_two_map(tmp_path):
    predictions = onp.array([[0, 1], [-1, 2]])
    labels = onp.array([[1, 2], [3, 0]], dtype=onp.uint16)
    path = str(tmp_path / 'map.pgm')
    csv_path = export_map(predictions, labels, path, 3)
    with open(path, 'rb') as f:
        raw = f.read()
    assert raw == b'P5\n2 2\n255\n' + bytes([85, 170, 0, 0])

    frame = pd.read_csv(csv_path)
    assert list(frame.columns) == ['row', 'col', 'pred', 'true']
    assert frame.values.tolist() == [[0, 0, 1, 1], [0, 1, 2, 2], [1, 1, 3, 0]]


@pytest.mark.parametrize('C', [1, 2, 7, 15, 255])
def test_class_map_round_trip(tmp_path, C):
    rng = onp.random.default_rng(C)
    predictions = rng.integers(0, C, size=(6, 9))
    labels = onp.ones((6, 9), dtype=onp.uint16)
    labels[0] = 0
    path = str(tmp_path / 'map.pgm')
    export_map(predictions, labels, path, C)
    back = read_class_map(path, C)
    assert onp.all(back[0] == -1), 'unlabeled pixels must be blank'
    assert onp.array_equal(back[1:], predictions[1:])


def test_prediction_grid():
    grid = prediction_grid((3, 4), onp.array([[0, 1], [2, 3]]), onp.array([5, 6]))
    assert grid[0, 1] == 5 and grid[2, 3] == 6
    assert (grid == -1).sum() == 10


def test_read_pgm_skips_comments(tmp_path):
    path = tmp_path / 'c.pgm'
    path.write_bytes(b'P5\n# made by hand\n3 1\n255\n' + bytes([0, 128, 255]))
    assert read_pgm(str(path)).tolist() == [[0, 128, 255]]


def test_read_pgm_errors(tmp_path):
    path = tmp_path / 'bad.pgm'
    path.write_bytes(b'P2\n1 1\n255\n' + bytes([0]))
    with pytest.raises(RasterFormatError) as info:
        read_pgm(str(path))
    assert info.value.field == 'magic'
    path.write_bytes(b'P5\n2 2\n255\n' + bytes([0]))
    with pytest.raises(RasterFormatError) as info:
        read_pgm(str(path))
    assert info.value.field == 'body'


def test_export_errors(tmp_path):
    with pytest.raises(DimensionError):
        export_map(onp.zeros((2, 2), dtype=int), onp.zeros((2, 3)), str(tmp_path / 'm.pgm'), 2)
    with pytest.raises(RasterFormatError):
        export_map(onp.zeros((2, 2), dtype=int), onp.zeros((2, 2)), str(tmp_path / 'm.pgm'), 256)
