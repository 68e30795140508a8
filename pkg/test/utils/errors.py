import numpy as onp

from numpy.typing import ArrayLike


def relative_error(value: ArrayLike, target: ArrayLike, eps=1e-15) -> onp.ndarray:
    value, target = onp.asarray(value), onp.asarray(target)
    return onp.abs(value - target) / (onp.abs(target) + eps)


def is_close(value: ArrayLike, target: ArrayLike, tolerance: float, absolute=False) -> bool:
    value, target = onp.asarray(value), onp.asarray(target)
    error = onp.abs(value - target) if absolute else relative_error(value, target)
    return bool(onp.all(error < tolerance))


def assert_is_close(
    value: ArrayLike,
    target: ArrayLike,
    mask: onp.ndarray | None = None,
    tolerance: float = 1e-10,
    absolute=False,
    name='',
):
    """
    Element-wise comparison in float64, restricted to `mask` when given. The
    failure message reports the worst element: relative error first unless
    `absolute` is set.
    """
    value, target = onp.asarray(value, dtype=onp.float64), onp.asarray(target, dtype=onp.float64)
    assert value.shape == target.shape, f'{name}: shape {value.shape} vs {target.shape}'
    if mask is not None:
        value, target = value[mask], target[mask]
    if value.size == 0:
        return
    rel = relative_error(value, target).ravel()
    diff = onp.abs(value - target).ravel()
    worst = diff.argmax() if absolute else rel.argmax()
    if absolute:
        assert diff[worst] < tolerance, f'{name}: abs error {diff[worst]:.2e} (rel {rel[worst]:.2e})'
    else:
        assert rel[worst] < tolerance, f'{name}: rel error {rel[worst]:.2e} (abs {diff[worst]:.2e})'
