import numpy as onp

from thsgr.autodiff import Tensor, as_tensor, ops, tagged
from thsgr.utils.errors import DataError, DimensionError
from thsgr.utils.typing import IntB


def one_hot(label: int, num_classes: int) -> onp.ndarray:
    if not 0 <= label < num_classes:
        raise DataError(f'label {label} outside [0, {num_classes})')
    out = onp.zeros(num_classes)
    out[label] = 1.0
    return out


def one_hot_batch(labels: IntB, num_classes: int) -> onp.ndarray:
    labels = onp.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        bad = labels[(labels < 0) | (labels >= num_classes)][0]
        raise DataError(f'label {int(bad)} outside [0, {num_classes})')
    return onp.eye(num_classes)[labels]


def cross_entropy(logits: Tensor, labels: IntB) -> Tensor:
    """
    Mean negative log-likelihood of the labels under softmax(logits),
    evaluated in log space.
    """
    logits = as_tensor(logits)
    labels = onp.asarray(labels)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise DimensionError('cross_entropy', logits.shape, labels.shape)
    targets = one_hot_batch(labels, logits.shape[1])
    with tagged('loss'):
        log_p = ops.log_softmax(logits, axis=-1)
        nll = ops.sum(ops.mul(log_p, targets), axis=-1)
        return ops.mul(ops.mean(nll), -1.0)
