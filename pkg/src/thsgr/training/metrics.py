import numpy as onp
import pandas as pd
import grain.python as grain
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from sklearn.metrics import confusion_matrix
from time import perf_counter

from thsgr.dataloading.dataset import IndexWrapper, PatchDataset, iterate_batches
from thsgr.model import ThsgrModel
from thsgr.utils.errors import DimensionError
from thsgr.utils.typing import IntB, IntBx2, IntCLSxCLS

from typing import List


def kappa_from_confusion(confusion: IntCLSxCLS) -> float:
    """
    Chance-corrected agreement (p_o - p_e) / (1 - p_e), p_e from the marginals.
    A diagonal confusion with nonzero trace has Kappa 1 even when p_e = 1.
    """
    confusion = onp.asarray(confusion, dtype=float)
    total = confusion.sum()
    if total == 0:
        return 0.0
    p_o = onp.trace(confusion) / total
    p_e = float((confusion.sum(axis=0) * confusion.sum(axis=1)).sum() / total**2)
    if p_e == 1.0:
        return 1.0 if p_o == 1.0 else 0.0
    return float((p_o - p_e) / (1.0 - p_e))


@dataclass
class EvalReport:
    confusion: IntCLSxCLS  # rows = truth, cols = prediction
    oa: float
    kappa: float
    per_class_accuracy: List[float]
    runtime_s: float = 0.0

    @property
    def aa(self) -> float:
        """
        Average accuracy over classes with support.
        """
        support = self.confusion.sum(axis=1) > 0
        return float(onp.mean(onp.asarray(self.per_class_accuracy)[support]))

    @property
    def num_samples(self) -> int:
        return int(self.confusion.sum())

    @classmethod
    def from_confusion(cls, confusion: IntCLSxCLS, runtime_s: float = 0.0) -> 'EvalReport':
        confusion = onp.asarray(confusion, dtype=onp.int64)
        if confusion.ndim != 2 or confusion.shape[0] != confusion.shape[1]:
            raise DimensionError('confusion', confusion.shape)
        total = confusion.sum()
        support = confusion.sum(axis=1)
        per_class = onp.divide(
            onp.diag(confusion), support, out=onp.zeros(len(support)), where=support > 0
        )
        oa = float(onp.trace(confusion) / total) if total else 0.0
        return cls(confusion, oa, kappa_from_confusion(confusion), per_class.tolist(), runtime_s)

    @classmethod
    def from_predictions(
        cls, true: IntB, pred: IntB, num_classes: int, runtime_s: float = 0.0
    ) -> 'EvalReport':
        confusion = confusion_matrix(true, pred, labels=onp.arange(num_classes))
        return cls.from_confusion(confusion, runtime_s)

    def summary(self) -> pd.DataFrame:
        return pd.DataFrame(
            [{'oa': self.oa, 'aa': self.aa, 'kappa': self.kappa, 'runtime_s': self.runtime_s}]
        )

    def to_csv(self, confusion_path: str, summary_path: str | None = None) -> None:
        C = self.confusion.shape[0]
        frame = pd.DataFrame(
            self.confusion,
            index=pd.Index([f'true_{c}' for c in range(C)], name='class'),
            columns=[f'pred_{c}' for c in range(C)],
        )
        frame['accuracy'] = self.per_class_accuracy
        frame.to_csv(confusion_path)
        if summary_path is not None:
            self.summary().to_csv(summary_path, index=False)


@dataclass
class Predictions:
    locations: IntBx2
    pred: IntB
    true: IntB


def _predict_shard(
    model: ThsgrModel, dataset: grain.RandomAccessDataSource, batch_size: int
) -> Predictions:
    locations, pred, true = [], [], []
    for batch in iterate_batches(dataset, batch_size):
        pred.append(model.predict(batch['hsi'], batch['lidar']))
        true.append(batch['label'])
        locations.append(batch['location'])
    return Predictions(onp.concatenate(locations), onp.concatenate(pred), onp.concatenate(true))


def predict_dataset(
    model: ThsgrModel, dataset: PatchDataset, batch_size: int = 512, threads: int = 1
) -> Predictions:
    """
    Predictions in dataset order. With threads > 1 the pixels are split into
    contiguous shards evaluated concurrently with read-only parameters.
    """
    model.eval()
    if threads <= 1 or len(dataset) < 2 * threads:
        return _predict_shard(model, dataset, batch_size)
    bounds = onp.linspace(0, len(dataset), threads + 1).astype(int)
    shards = [IndexWrapper(dataset, range(lo, hi)) for lo, hi in zip(bounds[:-1], bounds[1:])]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda s: _predict_shard(model, s, batch_size), shards))
    return Predictions(
        onp.concatenate([p.locations for p in parts]),
        onp.concatenate([p.pred for p in parts]),
        onp.concatenate([p.true for p in parts]),
    )


def evaluate(
    model: ThsgrModel, dataset: PatchDataset, batch_size: int = 512, threads: int = 1
) -> EvalReport:
    start = perf_counter()
    predictions = predict_dataset(model, dataset, batch_size, threads)
    return EvalReport.from_predictions(
        predictions.true,
        predictions.pred,
        model.config.num_classes,
        runtime_s=perf_counter() - start,
    )
