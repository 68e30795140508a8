import numpy as onp
from dataclasses import dataclass, field
from time import perf_counter
from tqdm import tqdm

from thsgr.autodiff import Tape
from thsgr.dataloading.dataset import PatchDataset, get_dataloader
from thsgr.model import ThsgrModel
from thsgr.training.loss import cross_entropy
from thsgr.training.optimizer import AdamState, OptConfig, adam_step, init_adam
from thsgr.utils.errors import DataError, NonFiniteError
from thsgr.utils.logging import Logger

from typing import Dict, List, Tuple


@dataclass
class TrainResult:
    loss: List[float] = field(default_factory=list)
    accuracy: List[float] = field(default_factory=list)
    runtime_s: float = 0.0

    def curve(self) -> List[Dict[str, float]]:
        return [
            {'epoch': e, 'loss': l, 'acc': a}
            for e, (l, a) in enumerate(zip(self.loss, self.accuracy))
        ]


def train_step(
    model: ThsgrModel,
    batch: Dict[str, onp.ndarray],
    opt_state: AdamState,
    opt_config: OptConfig,
) -> Tuple[float, int]:
    """
    One Adam step on a batch; returns the batch loss and the number of correct
    predictions made before the update.
    """
    model.zero_grad()
    with Tape() as tape:
        logits = model(batch['hsi'], batch['lidar'])
        loss = cross_entropy(logits, batch['label'])
    if not onp.isfinite(loss.item()):
        raise NonFiniteError('cross_entropy', 'loss', loss.shape)
    tape.backward(loss)
    adam_step(model.named_parameters(), opt_state, opt_config)
    correct = int((onp.argmax(logits.data, axis=-1) == batch['label']).sum())
    return loss.item(), correct


def train(
    model: ThsgrModel,
    dataset: PatchDataset,
    opt_config: OptConfig,
    epochs: int,
    batch_size: int,
    seed: int = 0,
    logger: Logger | None = None,
    progress: bool = True,
) -> TrainResult:
    """
    Mini-batch training with a fresh shuffle (seed + epoch) every epoch.
    """
    if len(dataset) == 0:
        raise DataError('training set is empty')
    logger = logger if logger is not None else Logger(None, verbose=False)
    opt_state = init_adam(model.named_parameters())
    result = TrainResult()
    start = perf_counter()
    for epoch in tqdm(range(epochs), desc='epochs', disable=not progress):
        logger.start_epoch(epoch)
        model.train()
        total_loss, correct = 0.0, 0
        for batch in get_dataloader(dataset, batch_size, shuffle=True, seed=seed + epoch):
            loss, n_correct = train_step(model, batch, opt_state, opt_config)
            total_loss += loss * len(batch['label'])
            correct += n_correct
        result.loss.append(total_loss / len(dataset))
        result.accuracy.append(correct / len(dataset))
        logger.log({'train/loss': result.loss[-1], 'train/acc': result.accuracy[-1]})
        logger.log_epoch_training_duration()
    result.runtime_s = perf_counter() - start
    logger.log({'debug/train runtime [s]': result.runtime_s})
    return result
