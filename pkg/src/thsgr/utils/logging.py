import os.path
import pandas as pd
from rich.console import Console
from time import time

from typing import Dict, List

Scalar = float | int

console = Console(stderr=True)


class Logger:
    """
    Collects scalar logs into pandas frames, one frame per key prefix
    (e.g. 'train/loss' lands in the 'train' frame, one row per epoch), and
    writes them as log_<prefix>.csv. The 'debug' frame holds wall-clock
    timings and is never written.
    """

    aggregated_data: Dict[str, pd.DataFrame]
    epoch_start_time: float | None = None

    def __init__(self, dir: str | None, verbose: bool = True) -> None:
        self.dir = dir
        self.verbose = verbose
        self.aggregated_data = {}
        self._rows: Dict[str, List[Dict[str, Scalar]]] = {}
        self.epoch = 0
        if dir is not None:
            os.makedirs(dir, exist_ok=True)

    def log(self, values: Dict[str, Scalar]) -> None:
        for key, value in values.items():
            prefix, _, name = key.rpartition('/')
            rows = self._rows.setdefault(prefix or 'run', [])
            if not rows or rows[-1].get('epoch') != self.epoch:
                rows.append({'epoch': self.epoch})
            rows[-1][name] = float(value)

    def start_epoch(self, e: int) -> None:
        self.epoch = e
        now = time()
        if self.epoch_start_time is not None:
            self.log({'debug/epoch run duration [s]': now - self.epoch_start_time})
        self.epoch_start_time = now

    def log_epoch_training_duration(self) -> None:
        assert self.epoch_start_time is not None, 'start_epoch was never called'
        self.log({'debug/epoch train duration [s]': time() - self.epoch_start_time})

    def info(self, message: str) -> None:
        if self.verbose:
            console.print(message)

    def frame(self, prefix: str) -> pd.DataFrame:
        self.aggregated_data[prefix] = pd.DataFrame(self._rows.get(prefix, []))
        return self.aggregated_data[prefix]

    def flush(self) -> None:
        if self.dir is None:
            return
        for prefix in self._rows:
            if prefix == 'debug':
                continue
            self.frame(prefix).to_csv(os.path.join(self.dir, f'log_{prefix}.csv'), index=False)
