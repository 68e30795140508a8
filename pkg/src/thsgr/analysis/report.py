import numpy as onp
import pandas as pd
from dataclasses import dataclass, asdict, field

from thsgr.analysis.flops import closed_form_flops, count_params, measure_block
from thsgr.model.nn import ConvModulator, MultiHeadSelfAttention
from thsgr.utils.constants import SCENE_PATCH_SIZES

from typing import Dict, List, Sequence, Tuple

PROFILE_COLUMNS = ['block', 'config_N', 'config_D', 'flops_measured', 'flops_closed_form', 'params']


def scene_profile_configs(dim: int = 64) -> Dict[str, Tuple[int, int]]:
    """
    (N, D) of the three benchmark scenes: k^2 patch tokens plus the class token.
    """
    return {name: (k * k + 1, dim) for name, k in SCENE_PATCH_SIZES.items()}


@dataclass
class ProfileRow:
    block: str
    config_N: int
    config_D: int
    flops_measured: int
    flops_closed_form: int
    params: int


@dataclass
class ProfileReport:
    rows: List[ProfileRow] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(r) for r in self.rows], columns=PROFILE_COLUMNS)

    def to_csv(self, path: str) -> None:
        self.to_frame().to_csv(path, index=False)

    @property
    def consistent(self) -> bool:
        return all(r.flops_measured == r.flops_closed_form for r in self.rows)

    def pairs(self) -> List[Tuple[ProfileRow, ProfileRow]]:
        """
        (msa, modulator) rows of equal config.
        """
        msa = {(r.config_N, r.config_D): r for r in self.rows if r.block == 'msa'}
        return [
            (msa[(r.config_N, r.config_D)], r)
            for r in self.rows
            if r.block == 'modulator' and (r.config_N, r.config_D) in msa
        ]


def profile_blocks(
    configs: Sequence[Tuple[int, int]],
    num_heads: int = 4,
    kernel_size: int = 3,
    depthwise: bool = True,
    seed: int = 0,
) -> ProfileReport:
    """
    Standard MSA (biases, output projection) against the modulator at every
    (N, D) config, measured on a counting tape and by closed form.
    """
    report = ProfileReport()
    rng = onp.random.default_rng(seed)
    for N, D in configs:
        heads = num_heads if D % num_heads == 0 else 1
        blocks = {
            'msa': MultiHeadSelfAttention(D, heads, rng),
            'modulator': ConvModulator(D, rng, kernel_size=kernel_size, depthwise=depthwise),
        }
        for name, block in blocks.items():
            measured = measure_block(block, N, D, seed)
            report.rows.append(
                ProfileRow(name, N, D, measured.total, closed_form_flops(block, N), count_params(block))
            )
    return report
