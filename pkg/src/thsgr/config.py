"""
Flat run configuration. Files hold one `key = value` per line, `#` starts a
comment; values are parsed with yaml so numbers, booleans, null and lists
([8, 16, 32]) come back typed. Later sources override earlier ones:
defaults < file < command-line.
"""

import os
import yaml
from dataclasses import dataclass, field, fields, replace

from thsgr.dataloading.synth import SynthSceneSpec
from thsgr.model import ModelConfig
from thsgr.preprocess.split import SplitSpec
from thsgr.training.optimizer import OptConfig
from thsgr.utils.errors import ConfigError

from typing import Any, Dict, List, Sequence


@dataclass
class RunConfig:
    name: str = 'run'
    out_dir: str = 'output'
    seed: int = 0
    threads: int = 1
    # data: rasters on disk, or a synthetic scene when hsi_path is empty
    hsi_path: str | None = None
    lidar_path: str | None = None
    labels_path: str | None = None
    synth_height: int = 32
    synth_width: int = 32
    synth_classes: int = 3
    synth_hsi_bands: int = 16
    synth_lidar_channels: int = 1
    synth_spectral_noise: float = 0.02
    synth_elevation_noise: float = 0.02
    synth_regions: int = 12
    synth_collision: bool = False
    synth_seed: int | None = None  # defaults to seed
    # preprocessing and sampling
    patch_size: int = 15
    num_pcs: int = 32
    split_mode: str = 'random'
    n_per_class: int = 50
    train_regions: List[List[int]] = field(default_factory=list)
    test_regions: List[List[int]] = field(default_factory=list)
    split_margin: int = 0
    # model
    hsi_widths: List[int] = field(default_factory=lambda: [8, 16, 32])
    sar_hidden: int = 32
    width: int = 64
    embed_dim: int = 64
    ff_hidden: int | None = None
    num_heads: int = 4
    modulator_kernel: int = 3
    modulator_depthwise: bool = True
    spectral_padding: str = 'valid'
    leaky_alpha: float = 100.0
    bn_momentum: float = 0.1
    graph_encoder: bool = True
    modulator: bool = True
    mean_forward: bool = True
    # optimization
    lr: float = 0.01
    weight_decay: float = 0.001
    batch_size: int = 256
    eval_batch_size: int = 512
    epochs: int = 200
    # experiments
    ablation_seeds: List[int] = field(default_factory=lambda: [0])
    sweep_patch_sizes: List[int] = field(default_factory=lambda: [7, 9, 11, 13, 15])
    sweep_num_pcs: List[int] = field(default_factory=lambda: [16, 24, 32])
    profile_toy_configs: List[List[int]] = field(
        default_factory=lambda: [[4, 8], [16, 16], [64, 32]]
    )
    gradcheck_tol: float = 1e-4
    gradcheck_max_checks: int = 6
    checkpoint: str | None = None

    def validate(self) -> 'RunConfig':
        positive = (
            'threads',
            'synth_height',
            'synth_width',
            'synth_classes',
            'synth_hsi_bands',
            'synth_lidar_channels',
            'synth_regions',
            'patch_size',
            'num_pcs',
            'n_per_class',
            'batch_size',
            'eval_batch_size',
            'epochs',
            'gradcheck_max_checks',
        )
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(name, f'must be positive, got {getattr(self, name)}')
        if self.seed < 0:
            raise ConfigError('seed', f'must be non-negative, got {self.seed}')
        if not self.lr > 0:
            raise ConfigError('lr', f'must be positive, got {self.lr}')
        if self.weight_decay < 0:
            raise ConfigError('weight_decay', f'must be non-negative, got {self.weight_decay}')
        if self.split_mode not in ('random', 'disjoint'):
            raise ConfigError('split_mode', f"must be 'random' or 'disjoint', got {self.split_mode!r}")
        if self.spectral_padding not in ('valid', 'same'):
            raise ConfigError(
                'spectral_padding', f"must be 'valid' or 'same', got {self.spectral_padding!r}"
            )
        paths = (self.hsi_path, self.lidar_path, self.labels_path)
        if any(paths) and not all(paths):
            raise ConfigError('hsi_path', 'hsi_path, lidar_path and labels_path go together')
        for region_field in ('train_regions', 'test_regions'):
            for region in getattr(self, region_field):
                if len(region) != 4:
                    raise ConfigError(region_field, f'regions are [r0, r1, c0, c1], got {region}')
        self.model_config(num_classes=max(self.synth_classes, 2), lidar_channels=1)
        if self.uses_synthetic_scene:
            self.synth_spec()
        return self

    @property
    def uses_synthetic_scene(self) -> bool:
        return not self.hsi_path

    def model_config(self, num_classes: int, lidar_channels: int) -> ModelConfig:
        return ModelConfig(
            num_pcs=self.num_pcs,
            lidar_channels=lidar_channels,
            patch_size=self.patch_size,
            num_classes=num_classes,
            hsi_widths=tuple(self.hsi_widths),
            sar_hidden=self.sar_hidden,
            width=self.width,
            embed_dim=self.embed_dim,
            ff_hidden=self.ff_hidden,
            num_heads=self.num_heads,
            modulator_kernel=self.modulator_kernel,
            modulator_depthwise=self.modulator_depthwise,
            spectral_padding=self.spectral_padding,  # type: ignore
            leaky_alpha=self.leaky_alpha,
            bn_momentum=self.bn_momentum,
            graph_encoder=self.graph_encoder,
            modulator=self.modulator,
            mean_forward=self.mean_forward,
            seed=self.seed,
        )

    def opt_config(self) -> OptConfig:
        return OptConfig(learning_rate=self.lr, weight_decay=self.weight_decay)

    def split_spec(self) -> SplitSpec:
        return SplitSpec(
            mode=self.split_mode,  # type: ignore
            n_per_class=self.n_per_class,
            seed=self.seed,
            train_regions=[tuple(r) for r in self.train_regions],  # type: ignore
            test_regions=[tuple(r) for r in self.test_regions],  # type: ignore
            margin=self.split_margin,
        )

    def synth_spec(self) -> SynthSceneSpec:
        return SynthSceneSpec(
            height=self.synth_height,
            width=self.synth_width,
            num_classes=self.synth_classes,
            hsi_bands=self.synth_hsi_bands,
            lidar_channels=self.synth_lidar_channels,
            spectral_noise=self.synth_spectral_noise,
            elevation_noise=self.synth_elevation_noise,
            num_regions=self.synth_regions,
            spectral_collision=self.synth_collision,
            seed=self.seed if self.synth_seed is None else self.synth_seed,
        )

    def with_ablation(self, graph_encoder: bool, modulator: bool, mean_forward: bool) -> 'RunConfig':
        return replace(
            self, graph_encoder=graph_encoder, modulator=modulator, mean_forward=mean_forward
        )

    @staticmethod
    def from_dict(config: Dict[str, Any]) -> 'RunConfig':
        names = {f.name for f in fields(RunConfig)}
        for key in config:
            if key not in names:
                raise ConfigError(key, 'unknown field')
        return RunConfig(**config).validate()


def parse_value(key: str, text: str, where: str) -> Any:
    try:
        return yaml.safe_load(text) if text.strip() else None
    except yaml.YAMLError as e:
        raise ConfigError(key, f'{where}: cannot parse value {text!r} ({e.__class__.__name__})')


def parse_assignments(
    lines: Sequence[str], source: str, origins: Dict[str, str] | None = None
) -> Dict[str, Any]:
    """
    Parses `key = value` lines. When `origins` is given it receives the
    `source:line` each key was read from.
    """
    names = {f.name for f in fields(RunConfig)}
    out: Dict[str, Any] = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        where = f'{source}:{lineno}'
        key, sep, value = line.partition('=')
        key = key.strip()
        if not sep or not key:
            raise ConfigError(where, f'expected "key = value", got {line!r}')
        if key not in names:
            raise ConfigError(key, f'{where}: unknown field')
        out[key] = parse_value(key, value, where)
        if origins is not None:
            origins[key] = where
    return out


def _check_types(values: Dict[str, Any]) -> None:
    defaults = RunConfig()
    for key, value in values.items():
        default = getattr(defaults, key)
        if value is None or default is None:
            continue
        if isinstance(default, bool) != isinstance(value, bool):
            raise ConfigError(key, f'expected a boolean, got {value!r}')
        if isinstance(default, (int, float)) and not isinstance(default, bool):
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigError(key, f'expected a number, got {value!r}')
            if isinstance(default, int) and isinstance(value, float):
                raise ConfigError(key, f'expected an integer, got {value!r}')
        if isinstance(default, list) and not isinstance(value, list):
            raise ConfigError(key, f'expected a list, got {value!r}')
        if isinstance(default, str) and not isinstance(value, str):
            raise ConfigError(key, f'expected a string, got {value!r}')


def load_config(
    path: str | None = None,
    overrides: Dict[str, Any] | Sequence[str] = (),
    origins: Dict[str, str] | None = None,
) -> RunConfig:
    """
    Defaults, then the file at `path`, then overrides given either as a dict
    or as 'key=value' strings. Type and range errors of a value that came from
    a file or from a parsed override cite its `source:line`; `origins` supplies
    these locations for dict overrides.
    """
    values: Dict[str, Any] = {}
    where: Dict[str, str] = {}
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError('config', f'{path} does not exist')
        with open(path) as f:
            values.update(parse_assignments(f.read().splitlines(), path, where))
        base = os.path.dirname(os.path.abspath(path))
        for key in ('hsi_path', 'lidar_path', 'labels_path', 'checkpoint'):
            if isinstance(values.get(key), str) and not os.path.isabs(values[key]):
                values[key] = os.path.join(base, values[key])
    if isinstance(overrides, dict):
        values.update(overrides)
        for key in overrides:
            where.pop(key, None)
        where.update(origins or {})
    else:
        values.update(parse_assignments(list(overrides), '--set', where))
    try:
        _check_types(values)
        return RunConfig.from_dict(values)
    except ConfigError as e:
        if e.field not in where:
            raise
        raise ConfigError(e.field, f'{where[e.field]}: {e.message}') from None
