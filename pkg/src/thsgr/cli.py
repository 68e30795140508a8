"""
Command-line entry point: thsgr {synth,train,eval,ablate,profile,gradcheck,sweep}.

Exit codes: 0 success, 1 failed check or data/runtime error, 2 invalid config.
"""

import argparse
import os
import sys
import numpy as onp
import pandas as pd
from dataclasses import dataclass, replace
from rich.markup import escape
from rich.table import Table
from threadpoolctl import threadpool_limits
from time import perf_counter

from thsgr.analysis import profile_blocks, run_gradcheck_suite, scene_profile_configs
from thsgr.config import RunConfig, load_config, parse_assignments
from thsgr.dataloading import (
    PatchDataset,
    Scene,
    generate_scene,
    nearest_prototype_oa,
    prepare_scene,
    write_scene,
)
from thsgr.model import ThsgrModel
from thsgr.preprocess import make_split
from thsgr.training import (
    EvalReport,
    evaluate,
    load_model,
    predict_dataset,
    save_checkpoint,
    train,
)
from thsgr.utils.errors import ConfigError, ThsgrError
from thsgr.utils.logging import Logger, console
from thsgr.visualization import export_map, prediction_grid

from typing import Callable, Dict, List, Sequence

ABLATION_LADDER = (
    ('backbone', False, False, False),
    ('+graph', True, False, False),
    ('+graph+modulator', True, True, False),
    ('full', True, True, True),
)


@dataclass
class Experiment:
    config: RunConfig
    scene: Scene  # normalized, PCA-reduced
    train_set: PatchDataset
    test_set: PatchDataset

    @property
    def num_classes(self) -> int:
        return self.scene.num_classes

    @property
    def lidar_channels(self) -> int:
        return self.scene.lidar.shape[2]

    def build_model(self, config: RunConfig | None = None) -> ThsgrModel:
        config = self.config if config is None else config
        return ThsgrModel(config.model_config(self.num_classes, self.lidar_channels))


def load_scene(cfg: RunConfig) -> Scene:
    if cfg.uses_synthetic_scene:
        synth = generate_scene(cfg.synth_spec())
        return Scene(synth.hsi, synth.lidar, synth.labels)
    return Scene.from_files(cfg.hsi_path, cfg.lidar_path, cfg.labels_path)  # type: ignore


def load_experiment(cfg: RunConfig, scene: Scene | None = None) -> Experiment:
    scene = load_scene(cfg) if scene is None else scene
    bands = scene.hsi.shape[2]
    if cfg.num_pcs > bands:
        raise ConfigError('num_pcs', f'{cfg.num_pcs} components requested, the HSI cube has {bands} bands')
    prepared = prepare_scene(scene, cfg.num_pcs)
    train_pixels, test_pixels = make_split(
        prepared.labels, cfg.split_spec(), prepared.num_classes
    )
    return Experiment(
        cfg,
        prepared,
        PatchDataset(prepared, train_pixels, cfg.patch_size),
        PatchDataset(prepared, test_pixels, cfg.patch_size),
    )


def print_frame(title: str, frame: pd.DataFrame) -> None:
    table = Table(title=title)
    for column in frame.columns:
        table.add_column(str(column))
    for row in frame.itertuples(index=False):
        table.add_row(*(f'{v:.4f}' if isinstance(v, float) else str(v) for v in row))
    console.print(table)


def write_evaluation(
    cfg: RunConfig, model: ThsgrModel, experiment: Experiment, prefix: str = 'eval'
) -> EvalReport:
    start = perf_counter()
    predictions = predict_dataset(
        model, experiment.test_set, cfg.eval_batch_size, threads=cfg.threads
    )
    report = EvalReport.from_predictions(
        predictions.true, predictions.pred, experiment.num_classes, perf_counter() - start
    )
    report.to_csv(
        os.path.join(cfg.out_dir, f'{prefix}_confusion.csv'),
        os.path.join(cfg.out_dir, f'{prefix}_summary.csv'),
    )
    labels = experiment.scene.labels
    grid = prediction_grid(labels.shape, predictions.locations, predictions.pred)
    export_map(grid, labels, os.path.join(cfg.out_dir, f'{prefix}_map.pgm'), experiment.num_classes)
    return report


def fit(cfg: RunConfig, experiment: Experiment, logger: Logger, progress: bool = True):
    model = experiment.build_model(cfg)
    result = train(
        model,
        experiment.train_set,
        cfg.opt_config(),
        cfg.epochs,
        cfg.batch_size,
        seed=cfg.seed,
        logger=logger,
        progress=progress,
    )
    return model, result


### commands ###


def cmd_synth(cfg: RunConfig) -> int:
    spec = cfg.synth_spec()
    scene = generate_scene(spec)
    paths = write_scene(scene, cfg.out_dir)
    summary = pd.DataFrame(
        [
            {
                'spectral_oracle_oa': nearest_prototype_oa(scene, use_elevation=False),
                'multimodal_oracle_oa': nearest_prototype_oa(scene, use_elevation=True),
            }
        ]
    )
    summary.to_csv(os.path.join(cfg.out_dir, 'oracle.csv'), index=False)
    print_frame(f'synthetic scene -> {os.path.dirname(paths["hsi"])}', summary)
    return 0


def cmd_train(cfg: RunConfig) -> int:
    logger = Logger(cfg.out_dir)
    experiment = load_experiment(cfg)
    logger.info(
        f'{cfg.name}: {len(experiment.train_set)} train / {len(experiment.test_set)} test pixels, '
        f'{experiment.num_classes} classes'
    )
    model, result = fit(cfg, experiment, logger)
    save_checkpoint(model, cfg.checkpoint or os.path.join(cfg.out_dir, 'model.npz'))
    pd.DataFrame(result.curve()).to_csv(os.path.join(cfg.out_dir, 'loss_curve.csv'), index=False)
    report = write_evaluation(cfg, model, experiment)
    logger.log({'test/oa': report.oa, 'test/aa': report.aa, 'test/kappa': report.kappa})
    logger.flush()
    print_frame('test', report.summary())
    return 0


def cmd_eval(cfg: RunConfig) -> int:
    path = cfg.checkpoint or os.path.join(cfg.out_dir, 'model.npz')
    model = load_model(path)
    stored = model.config
    for name in ('patch_size', 'num_pcs'):
        if getattr(stored, name) != getattr(cfg, name):
            raise ConfigError(
                name, f'checkpoint was trained with {getattr(stored, name)}, config says {getattr(cfg, name)}'
            )
    experiment = load_experiment(cfg)
    report = write_evaluation(cfg, model, experiment)
    print_frame(f'evaluation of {path}', report.summary())
    return 0


def cmd_ablate(cfg: RunConfig) -> int:
    """
    The four-rung ladder on one scene, every rung averaged over ablation_seeds.
    """
    experiment = load_experiment(cfg)
    rows = []
    for rung, graph, modulator, mean_forward in ABLATION_LADDER:
        scores: Dict[str, List[float]] = {'oa': [], 'aa': [], 'kappa': []}
        for seed in cfg.ablation_seeds:
            rung_cfg = replace(cfg.with_ablation(graph, modulator, mean_forward), seed=seed)
            model, _ = fit(rung_cfg, experiment, Logger(None, verbose=False), progress=False)
            report = evaluate(model, experiment.test_set, cfg.eval_batch_size, threads=cfg.threads)
            for key in scores:
                scores[key].append(getattr(report, key))
        rows.append(
            {
                'rung': rung,
                'graph_encoder': graph,
                'modulator': modulator,
                'mean_forward': mean_forward,
                **{key: float(onp.mean(v)) for key, v in scores.items()},
                'oa_std': float(onp.std(scores['oa'])),
            }
        )
        console.print(f'{rung}: OA {rows[-1]["oa"]:.4f}')
    frame = pd.DataFrame(rows)
    os.makedirs(cfg.out_dir, exist_ok=True)
    frame.to_csv(os.path.join(cfg.out_dir, 'ablation.csv'), index=False)
    print_frame('ablation', frame)
    return 0


def cmd_profile(cfg: RunConfig) -> int:
    configs = list(scene_profile_configs(cfg.embed_dim).values())
    configs += [tuple(c) for c in cfg.profile_toy_configs]
    report = profile_blocks(
        configs,
        num_heads=cfg.num_heads,
        kernel_size=cfg.modulator_kernel,
        depthwise=cfg.modulator_depthwise,
        seed=cfg.seed,
    )
    os.makedirs(cfg.out_dir, exist_ok=True)
    report.to_csv(os.path.join(cfg.out_dir, 'profile.csv'))
    print_frame('FLOPs and parameters', report.to_frame())
    return 0 if report.consistent else 1


def cmd_gradcheck(cfg: RunConfig) -> int:
    reports = run_gradcheck_suite(
        tol=cfg.gradcheck_tol, max_checks=cfg.gradcheck_max_checks, seed=cfg.seed
    )
    frame = pd.DataFrame(
        [
            {
                'block': r.name,
                'max_rel_error': r.max_rel_error,
                'worst_coordinate': r.worst_coordinate,
                'min_step': r.min_step,
                'checked': r.checked,
                'passed': r.passed,
            }
            for r in reports
        ]
    )
    os.makedirs(cfg.out_dir, exist_ok=True)
    frame.to_csv(os.path.join(cfg.out_dir, 'gradcheck.csv'), index=False)
    print_frame('gradient check', frame)
    return 0 if all(r.passed for r in reports) else 1


def cmd_sweep(cfg: RunConfig) -> int:
    """
    Patch size x number of principal components on one scene.
    """
    scene = load_scene(cfg)
    rows = []
    for k in cfg.sweep_patch_sizes:
        for p in cfg.sweep_num_pcs:
            run_cfg = replace(cfg, patch_size=k, num_pcs=p).validate()
            experiment = load_experiment(run_cfg, scene)
            model, result = fit(run_cfg, experiment, Logger(None, verbose=False), progress=False)
            report = evaluate(model, experiment.test_set, cfg.eval_batch_size, threads=cfg.threads)
            rows.append(
                {
                    'k': k,
                    'p': p,
                    'oa': report.oa,
                    'kappa': report.kappa,
                    'runtime_s': result.runtime_s + report.runtime_s,
                }
            )
            console.print(f'k={k} p={p}: OA {report.oa:.4f}')
    frame = pd.DataFrame(rows)
    os.makedirs(cfg.out_dir, exist_ok=True)
    frame.to_csv(os.path.join(cfg.out_dir, 'sweep.csv'), index=False)
    print_frame('patch size / PC sweep', frame)
    return 0


COMMANDS: Dict[str, Callable[[RunConfig], int]] = {
    'synth': cmd_synth,
    'train': cmd_train,
    'eval': cmd_eval,
    'ablate': cmd_ablate,
    'profile': cmd_profile,
    'gradcheck': cmd_gradcheck,
    'sweep': cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='thsgr', description=__doc__.strip().splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='key = value run configuration')
    common.add_argument('--seed', type=int)
    common.add_argument('--out', help='output directory')
    common.add_argument('--threads', type=int, help='BLAS / evaluation threads, 1 is deterministic')
    common.add_argument('--ablate-graph', action='store_true', help='fuse o1 + o2 instead')
    common.add_argument('--ablate-modulator', action='store_true', help='use MSA instead')
    common.add_argument('--ablate-meanforward', action='store_true', help='skip token averaging')
    common.add_argument(
        '--set', action='append', default=[], metavar='KEY=VALUE', help='override a config field'
    )
    sub = parser.add_subparsers(dest='command', required=True)
    for name, fn in COMMANDS.items():
        doc = (fn.__doc__ or name).strip().splitlines()[0]
        sub.add_parser(name, parents=[common], help=doc)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    origins: Dict[str, str] = {}
    overrides = parse_assignments(args.set, '--set', origins)
    flags = {
        'seed': args.seed,
        'out_dir': args.out,
        'threads': args.threads,
        'graph_encoder': False if args.ablate_graph else None,
        'modulator': False if args.ablate_modulator else None,
        'mean_forward': False if args.ablate_meanforward else None,
    }
    for key, value in flags.items():
        if value is not None:
            overrides[key] = value
            origins.pop(key, None)
    return load_config(args.config, overrides, origins)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        with threadpool_limits(limits=cfg.threads):
            return COMMANDS[args.command](cfg)
    except ConfigError as e:
        console.print(f'[red]config error[/red] {escape(str(e))}')
        return 2
    except ThsgrError as e:
        console.print(f'[red]error[/red] {escape(str(e))}')
        return 1


if __name__ == '__main__':
    sys.exit(main())
