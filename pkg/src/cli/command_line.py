"""
Command line interface for the texture attack engine
"""

import argparse
import logging
import os
import sys
from dataclasses import replace
from datetime import datetime
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from config.settings import Settings
from ..core.attack import (AttackConfig, attack_suite, baseline_attack, compute_clean_refs,
                           grid_search_baseline, scene_config)
from ..core.evaluation import (jpeg_sweep, loss_ablation_rows, manipulation_suite, self_referential_ap, ssim,
                               synthetic_gt_ap, tradeoff_table)
from ..core.oracles import run_oracle_suite
from ..core.segmenter import SegmenterModel, load_model, save_model, train
from ..data.synthdata import (generate_dataset, generate_style_corpus, load_manifest, load_scene,
                              load_style_corpus, save_style_corpus)
from ..ndgrad.storage import manifest_path
from ..utils.errors import ConfigError, FashionAdvError
from ..utils.file_handler import FileHandler
from ..utils.imaging import load_png
from ..utils.logger import Logger
from .run_config import RunConfig

ABLATIONS = ('loss', 'jpeg-cue', 'target', 'robustness', 'style')
DISABLE_KEYS = {'tex': 'attack.weights.beta', 'sim': 'attack.weights.lambda1', 'tv': 'attack.weights.lambda2'}


class RunRecord:
    """Tracks the artifacts of one run and writes ``run_manifest.json``"""

    def __init__(self, run_dir: str, command: str, config: RunConfig):
        self.run_dir = run_dir
        self.command = command
        self.config = config
        self.artifacts: List[str] = []

    def add(self, *paths: str) -> None:
        for path in paths:
            if path and os.path.isfile(path) and path not in self.artifacts:
                self.artifacts.append(path)

    def subdir(self, name: str) -> str:
        path = os.path.join(self.run_dir, name)
        os.makedirs(path, exist_ok=True)
        return path

    def finish(self, status: str, summary: Optional[dict] = None, error: Optional[dict] = None) -> str:
        payload = {
            'command': self.command,
            'status': status,
            'config_hash': self.config.digest(),
            'artifacts': [{'path': FileHandler.relative_to(p, self.run_dir), 'sha256': FileHandler.sha256_file(p)}
                          for p in self.artifacts],
            'summary': summary or {},
        }
        if error:
            payload['error'] = error
        return FileHandler.write_json(os.path.join(self.run_dir, Settings.RUN_MANIFEST_NAME), payload)


class CommandLineInterface:
    """Command line interface for the texture attack engine"""

    def __init__(self):
        self.logger = Logger.setup_logger('src')

    def create_parser(self) -> argparse.ArgumentParser:
        """Create and configure argument parser"""
        common = argparse.ArgumentParser(add_help=False)
        common.add_argument('--config', type=str, help='JSON run configuration file')
        common.add_argument('--seed', type=int, help='Global seed')
        common.add_argument('--outdir', type=str, help='Root directory for run outputs')
        common.add_argument('--workers', type=int, help='Worker threads across scenes (1 is the reference)')
        common.add_argument('--run-id', type=str, help='Run directory name (default: timestamp + config hash)')
        common.add_argument('--verbose', '-v', action='store_true', help='Enable verbose logging')
        common.add_argument('--log-file', type=str, help='Path to log file (optional)')

        attack_flags = argparse.ArgumentParser(add_help=False)
        attack_flags.add_argument('--styles', type=str, help='Style corpus directory (default: generated)')
        attack_flags.add_argument('--mode', choices=('random', 'optimal'), help='Style selection mode')
        attack_flags.add_argument('--iterations', type=int, help='Attack iterations')
        attack_flags.add_argument('--no-jpeg-cue', action='store_true',
                                  help='Drop the JPEG stage from robustness training')
        attack_flags.add_argument('--cls-only', action='store_true', help='Attack the classification branch only')
        attack_flags.add_argument('--disable', choices=tuple(DISABLE_KEYS), action='append', default=[],
                                  help='Disable a naturalness loss component (repeatable)')
        attack_flags.add_argument('--suite-size', type=int, help='Number of held-out scenes to attack')

        parser = argparse.ArgumentParser(
            description='Fashion-guided adversarial textures against a person segmenter',
            formatter_class=argparse.RawDescriptionHelpFormatter,
            epilog="""
Examples:
  %(prog)s gen-data --outdir runs --n-train 1000 --n-test 1000
  %(prog)s train --data runs/gen-data/<run-id>/data/manifest.jsonl
  %(prog)s attack --data <manifest> --model runs/train/<run-id>/segmenter.ndg --mode optimal
  %(prog)s eval --model <model> --attacked runs/attack/<run-id>
  %(prog)s gradcheck
            """
        )
        parser.add_argument('--version', action='version', version=f"{Settings.APP_NAME} v{Settings.APP_VERSION}")
        sub = parser.add_subparsers(dest='command', metavar='command')
        sub.required = True

        gen = sub.add_parser('gen-data', parents=[common], help='Generate the synthetic dataset and style corpus')
        gen.add_argument('--n-train', type=int, help='Training scenes')
        gen.add_argument('--n-test', type=int, help='Held-out scenes')

        trn = sub.add_parser('train', parents=[common], help='Train the segmenter')
        trn.add_argument('--data', type=str, required=True, help='Dataset manifest or directory')
        trn.add_argument('--epochs', type=int, help='Training epochs')

        atk = sub.add_parser('attack', parents=[common, attack_flags], help='Attack held-out scenes')
        atk.add_argument('--data', type=str, required=True, help='Dataset manifest or directory')
        atk.add_argument('--model', type=str, required=True, help='Trained segmenter file')

        evl = sub.add_parser('eval', parents=[common], help='Evaluate an attack run')
        evl.add_argument('--model', type=str, required=True, help='Trained segmenter file')
        evl.add_argument('--attacked', type=str, required=True, help='Attack run directory')

        swp = sub.add_parser('sweep', parents=[common, attack_flags],
                             help='Compare methods across JPEG qualities and run ablations')
        swp.add_argument('--data', type=str, required=True, help='Dataset manifest or directory')
        swp.add_argument('--model', type=str, required=True, help='Trained segmenter file')
        swp.add_argument('--ablations', choices=ABLATIONS, action='append', default=[],
                         help='Ablation families to run (repeatable)')

        grd = sub.add_parser('gradcheck', parents=[common], help='Run the finite-difference oracle suite')
        grd.add_argument('--ops', nargs='*', help='Restrict to these registered cases')
        grd.add_argument('--tol', type=float, default=Settings.GRADCHECK['tol'], help='Relative tolerance')

        demo = sub.add_parser('demo', parents=[common, attack_flags],
                              help='gen-data, train, attack and eval in one run')
        demo.add_argument('--n-train', type=int, help='Training scenes')
        demo.add_argument('--n-test', type=int, help='Held-out scenes')
        demo.add_argument('--epochs', type=int, help='Training epochs')
        return parser

    # -- configuration ---------------------------------------------------------------------

    def resolve_config(self, args) -> RunConfig:
        """Settings defaults < config file < flags"""
        cfg = RunConfig.load(getattr(args, 'config', None))
        overrides = {
            'seed': getattr(args, 'seed', None),
            'outdir': getattr(args, 'outdir', None),
            'workers': getattr(args, 'workers', None),
            'dataset.n_train': getattr(args, 'n_train', None),
            'dataset.n_test': getattr(args, 'n_test', None),
            'training.epochs': getattr(args, 'epochs', None),
            'attack.style_mode': getattr(args, 'mode', None),
            'attack.iterations': getattr(args, 'iterations', None),
            'suite.suite_size': getattr(args, 'suite_size', None),
        }
        for key, value in overrides.items():
            if value is not None:
                cfg = cfg.override(key, value)
        if getattr(args, 'no_jpeg_cue', False):
            cfg = cfg.override('attack.eot.jpeg', False)
        if getattr(args, 'cls_only', False):
            cfg = cfg.override('attack.weights.mask_weight', 0.0)
        for component in getattr(args, 'disable', None) or []:
            cfg = cfg.override(DISABLE_KEYS[component], 0.0)
        cfg.validate()
        return cfg

    def validate_arguments(self, args) -> bool:
        """Validate command line paths"""
        for flag in ('data', 'model', 'attacked', 'styles'):
            path = getattr(args, flag, None)
            if path and not FileHandler.validate_input_path(path):
                self.logger.error(f"Invalid --{flag} path: {path}")
                return False
        return True

    # -- commands ------------------------------------------------------------------------------

    def cmd_gen_data(self, cfg: RunConfig, rec: RunRecord, workdir: str) -> dict:
        spec = replace(cfg.dataset.scene, seed=cfg.seed)
        manifest = generate_dataset(spec, cfg.dataset.n_train, cfg.dataset.n_test, seed=cfg.seed,
                                    outdir=os.path.join(workdir, 'data'), workers=cfg.workers)
        styles = generate_style_corpus(cfg.dataset.n_styles, seed=cfg.derived_seed(1), size=cfg.dataset.style_size)
        style_dir = os.path.join(workdir, 'styles')
        rec.add(manifest, os.path.join(os.path.dirname(manifest), 'dataset.json'),
                *save_style_corpus(styles, style_dir))
        return {'data': manifest, 'styles': style_dir, 'n_train': cfg.dataset.n_train, 'n_test': cfg.dataset.n_test}

    def cmd_train(self, cfg: RunConfig, rec: RunRecord, workdir: str, data: str) -> dict:
        scenes = [load_scene(r) for r in load_manifest(data, 'train')]
        model = SegmenterModel(replace(cfg.model, seed=cfg.derived_seed(2, cfg.model.seed)))
        model, log = train(model, scenes, cfg.training.epochs, cfg.training.lr, seed=cfg.derived_seed(3),
                           batch_size=cfg.training.batch_size)
        model_path = save_model(model, os.path.join(workdir, 'segmenter.ndg'))

        held_out = [load_scene(r) for r in load_manifest(data, 'test')[:cfg.training.eval_scenes]]
        result = synthetic_gt_ap(model, [s.image for s in held_out], [s.instance_masks for s in held_out],
                                 cfg.decode, cfg.suite.ap)
        metrics = {'mask_ap': result.ap, 'ap50': result.at(0.5), 'held_out_scenes': len(held_out),
                   'final_loss': float(log['loss'].iloc[-1])}
        Logger.event(self.logger, 'train_done', **metrics)
        rec.add(model_path, manifest_path(model_path),
                FileHandler.save_csv(log, os.path.join(workdir, 'training_log.csv')),
                FileHandler.write_json(os.path.join(workdir, 'metrics.json'), metrics))
        return {'model': model_path, **metrics}

    def _corpus(self, cfg: RunConfig, styles: Optional[str]) -> List[np.ndarray]:
        if styles:
            return load_style_corpus(styles)
        return generate_style_corpus(cfg.dataset.n_styles, seed=cfg.derived_seed(1), size=cfg.dataset.style_size)

    def _suite(self, cfg: RunConfig, data: str):
        records = load_manifest(data, 'test')[:cfg.suite.suite_size]
        return records, [load_scene(r) for r in records]

    def _attack_config(self, cfg: RunConfig) -> AttackConfig:
        return replace(cfg.attack, seed=cfg.derived_seed(4, cfg.attack.seed))

    def cmd_attack(self, cfg: RunConfig, rec: RunRecord, workdir: str, data: str, model_path: str,
                   styles: Optional[str] = None) -> dict:
        model = load_model(model_path)
        corpus = self._corpus(cfg, styles)
        records, scenes = self._suite(cfg, data)
        attack_cfg = self._attack_config(cfg)
        results = attack_suite(scenes, model, corpus, attack_cfg, cfg.workers, decode_cfg=cfg.decode)

        scene_dir = os.path.join(workdir, 'scenes')
        rows, index = [], []
        for record, scene, result in zip(records, scenes, results):
            paths = result.save(scene_dir, scene_config(attack_cfg, len(index)))
            rec.add(*paths)
            rows.append({**result.summary(), 'ssim': ssim(scene.image, result.image)})
            index.append({'id': record['id'], 'record': {k: v for k, v in record.items() if k != 'root'},
                          'adversarial': FileHandler.relative_to(paths[0], workdir)})
        summary = pd.DataFrame(rows).drop(columns=['seeds'])
        rec.add(FileHandler.save_csv(summary, os.path.join(workdir, 'attack_summary.csv')),
                FileHandler.write_json(os.path.join(workdir, 'attack_index.json'),
                                       {'data_root': records[0]['root'], 'model': os.path.abspath(model_path),
                                        'scenes': index}))
        stats = {'scenes': len(results), 'mean_ssim': float(summary['ssim'].mean()),
                 'clean_detections': int(summary['clean_detections'].sum()),
                 'post_detections': int(summary['post_detections'].sum())}
        Logger.event(self.logger, 'attack_suite_done', **stats)
        return stats

    def cmd_eval(self, cfg: RunConfig, rec: RunRecord, workdir: str, model_path: str, attacked: str) -> dict:
        index_path = os.path.join(attacked, 'attack_index.json')
        if not os.path.isfile(index_path):
            raise ConfigError("attack run directory has no attack_index.json", path=attacked)
        index = FileHandler.read_json(index_path)
        model = load_model(model_path)
        scenes = [load_scene(entry['record'], index['data_root']) for entry in index['scenes']]
        clean = [s.image for s in scenes]
        adversarial = [load_png(os.path.join(attacked, entry['adversarial'])) for entry in index['scenes']]

        reports = [jpeg_sweep(model, adversarial, clean, cfg.suite.qfs, cfg.decode, cfg.suite.ap)]
        for mode in cfg.suite.modes:
            reports.append(manipulation_suite(model, adversarial, clean, mode, seed=cfg.derived_seed(5),
                                              decode_cfg=cfg.decode, ap_cfg=cfg.suite.ap,
                                              include_identity=cfg.suite.include_identity))
        gts = [s.instance_masks for s in scenes]
        metrics = {
            'self_referential_ap': reports[0].ap('none'),
            'mean_ssim': reports[0].mean_ssim,
            'clean_gt_ap': synthetic_gt_ap(model, clean, gts, cfg.decode, cfg.suite.ap).ap,
            'attacked_gt_ap': synthetic_gt_ap(model, adversarial, gts, cfg.decode, cfg.suite.ap).ap,
            'scenes': len(scenes),
        }
        for report in reports:
            rec.add(*report.save(workdir))
        sheets = {'metrics': pd.DataFrame([metrics])}
        sheets.update({report.name: report.to_frame() for report in reports})
        rec.add(FileHandler.write_json(os.path.join(workdir, 'metrics.json'), metrics),
                FileHandler.save_to_excel(sheets, os.path.join(workdir, 'eval_report.xlsx')))
        Logger.event(self.logger, 'eval_done', **metrics)
        return metrics

    def _run_variant(self, name: str, cfg: RunConfig, attack_cfg: AttackConfig, model, corpus, scenes) -> List[np.ndarray]:
        self.logger.info(f"Sweep variant {name}: {len(scenes)} scenes")
        results = attack_suite(scenes, model, corpus, attack_cfg, cfg.workers, decode_cfg=cfg.decode)
        return [r.image for r in results]

    def cmd_sweep(self, cfg: RunConfig, rec: RunRecord, workdir: str, data: str, model_path: str,
                  styles: Optional[str] = None, ablations: Sequence[str] = ()) -> dict:
        model = load_model(model_path)
        corpus = self._corpus(cfg, styles)
        _, scenes = self._suite(cfg, data)
        clean = [s.image for s in scenes]
        attack_cfg = self._attack_config(cfg)
        report_dir = os.path.join(workdir, 'reports')

        adversarial: Dict[str, List[np.ndarray]] = {
            'fashionadv': self._run_variant('fashionadv', cfg, attack_cfg, model, corpus, scenes)}

        baseline_rows = []
        calibration = [load_scene(r).image for r in load_manifest(data, 'train')[:cfg.suite.calibration_scenes]]
        frozen = model.frozen()
        for kind in cfg.suite.baselines:
            params = {'epsilon': cfg.suite.baseline_epsilon, 'steps': cfg.suite.baseline_steps,
                      'step_size': cfg.suite.baseline_step_size}
            if cfg.suite.grid_search and kind != 'random_noise':
                params, grid = grid_search_baseline(kind, calibration, frozen, cfg.suite.baseline_epsilon,
                                                    cfg.suite.baseline_steps, seed=cfg.derived_seed(6))
                baseline_rows.append(grid)
            adversarial[kind] = [
                baseline_attack(kind, img, frozen, clean_refs=compute_clean_refs(frozen, img, attack_cfg.tau_ref,
                                                                                  cfg.decode),
                                seed=cfg.derived_seed(7, i), tau_ref=attack_cfg.tau_ref, **params)
                for i, img in enumerate(clean)]

        sweeps = {}
        for method, images in adversarial.items():
            report = jpeg_sweep(model, images, clean, cfg.suite.qfs, cfg.decode, cfg.suite.ap,
                                name=f"jpeg_{method}")
            sweeps[method] = report
            rec.add(*report.save(report_dir))

        ablation_rows = []
        ablation_reports = []
        if 'loss' in ablations:
            for label, weights in loss_ablation_rows(attack_cfg.weights):
                images = self._run_variant(f"loss:{label}", cfg, replace(attack_cfg, weights=weights), model,
                                           corpus, scenes)
                ablation_rows.append(self._ablation_row('loss', label, model, clean, images, cfg))
        if 'jpeg-cue' in ablations:
            for label, eot in (('with_jpeg', replace(attack_cfg.eot, jpeg=True)),
                               ('no_jpeg_cue', attack_cfg.eot.without_jpeg())):
                images = self._run_variant(label, cfg, replace(attack_cfg, eot=eot), model, corpus, scenes)
                report = jpeg_sweep(model, images, clean, cfg.suite.qfs, cfg.decode, cfg.suite.ap,
                                    name=f"jpeg_cue_{label}")
                ablation_reports.append(report)
                aps = [row['ap'] for row in report.rows if row['condition'] == 'jpeg']
                ablation_rows.append({**self._ablation_row('jpeg-cue', label, model, clean, images, cfg),
                                      'qf_spread': float(max(aps) - min(aps))})
        if 'target' in ablations:
            joint = replace(attack_cfg.weights, mask_weight=Settings.LOSS_WEIGHTS['mask_weight'])
            for label, weights in (('cls+mask', joint),
                                   ('cls_only', replace(attack_cfg.weights, mask_weight=0.0))):
                images = self._run_variant(label, cfg, replace(attack_cfg, weights=weights), model, corpus, scenes)
                ablation_rows.append(self._ablation_row('target', label, model, clean, images, cfg))
        if 'robustness' in ablations:
            for label, eot in (('robust', attack_cfg.eot), ('standard', attack_cfg.eot.without_robustness())):
                images = self._run_variant(label, cfg, replace(attack_cfg, eot=eot), model, corpus, scenes)
                for mode in cfg.suite.modes:
                    report = manipulation_suite(model, images, clean, mode, seed=cfg.derived_seed(5),
                                                decode_cfg=cfg.decode, ap_cfg=cfg.suite.ap,
                                                name=f"manipulation_{mode}_{label}")
                    ablation_reports.append(report)
        if 'style' in ablations:
            for mode in ('optimal', 'random'):
                images = self._run_variant(f"style:{mode}", cfg, replace(attack_cfg, style_mode=mode), model,
                                           corpus, scenes)
                ablation_rows.append(self._ablation_row('style', mode, model, clean, images, cfg))

        for report in ablation_reports:
            rec.add(*report.save(report_dir))
        tradeoff = tradeoff_table(sweeps, qfs=[q for q in (10, 40, 80) if q in cfg.suite.qfs])
        sheets = {'tradeoff': tradeoff, 'jpeg': pd.concat([r.to_frame() for r in sweeps.values()], ignore_index=True)}
        if baseline_rows:
            sheets['baseline_grid'] = pd.concat(baseline_rows, ignore_index=True)
        if ablation_rows:
            sheets['ablations'] = pd.DataFrame(ablation_rows)
        if ablation_reports:
            sheets['ablation_reports'] = pd.concat([r.to_frame() for r in ablation_reports], ignore_index=True)
        for name, frame in sheets.items():
            rec.add(FileHandler.save_csv(frame, os.path.join(workdir, f"{name}.csv")))
        rec.add(FileHandler.save_to_excel(sheets, os.path.join(workdir, 'sweep_report.xlsx')))
        return {'methods': list(sweeps), 'ablations': list(ablations),
                'fashionadv_ap': sweeps['fashionadv'].ap('none')}

    def _ablation_row(self, family: str, label: str, model, clean, images, cfg: RunConfig) -> dict:
        result = self_referential_ap(model, clean, images, cfg.decode, cfg.suite.ap)
        return {'family': family, 'variant': label, 'ap': result.ap,
                'mean_ssim': float(np.mean([ssim(c, a) for c, a in zip(clean, images)]))}

    def cmd_gradcheck(self, cfg: RunConfig, rec: RunRecord, workdir: str, ops: Optional[Sequence[str]] = None,
                      tol: float = Settings.GRADCHECK['tol']) -> dict:
        table = run_oracle_suite(tol=tol, names=ops)
        rec.add(FileHandler.save_csv(table, os.path.join(workdir, 'gradcheck.csv')))
        print(table.to_string(index=False))
        failed = table.loc[~table['passed'], 'name'].unique().tolist()
        return {'cases': int(len(table)), 'failed': failed, 'passed': not failed}

    def cmd_demo(self, cfg: RunConfig, rec: RunRecord, workdir: str, styles: Optional[str] = None) -> dict:
        data = self.cmd_gen_data(cfg, rec, rec.subdir('gen-data'))
        trained = self.cmd_train(cfg, rec, rec.subdir('train'), data['data'])
        attack_dir = rec.subdir('attack')
        self.cmd_attack(cfg, rec, attack_dir, data['data'], trained['model'], styles or data['styles'])
        return self.cmd_eval(cfg, rec, rec.subdir('eval'), trained['model'], attack_dir)

    # -- entry point ------------------------------------------------------------------------------

    def dispatch(self, args, cfg: RunConfig, rec: RunRecord) -> dict:
        workdir = rec.run_dir
        if args.command == 'gen-data':
            return self.cmd_gen_data(cfg, rec, workdir)
        if args.command == 'train':
            return self.cmd_train(cfg, rec, workdir, args.data)
        if args.command == 'attack':
            return self.cmd_attack(cfg, rec, workdir, args.data, args.model, args.styles)
        if args.command == 'eval':
            return self.cmd_eval(cfg, rec, workdir, args.model, args.attacked)
        if args.command == 'sweep':
            return self.cmd_sweep(cfg, rec, workdir, args.data, args.model, args.styles, args.ablations)
        if args.command == 'gradcheck':
            return self.cmd_gradcheck(cfg, rec, workdir, args.ops, args.tol)
        return self.cmd_demo(cfg, rec, workdir, args.styles)

    def run(self, args=None) -> int:
        """Main entry point for CLI; returns the process exit status"""
        parser = self.create_parser()
        args = parser.parse_args(args)

        log_level = logging.DEBUG if args.verbose else logging.INFO
        self.logger = Logger.setup_logger('src', log_level, args.log_file)

        if not self.validate_arguments(args):
            parser.print_help()
            return 1

        try:
            cfg = self.resolve_config(args)
        except FashionAdvError as e:
            self.logger.error(f"Invalid configuration: {e.to_dict()}")
            return 1

        if not FileHandler.validate_output_path(cfg.outdir):
            self.logger.error(f"Invalid output path or insufficient permissions: {cfg.outdir}")
            return 1

        run_id = args.run_id or f"{datetime.now().strftime('%Y%m%d-%H%M%S')}-{cfg.digest()[:8]}"
        run_dir = FileHandler.create_run_directory(cfg.outdir, args.command, run_id)
        run_log = os.path.abspath(os.path.join(run_dir, 'run.log'))
        Logger.add_file_handler(self.logger, run_log, log_level)
        rec = RunRecord(run_dir, args.command, cfg)
        rec.add(*cfg.save(run_dir))
        self.logger.info(f"Starting {args.command} in {run_dir}")

        status, summary = 'failed', None
        error = {'error': 'Interrupted', 'message': f"{args.command} did not complete"}
        try:
            summary = self.dispatch(args, cfg, rec)
            status, error = ('ok' if summary.get('passed', True) else 'failed'), None
        except FashionAdvError as e:
            self.logger.error(f"{args.command} failed: {e.to_dict()}")
            error = e.to_dict()
        except Exception as e:
            self.logger.error(f"{args.command} failed with an unexpected error: {str(e)}")
            error = {'error': type(e).__name__, 'message': str(e)}
        finally:
            Logger.remove_file_handler(self.logger, run_log)
            rec.add(run_log)
            rec.finish(status, summary, error=error)

        if status == 'ok':
            self.logger.info(f"{args.command} completed; outputs in {run_dir}")
        elif summary is not None:
            self.logger.info(f"{args.command} completed with failures; outputs in {run_dir}")
        return 0 if status == 'ok' else 1


def main():
    """Entry point for the CLI"""
    cli = CommandLineInterface()
    sys.exit(cli.run())


if __name__ == "__main__":
    main()
