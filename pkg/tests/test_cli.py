"""
Unit tests for the run configuration and the command line interface
"""

import unittest
import os
import tempfile
from unittest.mock import patch

import sys
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from src.cli.command_line import CommandLineInterface
from src.cli.run_config import RunConfig
from src.utils.errors import ConfigError, DatasetError
from src.utils.file_handler import FileHandler


class TestRunConfig(unittest.TestCase):
    """Loading, overriding and hashing"""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def test_defaults_validate(self):
        RunConfig().validate()

    def test_unknown_key_names_the_path(self):
        cases = {
            'attack.iters': {'attack': {'iters': 5}},
            'colour': {'colour': 'red'},
            'attack.weights.gamma': {'attack': {'weights': {'gamma': 1.0}}},
        }
        for key, payload in cases.items():
            with self.subTest(key=key):
                with self.assertRaises(ConfigError) as ctx:
                    RunConfig.from_dict(payload)
                self.assertEqual(ctx.exception.context['key'], key)

    def test_nested_values_and_tuples(self):
        cfg = RunConfig.from_dict({'seed': 3, 'attack': {'eot': {'jpeg_qf': [15, 25]}},
                                   'suite': {'qfs': [10, 20]}})
        self.assertEqual(cfg.seed, 3)
        self.assertEqual(cfg.attack.eot.jpeg_qf, (15, 25))
        self.assertEqual(cfg.suite.qfs, (10, 20))
        self.assertEqual(cfg.attack.iterations, RunConfig().attack.iterations)

    def test_override(self):
        cfg = RunConfig().override('attack.weights.beta', 0.0)
        self.assertEqual(cfg.attack.weights.beta, 0.0)
        self.assertNotEqual(RunConfig().attack.weights.beta, 0.0)
        with self.assertRaises(ConfigError) as ctx:
            RunConfig().override('attack.weights.delta', 1.0)
        self.assertEqual(ctx.exception.context['key'], 'attack.weights.delta')

    def test_validation(self):
        bad = {
            'attack.iterations': RunConfig().override('attack.iterations', 0),
            'workers': RunConfig().override('workers', 0),
            'suite.baselines': RunConfig().override('suite.baselines', ['cw']),
            'suite.modes': RunConfig().override('suite.modes', ['medium']),
        }
        for key, cfg in bad.items():
            with self.subTest(key=key):
                with self.assertRaises(ConfigError) as ctx:
                    cfg.validate()
                self.assertEqual(ctx.exception.context['key'], key)

    def test_digest_and_seeds(self):
        a, b = RunConfig(), RunConfig()
        self.assertEqual(a.digest(), b.digest())
        self.assertNotEqual(a.digest(), a.override('seed', 1).digest())
        self.assertEqual(a.derived_seed(4), b.derived_seed(4))
        self.assertNotEqual(a.derived_seed(4), a.derived_seed(5))

    def test_load_and_save(self):
        path = os.path.join(self.temp_dir, 'run.json')
        FileHandler.write_json(path, {'seed': 9, 'workers': 2})
        cfg = RunConfig.load(path)
        self.assertEqual((cfg.seed, cfg.workers), (9, 2))
        config_path, hash_path = cfg.save(self.temp_dir)
        with open(hash_path) as fh:
            self.assertEqual(fh.read().strip(), cfg.digest())
        self.assertEqual(RunConfig.from_dict(FileHandler.read_json(config_path)).digest(), cfg.digest())

    def test_load_errors(self):
        with self.assertRaises(ConfigError):
            RunConfig.load(os.path.join(self.temp_dir, 'missing.json'))
        broken = os.path.join(self.temp_dir, 'broken.json')
        with open(broken, 'w') as fh:
            fh.write('{"seed": ')
        with self.assertRaises(ConfigError):
            RunConfig.load(broken)


class TestCommandLineInterface(unittest.TestCase):
    """Argument parsing, precedence and run records"""

    def setUp(self):
        self.cli = CommandLineInterface()
        self.parser = self.cli.create_parser()
        self.temp_dir = tempfile.mkdtemp()
        self.data = os.path.join(self.temp_dir, 'manifest.jsonl')
        self.model = os.path.join(self.temp_dir, 'segmenter.ndg')
        for path in (self.data, self.model):
            open(path, 'w').close()

    def test_flags_override_config_file(self):
        path = os.path.join(self.temp_dir, 'run.json')
        FileHandler.write_json(path, {'seed': 5, 'attack': {'iterations': 10}})
        args = self.parser.parse_args(['attack', '--data', self.data, '--model', self.model,
                                       '--config', path, '--iterations', '20'])
        cfg = self.cli.resolve_config(args)
        self.assertEqual(cfg.seed, 5)
        self.assertEqual(cfg.attack.iterations, 20)

    def test_ablation_flags(self):
        args = self.parser.parse_args(['attack', '--data', self.data, '--model', self.model,
                                       '--no-jpeg-cue', '--cls-only', '--disable', 'tex', '--disable', 'tv'])
        cfg = self.cli.resolve_config(args)
        self.assertFalse(cfg.attack.eot.jpeg)
        self.assertEqual(cfg.attack.weights.mask_weight, 0.0)
        self.assertEqual((cfg.attack.weights.beta, cfg.attack.weights.lambda2), (0.0, 0.0))
        self.assertGreater(cfg.attack.weights.lambda1, 0.0)

    def test_zero_iterations_exit_status(self):
        status = self.cli.run(['attack', '--data', self.data, '--model', self.model, '--iterations', '0',
                               '--outdir', self.temp_dir])
        self.assertEqual(status, 1)
        self.assertFalse(os.path.exists(os.path.join(self.temp_dir, 'attack')))

    def test_invalid_path_exit_status(self):
        status = self.cli.run(['train', '--data', os.path.join(self.temp_dir, 'nope.jsonl'),
                               '--outdir', self.temp_dir])
        self.assertEqual(status, 1)

    def test_gradcheck_run_record(self):
        status = self.cli.run(['gradcheck', '--ops', 'relu', 'add', '--outdir', self.temp_dir, '--run-id', 'g1'])
        self.assertEqual(status, 0)
        run_dir = os.path.join(self.temp_dir, 'gradcheck', 'g1')
        manifest = FileHandler.read_json(os.path.join(run_dir, 'run_manifest.json'))
        self.assertEqual(manifest['status'], 'ok')
        self.assertEqual(manifest['config_hash'], RunConfig().override('outdir', self.temp_dir).digest())
        paths = {a['path'] for a in manifest['artifacts']}
        self.assertTrue({'config.json', 'config.sha256', 'gradcheck.csv', 'run.log'} <= paths)

    def test_failed_command_records_error(self):
        with patch.object(CommandLineInterface, 'cmd_gradcheck', side_effect=DatasetError("no scenes")):
            status = self.cli.run(['gradcheck', '--outdir', self.temp_dir, '--run-id', 'g2'])
        self.assertEqual(status, 1)
        manifest = FileHandler.read_json(os.path.join(self.temp_dir, 'gradcheck', 'g2', 'run_manifest.json'))
        self.assertEqual(manifest['status'], 'failed')
        self.assertEqual(manifest['error']['error'], 'DatasetError')

    def test_unexpected_error_still_finishes_manifest(self):
        with patch.object(CommandLineInterface, 'cmd_gradcheck', side_effect=RuntimeError("disk went away")):
            status = self.cli.run(['gradcheck', '--outdir', self.temp_dir, '--run-id', 'g3'])
        self.assertEqual(status, 1)
        manifest = FileHandler.read_json(os.path.join(self.temp_dir, 'gradcheck', 'g3', 'run_manifest.json'))
        self.assertEqual(manifest['status'], 'failed')
        self.assertEqual(manifest['error'], {'error': 'RuntimeError', 'message': 'disk went away'})
        self.assertIn('run.log', {a['path'] for a in manifest['artifacts']})

    def test_gen_data(self):
        config = os.path.join(self.temp_dir, 'small.json')
        FileHandler.write_json(config, {'dataset': {'n_styles': 3, 'style_size': 32}})
        status = self.cli.run(['gen-data', '--n-train', '2', '--n-test', '1', '--config', config,
                               '--outdir', self.temp_dir, '--run-id', 'd1'])
        self.assertEqual(status, 0)
        run_dir = os.path.join(self.temp_dir, 'gen-data', 'd1')
        self.assertEqual(len(FileHandler.read_jsonl(os.path.join(run_dir, 'data', 'manifest.jsonl'))), 3)
        self.assertEqual(len([f for f in os.listdir(os.path.join(run_dir, 'styles')) if f.endswith('.png')]), 3)


if __name__ == '__main__':
    unittest.main()
