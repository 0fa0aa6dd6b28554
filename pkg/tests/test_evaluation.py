"""
Unit tests for mask AP, SSIM and the robustness reports
"""

import unittest
import os
import tempfile
from dataclasses import replace

import numpy as np

import sys
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from src.core.evaluation import (ApConfig, SuiteReport, blur_sigma, interpolated_precision, jpeg_sweep,
                                 loss_ablation_rows, manipulate, manipulation_suite, mask_ap, mask_iou_matrix,
                                 self_referential_ap, ssim, tradeoff_table)
from src.core.losses import LossWeights
from src.core.segmenter import Detection, SegmenterConfig, SegmenterModel
from src.data.synthdata import SceneSpec, generate_scene
from src.utils.errors import ConfigError, ShapeError


def box_mask(x0, y0, x1, y1, shape=(20, 20)):
    mask = np.zeros(shape)
    mask[y0:y1, x0:x1] = 1.0
    return mask


def det(score, mask):
    return Detection(score, (0.0, 0.0, 1.0, 1.0), mask)


class TestMaskAp(unittest.TestCase):
    """Ranking, matching and interpolation"""

    def setUp(self):
        self.g1 = box_mask(0, 0, 6, 6)
        self.g2 = box_mask(10, 10, 18, 18)
        self.fp = box_mask(0, 12, 5, 18)

    def test_hand_computed_example(self):
        """Test TP, FP, TP at decreasing scores"""
        preds = [[det(0.9, self.g1), det(0.8, self.fp), det(0.7, self.g2)]]
        result = mask_ap(preds, [[self.g1, self.g2]])
        expected = (51 * 1.0 + 50 * (2.0 / 3.0)) / 101
        self.assertAlmostEqual(result.ap, expected)
        for threshold in (0.5, 0.75, 0.95):
            with self.subTest(threshold=threshold):
                self.assertAlmostEqual(result.at(threshold), expected)
        self.assertEqual((result.num_predictions, result.num_ground_truth), (3, 2))

    def test_perfect_predictions(self):
        preds = [[det(0.9, self.g1)], [det(0.8, self.g2)]]
        self.assertAlmostEqual(mask_ap(preds, [[self.g1], [self.g2]]).ap, 1.0)

    def test_threshold_dependence(self):
        shifted = box_mask(1, 0, 7, 6)
        result = mask_ap([[det(0.9, shifted)]], [[self.g1]])
        iou = mask_iou_matrix([shifted], [self.g1])[0, 0]
        self.assertAlmostEqual(iou, 30.0 / 42.0)
        self.assertEqual(result.at(0.7), 1.0)
        self.assertEqual(result.at(0.75), 0.0)

    def test_duplicate_detection_counts_once(self):
        result = mask_ap([[det(0.9, self.g1), det(0.8, self.g1)]], [[self.g1]])
        self.assertAlmostEqual(result.ap, 1.0)
        tp = np.array([1.0, 0.0])
        self.assertAlmostEqual(interpolated_precision(tp, 1, 101), 1.0)

    def test_no_ground_truth(self):
        self.assertEqual(mask_ap([[]], [[]]).ap, 1.0)
        self.assertEqual(mask_ap([[det(0.5, self.g1)]], [[]]).ap, 0.0)

    def test_no_predictions(self):
        self.assertEqual(mask_ap([[]], [[self.g1]]).ap, 0.0)

    def test_extent_mismatch(self):
        with self.assertRaises(ShapeError):
            mask_ap([[det(0.9, np.zeros((8, 8)))]], [[self.g1]])
        with self.assertRaises(ShapeError):
            mask_ap([[], []], [[self.g1]])

    def test_config_validation(self):
        bad = [ApConfig(iou_thresholds=()), ApConfig(iou_thresholds=(0.7, 0.5)),
               ApConfig(iou_thresholds=(0.0, 0.5)), ApConfig(recall_points=1)]
        for config in bad:
            with self.subTest(config=config):
                with self.assertRaises(ConfigError):
                    config.validate()
        self.assertEqual(len(ApConfig().iou_thresholds), 10)


class TestSsim(unittest.TestCase):
    """Structural similarity"""

    def test_identity_and_difference(self):
        img = np.random.default_rng(0).uniform(size=(3, 32, 32))
        self.assertAlmostEqual(ssim(img, img), 1.0)
        self.assertLess(ssim(img, 1.0 - img), 0.5)

    def test_shape_mismatch(self):
        with self.assertRaises(ShapeError):
            ssim(np.zeros((3, 32, 32)), np.zeros((3, 32, 16)))


class TestManipulations(unittest.TestCase):
    """Individual manipulations"""

    def setUp(self):
        self.img = generate_scene(SceneSpec(seed=1)).image

    def test_blur_sigma(self):
        self.assertAlmostEqual(blur_sigma(3), 0.8)
        self.assertAlmostEqual(blur_sigma(5), 1.1)
        self.assertAlmostEqual(blur_sigma(9), 1.7)

    def test_each_condition(self):
        for mode in ('easy', 'hard'):
            for condition in ('identity', 'scaling', 'blurring', 'color_jitter', 'noise'):
                with self.subTest(mode=mode, condition=condition):
                    out, params = manipulate(self.img, condition, mode, np.random.default_rng(0))
                    self.assertEqual(out.shape, self.img.shape)
                    self.assertTrue(np.all((out >= 0) & (out <= 1)))
                    self.assertIsInstance(params, dict)

    def test_parameters(self):
        _, params = manipulate(self.img, 'scaling', 'easy', np.random.default_rng(1))
        self.assertTrue(0.8 <= params['scale'] <= 1.2)
        _, params = manipulate(self.img, 'color_jitter', 'easy', np.random.default_rng(1))
        self.assertEqual(params['method'], 'histogram_equalization')
        out, params = manipulate(self.img, 'noise', 'hard', np.random.default_rng(1))
        self.assertLessEqual(np.max(np.abs(out - self.img)), params['amplitude'] + 1e-12)
        out, _ = manipulate(self.img, 'identity', 'hard', np.random.default_rng(1))
        np.testing.assert_array_equal(out, self.img)

    def test_unknown(self):
        with self.assertRaises(ConfigError):
            manipulate(self.img, 'rotation', 'easy', np.random.default_rng(0))


class TestReports(unittest.TestCase):
    """Suite reports, sweeps and derived tables"""

    def setUp(self):
        config = SegmenterConfig(widths=(4, 4, 6, 6), head_width=6, proto_width=4, num_prototypes=3, seed=3)
        self.model = SegmenterModel(config, trainable=False)
        spec = SceneSpec(height=48, width=48, min_persons=1, max_persons=1)
        self.images = [generate_scene(replace(spec, seed=s)).image for s in (0, 1)]

    def _report(self, name, ap_none, ap_jpeg):
        report = SuiteReport(name, per_image_ssim=[0.9, 0.8])
        report.add_row('none', mask_ap([[]], [[]]) if ap_none else mask_ap([[]], [[np.ones((4, 4))]]), qf=None)
        for qf in (10, 40, 80):
            good = qf in ap_jpeg
            report.add_row('jpeg', mask_ap([[]], [[]]) if good else mask_ap([[]], [[np.ones((4, 4))]]), qf=qf)
        return report

    def test_report_lookup_and_save(self):
        report = self._report('fashionadv', True, (80,))
        self.assertEqual(report.ap('none'), 1.0)
        self.assertEqual(report.ap('jpeg', qf=10), 0.0)
        self.assertEqual(report.ap('jpeg', qf=80), 1.0)
        self.assertAlmostEqual(report.mean_ssim, 0.85)
        with self.assertRaises(KeyError):
            report.ap('jpeg', qf=55)

        frame = report.to_frame()
        self.assertEqual(len(frame), 4)
        self.assertEqual(frame['config_hash'].nunique(), 1)
        paths = report.save(tempfile.mkdtemp())
        self.assertEqual(sorted(os.path.basename(p) for p in paths), ['fashionadv.csv', 'fashionadv.json'])

    def test_tradeoff_table(self):
        table = tradeoff_table({'fashionadv': self._report('a', True, (40, 80)), 'pgd': self._report('b', False, ())})
        self.assertEqual(list(table['method']), ['fashionadv', 'pgd'])
        self.assertEqual(list(table.columns), ['method', 'mean_ssim', 'ap_none', 'ap_qf10', 'ap_qf40', 'ap_qf80'])
        self.assertEqual(table.loc[0, 'ap_qf40'], 1.0)
        self.assertEqual(table.loc[1, 'ap_none'], 0.0)

    def test_loss_ablation_rows(self):
        rows = dict(loss_ablation_rows(LossWeights()))
        self.assertEqual(list(rows), ['adv', 'adv+tex', 'adv+tex+sim', 'adv+tex+tv', 'all'])
        self.assertEqual((rows['adv'].beta, rows['adv'].lambda1, rows['adv'].lambda2), (0.0, 0.0, 0.0))
        self.assertEqual(rows['adv+tex+tv'].lambda1, 0.0)
        self.assertGreater(rows['adv+tex+tv'].lambda2, 0.0)
        self.assertEqual(rows['all'], LossWeights())

    def test_self_referential_identity(self):
        result = self_referential_ap(self.model, self.images, self.images)
        self.assertEqual(result.ap, 1.0)
        with self.assertRaises(ShapeError):
            self_referential_ap(self.model, self.images, self.images[:1])

    def test_jpeg_sweep_rows(self):
        report = jpeg_sweep(self.model, self.images, self.images, qfs=(10, 100))
        self.assertEqual([r['condition'] for r in report.rows], ['none', 'jpeg', 'jpeg'])
        self.assertEqual(report.ap('none'), 1.0)
        self.assertAlmostEqual(report.mean_ssim, 1.0)

    def test_manipulation_suite(self):
        a = manipulation_suite(self.model, self.images, self.images, mode='hard', seed=3, include_identity=True)
        b = manipulation_suite(self.model, self.images, self.images, mode='hard', seed=3, include_identity=True)
        self.assertEqual([r['condition'] for r in a.rows],
                         ['identity', 'scaling', 'blurring', 'color_jitter', 'noise'])
        self.assertEqual(a.ap('identity'), 1.0)
        self.assertEqual(a.rows[1]['params']['per_image'], b.rows[1]['params']['per_image'])
        self.assertAlmostEqual(a.ap('blurring', sigma=blur_sigma(9)), a.rows[2]['ap'])
        with self.assertRaises(ConfigError):
            manipulation_suite(self.model, self.images, self.images, mode='medium')


if __name__ == '__main__':
    unittest.main()
