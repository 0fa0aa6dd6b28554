"""
Unit tests for the feature extractor, Gram matrices and every loss term
"""

import unittest
import os
import tempfile
from types import SimpleNamespace

import numpy as np

import sys
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from src.core.features import FeatureExtractor, FeatureTaps, cross_layer_gram, layer_weights
from src.core.losses import (CleanRefs, LossWeights, TextureTargets, loss_adversarial, loss_content, loss_sim,
                             loss_style, loss_total, loss_tv, ms_ssim_scales)
from src.core.oracles import run_oracle_suite
from src.ndgrad.tensor import Tensor
from src.utils.errors import ShapeError, StorageError


def _small_extractor():
    return FeatureExtractor(widths=(4, 6, 6), convs_per_stage=(1, 1, 1), seed=11)


def _small_taps():
    return FeatureTaps(content=('conv2_1',), style=('conv1_1', 'conv2_1', 'conv3_1'))


def _fake_detector(person_probs, proto_logit=0.0, proto_shape=(4, 4)):
    """Detector output with given person probabilities and constant mask logits"""
    p = np.asarray(person_probs, dtype=np.float64)
    probs = np.stack([1.0 - p, p], axis=1)
    coeffs = np.zeros((len(p), 1))
    coeffs[:, 0] = 1.0
    prototypes = np.full((1,) + proto_shape, proto_logit)
    return SimpleNamespace(probs=Tensor(probs), coeffs=Tensor(coeffs), prototypes=Tensor(prototypes))


class TestFeatureExtractor(unittest.TestCase):
    """Seeded convolutional features"""

    def setUp(self):
        self.extractor = FeatureExtractor()
        self.img = np.random.default_rng(0).uniform(size=(3, 64, 64))

    def test_default_layout(self):
        self.assertEqual(self.extractor.num_stages, 5)
        self.assertIn('conv4_2', self.extractor.layer_names)
        self.extractor.validate_taps(FeatureTaps())

    def test_halving_schedule(self):
        feats = self.extractor.extract(self.img)
        expected = {'conv1_1': (8, 64, 64), 'conv2_1': (16, 32, 32), 'conv3_1': (32, 16, 16),
                    'conv4_1': (32, 8, 8), 'conv4_2': (32, 8, 8), 'conv5_1': (32, 4, 4)}
        for tap, shape in expected.items():
            with self.subTest(tap=tap):
                self.assertEqual(feats[tap].shape, shape)

    def test_zero_image_gives_zero_features(self):
        feats = self.extractor.extract(np.zeros((3, 32, 32)))
        for tap, value in feats.items():
            with self.subTest(tap=tap):
                self.assertFalse(np.any(value.data))

    def test_deterministic_and_frozen(self):
        other = FeatureExtractor()
        a = self.extractor.extract(self.img, ['conv3_1'])['conv3_1'].data
        b = other.extract(self.img, ['conv3_1'])['conv3_1'].data
        self.assertTrue(np.array_equal(a, b))
        with self.assertRaises(ValueError):
            self.extractor.params['conv1_1.weight'][0, 0, 0, 0] = 1.0

    def test_underflow(self):
        with self.assertRaises(ShapeError):
            self.extractor.extract(np.zeros((3, 31, 64)))

    def test_unknown_tap(self):
        with self.assertRaises(KeyError):
            self.extractor.extract(self.img, ['conv9_1'])

    def test_save_and_load(self):
        path = os.path.join(tempfile.mkdtemp(), 'features.ndg')
        extractor = _small_extractor()
        extractor.save(path)
        loaded = FeatureExtractor.load(path)
        img = self.img[:, :16, :16]
        np.testing.assert_array_equal(loaded.extract(img)['conv3_1'].data, extractor.extract(img)['conv3_1'].data)

    def test_load_wrong_kind(self):
        from src.ndgrad.storage import save_archive

        path = os.path.join(tempfile.mkdtemp(), 'other.ndg')
        save_archive(path, {'a': np.zeros(2)}, meta={'kind': 'segmenter'})
        with self.assertRaises(StorageError):
            FeatureExtractor.load(path)

    def test_layer_weights(self):
        weights = layer_weights(self.extractor, FeatureTaps())
        self.assertAlmostEqual(weights['style']['conv1_1'], 1.0 / 16 ** 2)
        self.assertAlmostEqual(weights['style']['conv4_1'], 1.0 / 32 ** 2)
        self.assertEqual(len(weights['style']), 4)
        self.assertAlmostEqual(weights['content']['conv4_2'], 1.0 / 32 ** 2)


class TestCrossLayerGram(unittest.TestCase):
    """Cross-layer Gram matrices"""

    def test_zero_and_constant(self):
        np.testing.assert_array_equal(cross_layer_gram(np.zeros((2, 4, 4)), np.zeros((3, 2, 2))).data,
                                      np.zeros((2, 3)))
        g = cross_layer_gram(np.full((1, 4, 4), 0.7), np.full((1, 4, 4), 0.7)).data
        np.testing.assert_allclose(g, [[0.49]])

    def test_symmetric_psd(self):
        f = np.random.default_rng(1).standard_normal((5, 6, 6))
        g = cross_layer_gram(f, f).data
        np.testing.assert_allclose(g, g.T, atol=1e-12)
        self.assertGreaterEqual(np.linalg.eigvalsh(g).min(), -1e-10)

    def test_resizes_deeper_map(self):
        self.assertEqual(cross_layer_gram(np.ones((3, 8, 8)), np.ones((4, 4, 4))).shape, (3, 4))

    def test_empty(self):
        with self.assertRaises(ShapeError):
            cross_layer_gram(np.zeros((0, 4, 4)), np.zeros((2, 4, 4)))


class TestNaturalnessLosses(unittest.TestCase):
    """TV, MS-SSIM, content and style"""

    def setUp(self):
        self.rng = np.random.default_rng(2)
        self.img = self.rng.uniform(0.2, 0.8, size=(3, 32, 32))
        self.extractor = _small_extractor()
        self.taps = _small_taps()

    def test_tv(self):
        self.assertEqual(loss_tv(np.full((3, 8, 8), 0.4)).item(), 0.0)
        ramp = np.tile(np.arange(10, dtype=np.float64) * 0.05, (1, 6, 1))
        self.assertAlmostEqual(loss_tv(ramp).item(), 0.05 ** 2)

    def test_scale_count(self):
        self.assertEqual(ms_ssim_scales(96, 96), 3)
        self.assertEqual(ms_ssim_scales(176, 176), 4)
        self.assertEqual(ms_ssim_scales(352, 352), 5)
        self.assertEqual(ms_ssim_scales(11, 40), 1)
        with self.assertRaises(ShapeError):
            ms_ssim_scales(8, 8)

    def test_sim(self):
        self.assertLessEqual(abs(loss_sim(self.img, self.img).item()), 1e-9)
        ys, xs = np.mgrid[0:48, 0:48]
        pattern = 0.5 + 0.25 * np.sin(xs / 3.0) * np.cos(ys / 4.0)
        mid = np.stack([pattern, pattern[::-1], pattern.T])
        self.assertGreater(loss_sim(mid, 1.0 - mid).item(), 0.5)

    def test_content(self):
        self.assertEqual(loss_content(self.img, self.img, self.extractor, self.taps).item(), 0.0)
        direction = self.rng.standard_normal(self.img.shape)
        small = loss_content(self.img + 1e-3 * direction, self.img, self.extractor, self.taps).item()
        double = loss_content(self.img + 2e-3 * direction, self.img, self.extractor, self.taps).item()
        self.assertAlmostEqual(double / small, 4.0, delta=0.2)

    def test_style(self):
        style = self.rng.uniform(size=(3, 32, 32))
        self.assertAlmostEqual(loss_style(style, style, self.extractor, self.taps).item(), 0.0, places=12)
        shuffled = style.reshape(3, -1)[:, self.rng.permutation(32 * 32)].reshape(3, 32, 32)
        self.assertGreater(loss_style(self.img, style, self.extractor, self.taps).item(), 0.0)
        self.assertNotEqual(loss_style(self.img, style, self.extractor, self.taps).item(),
                            loss_style(self.img, shuffled, self.extractor, self.taps).item())


class TestAdversarialLoss(unittest.TestCase):
    """Suppression of flagged person evidence"""

    def test_zero_probability(self):
        det = _fake_detector([0.0, 0.0])
        refs = CleanRefs(np.array([0, 1]), np.ones((2, 4, 4)))
        l_cls, _ = loss_adversarial(det, refs)
        self.assertAlmostEqual(l_cls.item(), -np.log(1 - 1e-6), places=12)

    def test_half_probability(self):
        det = _fake_detector([0.5])
        refs = CleanRefs(np.array([0]), np.ones((1, 4, 4)))
        l_cls, l_mask = loss_adversarial(det, refs)
        self.assertAlmostEqual(l_cls.item(), 0.6931, places=4)
        self.assertAlmostEqual(l_mask.item(), np.log(2.0), places=12)

    def test_mask_limited_to_clean_pixels(self):
        det = _fake_detector([0.5, 0.5], proto_logit=2.0)
        masks = np.zeros((2, 4, 4))
        masks[1, :2, :2] = 1.0
        _, l_mask = loss_adversarial(det, CleanRefs(np.array([0, 1]), masks))
        self.assertAlmostEqual(l_mask.item(), -np.log(1.0 - 1.0 / (1.0 + np.exp(-2.0))), places=12)

    def test_no_flagged_anchors(self):
        l_cls, l_mask = loss_adversarial(_fake_detector([0.9]), CleanRefs.none((4, 4)))
        self.assertEqual((l_cls.item(), l_mask.item()), (0.0, 0.0))


class TestLossTotal(unittest.TestCase):
    """Weighted composition"""

    def setUp(self):
        self.rng = np.random.default_rng(3)
        self.extractor = _small_extractor()
        self.taps = _small_taps()

    def test_adversarial_only(self):
        weights = LossWeights(beta=0.0, lambda1=0.0, lambda2=0.0, mask_weight=0.0)
        x = self.rng.uniform(size=(3, 32, 32))
        det = _fake_detector([0.5])
        refs = CleanRefs(np.array([0]), np.ones((1, 4, 4)))
        breakdown = loss_total(x, x * 0.5, x, det, refs, weights)
        self.assertAlmostEqual(breakdown.total, 0.2 * np.log(2.0), places=12)
        self.assertEqual(breakdown.l_sim, 0.0)
        self.assertEqual(breakdown.l_tex, 0.0)

    def test_identical_everything_is_zero(self):
        x = np.full((3, 32, 32), 0.45)
        targets = TextureTargets.build(self.extractor, x, x, self.taps)
        breakdown = loss_total(x, x, x, None, None, LossWeights(), targets=targets)
        self.assertAlmostEqual(breakdown.total, 0.0, places=9)

    def test_recomposition_identities(self):
        """Test the weighted sums recompose on random inputs and weights"""
        for trial in range(5):
            with self.subTest(trial=trial):
                x = self.rng.uniform(size=(3, 32, 32))
                x_adv = np.clip(x + self.rng.uniform(-0.2, 0.2, size=x.shape), 0, 1)
                style = self.rng.uniform(size=(3, 24, 24))
                weights = LossWeights(alpha=self.rng.uniform(0, 1), beta=self.rng.uniform(0, 10),
                                      lambda1=self.rng.uniform(0, 1), lambda2=self.rng.uniform(0, 1))
                det = _fake_detector(self.rng.uniform(0.1, 0.9, size=3))
                refs = CleanRefs(np.array([0, 2]), (self.rng.uniform(size=(2, 4, 4)) > 0.5).astype(float))
                targets = TextureTargets.build(self.extractor, x, style, self.taps)
                b = loss_total(x, x_adv, style, det, refs, weights, targets=targets)

                def close(a, c):
                    self.assertLessEqual(abs(a - c), 1e-9 * max(1.0, abs(a), abs(c)))

                close(b.total, weights.alpha * b.l_adv + b.l_nat)
                close(b.l_nat, b.l_inc + weights.beta * b.l_tex)
                close(b.l_inc, weights.lambda1 * b.l_sim + weights.lambda2 * b.l_tv)
                close(b.l_tex, b.l_c + b.l_s)
                close(b.l_adv, b.l_cls + b.l_mask)
                for name, value in b.to_row().items():
                    self.assertGreaterEqual(value, 0.0, name)

    def test_negative_weight_rejected(self):
        with self.assertRaises(ValueError):
            LossWeights(alpha=-1.0).validate()


class TestLossGradients(unittest.TestCase):
    """Finite-difference oracle over the loss cases"""

    def test_loss_cases(self):
        names = ['cross_layer_gram', 'loss_tv', 'loss_sim', 'loss_content', 'loss_style', 'loss_cls', 'loss_mask']
        table = run_oracle_suite(names=names, max_coords=16)
        self.assertEqual(sorted(set(table['name'])), sorted(names))
        failed = table[~table['passed']]
        self.assertTrue(failed.empty, failed.to_string())


if __name__ == '__main__':
    unittest.main()
