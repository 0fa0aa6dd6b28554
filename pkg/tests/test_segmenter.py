"""
Unit tests for the prototype-mask segmenter: forward, decode, training and persistence
"""

import unittest
import os
import tempfile
from dataclasses import replace

import numpy as np

import sys
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from src.core.oracles import run_oracle_suite
from src.core.segmenter import (DecodeConfig, DetectorOutput, SegmenterConfig, SegmenterModel, anchor_boxes,
                                assemble_masks, box_iou, decode, detect, load_model, match_anchors, nms,
                                save_model, scene_loss, train)
from src.data.synthdata import SceneSpec, generate_scene
from src.ndgrad.storage import save_archive
from src.ndgrad.tensor import Tensor, parameter
from src.utils.errors import DatasetError, ShapeError, StorageError

SLOW = os.environ.get('FASHIONADV_SLOW') == '1'


def tiny_config(seed=3):
    return SegmenterConfig(widths=(4, 4, 6, 6), head_width=6, proto_width=4, num_prototypes=3, seed=seed)


def small_scenes(n, seed=0):
    spec = SceneSpec(height=48, width=48, min_persons=1, max_persons=1)
    return [generate_scene(replace(spec, seed=seed + i)) for i in range(n)]


def hand_output(scores, boxes, coeffs=None, prototypes=None, image_shape=(16, 16)):
    """Detector output with chosen person scores and anchor boxes"""
    scores = np.asarray(scores, dtype=np.float64)
    probs = np.stack([1.0 - scores, scores], axis=1)
    n = len(scores)
    coeffs = np.ones((n, 1)) if coeffs is None else np.asarray(coeffs, dtype=np.float64)
    prototypes = np.full((coeffs.shape[1], 4, 4), 5.0) if prototypes is None else prototypes
    return DetectorOutput(Tensor(np.log(probs + 1e-12)), Tensor(probs), Tensor(coeffs), Tensor(prototypes),
                          np.asarray(boxes, dtype=np.float64), image_shape)


class TestForward(unittest.TestCase):
    """Head shapes and mask assembly"""

    def setUp(self):
        self.model = SegmenterModel(tiny_config())
        self.img = np.random.default_rng(0).uniform(size=(3, 48, 48))

    def test_output_shapes(self):
        out = self.model.forward(self.img)
        cells = (48 // 8) * (48 // 8) * 3
        self.assertEqual(out.logits.shape, (cells, 2))
        self.assertEqual(out.coeffs.shape, (cells, 3))
        self.assertEqual(out.prototypes.shape, (3, 12, 12))
        self.assertEqual(out.anchors.shape, (cells, 4))
        np.testing.assert_allclose(out.probs.data.sum(axis=1), 1.0)

    def test_deterministic(self):
        a = self.model.forward(self.img).probs.data
        b = SegmenterModel(tiny_config()).forward(self.img).probs.data
        self.assertTrue(np.array_equal(a, b))

    def test_size_must_divide_by_16(self):
        with self.assertRaises(ShapeError):
            self.model.forward(np.zeros((3, 40, 48)))
        with self.assertRaises(ShapeError):
            self.model.forward(np.zeros((1, 48, 48)))

    def test_zero_prototypes_give_half_masks(self):
        params = self.model.parameter_arrays()
        params = {k: (np.zeros_like(v) if k.startswith('proto2') else v) for k, v in params.items()}
        out = SegmenterModel(tiny_config(), params, trainable=False).forward(self.img)
        logits = assemble_masks(out, [0, 5, 17]).data
        np.testing.assert_array_equal(logits, np.zeros_like(logits))

    def test_assembly_is_linear_in_coefficients(self):
        prototypes = np.random.default_rng(1).standard_normal((2, 4, 4))
        single = assemble_masks(hand_output([0.9], [[0, 0, 8, 8]], [[0.3, 0.0]], prototypes), [0]).data
        double = assemble_masks(hand_output([0.9], [[0, 0, 8, 8]], [[0.6, 0.0]], prototypes), [0]).data
        np.testing.assert_allclose(double, 2.0 * single)
        np.testing.assert_allclose(single[0], 0.3 * prototypes[0])

    def test_frozen_copy_records_no_gradient(self):
        frozen = self.model.frozen()
        x = parameter(self.img)
        out = frozen.forward(x)
        out.probs[:, 1].sum().backward()
        self.assertIsNotNone(x.grad)
        self.assertTrue(all(p.grad is None for p in self.model.params.values()))
        self.assertIs(frozen.frozen(), frozen)

    def test_anchor_grid(self):
        boxes = anchor_boxes(tiny_config(), 48, 48)
        self.assertEqual(len(boxes), 6 * 6 * 3)
        self.assertTrue(np.all(boxes[:, 0] >= 0) and np.all(boxes[:, 2] <= 48))

    def test_forward_gradient(self):
        table = run_oracle_suite(names=['segmenter_forward'], seeds=(0,), max_coords=12)
        self.assertTrue(bool(table['passed'].all()), table.to_string())


class TestDecode(unittest.TestCase):
    """Threshold, NMS and mask binarization"""

    def test_identical_anchors_collapse(self):
        out = hand_output([0.9, 0.8], [[0, 0, 8, 8], [0, 0, 8, 8]])
        detections = decode(out)
        self.assertEqual(len(detections), 1)
        self.assertEqual(detections[0].anchor, 0)

    def test_nothing_above_threshold(self):
        self.assertEqual(decode(hand_output([0.1, 0.2], [[0, 0, 8, 8], [4, 4, 12, 12]])), [])

    def test_moderate_overlap_keeps_both(self):
        boxes = [[0.0, 0.0, 10.0, 10.0], [30.0 / 7.0, 0.0, 100.0 / 7.0, 10.0]]
        self.assertAlmostEqual(box_iou(boxes[0], boxes[1])[0, 0], 0.4)
        out = hand_output([0.9, 0.8], boxes, image_shape=(16, 16))
        self.assertEqual(len(decode(out, nms_iou=0.5)), 2)

    def test_mask_cropped_to_box(self):
        out = hand_output([0.9], [[4.0, 4.0, 12.0, 12.0]])
        mask = decode(out)[0].mask
        self.assertEqual(mask.shape, (16, 16))
        self.assertEqual(mask[:4].sum() + mask[12:].sum() + mask[:, :4].sum() + mask[:, 12:].sum(), 0)
        self.assertEqual(mask[4:12, 4:12].sum(), 64)

    def test_nms_order_invariant_to_monotone_scores(self):
        rng = np.random.default_rng(2)
        xy = rng.uniform(0, 40, size=(20, 2))
        boxes = np.c_[xy, xy + rng.uniform(8, 20, size=(20, 2))]
        scores = rng.uniform(0.3, 1.0, size=20)
        self.assertEqual(nms(boxes, scores, 0.5), nms(boxes, scores ** 3, 0.5))

    def test_detect_uses_config(self):
        model = SegmenterModel(tiny_config())
        img = np.random.default_rng(3).uniform(size=(3, 48, 48))
        self.assertEqual(detect(model, img, DecodeConfig(score_thresh=1.0)), [])
        everything = detect(model, img, DecodeConfig(score_thresh=0.0, nms_iou=1.0))
        self.assertEqual(len(everything), 6 * 6 * 3)


class TestTraining(unittest.TestCase):
    """Anchor matching, scene loss and the trainer"""

    def test_match_anchors(self):
        anchors = np.array([[0, 0, 10, 10], [0, 0, 9, 10], [20, 20, 30, 30], [40, 40, 44, 44]], dtype=float)
        targets = match_anchors(anchors, np.array([[0, 0, 10, 10], [41, 41, 50, 50]], dtype=float))
        self.assertEqual(set(targets.positives.tolist()), {0, 1, 3})
        self.assertEqual(targets.negatives.tolist(), [2])
        self.assertEqual(targets.matched_gt[3], 1)

    def test_scene_loss_finite_and_positive(self):
        scene = small_scenes(1)[0]
        loss, cls_value, mask_value = scene_loss(SegmenterModel(tiny_config()), scene)
        self.assertTrue(np.isfinite(loss.item()))
        self.assertGreater(cls_value, 0.0)
        self.assertGreater(mask_value, 0.0)
        self.assertAlmostEqual(loss.item(), cls_value + mask_value)

    def test_loss_decreases(self):
        scenes = small_scenes(6)
        _, log = train(SegmenterModel(tiny_config()), scenes, epochs=5, lr=5e-3, seed=0, batch_size=3)
        self.assertEqual(list(log.columns), ['epoch', 'loss', 'cls_loss', 'mask_loss'])
        self.assertLess(log['loss'].iloc[-1], log['loss'].iloc[0])

    def test_same_seed_same_weights(self):
        scenes = small_scenes(3, seed=10)
        a, _ = train(SegmenterModel(tiny_config()), scenes, epochs=1, seed=4, batch_size=2)
        b, _ = train(SegmenterModel(tiny_config()), scenes, epochs=1, seed=4, batch_size=2)
        for name, value in a.parameter_arrays().items():
            with self.subTest(layer=name):
                self.assertTrue(np.array_equal(value, b.parameter_arrays()[name]))

    def test_empty_dataset(self):
        with self.assertRaises(DatasetError):
            train(SegmenterModel(tiny_config()), [], epochs=1)

    def test_epoch_callback(self):
        seen = []
        train(SegmenterModel(tiny_config()), small_scenes(2), epochs=2, on_epoch=lambda e, row: seen.append(e))
        self.assertEqual(seen, [1, 2])

    @unittest.skipUnless(SLOW, "set FASHIONADV_SLOW=1 for the full training run")
    def test_trained_model_reaches_target_ap(self):
        from src.core.evaluation import synthetic_gt_ap

        spec = SceneSpec()
        train_scenes = [generate_scene(replace(spec, seed=i)) for i in range(400)]
        held_out = [generate_scene(replace(spec, seed=10_000 + i)) for i in range(200)]
        model, _ = train(SegmenterModel(SegmenterConfig()), train_scenes, epochs=20, seed=0)
        result = synthetic_gt_ap(model, [s.image for s in held_out], [s.instance_masks for s in held_out])
        self.assertGreaterEqual(result.ap, 0.70)


class TestPersistence(unittest.TestCase):
    """Model archives"""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()
        self.path = os.path.join(self.temp_dir, 'segmenter.ndg')
        self.model = SegmenterModel(tiny_config(seed=8))

    def test_roundtrip_bit_exact(self):
        save_model(self.model, self.path)
        loaded = load_model(self.path)
        self.assertEqual(loaded.config, self.model.config)
        for name, value in self.model.parameter_arrays().items():
            self.assertTrue(np.array_equal(value, loaded.parameter_arrays()[name]))

    def test_truncated(self):
        save_model(self.model, self.path)
        with open(self.path, 'r+b') as fh:
            fh.truncate(64)
        with self.assertRaises(StorageError):
            load_model(self.path)

    def test_manifest_mismatch(self):
        arrays = self.model.parameter_arrays()
        meta = {'kind': 'segmenter', 'version': 1, 'config': self.model.config.to_dict()}
        cases = {
            'missing': {k: v for k, v in arrays.items() if k != 'cls.bias'},
            'shape': {**arrays, 'cls.bias': np.zeros(1)},
            'extra': {**arrays, 'spare.weight': np.zeros(2)},
        }
        for label, tensors in cases.items():
            with self.subTest(case=label):
                save_archive(self.path, tensors, meta)
                with self.assertRaises(StorageError):
                    load_model(self.path)

    def test_version_mismatch(self):
        save_archive(self.path, self.model.parameter_arrays(),
                     {'kind': 'segmenter', 'version': 99, 'config': self.model.config.to_dict()})
        with self.assertRaises(StorageError) as ctx:
            load_model(self.path)
        self.assertEqual(ctx.exception.context['found'], 99)


if __name__ == '__main__':
    unittest.main()
