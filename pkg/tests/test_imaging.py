"""
Unit tests for image helpers, image/mask I/O and report files
"""

import unittest
import os
import tempfile

import numpy as np
import pandas as pd

import sys
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from src.utils.errors import CodecError, ImageIOError, MaskValueError, ShapeError
from src.utils.file_handler import FileHandler
from src.utils.imaging import (histogram_equalize, jpeg_codec_roundtrip, load_mask, load_png, mask_complement,
                               psnr, quantize, rgb_to_ycbcr, save_mask, save_png, union_masks, ycbcr_to_rgb)


class TestColorTransforms(unittest.TestCase):
    """BT.601 full-range YCbCr"""

    def test_white_and_black(self):
        white = rgb_to_ycbcr(np.ones((3, 1, 1)))[:, 0, 0]
        black = rgb_to_ycbcr(np.zeros((3, 1, 1)))[:, 0, 0]
        np.testing.assert_allclose(white, [1.0, 0.5, 0.5], atol=1e-6)
        np.testing.assert_allclose(black, [0.0, 0.5, 0.5], atol=1e-6)

    def test_roundtrip(self):
        img = np.random.default_rng(0).uniform(size=(3, 16, 16))
        self.assertLessEqual(np.max(np.abs(ycbcr_to_rgb(rgb_to_ycbcr(img)) - img)), 1e-6)

    def test_wrong_channel_count(self):
        with self.assertRaises(ShapeError):
            rgb_to_ycbcr(np.zeros((1, 4, 4)))


class TestJpegCodec(unittest.TestCase):
    """Real JPEG round trip used for evaluation"""

    def setUp(self):
        ys, xs = np.mgrid[0:64, 0:64] / 63.0
        self.gradient = np.stack([xs, ys, 0.5 * (xs + ys)])

    def test_high_quality_is_faithful(self):
        out = jpeg_codec_roundtrip(self.gradient, 100)
        self.assertGreaterEqual(psnr(out, self.gradient), 40.0)

    def test_recompression_changes_less(self):
        img = np.random.default_rng(1).uniform(size=(3, 32, 32))
        first = jpeg_codec_roundtrip(img, 10)
        second = jpeg_codec_roundtrip(first, 10)
        self.assertLess(np.mean(np.abs(second - first)), np.mean(np.abs(first - quantize(img))))

    def test_constant_image(self):
        img = np.full((3, 32, 32), 0.4)
        for qf in (50, 75, 95):
            with self.subTest(qf=qf):
                out = jpeg_codec_roundtrip(img, qf)
                self.assertLessEqual(np.max(np.abs(out - quantize(img))), 2.0 / 255.0 + 1e-12)

    def test_quality_out_of_range(self):
        for qf in (0, 101):
            with self.subTest(qf=qf):
                with self.assertRaises(CodecError) as ctx:
                    jpeg_codec_roundtrip(self.gradient, qf)
                self.assertEqual(ctx.exception.context['size'], (64, 64))


class TestHistogramEqualization(unittest.TestCase):
    """Per-channel cumulative-histogram remap"""

    def test_uniform_histogram_is_fixed_point(self):
        ramp = np.arange(256, dtype=np.float64).reshape(1, 16, 16) / 255.0
        img = np.repeat(ramp, 3, axis=0)
        self.assertLessEqual(np.max(np.abs(histogram_equalize(img) - img)), 1.0 / 255.0)

    def test_two_levels_spread(self):
        img = np.full((3, 8, 8), 0.2)
        img[:, :, 4:] = 0.8
        out = histogram_equalize(img)
        self.assertEqual(set(np.unique(out)), {0.0, 1.0})

    def test_constant_image(self):
        out = histogram_equalize(np.full((3, 5, 5), 0.3))
        self.assertEqual(np.unique(out).size, 1)
        self.assertTrue(np.all((out >= 0) & (out <= 1)))


class TestImageIO(unittest.TestCase):
    """PNG and mask files"""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def test_png_roundtrip_bit_exact(self):
        img = quantize(np.random.default_rng(2).uniform(size=(3, 12, 10)))
        path = save_png(os.path.join(self.temp_dir, 'scene.png'), img)
        np.testing.assert_array_equal(load_png(path), img)

    def test_mask_roundtrip(self):
        mask = (np.random.default_rng(3).uniform(size=(9, 7)) > 0.5).astype(np.float64)
        path = save_mask(os.path.join(self.temp_dir, 'scene.mask.png'), mask)
        np.testing.assert_array_equal(load_mask(path), mask)

    def test_mask_bad_value(self):
        from PIL import Image

        path = os.path.join(self.temp_dir, 'bad.mask.png')
        arr = np.zeros((4, 4), dtype=np.uint8)
        arr[1, 1] = 17
        Image.fromarray(arr).save(path)
        with self.assertRaises(MaskValueError):
            load_mask(path)
        with self.assertRaises(MaskValueError):
            save_mask(path, np.full((2, 2), 0.5))

    def test_empty_and_missing_files(self):
        empty = os.path.join(self.temp_dir, 'empty.png')
        open(empty, 'wb').close()
        for loader in (load_png, load_mask):
            with self.subTest(loader=loader.__name__):
                with self.assertRaises(ImageIOError):
                    loader(empty)
                with self.assertRaises(ImageIOError):
                    loader(os.path.join(self.temp_dir, 'missing.png'))


class TestMaskAlgebra(unittest.TestCase):
    """Complement and union"""

    def test_complement_partitions(self):
        mask = (np.random.default_rng(4).uniform(size=(6, 6)) > 0.3).astype(np.float64)
        comp = mask_complement(mask)
        np.testing.assert_array_equal(mask + comp, np.ones((6, 6)))
        np.testing.assert_array_equal(mask * comp, np.zeros((6, 6)))

    def test_union(self):
        a = np.zeros((3, 3))
        b = np.zeros((3, 3))
        a[0, 0] = 1
        b[2, 2] = 1
        self.assertEqual(union_masks([a, b]).sum(), 2)
        self.assertEqual(union_masks([], shape=(3, 3)).sum(), 0)
        with self.assertRaises(ShapeError):
            union_masks([])


class TestFileHandler(unittest.TestCase):
    """Report and manifest files"""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def test_validate_input_path(self):
        path = os.path.join(self.temp_dir, 'config.json')
        FileHandler.write_json(path, {'seed': 1})
        self.assertTrue(FileHandler.validate_input_path(path, '.json'))
        self.assertFalse(FileHandler.validate_input_path(path, '.png'))
        self.assertFalse(FileHandler.validate_input_path(os.path.join(self.temp_dir, 'nope.json')))
        self.assertFalse(FileHandler.validate_input_path(''))

    def test_json_handles_numpy(self):
        path = FileHandler.write_json(os.path.join(self.temp_dir, 'a', 'b.json'),
                                      {'values': np.arange(3), 'score': np.float64(0.5)})
        self.assertEqual(FileHandler.read_json(path), {'values': [0, 1, 2], 'score': 0.5})

    def test_jsonl_roundtrip(self):
        path = os.path.join(self.temp_dir, 'log.jsonl')
        FileHandler.write_jsonl(path, [{'i': 0}, {'i': 1}])
        self.assertEqual(FileHandler.read_jsonl(path), [{'i': 0}, {'i': 1}])

    def test_save_to_excel(self):
        path = os.path.join(self.temp_dir, 'report.xlsx')
        frame = pd.DataFrame({'condition': ['none', 'jpeg'], 'ap': [0.9, 0.4]})
        self.assertEqual(FileHandler.save_to_excel({'ap': frame}, path), path)
        self.assertTrue(os.path.exists(path))
        pd.testing.assert_frame_equal(pd.read_excel(path, sheet_name='ap'), frame)

    def test_save_to_excel_empty(self):
        self.assertIsNone(FileHandler.save_to_excel({}, os.path.join(self.temp_dir, 'x.xlsx')))

    def test_create_run_directory_and_hash(self):
        run_dir = FileHandler.create_run_directory(self.temp_dir, 'attack', 'r1')
        self.assertTrue(os.path.isdir(run_dir))
        path = os.path.join(run_dir, 'f.txt')
        with open(path, 'w') as fh:
            fh.write('abc')
        self.assertEqual(FileHandler.sha256_file(path),
                         'ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad')
        self.assertEqual(FileHandler.relative_to(path, self.temp_dir), 'attack/r1/f.txt')


if __name__ == '__main__':
    unittest.main()
