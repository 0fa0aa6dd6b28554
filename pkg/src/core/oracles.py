"""
Registered finite-difference oracle suite covering every catalog operator,
the perturbation stages, the segmenter and every loss
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from config.settings import Settings
from ..ndgrad import ops
from ..ndgrad.gradcheck import grad_check
from ..utils.logger import Logger
from .features import FeatureExtractor, FeatureTaps, cross_layer_gram
from .losses import CleanRefs, gram_normalizers, loss_adversarial, loss_content, loss_sim, loss_style, loss_tv
from .perturb import (add_uniform_noise, color_jitter, diff_jpeg, gaussian_blur, homography_from_points,
                      homography_in_pixels, warp_perspective, UNIT_CORNERS)
from .segmenter import SegmenterConfig, SegmenterModel

logger = logging.getLogger(__name__)


@dataclass
class OracleCase:
    """One grad-check target: a catalog operator or composite plus an input factory"""
    name: str
    target: object
    make_inputs: Callable[[np.random.Generator], List[np.ndarray]]
    params: Dict[str, object] = field(default_factory=dict)


def _normal(*shape):
    return lambda rng: [rng.standard_normal(shape)]


def _positive(*shape):
    return lambda rng: [rng.uniform(0.5, 2.0, size=shape)]


def _unit_image(*shape):
    return lambda rng: [rng.uniform(0.05, 0.95, size=shape)]


def _pair(a_shape, b_shape, positive_b=False):
    def make(rng):
        b = rng.uniform(0.5, 2.0, size=b_shape) if positive_b else rng.standard_normal(b_shape)
        return [rng.standard_normal(a_shape), b]
    return make


def _catalog_cases() -> List[OracleCase]:
    catalog = ops.op_set()
    ys, xs = np.meshgrid(np.linspace(-0.7, 5.3, 5), np.linspace(0.2, 6.4, 6), indexing='ij')
    return [
        OracleCase('add', catalog['add'], _pair((3, 4), (4,))),
        OracleCase('sub', catalog['sub'], _pair((2, 3, 4), (3, 4))),
        OracleCase('mul', catalog['mul'], _pair((3, 4), (3, 4))),
        OracleCase('div', catalog['div'], _pair((3, 4), (3, 4), positive_b=True)),
        OracleCase('add_scalar', catalog['add_scalar'], _normal(2, 3), {'c': 0.3}),
        OracleCase('mul_scalar', catalog['mul_scalar'], _normal(2, 3), {'c': -1.7}),
        OracleCase('neg', catalog['neg'], _normal(2, 3)),
        OracleCase('power', catalog['power'], _positive(2, 3), {'p': 1.5}),
        OracleCase('exp', catalog['exp'], _normal(2, 3)),
        OracleCase('log', catalog['log'], _positive(2, 3)),
        OracleCase('abs', catalog['abs'], _normal(2, 3)),
        OracleCase('clamp', catalog['clamp'], _normal(3, 4), {'lo': -0.5, 'hi': 0.5}),
        OracleCase('relu', catalog['relu'], _normal(3, 4)),
        OracleCase('sigmoid', catalog['sigmoid'], _normal(2, 3)),
        OracleCase('tanh', catalog['tanh'], _normal(2, 3)),
        OracleCase('softmax', catalog['softmax'], _normal(3, 4), {'axis': -1}),
        OracleCase('log_softmax', catalog['log_softmax'], _normal(3, 4), {'axis': -1}),
        OracleCase('diff_round', catalog['diff_round'], lambda rng: [rng.uniform(-20, 20, size=(4, 4))]),
        OracleCase('matmul', catalog['matmul'], _pair((3, 4), (4, 2))),
        OracleCase('conv2d', catalog['conv2d'],
                   lambda rng: [rng.standard_normal((2, 6, 6)), rng.standard_normal((3, 2, 3, 3)),
                                rng.standard_normal(3)], {'stride': 1, 'pad': 1}),
        OracleCase('conv2d_stride2', catalog['conv2d'],
                   lambda rng: [rng.standard_normal((2, 7, 7)), rng.standard_normal((2, 2, 3, 3))],
                   {'stride': 2, 'pad': 1}),
        OracleCase('depthwise_conv2d', catalog['depthwise_conv2d'],
                   lambda rng: [rng.standard_normal((2, 6, 6)), rng.standard_normal((2, 3, 3))]),
        OracleCase('avg_pool2d', catalog['avg_pool2d'], _normal(2, 6, 6), {'k': 2}),
        OracleCase('max_pool2d', catalog['max_pool2d'], _normal(2, 6, 6), {'k': 2}),
        OracleCase('resize_bilinear', catalog['resize_bilinear'], _normal(2, 4, 6), {'out_h': 7, 'out_w': 5}),
        OracleCase('bilinear_sample', lambda x: ops.bilinear_sample(x, ys, xs), _normal(2, 6, 7)),
        OracleCase('sum', catalog['sum'], _normal(3, 4), {'axis': 1, 'keepdims': False}),
        OracleCase('mean', catalog['mean'], _normal(3, 4), {'axis': None, 'keepdims': False}),
        OracleCase('concat', catalog['concat'], _pair((2, 3), (3, 3)), {'axis': 0}),
        OracleCase('getitem', lambda x: ops.getitem(x, (np.array([0, 2, 2]), np.array([1, 0, 3]))), _normal(3, 4)),
        OracleCase('reshape', catalog['reshape'], _normal(3, 4), {'shape': (2, 6)}),
        OracleCase('transpose', catalog['transpose'], _normal(2, 3, 4), {'axes': (1, 2, 0)}),
        OracleCase('pad_reflect', catalog['pad'], _normal(2, 4, 4), {'pad_width': ((0, 0), (2, 1), (1, 2)),
                                                                     'mode': 'reflect'}),
        OracleCase('pad_constant', catalog['pad'], _normal(2, 4, 4), {'pad_width': ((0, 0), (1, 1), (1, 1)),
                                                                      'mode': 'constant'}),
    ]


def _pipeline_cases() -> List[OracleCase]:
    shift = np.array([[0.05, -0.03], [-0.04, 0.02], [0.03, 0.05], [-0.02, -0.04]])
    warp = homography_in_pixels(homography_from_points(UNIT_CORNERS, UNIT_CORNERS + shift), 12, 12)
    return [
        OracleCase('warp_perspective', lambda x: warp_perspective(x, warp), _unit_image(3, 12, 12)),
        OracleCase('gaussian_blur', lambda x: gaussian_blur(x, 5, 1.2), _unit_image(3, 10, 10)),
        OracleCase('color_jitter', lambda x: color_jitter(x, 0.02, -0.15, 0.1, 0.2), _unit_image(3, 6, 6)),
        OracleCase('uniform_noise', lambda x: add_uniform_noise(x, 0.02, 7), _unit_image(3, 6, 6)),
        OracleCase('diff_jpeg', lambda x: diff_jpeg(x, 20), _unit_image(3, 16, 16)),
    ]


def _tiny_segmenter() -> SegmenterModel:
    config = SegmenterConfig(widths=(4, 4, 6, 6), head_width=6, proto_width=4, num_prototypes=3, seed=3)
    return SegmenterModel(config, trainable=False)


def _loss_cases() -> List[OracleCase]:
    taps = FeatureTaps(content=('conv2_1',), style=('conv1_1', 'conv2_1', 'conv3_1'))
    extractor = FeatureExtractor(widths=(4, 6, 6), convs_per_stage=(1, 1, 1), seed=11)
    reference = np.random.default_rng(101).uniform(0.05, 0.95, size=(3, 16, 16))
    style = np.random.default_rng(102).uniform(0.05, 0.95, size=(3, 16, 16))
    sim_reference = np.random.default_rng(103).uniform(0.05, 0.95, size=(3, 24, 24))

    normalizers = gram_normalizers(extractor.extract(reference, taps.style), taps)

    def style_loss(x):
        return loss_style(x, style, extractor, taps, normalizers)

    model = _tiny_segmenter()
    anchors = np.array([0, 4, 11, 25])
    mask_rng = np.random.default_rng(104)
    refs = CleanRefs(anchors, (mask_rng.uniform(size=(len(anchors), 12, 12)) > 0.5).astype(np.float64))

    def cls_loss(x):
        return loss_adversarial(model.forward(x), refs, with_cls=True, with_mask=False)[0]

    def mask_loss(x):
        return loss_adversarial(model.forward(x), refs, with_cls=False, with_mask=True)[1]

    def segmenter_outputs(x):
        out = model.forward(x)
        return ops.add(ops.sum(ops.mul(out.probs, out.probs)), ops.mean(out.coeffs))

    return [
        OracleCase('cross_layer_gram', cross_layer_gram,
                   lambda rng: [rng.standard_normal((3, 4, 4)), rng.standard_normal((2, 2, 2))]),
        OracleCase('loss_tv', loss_tv, _unit_image(3, 8, 8)),
        OracleCase('loss_sim', lambda x: loss_sim(sim_reference, x),
                   lambda rng: [np.clip(sim_reference + rng.uniform(-0.05, 0.05, size=sim_reference.shape), 0, 1)]),
        OracleCase('loss_content', lambda x: loss_content(x, reference, extractor, taps), _unit_image(3, 16, 16)),
        OracleCase('loss_style', style_loss, _unit_image(3, 16, 16)),
        OracleCase('segmenter_forward', segmenter_outputs, _unit_image(3, 48, 48)),
        OracleCase('loss_cls', cls_loss, _unit_image(3, 48, 48)),
        OracleCase('loss_mask', mask_loss, _unit_image(3, 48, 48)),
    ]


def registered_cases() -> List[OracleCase]:
    return _catalog_cases() + _pipeline_cases() + _loss_cases()


def run_oracle_suite(seeds: Sequence[int] = Settings.GRADCHECK['seeds'], tol: float = Settings.GRADCHECK['tol'],
                     step: float = Settings.GRADCHECK['step'], names: Optional[Sequence[str]] = None,
                     max_coords: int = Settings.GRADCHECK['max_coords']) -> pd.DataFrame:
    """Grad-check every registered case on each seeded input; one row per (case, seed)"""
    cases = registered_cases()
    if names:
        cases = [c for c in cases if c.name in set(names)]
    rows = []
    for case in cases:
        for seed in seeds:
            inputs = case.make_inputs(np.random.default_rng([int(seed), len(case.name)]))
            report = grad_check(case.target, inputs, step=step, tol=tol, seed=int(seed),
                                max_coords=max_coords, name=case.name, **case.params)
            rows.append({**report.to_dict(), 'seed': int(seed)})
            level = logging.DEBUG if report.passed else logging.WARNING
            Logger.event(logger, 'grad_check', level, op=case.name, seed=seed, max_rel_err=report.max_rel_err,
                         passed=report.passed)
    return pd.DataFrame(rows, columns=['name', 'seed', 'max_rel_err', 'checked', 'skipped', 'passed'])
