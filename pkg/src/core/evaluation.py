"""
Mask AP, SSIM and the robustness protocols (JPEG sweep, manipulation suites)
"""

import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config.settings import Settings
from ..ndgrad.tensor import no_grad
from ..utils.errors import ConfigError, ShapeError
from ..utils.file_handler import FileHandler
from ..utils.imaging import histogram_equalize, jpeg_codec_roundtrip, resize_bilinear
from ..utils.logger import Logger
from .losses import LossWeights, ssim_components
from .perturb import gaussian_blur
from .segmenter import DecodeConfig, Detection, SegmenterModel, detect

logger = logging.getLogger(__name__)

MANIPULATIONS = ('scaling', 'blurring', 'color_jitter', 'noise')
CONDITION_KEYS = {
    'identity': (),
    'scaling': ('scale_range',),
    'blurring': ('blur_kernel',),
    'color_jitter': ('color_jitter', 'channel_shift'),
    'noise': ('noise',),
}


@dataclass
class ApConfig:
    iou_thresholds: Tuple[float, ...] = Settings.EVALUATION['iou_thresholds']
    recall_points: int = Settings.EVALUATION['recall_points']

    def validate(self) -> None:
        thresholds = np.asarray(self.iou_thresholds, dtype=np.float64)
        if len(thresholds) == 0 or np.any(np.diff(thresholds) <= 0):
            raise ConfigError("IoU thresholds must be strictly increasing", key='evaluation.iou_thresholds')
        if thresholds[0] <= 0 or thresholds[-1] > 1:
            raise ConfigError("IoU thresholds must lie in (0, 1]", key='evaluation.iou_thresholds')
        if self.recall_points < 2:
            raise ConfigError("need at least two recall points", key='evaluation.recall_points')


@dataclass
class ApResult:
    ap: float
    per_threshold: Dict[float, float]
    num_predictions: int = 0
    num_ground_truth: int = 0

    def at(self, threshold: float) -> float:
        return self.per_threshold[round(threshold, 4)]


# -- mask AP -------------------------------------------------------------------------------

def mask_iou_matrix(preds: Sequence[np.ndarray], gts: Sequence[np.ndarray]) -> np.ndarray:
    if not len(preds) or not len(gts):
        return np.zeros((len(preds), len(gts)))
    p = np.stack([np.asarray(m) > 0.5 for m in preds]).reshape(len(preds), -1).astype(np.float64)
    g = np.stack([np.asarray(m) > 0.5 for m in gts]).reshape(len(gts), -1).astype(np.float64)
    inter = p @ g.T
    union = p.sum(axis=1)[:, None] + g.sum(axis=1)[None, :] - inter
    return np.where(union > 0, inter / np.maximum(union, 1.0), 0.0)


def _check_extents(preds, gts) -> None:
    shapes = {np.shape(d.mask) for dets in preds for d in dets} | {np.shape(m) for masks in gts for m in masks}
    if len(shapes) > 1:
        raise ShapeError("prediction and ground-truth masks differ in extent", operator='mask_ap',
                         shapes=sorted(shapes))


def interpolated_precision(tp: np.ndarray, npos: int, recall_points: int) -> float:
    """Precision envelope sampled at evenly spaced recall levels"""
    if len(tp) == 0:
        return 0.0
    tp_cum = np.cumsum(tp)
    fp_cum = np.cumsum(1 - tp)
    recall = tp_cum / npos
    precision = tp_cum / np.maximum(tp_cum + fp_cum, np.finfo(np.float64).eps)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    levels = np.linspace(0.0, 1.0, recall_points)
    idx = np.searchsorted(recall, levels, side='left')
    sampled = np.where(idx < len(envelope), envelope[np.minimum(idx, len(envelope) - 1)], 0.0)
    return float(sampled.mean())


def mask_ap(preds: Sequence[Sequence[Detection]], gts: Sequence[Sequence[np.ndarray]],
            cfg: Optional[ApConfig] = None) -> ApResult:
    """
    COCO-style mask AP: per threshold, predictions across images are ranked by
    score and greedily matched one-to-one to the unmatched ground truth of
    highest IoU.  With no ground truth, AP is 1 when there are also no
    predictions and 0 otherwise.
    """
    cfg = cfg or ApConfig()
    cfg.validate()
    if len(preds) != len(gts):
        raise ShapeError("prediction and ground-truth lists differ in length", operator='mask_ap',
                         shapes=[len(preds), len(gts)])
    _check_extents(preds, gts)

    npos = sum(len(g) for g in gts)
    ranked = [(d.score, image, k) for image, dets in enumerate(preds) for k, d in enumerate(dets)]
    order = np.argsort(-np.array([r[0] for r in ranked]), kind='stable') if ranked else []
    ious = [mask_iou_matrix([d.mask for d in dets], masks) for dets, masks in zip(preds, gts)]

    per_threshold = {}
    for threshold in cfg.iou_thresholds:
        key = round(float(threshold), 4)
        if npos == 0:
            per_threshold[key] = 1.0 if not ranked else 0.0
            continue
        taken = [np.zeros(len(g), dtype=bool) for g in gts]
        tp = np.zeros(len(ranked))
        for position, r in enumerate(order):
            _, image, k = ranked[r]
            if not len(gts[image]):
                continue
            candidates = np.where(taken[image], -1.0, ious[image][k])
            best = int(np.argmax(candidates))
            if candidates[best] >= threshold:
                taken[image][best] = True
                tp[position] = 1.0
        per_threshold[key] = interpolated_precision(tp, npos, cfg.recall_points)

    return ApResult(float(np.mean(list(per_threshold.values()))), per_threshold, len(ranked), npos)


def self_referential_ap(model: SegmenterModel, clean_imgs: Sequence[np.ndarray],
                        attacked_imgs: Sequence[np.ndarray], decode_cfg: Optional[DecodeConfig] = None,
                        ap_cfg: Optional[ApConfig] = None,
                        clean_detections: Optional[List[List[Detection]]] = None) -> ApResult:
    """Clean-image detections serve as ground truth for the attacked-image detections"""
    if len(clean_imgs) != len(attacked_imgs):
        raise ShapeError("clean and attacked image lists differ in length", operator='self_referential_ap',
                         shapes=[len(clean_imgs), len(attacked_imgs)])
    if clean_detections is None:
        clean_detections = [detect(model, img, decode_cfg) for img in clean_imgs]
    gts = [[d.mask for d in dets] for dets in clean_detections]
    preds = [detect(model, img, decode_cfg) for img in attacked_imgs]
    return mask_ap(preds, gts, ap_cfg)


def synthetic_gt_ap(model: SegmenterModel, images: Sequence[np.ndarray], gt_masks: Sequence[Sequence[np.ndarray]],
                    decode_cfg: Optional[DecodeConfig] = None, ap_cfg: Optional[ApConfig] = None) -> ApResult:
    """AP against the generator's instance masks"""
    preds = [detect(model, img, decode_cfg) for img in images]
    return mask_ap(preds, gt_masks, ap_cfg)


def ssim(x, y) -> float:
    """Single-scale SSIM averaged over channels and valid positions"""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeError("SSIM inputs differ in shape", operator='ssim', shapes=[x.shape, y.shape])
    with no_grad():
        per_channel, _ = ssim_components(x, y)
    return float(per_channel.data.mean())


# -- reports ------------------------------------------------------------------------------

def config_digest(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(',', ':'), default=str)
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


@dataclass
class SuiteReport:
    name: str
    rows: List[dict] = field(default_factory=list)
    per_image_ssim: List[float] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    seeds: Dict[str, int] = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        return config_digest(self.config)

    @property
    def mean_ssim(self) -> float:
        return float(np.mean(self.per_image_ssim)) if self.per_image_ssim else float('nan')

    def add_row(self, condition: str, result: ApResult, **params) -> None:
        self.rows.append({'condition': condition, 'params': params, 'ap': result.ap,
                          'ap50': result.at(0.5) if 0.5 in result.per_threshold else float('nan'),
                          'num_predictions': result.num_predictions,
                          'num_ground_truth': result.num_ground_truth})

    def ap(self, condition: str, **params) -> float:
        for row in self.rows:
            if row['condition'] == condition and all(row['params'].get(k) == v for k, v in params.items()):
                return row['ap']
        raise KeyError(f"no {condition} row with {params} in report {self.name}")

    def to_frame(self) -> pd.DataFrame:
        records = []
        for row in self.rows:
            record = {'report': self.name, 'condition': row['condition'], 'ap': row['ap'], 'ap50': row['ap50'],
                      'mean_ssim': self.mean_ssim, 'num_predictions': row['num_predictions'],
                      'num_ground_truth': row['num_ground_truth'],
                      'params': json.dumps(row['params'], sort_keys=True), 'config_hash': self.config_hash}
            records.append(record)
        return pd.DataFrame(records)

    def to_dict(self) -> dict:
        return {'name': self.name, 'rows': self.rows, 'per_image_ssim': self.per_image_ssim,
                'mean_ssim': self.mean_ssim, 'config': self.config, 'config_hash': self.config_hash,
                'seeds': self.seeds}

    def save(self, directory: str) -> List[str]:
        os.makedirs(directory, exist_ok=True)
        return [FileHandler.save_csv(self.to_frame(), os.path.join(directory, f"{self.name}.csv")),
                FileHandler.write_json(os.path.join(directory, f"{self.name}.json"), self.to_dict())]


def _ssim_list(clean_imgs, attacked_imgs) -> List[float]:
    return [ssim(c, a) for c, a in zip(clean_imgs, attacked_imgs)]


def jpeg_sweep(model: SegmenterModel, attacked_imgs: Sequence[np.ndarray], clean_imgs: Sequence[np.ndarray],
               qfs: Sequence[int] = Settings.EVALUATION['qfs'], decode_cfg: Optional[DecodeConfig] = None,
               ap_cfg: Optional[ApConfig] = None, name: str = 'jpeg_sweep') -> SuiteReport:
    """Self-referential AP after a real-codec roundtrip at every quality factor, plus an uncompressed row"""
    decode_cfg = decode_cfg or DecodeConfig()
    ap_cfg = ap_cfg or ApConfig()
    clean_dets = [detect(model, img, decode_cfg) for img in clean_imgs]
    report = SuiteReport(name, per_image_ssim=_ssim_list(clean_imgs, attacked_imgs),
                         config={'qfs': list(qfs), 'decode': decode_cfg.to_dict(), 'ap': asdict(ap_cfg)})

    report.add_row('none', self_referential_ap(model, clean_imgs, attacked_imgs, decode_cfg, ap_cfg, clean_dets),
                   qf=None)
    for qf in qfs:
        compressed = [jpeg_codec_roundtrip(img, qf) for img in attacked_imgs]
        result = self_referential_ap(model, clean_imgs, compressed, decode_cfg, ap_cfg, clean_dets)
        report.add_row('jpeg', result, qf=int(qf))
        Logger.event(logger, name, condition='jpeg', qf=int(qf), ap=result.ap)
    return report


def blur_sigma(kernel: int) -> float:
    """Sigma implied by a kernel size when none is given"""
    return 0.3 * ((kernel - 1) * 0.5 - 1.0) + 0.8


def manipulate(img: np.ndarray, condition: str, mode: str, rng: np.random.Generator) -> Tuple[np.ndarray, dict]:
    """Apply one manipulation of the easy or hard suite; returns the image and its drawn parameters"""
    settings = Settings.MANIPULATIONS[mode]
    img = np.asarray(img, dtype=np.float64)
    _, height, width = img.shape
    if condition == 'identity':
        return img.copy(), {}
    if condition == 'scaling':
        factor = float(rng.uniform(*settings['scale_range']))
        h, w = max(1, int(round(height * factor))), max(1, int(round(width * factor)))
        out = resize_bilinear(resize_bilinear(img, h, w), height, width)
        return np.clip(out, 0.0, 1.0), {'scale': factor}
    if condition == 'blurring':
        k = settings['blur_kernel']
        with no_grad():
            out = gaussian_blur(img, k, blur_sigma(k)).data
        return np.clip(out, 0.0, 1.0), {'kernel': k, 'sigma': blur_sigma(k)}
    if condition == 'color_jitter':
        if settings['color_jitter'] == 'histogram_equalization':
            return histogram_equalize(img), {'method': 'histogram_equalization'}
        amount = settings['channel_shift']
        shift = rng.uniform(-amount, amount, size=3)
        return np.clip(img + shift[:, None, None], 0.0, 1.0), {'method': 'channel_shift', 'shift': shift.tolist()}
    if condition == 'noise':
        amplitude = settings['noise']
        return np.clip(img + rng.uniform(-amplitude, amplitude, size=img.shape), 0.0, 1.0), {'amplitude': amplitude}
    raise ConfigError(f"unknown manipulation {condition}", key='evaluation.manipulation', value=condition)


def manipulation_suite(model: SegmenterModel, attacked_imgs: Sequence[np.ndarray], clean_imgs: Sequence[np.ndarray],
                       mode: str = 'easy', seed: int = 0, decode_cfg: Optional[DecodeConfig] = None,
                       ap_cfg: Optional[ApConfig] = None, include_identity: bool = False,
                       name: Optional[str] = None) -> SuiteReport:
    """One row per manipulation, each applied alone to every attacked image"""
    if mode not in Settings.MANIPULATIONS:
        raise ConfigError(f"unknown manipulation mode {mode}", key='evaluation.modes', value=mode)
    decode_cfg = decode_cfg or DecodeConfig()
    ap_cfg = ap_cfg or ApConfig()
    clean_dets = [detect(model, img, decode_cfg) for img in clean_imgs]
    report = SuiteReport(name or f"manipulation_{mode}", per_image_ssim=_ssim_list(clean_imgs, attacked_imgs),
                         config={'mode': mode, 'settings': Settings.MANIPULATIONS[mode],
                                 'decode': decode_cfg.to_dict(), 'ap': asdict(ap_cfg)},
                         seeds={'manipulation': seed})

    conditions = (('identity',) if include_identity else ()) + MANIPULATIONS
    for condition in conditions:
        code = tuple(CONDITION_KEYS).index(condition)
        manipulated, drawn = [], []
        for i, img in enumerate(attacked_imgs):
            out, params = manipulate(img, condition, mode, np.random.default_rng([seed, code, i]))
            manipulated.append(out)
            drawn.append(params)
        result = self_referential_ap(model, clean_imgs, manipulated, decode_cfg, ap_cfg, clean_dets)
        settings = Settings.MANIPULATIONS[mode]
        params = {'mode': mode, **{k: settings[k] for k in CONDITION_KEYS[condition] if k in settings}}
        if condition == 'blurring':
            params['sigma'] = blur_sigma(params['blur_kernel'])
        params['per_image'] = drawn
        report.add_row(condition, result, **params)
        Logger.event(logger, report.name, condition=condition, ap=result.ap)
    return report


# -- trade-off and ablation views -----------------------------------------------------------

def tradeoff_table(sweeps: Dict[str, SuiteReport], qfs: Sequence[int] = (10, 40, 80)) -> pd.DataFrame:
    """Mean SSIM against AP without compression and at selected quality factors, one row per method"""
    rows = []
    for method, report in sweeps.items():
        row = {'method': method, 'mean_ssim': report.mean_ssim, 'ap_none': report.ap('none')}
        for qf in qfs:
            row[f"ap_qf{qf}"] = report.ap('jpeg', qf=qf)
        rows.append(row)
    return pd.DataFrame(rows)


def loss_ablation_rows(base: Optional[LossWeights] = None) -> List[Tuple[str, LossWeights]]:
    """Loss-component configurations: adversarial alone, then texture, similarity and smoothness added"""
    base = base or LossWeights()
    return [
        ('adv', replace(base, beta=0.0, lambda1=0.0, lambda2=0.0)),
        ('adv+tex', replace(base, lambda1=0.0, lambda2=0.0)),
        ('adv+tex+sim', replace(base, lambda2=0.0)),
        ('adv+tex+tv', replace(base, lambda1=0.0)),
        ('all', base),
    ]
