"""
Miniature prototype-mask person segmenter: backbone, anchor-grid class and
coefficient heads, prototype branch, decode with NMS, and a trainer
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config.settings import Settings
from ..ndgrad import ops
from ..ndgrad.optim import Adam
from ..ndgrad.storage import load_archive, save_archive
from ..ndgrad.tensor import Tensor, as_tensor, no_grad, parameter
from ..utils.errors import DatasetError, ShapeError, StorageError
from ..utils.imaging import resize_bilinear
from ..utils.logger import Logger

logger = logging.getLogger(__name__)

MODEL_VERSION = 1
PERSON = 1
BACKBONE_STRIDE = 16
HEAD_STRIDE = 8
PROTO_STRIDE = 4


@dataclass
class SegmenterConfig:
    image_size: int = Settings.SEGMENTER['image_size']
    widths: Tuple[int, ...] = Settings.SEGMENTER['widths']
    head_width: int = Settings.SEGMENTER['head_width']
    proto_width: int = Settings.SEGMENTER['proto_width']
    num_prototypes: int = Settings.SEGMENTER['num_prototypes']
    anchor_shapes: Tuple[Tuple[int, int], ...] = Settings.SEGMENTER['anchor_shapes']
    prior_prob: float = Settings.SEGMENTER['prior_prob']
    seed: int = 0

    @property
    def num_anchors(self) -> int:
        return len(self.anchor_shapes)

    def to_dict(self) -> dict:
        payload = asdict(self)
        payload['widths'] = list(self.widths)
        payload['anchor_shapes'] = [list(s) for s in self.anchor_shapes]
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> 'SegmenterConfig':
        payload = dict(payload)
        payload['widths'] = tuple(payload['widths'])
        payload['anchor_shapes'] = tuple(tuple(s) for s in payload['anchor_shapes'])
        return cls(**payload)


@dataclass
class DecodeConfig:
    score_thresh: float = Settings.DECODE['score_thresh']
    nms_iou: float = Settings.DECODE['nms_iou']
    mask_bin: float = Settings.DECODE['mask_bin']

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class DetectorOutput:
    """Raw head outputs; row ``(cy * grid_w + cx) * A + a`` belongs to anchor ``a`` of cell (cy, cx)"""
    logits: Tensor
    probs: Tensor
    coeffs: Tensor
    prototypes: Tensor
    anchors: np.ndarray
    image_shape: Tuple[int, int]

    @property
    def person_scores(self) -> np.ndarray:
        return self.probs.data[:, PERSON]


@dataclass
class Detection:
    score: float
    box: Tuple[float, float, float, float]
    mask: np.ndarray = field(repr=False)
    anchor: int = -1


# -- geometry -----------------------------------------------------------------------

def anchor_boxes(config: SegmenterConfig, height: int, width: int) -> np.ndarray:
    """(cells * A, 4) boxes as x0, y0, x1, y1 in pixels, clipped to the image"""
    grid_h, grid_w = height // HEAD_STRIDE, width // HEAD_STRIDE
    scale = min(height, width) / float(config.image_size)
    cy, cx = np.mgrid[0:grid_h, 0:grid_w]
    centers_x = (cx.reshape(-1) + 0.5) * HEAD_STRIDE
    centers_y = (cy.reshape(-1) + 0.5) * HEAD_STRIDE
    boxes = []
    for x, y in zip(centers_x, centers_y):
        for aw, ah in config.anchor_shapes:
            hw, hh = aw * scale / 2.0, ah * scale / 2.0
            boxes.append((max(0.0, x - hw), max(0.0, y - hh), min(float(width), x + hw), min(float(height), y + hh)))
    return np.asarray(boxes, dtype=np.float64)


def box_iou(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU of (N,4) and (M,4) boxes"""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    x0 = np.maximum(a[:, None, 0], b[None, :, 0])
    y0 = np.maximum(a[:, None, 1], b[None, :, 1])
    x1 = np.minimum(a[:, None, 2], b[None, :, 2])
    y1 = np.minimum(a[:, None, 3], b[None, :, 3])
    inter = np.clip(x1 - x0, 0, None) * np.clip(y1 - y0, 0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    return np.where(union > 0, inter / np.maximum(union, 1e-12), 0.0)


def box_region(box, height: int, width: int, stride: int = 1) -> Tuple[slice, slice]:
    """Pixel slices covering ``box`` on a grid downsampled by ``stride``"""
    x0, y0, x1, y1 = box
    return (slice(max(0, int(np.floor(y0 / stride))), min(height, int(np.ceil(y1 / stride)))),
            slice(max(0, int(np.floor(x0 / stride))), min(width, int(np.ceil(x1 / stride)))))


# -- model ------------------------------------------------------------------------------

class SegmenterModel:
    """Parameters plus the differentiable forward pass"""

    def __init__(self, config: Optional[SegmenterConfig] = None,
                 params: Optional[Dict[str, np.ndarray]] = None, trainable: bool = True):
        self.config = config or SegmenterConfig()
        arrays = params if params is not None else self._init_params()
        if trainable:
            self.params: Dict[str, Tensor] = {name: parameter(value) for name, value in arrays.items()}
        else:
            self.params = {name: Tensor(value) for name, value in arrays.items()}
        self.trainable = trainable
        self._anchor_cache: Dict[Tuple[int, int], np.ndarray] = {}

    def frozen(self) -> 'SegmenterModel':
        """Weight-sharing view whose parameters record no gradients"""
        if not self.trainable:
            return self
        return SegmenterModel(self.config, self.parameter_arrays(), trainable=False)

    def _init_params(self) -> Dict[str, np.ndarray]:
        cfg = self.config
        rng = np.random.default_rng(cfg.seed)

        def conv(c_out, c_in, k):
            return rng.normal(0.0, np.sqrt(2.0 / (c_in * k * k)), size=(c_out, c_in, k, k)), np.zeros(c_out)

        params = {}
        c_in = 3
        for i, width in enumerate(cfg.widths, start=1):
            params[f"backbone{i}.weight"], params[f"backbone{i}.bias"] = conv(width, c_in, 3)
            c_in = width
        w2, w3, w4 = cfg.widths[1], cfg.widths[2], cfg.widths[3]
        params['head.weight'], params['head.bias'] = conv(cfg.head_width, w3 + w4, 3)
        params['cls.weight'], params['cls.bias'] = conv(cfg.num_anchors * 2, cfg.head_width, 1)
        params['cls.weight'] *= 0.1
        prior = np.log(cfg.prior_prob / (1.0 - cfg.prior_prob))
        params['cls.bias'][PERSON::2] = prior
        params['coef.weight'], params['coef.bias'] = conv(cfg.num_anchors * cfg.num_prototypes, cfg.head_width, 1)
        params['proto1.weight'], params['proto1.bias'] = conv(cfg.proto_width, w2 + w3, 3)
        params['proto2.weight'], params['proto2.bias'] = conv(cfg.num_prototypes, cfg.proto_width, 1)
        return params

    def anchors(self, height: int, width: int) -> np.ndarray:
        key = (height, width)
        if key not in self._anchor_cache:
            self._anchor_cache[key] = anchor_boxes(self.config, height, width)
        return self._anchor_cache[key]

    def _conv(self, x: Tensor, name: str, stride: int = 1, pad: int = 0) -> Tensor:
        return ops.conv2d(x, self.params[f"{name}.weight"], self.params[f"{name}.bias"], stride=stride, pad=pad)

    def forward(self, img) -> DetectorOutput:
        x = as_tensor(img)
        if x.ndim != 3 or x.shape[0] != 3:
            raise ShapeError("segmenter expects a (3,H,W) image", operator='segmenter', shapes=[x.shape])
        _, height, width = x.shape
        if height % BACKBONE_STRIDE or width % BACKBONE_STRIDE:
            raise ShapeError(f"image size must be divisible by {BACKBONE_STRIDE}", operator='segmenter',
                             shapes=[x.shape])
        cfg = self.config
        stages = []
        for i in range(1, len(cfg.widths) + 1):
            x = ops.relu(self._conv(x, f"backbone{i}", stride=2, pad=1))
            stages.append(x)
        s2, s3, s4 = stages[1], stages[2], stages[3]
        grid_h, grid_w = s3.shape[1:]

        head_in = ops.concat([s3, ops.resize_bilinear(s4, grid_h, grid_w)], axis=0)
        head = ops.relu(self._conv(head_in, 'head', pad=1))
        cells = grid_h * grid_w * cfg.num_anchors
        logits = ops.reshape(ops.transpose(self._conv(head, 'cls'), (1, 2, 0)), (cells, 2))
        coeffs = ops.tanh(ops.reshape(ops.transpose(self._conv(head, 'coef'), (1, 2, 0)),
                                      (cells, cfg.num_prototypes)))

        proto_h, proto_w = s2.shape[1:]
        proto_in = ops.concat([s2, ops.resize_bilinear(s3, proto_h, proto_w)], axis=0)
        prototypes = ops.relu(self._conv(ops.relu(self._conv(proto_in, 'proto1', pad=1)), 'proto2'))

        return DetectorOutput(logits, ops.softmax(logits, axis=-1), coeffs, prototypes,
                              self.anchors(height, width), (height, width))

    def parameter_arrays(self) -> Dict[str, np.ndarray]:
        return {name: p.data for name, p in self.params.items()}


def forward(model: SegmenterModel, img) -> DetectorOutput:
    return model.forward(img)


def assemble_masks(out: DetectorOutput, anchor_indices: Sequence[int]) -> Tensor:
    """Mask logits sum_j coeff[a, j] * prototype_j at prototype resolution, shape (n, Hp, Wp)"""
    idx = np.asarray(anchor_indices, dtype=int)
    k, hp, wp = out.prototypes.shape
    logits = ops.matmul(out.coeffs[idx], ops.reshape(out.prototypes, (k, hp * wp)))
    return ops.reshape(logits, (len(idx), hp, wp))


def nms(boxes: np.ndarray, scores: np.ndarray, iou_threshold: float) -> List[int]:
    """Greedy non-maximum suppression; ties keep the lower index"""
    order = np.argsort(-scores, kind='stable')
    keep: List[int] = []
    for i in order:
        if keep and np.any(box_iou(boxes[i], boxes[keep])[0] > iou_threshold):
            continue
        keep.append(int(i))
    return keep


def decode(out: DetectorOutput, score_thresh: float = Settings.DECODE['score_thresh'],
           nms_iou: float = Settings.DECODE['nms_iou'],
           mask_bin: float = Settings.DECODE['mask_bin']) -> List[Detection]:
    """Threshold, NMS, assemble, upsample, crop to box and binarize"""
    scores = out.person_scores
    candidates = np.nonzero(scores >= score_thresh)[0]
    if len(candidates) == 0:
        return []
    kept = [candidates[i] for i in nms(out.anchors[candidates], scores[candidates], nms_iou)]
    height, width = out.image_shape
    with no_grad():
        logits = assemble_masks(out, kept).data
    probs = 1.0 / (1.0 + np.exp(-logits))
    full = resize_bilinear(probs, height, width)
    detections = []
    for row, anchor in enumerate(kept):
        box = tuple(float(v) for v in out.anchors[anchor])
        crop = np.zeros((height, width), dtype=bool)
        crop[box_region(box, height, width)] = True
        mask = ((full[row] > mask_bin) & crop).astype(np.float64)
        detections.append(Detection(float(scores[anchor]), box, mask, int(anchor)))
    return detections


def detect(model: SegmenterModel, img, cfg: Optional[DecodeConfig] = None) -> List[Detection]:
    """Inference-only forward plus decode"""
    cfg = cfg or DecodeConfig()
    with no_grad():
        out = model.forward(getattr(img, 'data', img))
    return decode(out, cfg.score_thresh, cfg.nms_iou, cfg.mask_bin)


# -- training ------------------------------------------------------------------------------

@dataclass
class AnchorTargets:
    positives: np.ndarray
    negatives: np.ndarray
    matched_gt: np.ndarray


def match_anchors(anchors: np.ndarray, gt_boxes: np.ndarray,
                  positive_iou: float = Settings.SEGMENTER['positive_iou'],
                  negative_iou: float = Settings.SEGMENTER['negative_iou']) -> AnchorTargets:
    """IoU matching; every ground-truth box also claims its best anchor"""
    n = len(anchors)
    if len(gt_boxes) == 0:
        return AnchorTargets(np.zeros(0, dtype=int), np.arange(n), np.full(n, -1))
    iou = box_iou(anchors, gt_boxes)
    best_gt = iou.argmax(axis=1)
    best_iou = iou.max(axis=1)
    matched = np.where(best_iou >= positive_iou, best_gt, -1)
    for g in range(len(gt_boxes)):
        a = int(iou[:, g].argmax())
        matched[a] = g
    positive = matched >= 0
    negative = (~positive) & (best_iou < negative_iou)
    return AnchorTargets(np.nonzero(positive)[0], np.nonzero(negative)[0], matched)


def _mask_targets(out: DetectorOutput, scene, targets: AnchorTargets) -> Tuple[np.ndarray, np.ndarray]:
    """Ground-truth masks and box-crop weights at prototype resolution for each positive anchor"""
    _, hp, wp = out.prototypes.shape
    height, width = out.image_shape
    small = {}
    masks = np.zeros((len(targets.positives), hp, wp))
    crops = np.zeros_like(masks)
    for row, anchor in enumerate(targets.positives):
        g = int(targets.matched_gt[anchor])
        if g not in small:
            small[g] = (resize_bilinear(scene.instance_masks[g][None], hp, wp)[0] > 0.5).astype(np.float64)
        masks[row] = small[g]
        crops[row][box_region(scene.boxes[g], hp, wp, stride=height // hp)] = 1.0
    return masks, crops


def scene_loss(model: SegmenterModel, scene,
               negative_ratio: int = Settings.SEGMENTER['negative_ratio']) -> Tuple[Tensor, float, float]:
    """Softmax cross-entropy with hard-negative mining plus box-cropped mask BCE"""
    out = model.forward(scene.image)
    targets = match_anchors(out.anchors, np.asarray(scene.boxes, dtype=np.float64))
    log_probs = ops.log_softmax(out.logits, axis=-1)

    n_pos = max(len(targets.positives), 1)
    background_loss = -log_probs.data[targets.negatives, 1 - PERSON]
    hardest = targets.negatives[np.argsort(-background_loss, kind='stable')[:negative_ratio * n_pos]]
    pos_term = ops.sum(log_probs[targets.positives, PERSON])
    neg_term = ops.sum(log_probs[hardest, 1 - PERSON])
    cls_loss = ops.mul_scalar(ops.add(pos_term, neg_term), -1.0 / n_pos)

    mask_loss = Tensor(0.0)
    if len(targets.positives):
        gt, crops = _mask_targets(out, scene, targets)
        probs = ops.clamp(ops.sigmoid(assemble_masks(out, targets.positives)), 1e-6, 1.0 - 1e-6)
        bce = ops.add(ops.mul(gt, ops.log(probs)), ops.mul(1.0 - gt, ops.log(ops.add_scalar(ops.neg(probs), 1.0))))
        mask_loss = ops.mul_scalar(ops.sum(ops.mul(bce, crops)), -1.0 / max(crops.sum(), 1.0))

    total = ops.add(cls_loss, mask_loss)
    return total, cls_loss.item(), mask_loss.item()


def train(model: SegmenterModel, dataset: Sequence, epochs: int = Settings.SEGMENTER['epochs'],
          lr: float = Settings.SEGMENTER['lr'], seed: int = 0,
          batch_size: int = Settings.SEGMENTER['batch_size'],
          on_epoch: Optional[Callable[[int, dict], None]] = None) -> Tuple[SegmenterModel, pd.DataFrame]:
    """Adam over mini-batches with gradients accumulated per scene; deterministic per seed"""
    scenes = list(dataset)
    if not scenes:
        raise DatasetError("cannot train on an empty dataset")
    rng = np.random.default_rng(seed)
    optimizer = Adam(model.params, lr)
    rows = []
    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(scenes))
        totals, cls_sum, mask_sum = [], 0.0, 0.0
        for start in range(0, len(order), batch_size):
            batch = order[start:start + batch_size]
            optimizer.zero_grad()
            for i in batch:
                loss, cls_value, mask_value = scene_loss(model, scenes[i])
                ops.mul_scalar(loss, 1.0 / len(batch)).backward()
                totals.append(loss.item())
                cls_sum += cls_value
                mask_sum += mask_value
            optimizer.step()
        row = {'epoch': epoch, 'loss': float(np.mean(totals)),
               'cls_loss': cls_sum / len(scenes), 'mask_loss': mask_sum / len(scenes)}
        rows.append(row)
        Logger.event(logger, 'train_epoch', **row)
        if on_epoch is not None:
            on_epoch(epoch, row)
    return model, pd.DataFrame(rows)


# -- persistence ---------------------------------------------------------------------------

def save_model(model: SegmenterModel, path: str) -> str:
    meta = {'kind': 'segmenter', 'version': MODEL_VERSION, 'config': model.config.to_dict()}
    return save_archive(path, model.parameter_arrays(), meta)


def load_model(path: str) -> SegmenterModel:
    tensors, meta = load_archive(path)
    if meta.get('kind') != 'segmenter':
        raise StorageError("archive does not hold a segmenter", path=path)
    if meta.get('version') != MODEL_VERSION:
        raise StorageError("segmenter version mismatch", path=path, expected=MODEL_VERSION,
                           found=meta.get('version'))
    config = SegmenterConfig.from_dict(meta['config'])
    reference = SegmenterModel(config).parameter_arrays()
    for name, array in reference.items():
        if name not in tensors:
            raise StorageError("segmenter weights missing a layer", path=path, layer=name)
        if tensors[name].shape != array.shape:
            raise StorageError("segmenter layer shape mismatch", path=path, layer=name,
                               expected=list(array.shape), found=list(tensors[name].shape))
    extra = set(tensors) - set(reference)
    if extra:
        raise StorageError("unexpected layers in segmenter weights", path=path, layers=sorted(extra))
    return SegmenterModel(config, tensors)
