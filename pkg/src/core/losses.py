"""
Adversarial, inconspicuousness and texture losses and their weighted total
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from config.settings import Settings
from ..ndgrad import ops
from ..ndgrad.tensor import Tensor, as_tensor
from ..utils.errors import ShapeError
from ..utils.imaging import resize_bilinear
from .features import FeatureExtractor, FeatureTaps, cross_layer_gram, layer_weights

logger = logging.getLogger(__name__)

PROB_FLOOR = 1e-6
SSIM_FLOOR = 1e-6

BREAKDOWN_COLUMNS = ('total', 'l_adv', 'l_cls', 'l_mask', 'l_nat', 'l_inc', 'l_sim', 'l_tv',
                     'l_tex', 'l_c', 'l_s')


@dataclass
class LossWeights:
    alpha: float = Settings.LOSS_WEIGHTS['alpha']
    beta: float = Settings.LOSS_WEIGHTS['beta']
    lambda1: float = Settings.LOSS_WEIGHTS['lambda1']
    lambda2: float = Settings.LOSS_WEIGHTS['lambda2']
    cls_weight: float = Settings.LOSS_WEIGHTS['cls_weight']
    mask_weight: float = Settings.LOSS_WEIGHTS['mask_weight']

    def validate(self) -> None:
        for key, value in asdict(self).items():
            if value < 0:
                raise ValueError(f"loss weight {key} must be non-negative, got {value}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class LossBreakdown:
    total: float
    l_adv: float
    l_cls: float
    l_mask: float
    l_nat: float
    l_inc: float
    l_sim: float
    l_tv: float
    l_tex: float
    l_c: float
    l_s: float
    graph: Optional[Tensor] = field(default=None, repr=False, compare=False)

    def to_row(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in BREAKDOWN_COLUMNS}


@dataclass
class CleanRefs:
    """
    Anchors flagged as person on the clean image, with each anchor's clean
    binary mask at prototype resolution
    """
    anchor_indices: np.ndarray
    masks: np.ndarray
    scores: np.ndarray = field(default_factory=lambda: np.zeros(0))
    num_detections: int = 0

    @property
    def empty(self) -> bool:
        return len(self.anchor_indices) == 0

    @classmethod
    def none(cls, proto_shape: Tuple[int, int] = (1, 1)) -> 'CleanRefs':
        return cls(np.zeros(0, dtype=int), np.zeros((0,) + tuple(proto_shape)))


# -- inconspicuousness -------------------------------------------------------------

def loss_tv(img) -> Tensor:
    """mean(dx^2) + mean(dy^2) over forward differences"""
    img = as_tensor(img)
    dx = ops.sub(img[:, :, 1:], img[:, :, :-1])
    dy = ops.sub(img[:, 1:, :], img[:, :-1, :])
    return ops.add(ops.mean(ops.mul(dx, dx)), ops.mean(ops.mul(dy, dy)))


def gaussian_window(size: int = Settings.SSIM['window'], sigma: float = Settings.SSIM['sigma']) -> np.ndarray:
    offsets = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(offsets ** 2) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter(x: Tensor, window: np.ndarray) -> Tensor:
    channels = x.shape[0]
    x = ops.depthwise_conv2d(x, np.tile(window[None, None, :], (channels, 1, 1)))
    return ops.depthwise_conv2d(x, np.tile(window[None, :, None], (channels, 1, 1)))


def ssim_components(x, y, window: Optional[np.ndarray] = None) -> Tuple[Tensor, Tensor]:
    """Per-channel mean SSIM and mean contrast-structure term over valid positions"""
    x, y = as_tensor(x), as_tensor(y)
    if x.shape != y.shape:
        raise ShapeError("SSIM inputs differ in shape", operator='ssim', shapes=[x.shape, y.shape])
    window = gaussian_window() if window is None else window
    if min(x.shape[1:]) < len(window):
        raise ShapeError(f"image smaller than the {len(window)}-pixel SSIM window", operator='ssim',
                         shapes=[x.shape])
    c1 = Settings.SSIM['k1'] ** 2
    c2 = Settings.SSIM['k2'] ** 2
    mu_x = _filter(x, window)
    mu_y = _filter(y, window)
    mu_xx = ops.mul(mu_x, mu_x)
    mu_yy = ops.mul(mu_y, mu_y)
    mu_xy = ops.mul(mu_x, mu_y)
    sigma_xx = ops.sub(_filter(ops.mul(x, x), window), mu_xx)
    sigma_yy = ops.sub(_filter(ops.mul(y, y), window), mu_yy)
    sigma_xy = ops.sub(_filter(ops.mul(x, y), window), mu_xy)
    cs_map = ops.div(ops.add_scalar(ops.mul_scalar(sigma_xy, 2.0), c2),
                     ops.add_scalar(ops.add(sigma_xx, sigma_yy), c2))
    luminance = ops.div(ops.add_scalar(ops.mul_scalar(mu_xy, 2.0), c1),
                        ops.add_scalar(ops.add(mu_xx, mu_yy), c1))
    ssim_map = ops.mul(luminance, cs_map)
    return ops.mean(ssim_map, axis=(1, 2)), ops.mean(cs_map, axis=(1, 2))


def ms_ssim_scales(height: int, width: int, window: int = Settings.SSIM['window'],
                   max_scales: int = len(Settings.SSIM['scale_weights'])) -> int:
    """Largest scale count whose coarsest side is at least twice the window"""
    side = min(height, width)
    if side < window:
        raise ShapeError(f"image smaller than the {window}-pixel SSIM window", operator='ms_ssim',
                         shapes=[(height, width)])
    scales = 1
    while scales < max_scales and side / 2 ** scales >= 2 * window:
        scales += 1
    return scales


def ms_ssim(x, y) -> Tensor:
    """Multi-scale SSIM averaged over channels, scale weights renormalized"""
    x, y = as_tensor(x), as_tensor(y)
    scales = ms_ssim_scales(x.shape[1], x.shape[2])
    weights = np.asarray(Settings.SSIM['scale_weights'][:scales], dtype=np.float64)
    weights = weights / weights.sum()
    product = None
    for level in range(scales):
        ssim_val, cs_val = ssim_components(x, y)
        term = ssim_val if level == scales - 1 else cs_val
        factor = ops.power(ops.clamp(term, SSIM_FLOOR, 1.0), weights[level])
        product = factor if product is None else ops.mul(product, factor)
        if level < scales - 1:
            x, y = ops.avg_pool2d(x, 2), ops.avg_pool2d(y, 2)
    return ops.mean(product)


def loss_sim(x, x_adv) -> Tensor:
    """1 - MS-SSIM"""
    return ops.add_scalar(ops.neg(ms_ssim(x, x_adv)), 1.0)


# -- texture --------------------------------------------------------------------------

def style_pairs(taps: FeatureTaps) -> List[Tuple[str, str]]:
    return list(zip(taps.style, taps.style[1:]))


def content_loss_from_features(adv: Dict[str, Tensor], reference: Dict[str, np.ndarray],
                               weights: Dict[str, float]) -> Tensor:
    total = None
    for tap, w in weights.items():
        diff = ops.sub(adv[tap], reference[tap])
        term = ops.mul_scalar(ops.mean(ops.mul(diff, diff)), w)
        total = term if total is None else ops.add(total, term)
    return total if total is not None else Tensor(0.0)


def gram_normalizers(adv: Dict[str, Tensor], taps: FeatureTaps) -> Dict[str, float]:
    """Population std of each adversarial Gram, treated as a constant"""
    return {l: float(np.std(cross_layer_gram(adv[l].detach(), adv[l1].detach()).data))
            for l, l1 in style_pairs(taps)}


def style_loss_from_features(adv: Dict[str, Tensor], reference_grams: Dict[str, np.ndarray],
                             taps: FeatureTaps, weights: Dict[str, float],
                             normalizers: Optional[Dict[str, float]] = None) -> Tensor:
    eps = Settings.FEATURES['std_epsilon']
    normalizers = normalizers or gram_normalizers(adv, taps)
    total = None
    for l, l1 in style_pairs(taps):
        diff = ops.sub(cross_layer_gram(adv[l], adv[l1]), reference_grams[l])
        scale = weights[l] / (normalizers[l] + eps)
        term = ops.mul_scalar(ops.sum(ops.mul(diff, diff)), scale)
        total = term if total is None else ops.add(total, term)
    return total if total is not None else Tensor(0.0)


def style_grams(extractor: FeatureExtractor, style: np.ndarray, taps: FeatureTaps,
                size: Tuple[int, int]) -> Dict[str, np.ndarray]:
    style = np.asarray(getattr(style, 'data', style), dtype=np.float64)
    if style.shape[1:] != tuple(size):
        style = resize_bilinear(style, *size)
    feats = extractor.extract(style, taps.style)
    return {l: cross_layer_gram(feats[l], feats[l1]).data for l, l1 in style_pairs(taps)}


@dataclass
class TextureTargets:
    """Constant content features of X and style Grams of S for one attack"""
    extractor: FeatureExtractor
    taps: FeatureTaps
    content_features: Dict[str, np.ndarray]
    style_grams: Dict[str, np.ndarray]
    content_weights: Dict[str, float]
    style_weights: Dict[str, float]

    @classmethod
    def build(cls, extractor: FeatureExtractor, x, style, taps: Optional[FeatureTaps] = None) -> 'TextureTargets':
        taps = taps or FeatureTaps()
        extractor.validate_taps(taps)
        x = as_tensor(x).detach()
        content = {k: v.data for k, v in extractor.extract(x, taps.content).items()}
        grams = style_grams(extractor, style, taps, x.shape[1:])
        weights = layer_weights(extractor, taps)
        return cls(extractor, taps, content, grams, weights['content'], weights['style'])

    @property
    def all_taps(self) -> List[str]:
        return sorted(set(self.taps.content) | set(self.taps.style), key=self.extractor.depth)


def loss_content(x_adv, x, extractor: FeatureExtractor, taps: Optional[FeatureTaps] = None) -> Tensor:
    """Sum over content taps of w_l * mean squared feature difference"""
    taps = taps or FeatureTaps()
    reference = {k: v.data for k, v in extractor.extract(as_tensor(x).detach(), taps.content).items()}
    adv = extractor.extract(x_adv, taps.content)
    return content_loss_from_features(adv, reference, layer_weights(extractor, taps)['content'])


def loss_style(x_adv, style, extractor: FeatureExtractor, taps: Optional[FeatureTaps] = None,
               normalizers: Optional[Dict[str, float]] = None) -> Tensor:
    """Cross-layer Gram mismatch against ``style`` (resized to x_adv's extent)"""
    taps = taps or FeatureTaps()
    x_adv = as_tensor(x_adv)
    grams = style_grams(extractor, style, taps, x_adv.shape[1:])
    adv = extractor.extract(x_adv, taps.style)
    return style_loss_from_features(adv, grams, taps, layer_weights(extractor, taps)['style'], normalizers)


# -- adversarial ------------------------------------------------------------------------

def _suppression(p: Tensor) -> Tensor:
    """-log(1 - p) with p clamped away from 0 and 1"""
    safe = ops.clamp(p, PROB_FLOOR, 1.0 - PROB_FLOOR)
    return ops.neg(ops.log(ops.add_scalar(ops.neg(safe), 1.0)))


def loss_adversarial(det, clean_refs: CleanRefs, with_cls: bool = True,
                     with_mask: bool = True) -> Tuple[Tensor, Tensor]:
    """
    L_cls: mean -log(1 - p_person) over flagged anchors.
    L_mask: mean -log(1 - m) over pixels inside each flagged anchor's clean
    mask, at prototype resolution.
    """
    zero = Tensor(0.0)
    if clean_refs is None or clean_refs.empty:
        return zero, zero

    idx = np.asarray(clean_refs.anchor_indices, dtype=int)
    l_cls = zero
    if with_cls:
        l_cls = ops.mean(_suppression(det.probs[idx, 1]))

    l_mask = zero
    if with_mask:
        rows, cols = np.nonzero(clean_refs.masks.reshape(len(idx), -1))
        if len(rows):
            k, hp, wp = det.prototypes.shape
            logits = ops.matmul(det.coeffs[idx], ops.reshape(det.prototypes, (k, hp * wp)))
            probs = ops.sigmoid(logits[rows, cols])
            l_mask = ops.mean(_suppression(probs))
    return l_cls, l_mask


# -- total ---------------------------------------------------------------------------------

def loss_total(x, x_adv, style, det, clean_refs: Optional[CleanRefs], weights: LossWeights,
               extractor: Optional[FeatureExtractor] = None,
               targets: Optional[TextureTargets] = None) -> LossBreakdown:
    """
    total = alpha * L_adv + L_nat
    L_nat = L_inc + beta * L_tex,  L_inc = lambda1 * L_sim + lambda2 * L_tv,
    L_tex = L_c + L_s,  L_adv = cls_weight * L_cls + mask_weight * L_mask.
    Components with a zero weight are skipped and reported as 0.
    """
    weights.validate()
    x_adv = as_tensor(x_adv)
    zero = Tensor(0.0)

    l_cls = l_mask = zero
    if weights.alpha > 0 and det is not None:
        l_cls, l_mask = loss_adversarial(det, clean_refs, weights.cls_weight > 0, weights.mask_weight > 0)
    l_adv = ops.add(ops.mul_scalar(l_cls, weights.cls_weight), ops.mul_scalar(l_mask, weights.mask_weight))

    l_sim = loss_sim(x, x_adv) if weights.lambda1 > 0 else zero
    l_tv = loss_tv(x_adv) if weights.lambda2 > 0 else zero
    l_inc = ops.add(ops.mul_scalar(l_sim, weights.lambda1), ops.mul_scalar(l_tv, weights.lambda2))

    l_c = l_s = zero
    if weights.beta > 0:
        if targets is None:
            targets = TextureTargets.build(extractor or FeatureExtractor(), x, style)
        adv = targets.extractor.extract(x_adv, targets.all_taps)
        l_c = content_loss_from_features(adv, targets.content_features, targets.content_weights)
        l_s = style_loss_from_features(adv, targets.style_grams, targets.taps, targets.style_weights)
    l_tex = ops.add(l_c, l_s)

    l_nat = ops.add(l_inc, ops.mul_scalar(l_tex, weights.beta))
    total = ops.add(ops.mul_scalar(l_adv, weights.alpha), l_nat)

    return LossBreakdown(
        total=total.item(), l_adv=l_adv.item(), l_cls=l_cls.item(), l_mask=l_mask.item(),
        l_nat=l_nat.item(), l_inc=l_inc.item(), l_sim=l_sim.item(), l_tv=l_tv.item(),
        l_tex=l_tex.item(), l_c=l_c.item(), l_s=l_s.item(), graph=total,
    )
