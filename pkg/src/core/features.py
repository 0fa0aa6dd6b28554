"""
Fixed seeded convolutional feature extractor with named taps, and the
cross-layer Gram matrix used by the style loss
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from config.settings import Settings
from ..ndgrad import ops
from ..ndgrad.storage import load_archive, save_archive
from ..ndgrad.tensor import Tensor, as_tensor
from ..utils.errors import ShapeError, StorageError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FeatureTaps:
    """Content taps and depth-ordered style taps"""
    content: Tuple[str, ...] = Settings.FEATURES['content_taps']
    style: Tuple[str, ...] = Settings.FEATURES['style_taps']


class FeatureExtractor:
    """
    Stages of 3x3 conv + relu (``convs_per_stage`` times) followed by a 2x2
    average pool.  Layers are named ``conv{stage}_{index}``; taps are the
    post-relu activations.  Weights are He-scaled draws from ``seed`` and
    read-only after construction.
    """

    def __init__(self, widths: Sequence[int] = Settings.FEATURES['widths'],
                 convs_per_stage: Sequence[int] = Settings.FEATURES['convs_per_stage'],
                 seed: int = Settings.FEATURES['seed'], in_channels: int = 3,
                 weights: Optional[Dict[str, np.ndarray]] = None):
        if len(widths) != len(convs_per_stage):
            raise ShapeError("one width per stage required", operator='FeatureExtractor',
                             shapes=[len(widths), len(convs_per_stage)])
        self.widths = tuple(int(w) for w in widths)
        self.convs_per_stage = tuple(int(n) for n in convs_per_stage)
        self.seed = int(seed)
        self.in_channels = in_channels
        self.layers: List[Tuple[str, int]] = []
        for stage, (width, count) in enumerate(zip(self.widths, self.convs_per_stage), start=1):
            for index in range(1, count + 1):
                self.layers.append((f"conv{stage}_{index}", stage))
        self._channels = {name: self.widths[stage - 1] for name, stage in self.layers}
        self.params = weights if weights is not None else self._init_weights()
        for array in self.params.values():
            array.setflags(write=False)

    def _init_weights(self) -> Dict[str, np.ndarray]:
        rng = np.random.default_rng(self.seed)
        params = {}
        c_in = self.in_channels
        for name, stage in self.layers:
            c_out = self.widths[stage - 1]
            std = np.sqrt(2.0 / (c_in * 9))
            params[f"{name}.weight"] = rng.normal(0.0, std, size=(c_out, c_in, 3, 3))
            params[f"{name}.bias"] = np.zeros(c_out)
            c_in = c_out
        return params

    @property
    def num_stages(self) -> int:
        return len(self.widths)

    @property
    def layer_names(self) -> List[str]:
        return [name for name, _ in self.layers]

    def channels(self, tap: str) -> int:
        if tap not in self._channels:
            raise KeyError(f"unknown feature tap {tap}")
        return self._channels[tap]

    def depth(self, tap: str) -> int:
        return self.layer_names.index(tap)

    def validate_taps(self, taps: FeatureTaps) -> None:
        for tap in tuple(taps.content) + tuple(taps.style):
            self.channels(tap)
        depths = [self.depth(t) for t in taps.style]
        if depths != sorted(depths):
            raise ValueError("style taps must be ordered by depth")

    def extract(self, img, taps: Optional[Iterable[str]] = None) -> Dict[str, Tensor]:
        """Activations at ``taps`` (every layer when None)"""
        x = as_tensor(img)
        if x.ndim != 3 or x.shape[0] != self.in_channels:
            raise ShapeError(f"feature extractor expects ({self.in_channels},H,W)",
                             operator='extract', shapes=[x.shape])
        minimum = 2 ** self.num_stages
        if x.shape[1] < minimum or x.shape[2] < minimum:
            raise ShapeError(f"image smaller than {minimum} pixels underflows the stages",
                             operator='extract', shapes=[x.shape])
        wanted = set(self.layer_names if taps is None else taps)
        for tap in wanted:
            self.channels(tap)
        deepest = max(self.depth(t) for t in wanted)

        features: Dict[str, Tensor] = {}
        for position, (name, stage) in enumerate(self.layers):
            x = ops.relu(ops.conv2d(x, self.params[f"{name}.weight"], self.params[f"{name}.bias"], pad=1))
            if name in wanted:
                features[name] = x
            if position == deepest:
                break
            is_last_in_stage = position + 1 == len(self.layers) or self.layers[position + 1][1] != stage
            if is_last_in_stage:
                x = ops.avg_pool2d(x, 2)
        return features

    def save(self, path: str) -> str:
        meta = {'widths': list(self.widths), 'convs_per_stage': list(self.convs_per_stage),
                'seed': self.seed, 'in_channels': self.in_channels, 'kind': 'feature_extractor'}
        return save_archive(path, self.params, meta)

    @classmethod
    def load(cls, path: str) -> 'FeatureExtractor':
        tensors, meta = load_archive(path)
        if meta.get('kind') != 'feature_extractor':
            raise StorageError("archive does not hold a feature extractor", path=path)
        extractor = cls(meta['widths'], meta['convs_per_stage'], meta['seed'], meta['in_channels'],
                        weights=tensors)
        expected = cls(meta['widths'], meta['convs_per_stage'], meta['seed'], meta['in_channels'])
        for key, array in expected.params.items():
            if key not in tensors or tensors[key].shape != array.shape:
                raise StorageError("feature weights do not match the declared layers", path=path, layer=key)
        return extractor


def cross_layer_gram(f_l, f_next) -> Tensor:
    """G = F_l . F_next^T / N with F_next resized onto F_l's grid"""
    f_l, f_next = as_tensor(f_l), as_tensor(f_next)
    if f_l.size == 0 or f_next.size == 0:
        raise ShapeError("Gram matrix of empty features", operator='cross_layer_gram',
                         shapes=[f_l.shape, f_next.shape])
    c_l, h, w = f_l.shape
    if f_next.shape[1:] != (h, w):
        f_next = ops.resize_bilinear(f_next, h, w)
    n = h * w
    a = ops.reshape(f_l, (c_l, n))
    b = ops.reshape(f_next, (f_next.shape[0], n))
    return ops.mul_scalar(ops.matmul(a, ops.transpose(b)), 1.0 / n)


def layer_weights(extractor: FeatureExtractor, taps: FeatureTaps) -> Dict[str, Dict[str, float]]:
    """
    w_l = 1 / C_{l+1}^2.  Style taps pair with the next style tap; content taps
    with the next network layer; the deepest layer uses its own width.
    """
    names = extractor.layer_names
    content = {}
    for tap in taps.content:
        position = names.index(tap)
        follower = names[position + 1] if position + 1 < len(names) else tap
        content[tap] = 1.0 / extractor.channels(follower) ** 2
    style = {}
    for current, following in zip(taps.style, taps.style[1:]):
        style[current] = 1.0 / extractor.channels(following) ** 2
    return {'content': content, 'style': style}
