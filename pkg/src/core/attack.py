"""
Fashion-guided adversarial texture attack and noise-family baselines
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config.settings import Settings
from ..ndgrad import ops
from ..ndgrad.optim import AdamState, adam_step
from ..ndgrad.tensor import Tensor, no_grad, parameter
from ..utils.errors import (AttackDivergedError, ConfigError, NonFiniteError, ShapeError,
                            TransformError)
from ..utils.file_handler import FileHandler
from ..utils.imaging import load_png, save_png, union_masks
from ..utils.logger import Logger
from .features import FeatureExtractor, FeatureTaps
from .losses import (BREAKDOWN_COLUMNS, CleanRefs, LossWeights, TextureTargets, loss_adversarial,
                     loss_style, loss_total)
from .perturb import EotConfig, apply_pipeline, sample_transform
from .segmenter import (PROTO_STRIDE, DecodeConfig, SegmenterModel, assemble_masks, box_region,
                        decode)

logger = logging.getLogger(__name__)

STYLE_MODES = ('random', 'optimal', 'fixed')
BASELINE_KINDS = ('random_noise', 'fgsm', 'bim', 'pgd')


@dataclass
class AttackConfig:
    iterations: int = Settings.ATTACK['iterations']
    lr: float = Settings.ATTACK['lr']
    weights: LossWeights = field(default_factory=LossWeights)
    eot: EotConfig = field(default_factory=EotConfig)
    style_mode: str = Settings.ATTACK['style_mode']
    style_path: Optional[str] = None
    init_amplitude: float = Settings.ATTACK['init_amplitude']
    tau_ref: float = Settings.ATTACK['tau_ref']
    divergence_guard: bool = Settings.ATTACK['divergence_guard']
    seed: int = 0

    def validate(self) -> None:
        if self.iterations < 1:
            raise ConfigError("attack iterations must be at least 1", key='attack.iterations',
                              value=self.iterations)
        if self.lr <= 0:
            raise ConfigError("attack learning rate must be positive", key='attack.lr', value=self.lr)
        if self.style_mode not in STYLE_MODES:
            raise ConfigError(f"style mode must be one of {', '.join(STYLE_MODES)}", key='attack.style_mode',
                              value=self.style_mode)
        if self.style_mode == 'fixed' and not self.style_path:
            raise ConfigError("fixed style mode needs a style image path", key='attack.style_path')
        if self.init_amplitude < 0:
            raise ConfigError("init amplitude must be non-negative", key='attack.init_amplitude',
                              value=self.init_amplitude)
        if not 0 < self.tau_ref <= 1:
            raise ConfigError("tau_ref must lie in (0, 1]", key='attack.tau_ref', value=self.tau_ref)
        try:
            self.weights.validate()
            self.eot.validate()
        except (ValueError, TransformError) as e:
            raise ConfigError(str(e), key='attack') from e

    def to_dict(self) -> dict:
        payload = asdict(self)
        payload['weights'] = self.weights.to_dict()
        payload['eot'] = self.eot.to_dict()
        return payload


@dataclass
class AdversarialCanvas:
    """Clean image, attackable region and the texture variable painted into it"""
    x: np.ndarray
    mask: np.ndarray
    texture: np.ndarray

    @property
    def empty(self) -> bool:
        return not np.any(self.mask)

    def composite(self) -> np.ndarray:
        return np.where(self.mask[None] > 0, self.texture, self.x)


@dataclass
class AttackResult:
    canvas: AdversarialCanvas
    log: pd.DataFrame
    clean_refs: CleanRefs
    style_index: int = -1
    clean_detections: int = 0
    post_detections: int = 0
    seeds: Dict[str, int] = field(default_factory=dict)
    scene_id: str = ''

    @property
    def image(self) -> np.ndarray:
        return self.canvas.composite()

    def summary(self) -> dict:
        return {
            'scene_id': self.scene_id,
            'style_index': self.style_index,
            'seeds': dict(self.seeds),
            'clean_detections': self.clean_detections,
            'post_detections': self.post_detections,
            'iterations': len(self.log),
            'mask_pixels': int(self.canvas.mask.sum()),
        }

    def save(self, directory: str, config: Optional[AttackConfig] = None) -> List[str]:
        """Adversarial PNG, per-iteration loss CSV and a JSON manifest"""
        os.makedirs(directory, exist_ok=True)
        stem = self.scene_id or 'scene'
        paths = [
            save_png(os.path.join(directory, f"{stem}_adv.png"), self.image),
            FileHandler.save_csv(self.log, os.path.join(directory, f"{stem}_losses.csv")),
        ]
        manifest = self.summary()
        if config is not None:
            manifest['config'] = config.to_dict()
        paths.append(FileHandler.write_json(os.path.join(directory, f"{stem}_attack.json"), manifest))
        return paths


# -- the four attack steps ----------------------------------------------------------------

def select_style(target, corpus: Sequence[np.ndarray], mode: str = 'optimal',
                 taps: Optional[FeatureTaps] = None, extractor: Optional[FeatureExtractor] = None,
                 seed: int = 0) -> Tuple[np.ndarray, int]:
    """
    Random mode draws uniformly from ``seed``; optimal mode takes the argmin of
    the style loss of ``target`` against each candidate, lowest index on ties.
    """
    if len(corpus) == 0:
        raise ConfigError("style corpus is empty", key='styles')
    if mode == 'random':
        index = int(np.random.default_rng(seed).integers(len(corpus)))
        return np.asarray(corpus[index], dtype=np.float64), index
    if mode != 'optimal':
        raise ConfigError(f"unknown style selection mode {mode}", key='attack.style_mode', value=mode)

    extractor = extractor or FeatureExtractor()
    target = np.asarray(getattr(target, 'data', target), dtype=np.float64)
    with no_grad():
        costs = np.array([loss_style(target, style, extractor, taps).item() for style in corpus])
    index = int(np.argmin(costs))
    logger.debug(f"Selected style {index} with transfer cost {costs[index]:.6g}")
    return np.asarray(corpus[index], dtype=np.float64), index


def init_canvas(x, clothing_masks: Sequence[np.ndarray], amplitude: float = Settings.ATTACK['init_amplitude'],
                seed: int = 0) -> AdversarialCanvas:
    """Union the clothing masks and seed the texture with uniform noise inside them"""
    x = np.asarray(getattr(x, 'data', x), dtype=np.float64)
    mask = union_masks(clothing_masks, shape=x.shape[1:])
    if mask.shape != x.shape[1:]:
        raise ShapeError("clothing masks differ in extent from the image", operator='init_canvas',
                         shapes=[mask.shape, x.shape])
    noise = np.random.default_rng(seed).uniform(-amplitude, amplitude, size=x.shape)
    texture = np.where(mask[None] > 0, np.clip(x + noise, 0.0, 1.0), x)
    if not mask.any():
        logger.warning("Attackable region is empty; the attack will leave the image unchanged")
    return AdversarialCanvas(x, mask, texture)


def compute_clean_refs(model: SegmenterModel, x, tau_ref: float = Settings.ATTACK['tau_ref'],
                       decode_cfg: Optional[DecodeConfig] = None) -> CleanRefs:
    """
    Anchors whose clean person probability reaches ``tau_ref``, each with its
    binarized clean mask cropped to the anchor box at prototype resolution
    """
    decode_cfg = decode_cfg or DecodeConfig()
    with no_grad():
        out = model.forward(np.asarray(getattr(x, 'data', x), dtype=np.float64))
        detections = decode(out, decode_cfg.score_thresh, decode_cfg.nms_iou, decode_cfg.mask_bin)
        scores = out.person_scores
        flagged = np.nonzero(scores >= tau_ref)[0]
        _, hp, wp = out.prototypes.shape
        if len(flagged) == 0:
            return CleanRefs.none((hp, wp))
        logits = assemble_masks(out, flagged).data
    masks = (1.0 / (1.0 + np.exp(-logits)) > decode_cfg.mask_bin).astype(np.float64)
    height = out.image_shape[0]
    for row, anchor in enumerate(flagged):
        crop = np.zeros((hp, wp))
        crop[box_region(out.anchors[anchor], hp, wp, stride=height // hp or PROTO_STRIDE)] = 1.0
        masks[row] *= crop
    return CleanRefs(flagged, masks, scores[flagged], len(detections))


def fashionadv_attack(canvas: AdversarialCanvas, model: SegmenterModel, style, cfg: AttackConfig,
                      clean_refs: Optional[CleanRefs] = None, extractor: Optional[FeatureExtractor] = None,
                      decode_cfg: Optional[DecodeConfig] = None,
                      on_iteration: Optional[Callable[[int, dict], None]] = None) -> AttackResult:
    """
    Masked expectation-over-transformation optimization of the texture.

    Each iteration draws ``eot.samples_per_iteration`` transforms; naturalness
    terms score the untransformed composite, adversarial terms the transformed
    views.  Gradients outside the mask are zeroed before the Adam step and the
    texture is clipped to [0,1] after it.
    """
    cfg.validate()
    decode_cfg = decode_cfg or DecodeConfig()
    target = model.frozen()
    if clean_refs is None:
        clean_refs = compute_clean_refs(target, canvas.x, cfg.tau_ref, decode_cfg)
    seeds = {'attack': cfg.seed, 'eot': cfg.eot.seed}

    if canvas.empty:
        logger.warning("Empty clothing mask: returning the clean image")
        return AttackResult(canvas, pd.DataFrame(columns=['iteration'] + list(BREAKDOWN_COLUMNS)), clean_refs,
                            clean_detections=clean_refs.num_detections,
                            post_detections=clean_refs.num_detections, seeds=seeds)
    if clean_refs.empty:
        logger.warning("No clean anchors above tau_ref; only naturalness terms will be optimized")

    targets = None
    if cfg.weights.beta > 0:
        targets = TextureTargets.build(extractor or FeatureExtractor(), canvas.x, style)

    rng = np.random.default_rng([cfg.seed, cfg.eot.seed])
    mask3 = canvas.mask[None]
    keep = canvas.x * (1.0 - mask3)
    texture = parameter(canvas.texture)
    state = AdamState.zeros_like(texture)
    samples = cfg.eot.samples_per_iteration
    rows = []

    for iteration in range(cfg.iterations):
        texture.grad = None
        totals = np.zeros(len(BREAKDOWN_COLUMNS))
        qfs = []
        try:
            composite = ops.add(keep, ops.mul(texture, mask3))
            for _ in range(samples):
                t = sample_transform(cfg.eot, rng)
                qfs.append(t.jpeg_qf)
                det = target.forward(apply_pipeline(composite, t))
                breakdown = loss_total(canvas.x, composite, style, det, clean_refs, cfg.weights, targets=targets)
                ops.mul_scalar(breakdown.graph, 1.0 / samples).backward()
                totals += np.array([breakdown.to_row()[c] for c in BREAKDOWN_COLUMNS])
        except NonFiniteError as e:
            raise AttackDivergedError("attack produced non-finite values", iteration=iteration,
                                      operator=e.context.get('operator')) from e

        row = dict(zip(BREAKDOWN_COLUMNS, (totals / samples).tolist()))
        if cfg.divergence_guard and not np.all(np.isfinite(totals)):
            raise AttackDivergedError("attack loss is not finite", iteration=iteration, loss=row['total'])

        grad = np.zeros_like(texture.data) if texture.grad is None else texture.grad * mask3
        if cfg.divergence_guard and not np.all(np.isfinite(grad)):
            raise AttackDivergedError("attack gradient is not finite", iteration=iteration)
        updated, state = adam_step(texture.data, grad, state, cfg.lr)
        texture.data = np.clip(updated, 0.0, 1.0)

        row = {'iteration': iteration, **row, 'jpeg_qf': qfs[0] if samples == 1 else None}
        rows.append(row)
        Logger.event(logger, 'attack_iteration', logging.DEBUG, iteration=iteration,
                     total=row['total'], l_adv=row['l_adv'], l_nat=row['l_nat'])
        if on_iteration is not None:
            on_iteration(iteration, row)

    final = replace(canvas, texture=texture.data.copy())
    with no_grad():
        post = decode(target.forward(final.composite()), decode_cfg.score_thresh, decode_cfg.nms_iou,
                      decode_cfg.mask_bin)
    Logger.event(logger, 'attack_done', iterations=cfg.iterations, clean_detections=clean_refs.num_detections,
                 post_detections=len(post), final_loss=rows[-1]['total'])
    return AttackResult(final, pd.DataFrame(rows), clean_refs, clean_detections=clean_refs.num_detections,
                        post_detections=len(post), seeds=seeds)


def attack_scene(scene, model: SegmenterModel, corpus: Sequence[np.ndarray], cfg: AttackConfig,
                 extractor: Optional[FeatureExtractor] = None,
                 decode_cfg: Optional[DecodeConfig] = None) -> AttackResult:
    """Mask union, style selection, texture initialization and optimization for one scene"""
    cfg.validate()
    extractor = extractor or FeatureExtractor()
    if cfg.style_mode == 'fixed':
        style, index = load_png(cfg.style_path), -1
    else:
        style, index = select_style(scene.image, corpus, cfg.style_mode, extractor=extractor, seed=cfg.seed)
    canvas = init_canvas(scene.image, scene.clothing_masks, cfg.init_amplitude, cfg.seed)
    result = fashionadv_attack(canvas, model, style, cfg, extractor=extractor, decode_cfg=decode_cfg)
    result.style_index = index
    result.scene_id = getattr(scene, 'scene_id', '')
    return result


def scene_config(cfg: AttackConfig, index: int) -> AttackConfig:
    """Independent RNG stream for the ``index``-th scene of a suite"""
    attack_seed, eot_seed = np.random.SeedSequence([cfg.seed, index]).generate_state(2)
    return replace(cfg, seed=int(attack_seed), eot=replace(cfg.eot, seed=int(eot_seed)))


def attack_suite(scenes: Sequence, model: SegmenterModel, corpus: Sequence[np.ndarray], cfg: AttackConfig,
                 workers: int = 1, extractor: Optional[FeatureExtractor] = None,
                 decode_cfg: Optional[DecodeConfig] = None) -> List[AttackResult]:
    """Attack every scene; results are identical for any worker count"""
    cfg.validate()
    extractor = extractor or FeatureExtractor()
    frozen = model.frozen()

    def run(job):
        index, scene = job
        logger.info(f"Attacking scene {index + 1}/{len(scenes)} {getattr(scene, 'scene_id', '')}")
        return attack_scene(scene, frozen, corpus, scene_config(cfg, index), extractor, decode_cfg)

    jobs = list(enumerate(scenes))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, jobs))
    return [run(job) for job in jobs]


# -- baselines ------------------------------------------------------------------------------

def cls_loss_and_gradient(model: SegmenterModel, img: np.ndarray, clean_refs: CleanRefs) -> Tuple[float, np.ndarray]:
    x = Tensor(img, requires_grad=True)
    l_cls, _ = loss_adversarial(model.forward(x), clean_refs, with_cls=True, with_mask=False)
    l_cls.backward()
    grad = np.zeros_like(img) if x.grad is None else x.grad
    return l_cls.item(), grad


def cls_loss(model: SegmenterModel, img, clean_refs: CleanRefs) -> float:
    with no_grad():
        l_cls, _ = loss_adversarial(model.forward(np.asarray(img, dtype=np.float64)), clean_refs,
                                    with_cls=True, with_mask=False)
    return l_cls.item()


def baseline_attack(kind: str, x, model: SegmenterModel, epsilon: float = Settings.BASELINE['epsilon'],
                    steps: int = Settings.BASELINE['steps'], step_size: float = Settings.BASELINE['step_size'],
                    clean_refs: Optional[CleanRefs] = None, seed: int = 0,
                    tau_ref: float = Settings.ATTACK['tau_ref']) -> np.ndarray:
    """
    Whole-image perturbations that descend the classification suppression loss.
    Iterative kinds project onto the L-infinity ball of radius ``epsilon``.
    """
    if kind not in BASELINE_KINDS:
        raise ConfigError(f"unknown baseline {kind}", key='baseline.kind', value=kind)
    if epsilon < 0:
        raise ConfigError("baseline epsilon must be non-negative", key='baseline.epsilon', value=epsilon)
    if kind in ('bim', 'pgd') and steps < 1:
        raise ConfigError("iterative baselines need at least one step", key='baseline.steps', value=steps)

    x = np.asarray(getattr(x, 'data', x), dtype=np.float64)
    rng = np.random.default_rng(seed)
    if kind == 'random_noise':
        return np.clip(x + rng.uniform(-epsilon, epsilon, size=x.shape), 0.0, 1.0)

    target = model.frozen()
    if clean_refs is None:
        clean_refs = compute_clean_refs(target, x, tau_ref)

    if kind == 'fgsm':
        _, grad = cls_loss_and_gradient(target, x, clean_refs)
        return np.clip(x - epsilon * np.sign(grad), 0.0, 1.0)

    adv = x.copy()
    if kind == 'pgd':
        adv = np.clip(x + rng.uniform(-epsilon, epsilon, size=x.shape), 0.0, 1.0)
    for step in range(steps):
        value, grad = cls_loss_and_gradient(target, adv, clean_refs)
        adv = np.clip(adv - step_size * np.sign(grad), x - epsilon, x + epsilon)
        adv = np.clip(adv, 0.0, 1.0)
        Logger.event(logger, 'baseline_step', logging.DEBUG, kind=kind, step=step, l_cls=value)
    return adv


def grid_search_baseline(kind: str, images: Sequence[np.ndarray], model: SegmenterModel,
                         epsilon: float = Settings.BASELINE['epsilon'], steps: int = Settings.BASELINE['steps'],
                         grid: Optional[Sequence[float]] = None, seed: int = 0) -> Tuple[dict, pd.DataFrame]:
    """
    Tune the free parameter of a baseline on calibration images: the step size
    for bim/pgd, epsilon (within the budget) for fgsm.  Lowest mean L_cls wins.
    """
    if not images:
        raise ConfigError("grid search needs at least one calibration image", key='baseline')
    target = model.frozen()
    if kind in ('bim', 'pgd'):
        grid = list(grid or Settings.BASELINE['step_size_grid'])
        candidates = [{'epsilon': epsilon, 'steps': steps, 'step_size': s} for s in grid]
    elif kind == 'fgsm':
        grid = [e for e in (grid or Settings.BASELINE['epsilon_grid']) if e <= epsilon] or [epsilon]
        candidates = [{'epsilon': e, 'steps': 1, 'step_size': e} for e in grid]
    else:
        candidates = [{'epsilon': epsilon, 'steps': 1, 'step_size': epsilon}]

    refs = [compute_clean_refs(target, img) for img in images]
    rows = []
    for params in candidates:
        losses = [cls_loss(target, baseline_attack(kind, img, target, clean_refs=r, seed=seed, **params), r)
                  for img, r in zip(images, refs)]
        rows.append({'kind': kind, **params, 'mean_l_cls': float(np.mean(losses))})
    frame = pd.DataFrame(rows)
    best = candidates[int(frame['mean_l_cls'].to_numpy().argmin())]
    logger.info(f"Baseline {kind} grid search selected {best}")
    return best, frame
