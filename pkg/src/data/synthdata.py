"""
Procedural person scenes with instance and clothing masks, and the procedural
fashion-style corpus
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image, ImageDraw

from config.settings import Settings
from ..utils.errors import DatasetError, ImageIOError, SceneGenerationError
from ..utils.file_handler import FileHandler
from ..utils.imaging import from_uint8, load_mask, load_png, quantize, resize_bilinear, save_mask, save_png

logger = logging.getLogger(__name__)

STYLE_FAMILIES = ('stripes', 'checks', 'noise', 'gradient', 'dots', 'plaid')
SPLIT_CODES = {'train': 0, 'test': 1}

SKIN_TONES = ((0.96, 0.80, 0.69), (0.87, 0.67, 0.52), (0.75, 0.54, 0.40),
              (0.55, 0.38, 0.26), (0.36, 0.24, 0.16))
HAIR_COLORS = ((0.10, 0.07, 0.05), (0.35, 0.22, 0.10), (0.70, 0.55, 0.30), (0.45, 0.45, 0.45))

# per-person label codes
SKIN, HAIR, SHOES, CLOTHING = 1, 2, 3, 4
MIN_SPRITE_HEIGHT, MIN_SPRITE_WIDTH = 12, 6


@dataclass
class SceneSpec:
    height: int = Settings.DATASET['height']
    width: int = Settings.DATASET['width']
    min_persons: int = Settings.DATASET['min_persons']
    max_persons: int = Settings.DATASET['max_persons']
    person_height: Tuple[float, float] = Settings.DATASET['person_height']
    width_ratio: Tuple[float, float] = Settings.DATASET['width_ratio']
    head_ratio: Tuple[float, float] = Settings.DATASET['head_ratio']
    torso_ratio: Tuple[float, float] = Settings.DATASET['torso_ratio']
    background: str = Settings.DATASET['background']
    seed: int = 0
    max_retries: int = Settings.DATASET['max_retries']

    def validate(self) -> None:
        if self.min_persons < 1 or self.max_persons < self.min_persons:
            raise SceneGenerationError("person count range must satisfy 1 <= min <= max",
                                       min_persons=self.min_persons, max_persons=self.max_persons)
        if self.height < 16 or self.width < 16:
            raise SceneGenerationError("canvas must be at least 16x16", height=self.height, width=self.width)
        lo, hi = self.person_height
        if not 0 < lo <= hi <= 1:
            raise SceneGenerationError("person height fractions must lie in (0, 1]", person_height=self.person_height)
        if self.background not in ('clutter', 'plain', 'gradient'):
            raise SceneGenerationError(f"unknown background family {self.background}")
        if self.max_persons > self.layout_capacity():
            raise SceneGenerationError("canvas cannot hold the requested persons at the smallest sprite size",
                                       max_persons=self.max_persons, capacity=self.layout_capacity(),
                                       height=self.height, width=self.width)

    def layout_capacity(self) -> int:
        """Most non-overlapping sprites a grid packing of the smallest size can hold"""
        ph = int(round(self.person_height[0] * self.height))
        pw = max(int(round(ph * self.width_ratio[0])), MIN_SPRITE_WIDTH)
        ph = max(ph, MIN_SPRITE_HEIGHT)
        return ((self.width + 1) // (pw + 1)) * ((self.height + 1) // (ph + 1))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Scene:
    image: np.ndarray
    instance_masks: List[np.ndarray]
    clothing_masks: List[np.ndarray]
    boxes: List[Tuple[int, int, int, int]]
    scene_id: str = ''
    meta: Dict[str, object] = field(default_factory=dict)

    @property
    def num_persons(self) -> int:
        return len(self.instance_masks)


# -- procedural textures ----------------------------------------------------------

def _palette(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.uniform(0.05, 0.95, size=(n, 3))


def _lerp_colors(t: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[:, None, None] * (1.0 - t) + b[:, None, None] * t


def procedural_texture(family: str, rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """One (3,H,W) texture of the given family"""
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    colors = _palette(rng, 3)
    if family == 'stripes':
        theta = rng.uniform(0, np.pi)
        period = rng.uniform(4, 16)
        t = ((xx * np.cos(theta) + yy * np.sin(theta)) / period + rng.uniform()) % 1.0
        band = (t < rng.uniform(0.3, 0.7)).astype(np.float64)
        return _lerp_colors(band, colors[0], colors[1])
    if family == 'checks':
        period = rng.integers(3, 13)
        cell = ((xx // period + yy // period) % 2).astype(np.float64)
        return _lerp_colors(cell, colors[0], colors[1])
    if family == 'noise':
        acc = np.zeros((height, width))
        amplitude, total = 1.0, 0.0
        for octave in range(rng.integers(2, 5)):
            grid = 2 ** (octave + 2)
            coarse = rng.uniform(size=(1, grid, grid))
            acc += amplitude * resize_bilinear(coarse, height, width)[0]
            total += amplitude
            amplitude *= rng.uniform(0.4, 0.7)
        acc /= total
        acc = (acc - acc.min()) / max(acc.max() - acc.min(), 1e-9)
        return _lerp_colors(acc, colors[0], colors[1])
    if family == 'gradient':
        theta = rng.uniform(0, 2 * np.pi)
        t = xx * np.cos(theta) + yy * np.sin(theta)
        t = (t - t.min()) / max(t.max() - t.min(), 1e-9)
        first = _lerp_colors(np.clip(2 * t, 0, 1), colors[0], colors[1])
        second = _lerp_colors(np.clip(2 * t - 1, 0, 1), colors[1], colors[2])
        return np.where(t[None] < 0.5, first, second)
    if family == 'dots':
        spacing = rng.uniform(6, 14)
        radius = spacing * rng.uniform(0.2, 0.4)
        oy, ox = rng.uniform(0, spacing, size=2)
        dy = (yy + oy) % spacing - spacing / 2
        dx = (xx + ox) % spacing - spacing / 2
        dot = (dx * dx + dy * dy <= radius * radius).astype(np.float64)
        return _lerp_colors(dot, colors[0], colors[1])
    if family == 'plaid':
        period = rng.uniform(6, 18)
        width_frac = rng.uniform(0.2, 0.45)
        rows = ((yy / period) % 1.0 < width_frac).astype(np.float64)
        cols = ((xx / period) % 1.0 < width_frac).astype(np.float64)
        base = _lerp_colors(rows * 0.5 + cols * 0.5, colors[0], colors[1])
        return np.where((rows * cols)[None] > 0, colors[2][:, None, None], base)
    raise SceneGenerationError(f"unknown texture family {family}")


def generate_style_corpus(n: int = Settings.DATASET['n_styles'], seed: int = 0,
                          size: int = Settings.DATASET['style_size'],
                          min_distance: float = Settings.DATASET['style_min_distance']) -> List[np.ndarray]:
    """
    ``n`` distinct 8-bit-quantized textures cycling through the families.
    Candidates closer than ``min_distance`` (mean absolute difference) to an
    accepted style are redrawn.
    """
    if n < 1:
        raise ValueError("style corpus needs at least one image")
    rng = np.random.default_rng(seed)
    styles: List[np.ndarray] = []
    attempts = 0
    while len(styles) < n:
        attempts += 1
        if attempts > 50 * n:
            raise SceneGenerationError("could not draw enough distinct styles", requested=n, drawn=len(styles))
        family = STYLE_FAMILIES[len(styles) % len(STYLE_FAMILIES)]
        candidate = quantize(procedural_texture(family, rng, size, size))
        if all(np.mean(np.abs(candidate - s)) > min_distance for s in styles):
            styles.append(candidate)
    logger.debug(f"Generated style corpus of {n} images in {attempts} draws")
    return styles


def save_style_corpus(styles: Sequence[np.ndarray], directory: str) -> List[str]:
    return [save_png(os.path.join(directory, f"style_{i:03d}.png"), s) for i, s in enumerate(styles)]


def load_style_corpus(directory: str) -> List[np.ndarray]:
    if not os.path.isdir(directory):
        raise DatasetError("style directory not found", path=directory)
    names = sorted(f for f in os.listdir(directory) if f.startswith('style_') and f.endswith('.png'))
    if not names:
        raise DatasetError("style directory holds no style images", path=directory)
    return [load_png(os.path.join(directory, f)) for f in names]


# -- scenes -------------------------------------------------------------------------

def _background(spec: SceneSpec, rng: np.random.Generator) -> np.ndarray:
    h, w = spec.height, spec.width
    base = rng.uniform(0.25, 0.75, size=3)
    if spec.background == 'plain':
        return np.broadcast_to(base[:, None, None], (3, h, w)).copy()
    if spec.background == 'gradient':
        return procedural_texture('gradient', rng, h, w) * 0.6 + 0.2

    canvas = Image.fromarray(np.full((h, w, 3), np.round(base * 255), dtype=np.uint8))
    draw = ImageDraw.Draw(canvas)
    for _ in range(rng.integers(4, 10)):
        x0, x1 = sorted(rng.integers(0, w, size=2))
        y0, y1 = sorted(rng.integers(0, h, size=2))
        fill = tuple(int(c) for c in rng.integers(40, 215, size=3))
        if rng.uniform() < 0.5:
            draw.rectangle([int(x0), int(y0), int(x1), int(y1)], fill=fill)
        else:
            draw.ellipse([int(x0), int(y0), int(x1), int(y1)], fill=fill)
    img = from_uint8(np.array(canvas))
    grain = procedural_texture('noise', rng, h, w)
    return np.clip(0.85 * img + 0.15 * grain, 0.0, 1.0)


def _try_layout(spec: SceneSpec, count: int, rng: np.random.Generator) -> List[Tuple[int, int, int, int]]:
    boxes: List[Tuple[int, int, int, int]] = []
    margin = 1
    for _ in range(count):
        for _ in range(spec.max_retries):
            ph = int(round(rng.uniform(*spec.person_height) * spec.height))
            pw = int(round(ph * rng.uniform(*spec.width_ratio)))
            ph, pw = max(ph, MIN_SPRITE_HEIGHT), max(pw, MIN_SPRITE_WIDTH)
            if ph > spec.height or pw > spec.width:
                continue
            x0 = int(rng.integers(0, spec.width - pw + 1))
            y0 = int(rng.integers(0, spec.height - ph + 1))
            box = (x0, y0, x0 + pw, y0 + ph)
            if all(box[0] >= b[2] + margin or b[0] >= box[2] + margin or
                   box[1] >= b[3] + margin or b[1] >= box[3] + margin for b in boxes):
                boxes.append(box)
                break
        else:
            return boxes
    return boxes


def _place_boxes(spec: SceneSpec, count: int, rng: np.random.Generator) -> List[Tuple[int, int, int, int]]:
    """Non-overlapping person boxes; whole layouts are redrawn up to ``max_retries`` times"""
    placed = 0
    for _ in range(spec.max_retries):
        boxes = _try_layout(spec, count, rng)
        if len(boxes) == count:
            return boxes
        placed = max(placed, len(boxes))
    raise SceneGenerationError("could not place persons without overlap",
                               requested=count, placed=placed, retries=spec.max_retries)


def _draw_person(spec: SceneSpec, box: Tuple[int, int, int, int], rng: np.random.Generator) -> np.ndarray:
    """Label map (H,W) of one sprite: skin, hair, shoes and clothing codes"""
    x0, y0, x1, y1 = box
    w, h = x1 - x0, y1 - y0
    cx = x0 + w / 2.0
    head_h = h * rng.uniform(*spec.head_ratio)
    torso_h = h * rng.uniform(*spec.torso_ratio)
    shoe_h = max(1.0, 0.06 * h)

    labels = Image.new('L', (spec.width, spec.height), 0)
    draw = ImageDraw.Draw(labels)
    top = y0 + head_h
    bottom = top + torso_h
    last = y1 - 1

    # legs and trousers
    leg_w = 0.2 * w
    gap = 0.04 * w
    for side in (-1, 1):
        lx0 = cx + side * gap if side > 0 else cx - gap - leg_w
        draw.rectangle([lx0, bottom - 1, lx0 + leg_w, last - shoe_h], fill=CLOTHING)
        draw.rectangle([lx0 - 0.03 * w, last - shoe_h, lx0 + leg_w, last], fill=SHOES)

    # arms
    arm_w = 0.11 * w
    shoulder = 0.36 * w
    for side in (-1, 1):
        ax_outer = cx + side * (shoulder + arm_w)
        ax_inner = cx + side * shoulder
        draw.rectangle([min(ax_outer, ax_inner), top + 1, max(ax_outer, ax_inner), top + 0.9 * torso_h],
                       fill=SKIN)

    # torso
    hem = 0.3 * w
    draw.polygon([(cx - shoulder, top), (cx + shoulder, top), (cx + hem, bottom), (cx - hem, bottom)],
                 fill=CLOTHING)

    # head and hair
    head_half = 0.22 * w
    draw.ellipse([cx - head_half, y0, cx + head_half, top + 1], fill=SKIN)
    draw.chord([cx - head_half, y0, cx + head_half, top + 1], start=180, end=360, fill=HAIR)

    label = np.array(labels)
    outside = np.ones_like(label, dtype=bool)
    outside[y0:y1, x0:x1] = False
    label[outside] = 0
    return label


def generate_scene(spec: SceneSpec, rng: Optional[np.random.Generator] = None) -> Scene:
    """Deterministic for a given ``spec.seed`` (or ``rng`` state)"""
    spec.validate()
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    count = int(rng.integers(spec.min_persons, spec.max_persons + 1))
    image = _background(spec, rng)
    boxes = _place_boxes(spec, count, rng)

    instance_masks, clothing_masks = [], []
    for box in boxes:
        label = _draw_person(spec, box, rng)
        skin = np.array(SKIN_TONES[rng.integers(len(SKIN_TONES))])
        hair = np.array(HAIR_COLORS[rng.integers(len(HAIR_COLORS))])
        shoes = rng.uniform(0.05, 0.3, size=3)
        x0, y0, x1, y1 = box
        garment = procedural_texture(STYLE_FAMILIES[rng.integers(len(STYLE_FAMILIES))], rng,
                                     spec.height, spec.width)
        for code, color in ((SKIN, skin), (HAIR, hair), (SHOES, shoes)):
            image = np.where((label == code)[None], color[:, None, None], image)
        image = np.where((label == CLOTHING)[None], garment, image)

        clothing = (label == CLOTHING).astype(np.float64)
        if clothing.sum() < 16:
            raise SceneGenerationError("clothing region smaller than 16 pixels", box=box)
        instance_masks.append((label > 0).astype(np.float64))
        clothing_masks.append(clothing)

    return Scene(quantize(image), instance_masks, clothing_masks, [tuple(map(int, b)) for b in boxes])


# -- datasets -------------------------------------------------------------------------

def scene_rng(seed: int, split: str, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), SPLIT_CODES[split], int(index)]))


def _write_scene(root: str, split: str, index: int, spec: SceneSpec, seed: int) -> Dict[str, object]:
    scene_id = f"{split}_{index:05d}"
    scene = generate_scene(spec, scene_rng(seed, split, index))
    image_rel = f"{split}/{scene_id}{Settings.IMAGE_SUFFIX}"
    save_png(os.path.join(root, image_rel), scene.image)
    instance_rel, clothing_rel = [], []
    for k, (inst, cloth) in enumerate(zip(scene.instance_masks, scene.clothing_masks)):
        inst_path = f"{split}/{scene_id}_person{k}{Settings.MASK_SUFFIX}"
        cloth_path = f"{split}/{scene_id}_clothing{k}{Settings.MASK_SUFFIX}"
        save_mask(os.path.join(root, inst_path), inst)
        save_mask(os.path.join(root, cloth_path), cloth)
        instance_rel.append(inst_path)
        clothing_rel.append(cloth_path)
    return {
        'split': split,
        'id': scene_id,
        'image': image_rel,
        'instance_masks': instance_rel,
        'clothing_masks': clothing_rel,
        'boxes': [list(b) for b in scene.boxes],
    }


def generate_dataset(spec: SceneSpec, n_train: int = Settings.DATASET['n_train'],
                     n_test: int = Settings.DATASET['n_test'], seed: int = 0,
                     outdir: Optional[str] = None, workers: int = 1) -> str:
    """Write scenes, masks and ``manifest.jsonl``; returns the manifest path"""
    if n_train <= 0 or n_test <= 0:
        raise DatasetError("n_train and n_test must be positive", n_train=n_train, n_test=n_test)
    spec.validate()
    root = outdir or Settings.get_data_directory()
    os.makedirs(root, exist_ok=True)

    jobs = [('train', i) for i in range(n_train)] + [('test', i) for i in range(n_test)]
    logger.info(f"Generating {n_train} train and {n_test} test scenes into {root}")
    try:
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                records = list(pool.map(lambda job: _write_scene(root, job[0], job[1], spec, seed), jobs))
        else:
            records = [_write_scene(root, split, i, spec, seed) for split, i in jobs]
    except ImageIOError as e:
        raise DatasetError(f"failed writing dataset: {e}", path=root) from e

    path = FileHandler.write_jsonl(os.path.join(root, Settings.MANIFEST_NAME), records)
    FileHandler.write_json(os.path.join(root, 'dataset.json'),
                           {'spec': spec.to_dict(), 'seed': seed, 'n_train': n_train, 'n_test': n_test})
    logger.info(f"Dataset manifest written to: {path}")
    return path


def load_manifest(path: str, split: Optional[str] = None) -> List[Dict[str, object]]:
    if os.path.isdir(path):
        path = os.path.join(path, Settings.MANIFEST_NAME)
    if not os.path.isfile(path):
        raise DatasetError("dataset manifest not found", path=path)
    records = FileHandler.read_jsonl(path)
    root = os.path.dirname(os.path.abspath(path))
    for record in records:
        record['root'] = root
    if split is not None:
        records = [r for r in records if r['split'] == split]
    if not records:
        raise DatasetError("dataset manifest is empty", path=path, split=split)
    return records


def load_scene(record: Dict[str, object], root: Optional[str] = None) -> Scene:
    root = root or record.get('root', '')
    image = load_png(os.path.join(root, record['image']))
    instance = [load_mask(os.path.join(root, p)) for p in record['instance_masks']]
    clothing = [load_mask(os.path.join(root, p)) for p in record['clothing_masks']]
    boxes = [tuple(b) for b in record['boxes']]
    return Scene(image, instance, clothing, boxes, scene_id=record['id'])
