"""
Image representation helpers, color transforms, PNG/mask I/O and
evaluation-only manipulations (real JPEG codec, histogram equalization)

Images are float64 arrays shaped (C, H, W) with values in [0, 1].
"""

import io
import logging
import os
from typing import Iterable

import numpy as np
from PIL import Image

from ..ndgrad.ops import interp_matrix
from .errors import CodecError, ImageIOError, MaskValueError, ShapeError

logger = logging.getLogger(__name__)

# BT.601 full range, chroma offset 0.5 added separately
RGB_TO_YCBCR = np.array([
    [0.299, 0.587, 0.114],
    [-0.168736, -0.331264, 0.5],
    [0.5, -0.418688, -0.081312],
])
YCBCR_TO_RGB = np.linalg.inv(RGB_TO_YCBCR)
CHROMA_OFFSET = np.array([0.0, 0.5, 0.5])


def _require_rgb(img: np.ndarray, name: str) -> None:
    if img.ndim != 3 or img.shape[0] != 3:
        raise ShapeError(f"{name} expects a 3-channel (3,H,W) image", operator=name,
                         shapes=[tuple(img.shape)])


def apply_color_matrix(img: np.ndarray, matrix: np.ndarray, offset=None) -> np.ndarray:
    out = np.tensordot(matrix, img, axes=([1], [0]))
    if offset is not None:
        out = out + np.asarray(offset)[:, None, None]
    return out


def rgb_to_ycbcr(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    _require_rgb(img, 'rgb_to_ycbcr')
    return apply_color_matrix(img, RGB_TO_YCBCR, CHROMA_OFFSET)


def ycbcr_to_rgb(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    _require_rgb(img, 'ycbcr_to_rgb')
    return apply_color_matrix(img - CHROMA_OFFSET[:, None, None], YCBCR_TO_RGB)


def clip01(img: np.ndarray) -> np.ndarray:
    return np.clip(img, 0.0, 1.0)


def to_uint8(img: np.ndarray) -> np.ndarray:
    """(C,H,W) floats to (H,W,C) or (H,W) bytes"""
    arr = np.round(clip01(np.asarray(img)) * 255.0).astype(np.uint8)
    if arr.ndim == 3:
        arr = arr[0] if arr.shape[0] == 1 else np.transpose(arr, (1, 2, 0))
    return arr


def from_uint8(arr: np.ndarray) -> np.ndarray:
    """(H,W,C) or (H,W) bytes to (C,H,W) floats"""
    arr = np.asarray(arr, dtype=np.float64) / 255.0
    if arr.ndim == 2:
        return arr[None]
    return np.transpose(arr, (2, 0, 1)).copy()


def quantize(img: np.ndarray) -> np.ndarray:
    """Snap to the 8-bit grid"""
    return np.round(clip01(img) * 255.0) / 255.0


def _pil_image(img: np.ndarray) -> Image.Image:
    arr = to_uint8(img)
    return Image.fromarray(arr)


def save_png(path: str, img: np.ndarray) -> str:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    try:
        _pil_image(img).save(path, format='PNG')
    except OSError as e:
        raise ImageIOError(f"cannot write PNG: {e}", path=path) from e
    return path


def load_png(path: str) -> np.ndarray:
    if not os.path.isfile(path):
        raise ImageIOError("image file not found", path=path)
    if os.path.getsize(path) == 0:
        raise ImageIOError("image file is empty", path=path)
    try:
        with Image.open(path) as im:
            im = im.convert('RGB')
            return from_uint8(np.array(im))
    except OSError as e:
        raise ImageIOError(f"unreadable image: {e}", path=path) from e


def validate_mask(mask: np.ndarray, shape=None) -> np.ndarray:
    """Return ``mask`` as a float {0,1} (H,W) array; raise on any other value"""
    mask = np.asarray(mask)
    if mask.ndim == 3 and mask.shape[0] == 1:
        mask = mask[0]
    if mask.ndim != 2:
        raise ShapeError("mask must be 2-D", operator='validate_mask', shapes=[mask.shape])
    if shape is not None and tuple(mask.shape) != tuple(shape):
        raise ShapeError("mask extent differs from image", operator='validate_mask',
                         shapes=[mask.shape, tuple(shape)])
    values = np.unique(mask)
    if not np.all(np.isin(values, (0, 1))):
        raise MaskValueError("mask values must be 0 or 1", values=values[:8].tolist())
    return mask.astype(np.float64)


def save_mask(path: str, mask: np.ndarray) -> str:
    mask = validate_mask(mask)
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    try:
        Image.fromarray((mask * 255).astype(np.uint8)).save(path, format='PNG')
    except OSError as e:
        raise ImageIOError(f"cannot write mask: {e}", path=path) from e
    return path


def load_mask(path: str) -> np.ndarray:
    if not os.path.isfile(path):
        raise ImageIOError("mask file not found", path=path)
    if os.path.getsize(path) == 0:
        raise ImageIOError("mask file is empty", path=path)
    try:
        with Image.open(path) as im:
            arr = np.array(im.convert('L'))
    except OSError as e:
        raise ImageIOError(f"unreadable mask: {e}", path=path) from e
    bad = ~np.isin(arr, (0, 255))
    if bad.any():
        raise MaskValueError("mask contains values other than 0 and 255", path=path,
                             values=np.unique(arr[bad])[:8].tolist())
    return (arr == 255).astype(np.float64)


def mask_complement(mask: np.ndarray) -> np.ndarray:
    return 1.0 - validate_mask(mask)


def union_masks(masks: Iterable[np.ndarray], shape=None) -> np.ndarray:
    """Pixelwise OR of binary masks"""
    masks = [validate_mask(m) for m in masks]
    if not masks:
        if shape is None:
            raise ShapeError("union of no masks needs an explicit shape", operator='union_masks')
        return np.zeros(shape, dtype=np.float64)
    out = np.zeros(masks[0].shape, dtype=np.float64)
    for m in masks:
        if m.shape != out.shape:
            raise ShapeError("masks differ in extent", operator='union_masks', shapes=[m.shape, out.shape])
        out = np.maximum(out, m)
    return out


def jpeg_codec_roundtrip(img: np.ndarray, qf: int) -> np.ndarray:
    """Encode with libjpeg through Pillow at quality ``qf`` (4:2:0) and decode"""
    img = np.asarray(img, dtype=np.float64)
    size = tuple(img.shape[1:])
    if not 1 <= int(qf) <= 100:
        raise CodecError("quality factor outside [1, 100]", qf=qf, size=size)
    buffer = io.BytesIO()
    try:
        _pil_image(img).save(buffer, format='JPEG', quality=int(qf), subsampling=2)
        buffer.seek(0)
        with Image.open(buffer) as im:
            decoded = np.array(im.convert('L' if img.shape[0] == 1 else 'RGB'))
    except (OSError, ValueError) as e:
        raise CodecError(f"JPEG codec failed: {e}", qf=qf, size=size) from e
    return from_uint8(decoded)


def histogram_equalize(img: np.ndarray) -> np.ndarray:
    """Per-channel 256-bin cumulative-histogram remap"""
    img = np.asarray(img, dtype=np.float64)
    _require_rgb(img, 'histogram_equalize')
    levels = to_uint8(img)
    out = np.empty(img.shape, dtype=np.float64)
    n = levels.shape[0] * levels.shape[1]
    for c in range(img.shape[0]):
        channel = levels[..., c]
        cdf = np.cumsum(np.bincount(channel.ravel(), minlength=256))
        cdf_min = cdf[cdf > 0][0]
        if cdf_min == n:
            out[c] = 1.0
            continue
        lut = np.clip((cdf - cdf_min) / (n - cdf_min), 0.0, 1.0)
        out[c] = lut[channel]
    return out


def resize_bilinear(img: np.ndarray, height: int, width: int) -> np.ndarray:
    """Half-pixel-center bilinear resize of a (C,H,W) array"""
    img = np.asarray(img, dtype=np.float64)
    ry = interp_matrix(img.shape[-2], int(height))
    rx = interp_matrix(img.shape[-1], int(width))
    return np.matmul(np.matmul(ry, img), rx.T)


def psnr(x: np.ndarray, y: np.ndarray) -> float:
    mse = float(np.mean((np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)) ** 2))
    if mse == 0.0:
        return float('inf')
    return 10.0 * np.log10(1.0 / mse)
