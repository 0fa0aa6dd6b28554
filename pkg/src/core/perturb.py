"""
Differentiable perturbation pipeline for expectation-over-transformation training

perspective -> blur -> color -> noise -> JPEG approximation -> clip
"""

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from config.settings import Settings
from ..ndgrad import ops
from ..ndgrad.tensor import Tensor, as_tensor
from ..utils.errors import TransformError
from ..utils.imaging import RGB_TO_YCBCR, YCBCR_TO_RGB

logger = logging.getLogger(__name__)

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])
RGB_TO_YIQ = np.array([
    [0.299, 0.587, 0.114],
    [0.595716, -0.274453, -0.321263],
    [0.211456, -0.522591, 0.311135],
])
YIQ_TO_RGB = np.linalg.inv(RGB_TO_YIQ)

LUMA_TABLE = np.array([
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
], dtype=np.float64)

CHROMA_TABLE = np.full((8, 8), 99.0)
CHROMA_TABLE[:4, :4] = [
    [17, 18, 24, 47],
    [18, 21, 26, 66],
    [24, 26, 56, 99],
    [47, 66, 99, 99],
]

UNIT_CORNERS = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


@dataclass
class EotConfig:
    """Per-stage switches and sampling ranges of the perturbation distribution"""
    perspective: bool = True
    blur: bool = True
    color: bool = True
    noise: bool = True
    jpeg: bool = True
    corner_shift: float = Settings.EOT_RANGES['corner_shift']
    blur_kernels: Tuple[int, ...] = Settings.EOT_RANGES['blur_kernels']
    blur_sigma: Tuple[float, float] = Settings.EOT_RANGES['blur_sigma']
    hue: float = Settings.EOT_RANGES['hue']
    saturation: float = Settings.EOT_RANGES['saturation']
    brightness: float = Settings.EOT_RANGES['brightness']
    contrast: float = Settings.EOT_RANGES['contrast']
    noise_amplitude: float = Settings.EOT_RANGES['noise']
    jpeg_qf: Tuple[int, int] = Settings.EOT_RANGES['jpeg_qf']
    seed: int = 0
    samples_per_iteration: int = 1
    max_retries: int = Settings.EOT_RANGES['max_retries']

    def validate(self) -> None:
        for name in ('corner_shift', 'hue', 'saturation', 'brightness', 'contrast', 'noise_amplitude'):
            if getattr(self, name) < 0:
                raise TransformError(f"{name} range must be non-negative", value=getattr(self, name))
        if not self.blur_kernels or any(k < 1 or k % 2 == 0 or k > 11 for k in self.blur_kernels):
            raise TransformError("blur kernels must be odd sizes in 1..11", kernels=list(self.blur_kernels))
        lo, hi = self.blur_sigma
        if not 0 < lo <= hi:
            raise TransformError("blur sigma range must be positive", sigma=list(self.blur_sigma))
        qlo, qhi = self.jpeg_qf
        if not 1 <= qlo <= qhi <= 100:
            raise TransformError("JPEG quality range must lie in [1, 100]", qf=list(self.jpeg_qf))
        if self.samples_per_iteration < 1:
            raise TransformError("samples_per_iteration must be at least 1")

    def without_jpeg(self) -> 'EotConfig':
        return replace(self, jpeg=False)

    def without_robustness(self) -> 'EotConfig':
        return replace(self, perspective=False, blur=False, color=False, noise=False, jpeg=False)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> 'EotConfig':
        payload = dict(payload)
        for key in ('blur_kernels', 'blur_sigma', 'jpeg_qf'):
            if key in payload:
                payload[key] = tuple(payload[key])
        return cls(**payload)


@dataclass
class TransformSample:
    """
    One draw of the pipeline parameters.  The homography maps input to output
    in normalized [0,1] image coordinates; ``jpeg_qf`` of None disables JPEG.
    """
    homography: np.ndarray = field(default_factory=lambda: np.eye(3))
    blur_kernel: int = 1
    blur_sigma: float = 1.0
    hue: float = 0.0
    saturation: float = 0.0
    brightness: float = 0.0
    contrast: float = 0.0
    noise_amplitude: float = 0.0
    noise_seed: int = 0
    jpeg_qf: Optional[int] = None

    def to_json(self) -> str:
        payload = asdict(self)
        payload['homography'] = np.asarray(self.homography).tolist()
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> 'TransformSample':
        payload = json.loads(text)
        payload['homography'] = np.array(payload['homography'], dtype=np.float64)
        return cls(**payload)

    def is_identity(self) -> bool:
        return (np.array_equal(self.homography, np.eye(3)) and self.blur_kernel == 1
                and self.hue == self.saturation == self.brightness == self.contrast == 0.0
                and self.noise_amplitude == 0.0 and self.jpeg_qf is None)


def identity_transform() -> TransformSample:
    return TransformSample()


# -- homographies -------------------------------------------------------------------

def homography_from_points(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Four-point direct linear transform, normalized so H[2,2] == 1"""
    rows = []
    for (x, y), (u, v) in zip(src, dst):
        rows.append([-x, -y, -1, 0, 0, 0, u * x, u * y, u])
        rows.append([0, 0, 0, -x, -y, -1, v * x, v * y, v])
    _, _, vt = np.linalg.svd(np.asarray(rows, dtype=np.float64))
    h = vt[-1].reshape(3, 3)
    if abs(h[2, 2]) < 1e-12:
        raise TransformError("degenerate homography")
    return h / h[2, 2]


def homography_in_pixels(h: np.ndarray, height: int, width: int) -> np.ndarray:
    """Convert a normalized-coordinate homography to pixel-center coordinates"""
    s = np.diag([max(width - 1, 1), max(height - 1, 1), 1.0])
    return s @ np.asarray(h, dtype=np.float64) @ np.linalg.inv(s)


def _well_conditioned(h: np.ndarray) -> bool:
    warped = np.c_[UNIT_CORNERS, np.ones(4)] @ h.T
    if np.any(warped[:, 2] <= 1e-6):
        return False
    quad = warped[:, :2] / warped[:, 2:]
    edges = np.roll(quad, -1, axis=0) - quad
    cross = edges[:, 0] * np.roll(edges, -1, axis=0)[:, 1] - edges[:, 1] * np.roll(edges, -1, axis=0)[:, 0]
    convex = np.all(cross > 0) or np.all(cross < 0)
    return convex and np.linalg.cond(h) < 1e6


def sample_transform(config: EotConfig, rng: np.random.Generator) -> TransformSample:
    """
    Draw every stage (so enabling or disabling one stage leaves the others'
    draws unchanged), then neutralize the disabled stages.
    """
    config.validate()
    homography = np.eye(3)
    shift = config.corner_shift
    if shift > 0:
        for attempt in range(config.max_retries):
            displacement = rng.uniform(-shift, shift, size=(4, 2))
            candidate = homography_from_points(UNIT_CORNERS, UNIT_CORNERS + displacement)
            if _well_conditioned(candidate):
                homography = candidate
                break
            logger.debug(f"Rejected ill-conditioned homography on attempt {attempt}")
        else:
            raise TransformError("no invertible homography within retry budget", retries=config.max_retries)

    kernel = int(rng.choice(np.asarray(config.blur_kernels)))
    sigma = float(rng.uniform(*config.blur_sigma))
    hue = float(rng.uniform(-config.hue, config.hue))
    saturation = float(rng.uniform(-config.saturation, config.saturation))
    brightness = float(rng.uniform(-config.brightness, config.brightness))
    contrast = float(rng.uniform(-config.contrast, config.contrast))
    amplitude = float(rng.uniform(0.0, config.noise_amplitude))
    noise_seed = int(rng.integers(0, 2 ** 31 - 1))
    qf = int(rng.integers(config.jpeg_qf[0], config.jpeg_qf[1] + 1))

    sample = TransformSample(
        homography=homography if config.perspective else np.eye(3),
        blur_kernel=kernel if config.blur else 1,
        blur_sigma=sigma,
        hue=hue if config.color else 0.0,
        saturation=saturation if config.color else 0.0,
        brightness=brightness if config.color else 0.0,
        contrast=contrast if config.color else 0.0,
        noise_amplitude=amplitude if config.noise else 0.0,
        noise_seed=noise_seed,
        jpeg_qf=qf if config.jpeg else None,
    )
    return sample


# -- stages ---------------------------------------------------------------------------

def warp_perspective(img, h: np.ndarray) -> Tensor:
    """Inverse-map every output pixel through ``h`` (pixel coordinates) and sample bilinearly"""
    img = as_tensor(img)
    h = np.asarray(h, dtype=np.float64)
    try:
        if np.linalg.cond(h) > 1e12:
            raise np.linalg.LinAlgError("ill-conditioned")
        h_inv = np.linalg.inv(h)
    except np.linalg.LinAlgError as e:
        raise TransformError(f"singular homography: {e}") from e
    _, height, width = img.shape
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    points = np.stack([xx, yy, np.ones_like(xx)])
    src = np.tensordot(h_inv, points, axes=([1], [0]))
    if np.any(np.abs(src[2]) < 1e-12):
        raise TransformError("homography maps pixels to infinity")
    return ops.bilinear_sample(img, src[1] / src[2], src[0] / src[2])


def gaussian_kernel(k: int, sigma: float) -> np.ndarray:
    offsets = np.arange(k) - (k - 1) / 2.0
    weights = np.exp(-(offsets ** 2) / (2.0 * sigma * sigma))
    return weights / weights.sum()


def gaussian_blur(img, k: int, sigma: float) -> Tensor:
    """Separable Gaussian with reflect padding"""
    img = as_tensor(img)
    if k < 1 or k % 2 == 0:
        raise TransformError("blur kernel size must be odd and positive", kernel=k)
    if sigma <= 0:
        raise TransformError("blur sigma must be positive", sigma=sigma)
    if k == 1:
        return img
    channels = img.shape[0]
    weights = gaussian_kernel(k, sigma)
    r = k // 2
    mode = 'reflect' if r < min(img.shape[1:]) else 'edge'
    padded = ops.pad(img, ((0, 0), (r, r), (r, r)), mode=mode)
    horizontal = ops.depthwise_conv2d(padded, np.tile(weights[None, None, :], (channels, 1, 1)))
    return ops.depthwise_conv2d(horizontal, np.tile(weights[None, :, None], (channels, 1, 1)))


def color_matrix(hue: float, saturation: float, brightness: float,
                 contrast: float) -> Tuple[np.ndarray, np.ndarray]:
    """Affine map ``A x + b`` equal to brightness, contrast, saturation then hue"""
    gain = 1.0 + contrast
    a = gain * np.eye(3)
    b = np.full(3, gain * brightness - 0.5 * contrast)
    if saturation != 0.0:
        sat = (1.0 + saturation) * np.eye(3) - saturation * np.outer(np.ones(3), LUMA_WEIGHTS)
        a, b = sat @ a, sat @ b
    if hue != 0.0:
        angle = 2.0 * np.pi * hue
        rotation = np.eye(3)
        rotation[1:, 1:] = [[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]]
        rot = YIQ_TO_RGB @ rotation @ RGB_TO_YIQ
        a, b = rot @ a, rot @ b
    return a, b


def color_jitter(img, hue: float = 0.0, saturation: float = 0.0, brightness: float = 0.0,
                 contrast: float = 0.0) -> Tensor:
    img = as_tensor(img)
    if img.ndim != 3 or img.shape[0] != 3:
        raise TransformError("color jitter needs a 3-channel image", shape=img.shape)
    if hue == saturation == brightness == contrast == 0.0:
        return img
    a, b = color_matrix(hue, saturation, brightness, contrast)
    _, height, width = img.shape
    flat = ops.reshape(img, (3, height * width))
    mixed = ops.add(ops.matmul(a, flat), b[:, None])
    return ops.reshape(mixed, (3, height, width))


def add_uniform_noise(img, amplitude: float, seed: int) -> Tensor:
    img = as_tensor(img)
    if amplitude < 0:
        raise TransformError("noise amplitude must be non-negative", amplitude=amplitude)
    if amplitude == 0:
        return img
    noise = np.random.default_rng(seed).uniform(-amplitude, amplitude, size=img.shape)
    return ops.add(img, noise)


def scaled_tables(qf: int) -> Tuple[np.ndarray, np.ndarray]:
    """libjpeg quality scaling of the standard luma/chroma tables"""
    if not 1 <= qf <= 100:
        raise TransformError("JPEG quality factor outside [1, 100]", qf=qf)
    scale = 5000 / qf if qf < 50 else 200 - 2 * qf
    luma = np.clip(np.floor((LUMA_TABLE * scale + 50) / 100), 1, 255)
    chroma = np.clip(np.floor((CHROMA_TABLE * scale + 50) / 100), 1, 255)
    return luma, chroma


def dct_matrix(n: int = 8) -> np.ndarray:
    """Orthonormal DCT-II basis; rows are frequencies"""
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    d = np.cos(np.pi * (2 * i + 1) * k / (2 * n)) * np.sqrt(2.0 / n)
    d[0] /= np.sqrt(2.0)
    return d


DCT8 = dct_matrix(8)


def _blocks(x: Tensor) -> Tensor:
    c, h, w = x.shape
    return ops.transpose(ops.reshape(x, (c, h // 8, 8, w // 8, 8)), (0, 1, 3, 2, 4))


def _unblocks(x: Tensor) -> Tensor:
    c, bh, bw, _, _ = x.shape
    return ops.reshape(ops.transpose(x, (0, 1, 3, 2, 4)), (c, bh * 8, bw * 8))


def _compress_plane(x: Tensor, table: np.ndarray) -> Tensor:
    coeffs = ops.matmul(ops.matmul(DCT8, _blocks(x)), DCT8.T)
    quantized = ops.mul(ops.diff_round(ops.div(coeffs, table)), table)
    return _unblocks(ops.matmul(ops.matmul(DCT8.T, quantized), DCT8))


def diff_jpeg(img, qf: int) -> Tensor:
    """
    Differentiable JPEG approximation: YCbCr, 4:2:0 chroma, 8x8 DCT,
    cubic-residual rounding against quality-scaled tables, and back.
    """
    img = as_tensor(img)
    if img.ndim != 3 or img.shape[0] != 3:
        raise TransformError("diff_jpeg needs a 3-channel image", shape=img.shape)
    luma_table, chroma_table = scaled_tables(int(qf))
    _, height, width = img.shape
    pad_h, pad_w = (-height) % 16, (-width) % 16
    x = img
    if pad_h or pad_w:
        mode = 'reflect' if pad_h < height and pad_w < width else 'edge'
        x = ops.pad(x, ((0, 0), (0, pad_h), (0, pad_w)), mode=mode)
    _, ph, pw = x.shape

    flat = ops.reshape(ops.mul_scalar(x, 255.0), (3, ph * pw))
    ycc = ops.reshape(ops.matmul(RGB_TO_YCBCR, flat), (3, ph, pw))
    ycc = ops.add(ycc, np.array([-128.0, 0.0, 0.0])[:, None, None])

    luma = _compress_plane(ycc[0:1], luma_table)
    chroma = _compress_plane(ops.avg_pool2d(ycc[1:3], 2), chroma_table)
    chroma = ops.resize_bilinear(chroma, ph, pw)

    restored = ops.add(ops.concat([luma, chroma], axis=0), np.array([128.0, 0.0, 0.0])[:, None, None])
    rgb = ops.matmul(YCBCR_TO_RGB, ops.reshape(restored, (3, ph * pw)))
    out = ops.mul_scalar(ops.reshape(rgb, (3, ph, pw)), 1.0 / 255.0)
    if pad_h or pad_w:
        out = out[:, :height, :width]
    return out


def apply_pipeline(img, t: TransformSample) -> Tensor:
    """All enabled stages in order, then clip to [0,1]"""
    x = as_tensor(img)
    _, height, width = x.shape
    if not np.array_equal(t.homography, np.eye(3)):
        x = warp_perspective(x, homography_in_pixels(t.homography, height, width))
    if t.blur_kernel != 1:
        x = gaussian_blur(x, t.blur_kernel, t.blur_sigma)
    x = color_jitter(x, t.hue, t.saturation, t.brightness, t.contrast)
    x = add_uniform_noise(x, t.noise_amplitude, t.noise_seed)
    if t.jpeg_qf is not None:
        x = diff_jpeg(x, t.jpeg_qf)
    return ops.clamp(x, 0.0, 1.0)
