"""
Image decoding, resizing, colour conversion and normalisation.

Images are plain numpy arrays:

* RGB image  -- float64, shape (H, W, 3), values in [0, 1]
* gray image -- float64, shape (H, W), values in [0, 1]
* mask       -- bool, shape (H, W)

Every function here is pure and returns a fresh array.
"""

from dataclasses import dataclass
import io

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError, UnsupportedFormat

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
_JPEG_MAGIC = b"\xff\xd8\xff"


@dataclass(frozen=True)
class PreprocessConfig:
    target_side: int = 448
    channel_means: tuple = IMAGENET_MEAN
    channel_stds: tuple = IMAGENET_STD

    def __post_init__(self):
        object.__setattr__(self, "channel_means", tuple(float(m) for m in self.channel_means))
        object.__setattr__(self, "channel_stds", tuple(float(s) for s in self.channel_stds))
        if int(self.target_side) != self.target_side or self.target_side <= 0:
            raise ValueError(f"target_side must be a positive integer, got {self.target_side}")
        if len(self.channel_means) != 3 or len(self.channel_stds) != 3:
            raise ValueError("channel_means and channel_stds need exactly 3 values")
        if any(not s > 0 for s in self.channel_stds):
            raise ValueError(f"channel_stds must be positive, got {self.channel_stds}")

    def to_dict(self):
        return {
            "target_side": int(self.target_side),
            "channel_means": list(self.channel_means),
            "channel_stds": list(self.channel_stds),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            target_side=int(d.get("target_side", 448)),
            channel_means=tuple(d.get("channel_means", IMAGENET_MEAN)),
            channel_stds=tuple(d.get("channel_stds", IMAGENET_STD)),
        )


def check_rgb(img, name="image"):
    """Validate an RGB image array and return it as float64."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] == 0 or img.shape[1] == 0:
        raise ValueError(f"{name} must have shape (H, W, 3) with H, W > 0, got {img.shape}")
    if not np.all((img >= 0.0) & (img <= 1.0)):
        raise ValueError(f"{name} has pixel values outside [0, 1]")
    return img


def check_gray(img, name="image"):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] == 0 or img.shape[1] == 0:
        raise ValueError(f"{name} must have shape (H, W) with H, W > 0, got {img.shape}")
    return img


def sniff_format(data):
    if data[:8] == _PNG_MAGIC:
        return "png"
    if data[:3] == _JPEG_MAGIC:
        return "jpeg"
    return None


def _open(data):
    fmt = sniff_format(data)
    if fmt is None:
        raise UnsupportedFormat("only PNG and JPEG streams are supported")
    try:
        pil = Image.open(io.BytesIO(data))
        pil.load()
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise DecodeError(f"malformed {fmt.upper()} stream: {exc}") from exc
    return pil


def decode_image(data):
    """Decode a PNG or JPEG byte string into an RGB float image in [0, 1].

    8-bit channel value ``v`` maps to ``v / 255``. Gray and palette images
    are expanded to three channels; alpha is dropped.
    """
    pil = _open(bytes(data))
    if pil.mode != "RGB":
        pil = pil.convert("RGB")
    return np.asarray(pil, dtype=np.uint8).astype(np.float64) / 255.0


def decode_mask(data):
    """Decode a mask image; a pixel is foreground if any channel is >= 128."""
    pil = _open(bytes(data))
    if pil.mode == "L":
        arr = np.asarray(pil, dtype=np.uint8)
        return arr >= 128
    if pil.mode != "RGB":
        pil = pil.convert("RGB")
    arr = np.asarray(pil, dtype=np.uint8)
    return np.any(arr >= 128, axis=2)


def read_image(path):
    with open(path, "rb") as fh:
        return decode_image(fh.read())


def read_mask(path):
    with open(path, "rb") as fh:
        return decode_mask(fh.read())


def quantize(img):
    """Map [0, 1] floats to uint8 with round-half-to-even on ``v * 255``."""
    arr = np.asarray(img, dtype=np.float64)
    return np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)


def encode_png(img):
    """Encode an RGB (H, W, 3), gray (H, W) or boolean mask array as 8-bit PNG.

    Output is non-interlaced with no ancillary chunks, so identical arrays give
    identical bytes.
    """
    arr = np.asarray(img)
    if arr.dtype == bool:
        arr = arr.astype(np.uint8) * 255
    elif arr.dtype != np.uint8:
        arr = quantize(arr)
    if arr.ndim == 2:
        pil = Image.fromarray(arr, mode="L")
    elif arr.ndim == 3 and arr.shape[2] == 3:
        pil = Image.fromarray(arr, mode="RGB")
    else:
        raise ValueError(f"cannot encode array of shape {arr.shape} as PNG")
    buf = io.BytesIO()
    pil.save(buf, format="PNG", optimize=False, compress_level=6)
    return buf.getvalue()


def _bilinear_axis(n_in, n_out):
    # half-pixel centres: src = (dst + 0.5) * n_in / n_out - 0.5, clamped to the edge
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    return lo, hi, frac


def resize_bilinear(img, side):
    """Bilinear resize to ``side`` x ``side`` using half-pixel-centred sampling.

    Works on RGB (H, W, 3) and gray (H, W) arrays. Non-square inputs are
    stretched; an input already at ``side`` x ``side`` is returned unchanged.
    """
    if int(side) != side or side <= 0:
        raise ValueError(f"side must be a positive integer, got {side}")
    side = int(side)
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim not in (2, 3):
        raise ValueError(f"expected a 2-D or 3-D image array, got shape {arr.shape}")
    h, w = arr.shape[:2]
    if h == side and w == side:
        return arr.copy()

    lo, hi, f = _bilinear_axis(h, side)
    f = f.reshape((-1,) + (1,) * (arr.ndim - 1))
    top, bottom = arr[lo], arr[hi]
    # a + f * (b - a) keeps constant regions exactly constant
    rows = top + f * (bottom - top)

    lo, hi, f = _bilinear_axis(w, side)
    f = f.reshape((1, -1) + (1,) * (arr.ndim - 2))
    left, right = rows[:, lo], rows[:, hi]
    out = left + f * (right - left)
    return np.clip(out, 0.0, 1.0)


def resize_nearest(mask, side):
    """Nearest-neighbour resize of a 2-D array (typically a boolean mask)."""
    arr = np.asarray(mask)
    h, w = arr.shape[:2]
    side = int(side)
    if h == side and w == side:
        return arr.copy()
    ys = np.minimum(np.floor((np.arange(side) + 0.5) * (h / side)).astype(np.intp), h - 1)
    xs = np.minimum(np.floor((np.arange(side) + 0.5) * (w / side)).astype(np.intp), w - 1)
    return arr[ys[:, None], xs[None, :]]


def to_grayscale(img):
    """BT.601 luma: 0.299 R + 0.587 G + 0.114 B.

    The result is clipped to the per-pixel channel range so rounding can never
    push it outside ``[min(R, G, B), max(R, G, B)]``.
    """
    arr = np.asarray(img, dtype=np.float64)
    gray = arr[..., 0] * LUMA_WEIGHTS[0] + arr[..., 1] * LUMA_WEIGHTS[1] + arr[..., 2] * LUMA_WEIGHTS[2]
    return np.clip(gray, arr.min(axis=-1), arr.max(axis=-1))


def normalize_zscore(img, cfg=None):
    cfg = cfg or PreprocessConfig()
    arr = np.asarray(img, dtype=np.float64)
    mean = np.asarray(cfg.channel_means)
    std = np.asarray(cfg.channel_stds)
    return (arr - mean) / std


def denormalize_zscore(img, cfg=None):
    """Inverse of :func:`normalize_zscore`."""
    cfg = cfg or PreprocessConfig()
    arr = np.asarray(img, dtype=np.float64)
    return arr * np.asarray(cfg.channel_stds) + np.asarray(cfg.channel_means)
