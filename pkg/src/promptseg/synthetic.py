"""
Synthetic lesion dataset for desk-scale benchmarking.

Each train image is a smooth random skin-like texture with one elliptical
"lesion" (reddened, with its own texture); the mask marks the ellipse. Test
images are noise-perturbed copies of distinct train images, so their nearest
neighbour shares the lesion geometry exactly.
"""

import json
from pathlib import Path

import numpy as np

from .dataset import Dataset, LabeledExample
from .imaging import decode_image, encode_png


def _smooth_noise(rng, side, scale):
    # white noise low-passed with a Gaussian in the frequency domain
    white = rng.standard_normal((side, side))
    f = np.fft.fftfreq(side)
    r2 = f[:, None] ** 2 + f[None, :] ** 2
    filt = np.exp(-r2 * (scale ** 2) * 2.0 * np.pi ** 2)
    out = np.real(np.fft.ifft2(np.fft.fft2(white) * filt))
    return out / (out.std() + 1e-12)


def ellipse_mask(side, cy, cx, ay, ax, angle):
    y, x = np.mgrid[0:side, 0:side].astype(np.float64)
    c, s = np.cos(angle), np.sin(angle)
    u = (x - cx) * c + (y - cy) * s
    v = -(x - cx) * s + (y - cy) * c
    return (u / ax) ** 2 + (v / ay) ** 2 <= 1.0


def make_lesion_image(rng, side):
    """One (image, mask) pair: float RGB in [0, 1] and a boolean ellipse mask."""
    base = rng.uniform([0.45, 0.30, 0.22], [0.90, 0.72, 0.60])
    tex = 0.10 * _smooth_noise(rng, side, side / 16) + 0.05 * _smooth_noise(rng, side, side / 48)
    img = base[None, None, :] + tex[..., None] * np.array([1.0, 0.9, 0.8])

    ay = rng.uniform(0.12, 0.30) * side
    ax = rng.uniform(0.12, 0.30) * side
    cy = rng.uniform(0.3, 0.7) * side
    cx = rng.uniform(0.3, 0.7) * side
    mask = ellipse_mask(side, cy, cx, ay, ax, rng.uniform(0, np.pi))

    lesion_tex = 0.06 * _smooth_noise(rng, side, side / 32)
    tint = np.array([0.12, -0.18, -0.14]) * rng.uniform(0.7, 1.3)
    img[mask] += tint + lesion_tex[mask][:, None]
    return np.clip(img, 0.0, 1.0), mask


def _quantized(img):
    # round-trip through 8 bits so in-memory and on-disk datasets agree
    return decode_image(encode_png(img))


def make_benchmark(n_train=40, n_test=10, side=64, noise_sigma=0.02, seed=0):
    """Build the synthetic dataset in memory; returns :class:`Dataset`."""
    if n_test > n_train:
        raise ValueError("each test image copies a distinct train image; need n_test <= n_train")
    rng = np.random.default_rng(seed)
    train = []
    for i in range(n_train):
        img, mask = make_lesion_image(rng, side)
        train.append(LabeledExample(f"train_{i:03d}", _quantized(img), mask))
    sources = sorted(rng.choice(n_train, size=n_test, replace=False).tolist())
    test = []
    for j, src in enumerate(sources):
        noisy = np.clip(train[src].image + rng.normal(0.0, noise_sigma, train[src].image.shape), 0, 1)
        test.append(LabeledExample(f"test_{j:03d}", _quantized(noisy), train[src].mask.copy()))
    return Dataset(train, test)


def make_duplicate_dataset(n_train=20, n_test=10, side=48, seed=1):
    """Test images are pixel-exact copies of train images."""
    rng = np.random.default_rng(seed)
    train = []
    for i in range(n_train):
        img, mask = make_lesion_image(rng, side)
        train.append(LabeledExample(f"train_{i:03d}", _quantized(img), mask))
    sources = sorted(rng.choice(n_train, size=n_test, replace=False).tolist())
    test = [LabeledExample(f"test_{j:03d}", train[s].image.copy(), train[s].mask.copy())
            for j, s in enumerate(sources)]
    return Dataset(train, test)


def write_dataset(dataset, out_dir):
    """Write images, masks and ``manifest.json`` under ``out_dir``; returns the manifest path."""
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    entries = []
    for split, examples in (("train", dataset.train), ("test", dataset.test)):
        for ex in examples:
            img_rel = f"images/{ex.id}.png"
            mask_rel = f"masks/{ex.id}.png"
            (out / img_rel).write_bytes(encode_png(ex.image))
            (out / mask_rel).write_bytes(encode_png(ex.mask))
            entries.append({"id": ex.id, "image_path": img_rel, "mask_path": mask_rel, "split": split})
    manifest = out / "manifest.json"
    manifest.write_text(json.dumps({"version": "1", "entries": entries}, indent=2) + "\n")
    return manifest
