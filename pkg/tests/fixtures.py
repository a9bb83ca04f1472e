"""Deterministic synthetic inputs shared by golden-file tests."""

import numpy as np

from promptseg.dataset import LabeledExample

PANEL = 448


def pattern_image(seed, side=PANEL):
    # closed-form gradients and stripes; no RNG so goldens never drift
    y, x = np.mgrid[0:side, 0:side] / (side - 1)
    r = (x + 0.1 * seed) % 1.0
    g = 0.5 + 0.5 * np.sin(2 * np.pi * (y * (seed + 1) + x))
    b = ((np.floor(x * 8) + np.floor(y * 8) + seed) % 2) * 0.8 + 0.1
    return np.stack([r, g, b], axis=-1)


def pattern_mask(seed, side=PANEL):
    y, x = np.mgrid[0:side, 0:side]
    cy, cx = side * (0.3 + 0.2 * seed), side * (0.6 - 0.1 * seed)
    return (y - cy) ** 2 / (0.2 * side) ** 2 + (x - cx) ** 2 / (0.15 * side) ** 2 <= 1


def golden_inputs(k):
    exemplars = [LabeledExample(f"ex{i}", pattern_image(i), pattern_mask(i)) for i in range(k)]
    return exemplars, pattern_image(7)
