"""
Prompt canvas construction.

Layout ``v1``: two columns (input | output) and ``k + 1`` rows of
``panel_side`` x ``panel_side`` panels. Rows ``0 .. k-1`` hold the exemplars
nearest-first, each as (image, mask panel); the last row holds the test image
next to an all-zero panel the segmenter is expected to fill in.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyExemplarList
from .imaging import encode_png

LAYOUT_VERSION = "v1"


@dataclass(frozen=True)
class PromptCanvas:
    panel_side: int
    k: int
    image: np.ndarray  # (k + 1) * panel_side rows, 2 * panel_side columns, RGB
    layout_version: str = LAYOUT_VERSION

    @property
    def width(self):
        return self.image.shape[1]

    @property
    def height(self):
        return self.image.shape[0]

    def panel(self, row, col):
        return panel_at(self.image, self.panel_side, row, col)

    def to_png(self):
        return encode_png(self.image)


def mask_to_panel(mask, panel_side=None):
    """Render a boolean mask as an RGB panel: foreground white, background black."""
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise DimensionMismatch(f"mask must be 2-D, got shape {mask.shape}")
    if panel_side is not None and mask.shape != (panel_side, panel_side):
        raise DimensionMismatch(f"mask shape {mask.shape} != panel {panel_side}x{panel_side}")
    panel = np.zeros(mask.shape + (3,), dtype=np.float64)
    panel[mask.astype(bool)] = 1.0
    return panel


def build_prompt(exemplars, test):
    """Stitch ranked exemplars and the test image into a :class:`PromptCanvas`.

    ``exemplars`` is a sequence of objects with ``image`` (H, W, 3) and
    ``mask`` (H, W) attributes, nearest neighbour first.
    """
    exemplars = list(exemplars)
    if not exemplars:
        raise EmptyExemplarList("at least one exemplar is required to build a prompt")
    test = np.asarray(test, dtype=np.float64)
    if test.ndim != 3 or test.shape[2] != 3 or test.shape[0] != test.shape[1]:
        raise DimensionMismatch(f"test image must be square RGB, got shape {test.shape}")
    side = test.shape[0]
    k = len(exemplars)

    canvas = np.zeros(((k + 1) * side, 2 * side, 3), dtype=np.float64)
    for i, ex in enumerate(exemplars):
        img = np.asarray(ex.image, dtype=np.float64)
        if img.shape != (side, side, 3):
            raise DimensionMismatch(f"exemplar {i} image shape {img.shape} != ({side}, {side}, 3)")
        canvas[i * side:(i + 1) * side, :side] = img
        canvas[i * side:(i + 1) * side, side:] = mask_to_panel(ex.mask, side)
    canvas[k * side:, :side] = test
    return PromptCanvas(panel_side=side, k=k, image=canvas)


def infer_k(height, width, panel_side):
    """Number of exemplar rows implied by a canvas of the given size."""
    if width != 2 * panel_side:
        raise DimensionMismatch(f"canvas width {width} != 2 * panel_side ({2 * panel_side})")
    rows, rem = divmod(height, panel_side)
    if rem or rows < 2:
        raise DimensionMismatch(f"canvas height {height} is not a valid multiple of {panel_side}")
    return rows - 1


def panel_at(image, panel_side, row, col):
    image = np.asarray(image)
    infer_k(image.shape[0], image.shape[1], panel_side)
    s = panel_side
    return image[row * s:(row + 1) * s, col * s:(col + 1) * s].copy()


def extract_prediction_region(image, panel_side):
    """Return the bottom-right panel (the formerly blank output) of a canvas-sized image."""
    image = np.asarray(image)
    k = infer_k(image.shape[0], image.shape[1], panel_side)
    return panel_at(image, panel_side, k, 1)
