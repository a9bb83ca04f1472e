"""
Nonparametric reference segmenter: exhaustive nearest-patch mask transfer.

For every test patch on a stride grid, the closest exemplar patch (sum of
squared grayscale differences, over all exemplars and all positions) is
found, and the exemplar's mask is transferred as a vote. The prediction
depends only on the exemplars and the test image.
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionMismatch, EmptyExemplarList, PatchLargerThanImage
from .imaging import to_grayscale

AGGREGATIONS = ("patch-vote", "center-vote")

# elements per distance block; bounds peak memory of the search
_BLOCK = 1 << 22


@dataclass(frozen=True)
class PatchMatchParams:
    """
    patch_side    : odd patch width in pixels
    stride        : spacing of the test-patch grid
    aggregation   : "patch-vote" pastes the matched mask patch over the test
                    patch footprint; "center-vote" transfers only the mask value
                    at the matched centre and upsamples the vote grid with
                    nearest-neighbour (ties averaged)
    search_stride : spacing of candidate centres in the exemplars (1 = exhaustive)
    """

    patch_side: int = 7
    stride: int = 2
    aggregation: str = "patch-vote"
    search_stride: int = 1

    def __post_init__(self):
        if self.patch_side < 3 or self.patch_side % 2 == 0:
            raise ValueError(f"patch_side must be odd and >= 3, got {self.patch_side}")
        if self.stride < 1 or self.search_stride < 1:
            raise ValueError("stride and search_stride must be >= 1")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"aggregation must be one of {AGGREGATIONS}, got {self.aggregation!r}")
        if self.aggregation == "patch-vote" and self.stride > self.patch_side:
            raise ValueError("patch-vote needs stride <= patch_side so every pixel is covered")

    def to_dict(self):
        return {
            "patch_side": int(self.patch_side),
            "stride": int(self.stride),
            "aggregation": self.aggregation,
            "search_stride": int(self.search_stride),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def grid_centers(n, patch_side, stride):
    """Patch centres along one axis: every ``stride`` from the first valid
    centre, always including the last valid one."""
    r = patch_side // 2
    last = n - 1 - r
    centers = list(range(r, last + 1, stride))
    if centers[-1] != last:
        centers.append(last)
    return np.array(centers, dtype=np.intp)


def _patches(gray, ys, xs, p):
    r = p // 2
    win = sliding_window_view(gray, (p, p))
    return win[(ys - r)[:, None], (xs - r)[None, :]].reshape(len(ys) * len(xs), p * p)


def _nearest(test_vecs, cand_vecs):
    """Index of the nearest candidate for each test vector.

    A single-precision ``|c|^2 - 2 t.c`` pass shortlists near-minimal
    candidates with a tolerance well above its rounding error; shortlists with
    more than one entry are rescored with direct float64 squared differences,
    and the lowest score with the lowest candidate index wins.
    """
    cand32 = cand_vecs.astype(np.float32)
    cand_sq = np.einsum("ij,ij->i", cand_vecs, cand_vecs)
    test_sq = np.einsum("ij,ij->i", test_vecs, test_vecs)
    cand_sq32 = cand_sq.astype(np.float32)
    cmax = cand_sq.max()
    out = np.empty(len(test_vecs), dtype=np.intp)
    chunk = max(1, _BLOCK // max(1, len(cand_vecs)))
    for start in range(0, len(test_vecs), chunk):
        stop = min(start + chunk, len(test_vecs))
        score = test_vecs[start:stop].astype(np.float32) @ cand32.T
        score *= -2.0
        score += cand_sq32
        best = score.min(axis=1)
        tol = (1e-4 * (test_sq[start:stop] + cmax) + 1e-9).astype(np.float32)
        near = score <= (best + tol)[:, None]
        out[start:stop] = np.argmax(near, axis=1)
        for i in np.flatnonzero(np.count_nonzero(near, axis=1) > 1):
            idx = np.flatnonzero(near[i])
            diff = cand_vecs[idx] - test_vecs[start + i]
            exact = np.einsum("ij,ij->i", diff, diff)
            # idx is ascending, so argmin's first-hit rule breaks ties by index
            out[start + i] = idx[np.argmin(exact)]
    return out


def _nn_cover(n, centers):
    """For each pixel along an axis, a boolean row marking its nearest centres."""
    pos = np.arange(n)[:, None]
    d = np.abs(pos - centers[None, :])
    return d == d.min(axis=1, keepdims=True)


def reference_patchmatch(exemplars, test, params=None):
    """Soft foreground mask for ``test`` from ranked exemplars.

    ``exemplars``: sequence with ``image`` (H, W, 3) and ``mask`` (H, W bool)
    attributes, nearest first. Returns a float array (H, W) in [0, 1].
    """
    params = params or PatchMatchParams()
    exemplars = list(exemplars)
    if not exemplars:
        raise EmptyExemplarList("reference backend needs at least one exemplar")
    test = np.asarray(test, dtype=np.float64)
    h, w = test.shape[:2]
    p = params.patch_side
    if h < p or w < p:
        raise PatchLargerThanImage(f"patch side {p} exceeds image size {h}x{w}")
    for i, ex in enumerate(exemplars):
        if np.shape(ex.image)[:2] != (h, w) or np.shape(ex.mask) != (h, w):
            raise DimensionMismatch(f"exemplar {i} does not match the test image size {h}x{w}")

    test_gray = to_grayscale(test)
    ty = grid_centers(h, p, params.stride)
    tx = grid_centers(w, p, params.stride)
    test_vecs = _patches(test_gray, ty, tx, p)

    sy = grid_centers(h, p, params.search_stride)
    sx = grid_centers(w, p, params.search_stride)
    per_ex = len(sy) * len(sx)
    cand_vecs = np.concatenate([_patches(to_grayscale(ex.image), sy, sx, p) for ex in exemplars])
    masks = np.stack([np.asarray(ex.mask, dtype=bool) for ex in exemplars])

    match = _nearest(test_vecs, cand_vecs)
    ex_idx, pos = np.divmod(match, per_ex)
    my = sy[pos // len(sx)]
    mx = sx[pos % len(sx)]

    if params.aggregation == "center-vote":
        votes = masks[ex_idx, my, mx].astype(np.float64).reshape(len(ty), len(tx))
        cy = _nn_cover(h, ty).astype(np.float64)
        cx = _nn_cover(w, tx).astype(np.float64)
        fg = cy @ votes @ cx.T
        total = cy.sum(axis=1)[:, None] * cx.sum(axis=1)[None, :]
        return fg / total

    r = p // 2
    fg = np.zeros((h, w), dtype=np.int64)
    total = np.zeros((h, w), dtype=np.int64)
    win = sliding_window_view(masks, (p, p), axis=(1, 2))
    src = win[ex_idx, my - r, mx - r].reshape(len(ty), len(tx), p, p).astype(np.int64)
    for a, y in enumerate(ty):
        for b, x in enumerate(tx):
            fg[y - r:y + r + 1, x - r:x + r + 1] += src[a, b]
            total[y - r:y + r + 1, x - r:x + r + 1] += 1
    return fg / total
