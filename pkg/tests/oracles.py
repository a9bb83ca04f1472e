"""Independent reference implementations used only by the tests.

Each oracle is coded directly from the defining formula, deliberately avoiding
the vectorised tricks (separable filtering, GEMM shortlists, fsum) used in
the package.
"""

from fractions import Fraction
import math

import numpy as np


def frobenius_oracle(a, b):
    # exact rational accumulation of the float64 squared differences
    total = Fraction(0)
    for x, y in zip(np.ravel(a).tolist(), np.ravel(b).tolist()):
        d = x - y
        total += Fraction(d * d)
    return math.sqrt(float(total))


def gaussian_2d(side, sigma):
    c = (side - 1) / 2
    w = np.empty((side, side))
    for i in range(side):
        for j in range(side):
            w[i, j] = math.exp(-((i - c) ** 2 + (j - c) ** 2) / (2 * sigma * sigma))
    return w / w.sum()


def ssim_oracle(a, b, side=11, sigma=1.5, L=1.0):
    """Mean SSIM over valid windows, each window evaluated directly in 2-D."""
    w = gaussian_2d(side, sigma)
    c1, c2 = (0.01 * L) ** 2, (0.03 * L) ** 2
    h, wd = a.shape
    vals = []
    for y in range(h - side + 1):
        for x in range(wd - side + 1):
            pa = a[y:y + side, x:x + side]
            pb = b[y:y + side, x:x + side]
            ma = (w * pa).sum()
            mb = (w * pb).sum()
            va = (w * (pa - ma) ** 2).sum()
            vb = (w * (pb - mb) ** 2).sum()
            cov = (w * (pa - ma) * (pb - mb)).sum()
            vals.append(((2 * ma * mb + c1) * (2 * cov + c2))
                        / ((ma * ma + mb * mb + c1) * (va + vb + c2)))
    return float(np.mean(vals))


def bilinear_oracle(img, side):
    """Per-output-pixel bilinear sample with half-pixel centres and edge clamping."""
    h, w = img.shape[:2]
    out = np.empty((side, side) + img.shape[2:])
    for oy in range(side):
        sy = min(max((oy + 0.5) * h / side - 0.5, 0.0), h - 1)
        y0 = int(math.floor(sy))
        y1 = min(y0 + 1, h - 1)
        fy = sy - y0
        for ox in range(side):
            sx = min(max((ox + 0.5) * w / side - 0.5, 0.0), w - 1)
            x0 = int(math.floor(sx))
            x1 = min(x0 + 1, w - 1)
            fx = sx - x0
            out[oy, ox] = ((1 - fy) * (1 - fx) * img[y0, x0] + (1 - fy) * fx * img[y0, x1]
                           + fy * (1 - fx) * img[y1, x0] + fy * fx * img[y1, x1])
    return out


def iou_oracle(pred, gt):
    inter = union = 0
    for p, g in zip(np.ravel(pred).tolist(), np.ravel(gt).tolist()):
        inter += bool(p) and bool(g)
        union += bool(p) or bool(g)
    return Fraction(1) if union == 0 else Fraction(inter, union)


def gray(img):
    return 0.299 * img[..., 0] + 0.587 * img[..., 1] + 0.114 * img[..., 2]


def _centers(n, p, stride):
    r = p // 2
    c = list(range(r, n - r, stride))
    if c[-1] != n - 1 - r:
        c.append(n - 1 - r)
    return c


def patchmatch_oracle(exemplars, test, patch_side, stride, aggregation="patch-vote"):
    """Exhaustive nearest-patch search with explicit loops.

    Candidates are visited in (exemplar rank, row, col) order and replaced only
    on a strictly smaller SSD, which realises the tie-break rule.
    """
    p, r = patch_side, patch_side // 2
    h, w = test.shape[:2]
    tg = gray(test)
    eg = [gray(np.asarray(ex.image)) for ex in exemplars]
    ys, xs = _centers(h, p, stride), _centers(w, p, stride)
    matches = {}
    for cy in ys:
        for cx in xs:
            tp = tg[cy - r:cy + r + 1, cx - r:cx + r + 1]
            best = None
            for e, g in enumerate(eg):
                for my in range(r, h - r):
                    for mx in range(r, w - r):
                        d = float(((g[my - r:my + r + 1, mx - r:mx + r + 1] - tp) ** 2).sum())
                        if best is None or d < best[0]:
                            best = (d, e, my, mx)
            matches[cy, cx] = best[1:]

    if aggregation == "center-vote":
        out = np.zeros((h, w))
        for y in range(h):
            dy = min(abs(y - c) for c in ys)
            near_y = [c for c in ys if abs(y - c) == dy]
            for x in range(w):
                dx = min(abs(x - c) for c in xs)
                near_x = [c for c in xs if abs(x - c) == dx]
                votes = [bool(exemplars[matches[a, b][0]].mask[matches[a, b][1], matches[a, b][2]])
                         for a in near_y for b in near_x]
                out[y, x] = sum(votes) / len(votes)
        return out

    fg = np.zeros((h, w))
    cnt = np.zeros((h, w))
    for (cy, cx), (e, my, mx) in matches.items():
        m = np.asarray(exemplars[e].mask, dtype=float)
        for dy in range(-r, r + 1):
            for dx in range(-r, r + 1):
                fg[cy + dy, cx + dx] += m[my + dy, mx + dx]
                cnt[cy + dy, cx + dx] += 1
    return fg / cnt
