"""
Image distances and k-nearest-neighbour exemplar retrieval.

Distances work on grayscale images (2-D float arrays) of identical shape.
Two metrics are available, ``"frobenius"`` and ``"ssim"`` (as ``1 - SSIM``).
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import csv
import io
import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionMismatch, EmptyPool, ImageTooSmall, KTooLarge

METRICS = ("frobenius", "ssim")


@dataclass(frozen=True)
class SsimParams:
    window_side: int = 11
    gaussian_sigma: float = 1.5
    dynamic_range: float = 1.0
    c1: float = None
    c2: float = None

    def __post_init__(self):
        if self.c1 is None:
            object.__setattr__(self, "c1", (0.01 * self.dynamic_range) ** 2)
        if self.c2 is None:
            object.__setattr__(self, "c2", (0.03 * self.dynamic_range) ** 2)
        if self.window_side < 3 or self.window_side % 2 == 0:
            raise ValueError(f"window_side must be odd and >= 3, got {self.window_side}")
        if not self.gaussian_sigma > 0:
            raise ValueError("gaussian_sigma must be positive")
        if not (self.c1 > 0 and self.c2 > 0):
            raise ValueError("c1 and c2 must be positive")

    def to_dict(self):
        return {
            "window_side": int(self.window_side),
            "gaussian_sigma": float(self.gaussian_sigma),
            "dynamic_range": float(self.dynamic_range),
            "c1": float(self.c1),
            "c2": float(self.c2),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _same_shape(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def frobenius_distance(a, b):
    """sqrt of the sum of squared pixel differences.

    The sum is accumulated with ``math.fsum`` so the result is the correctly
    rounded value of the exact sum; it does not depend on summation order and
    is exactly symmetric.
    """
    a, b = _same_shape(a, b)
    d = (a - b).ravel()
    return math.sqrt(math.fsum((d * d).tolist()))


def gaussian_window(side, sigma):
    """Normalised 1-D Gaussian taps of odd length ``side``."""
    x = np.arange(side, dtype=np.float64) - (side - 1) / 2
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img, g):
    # separable correlation, 'valid' region only
    rows = sliding_window_view(img, g.size, axis=0) @ g
    return sliding_window_view(rows, g.size, axis=1) @ g


def ssim_map(a, b, p=None):
    """Per-window SSIM values over every valid (unpadded) window position."""
    p = p or SsimParams()
    a, b = _same_shape(a, b)
    if a.ndim != 2:
        raise ValueError(f"SSIM expects 2-D grayscale images, got shape {a.shape}")
    if min(a.shape) < p.window_side:
        raise ImageTooSmall(f"image {a.shape} is smaller than the {p.window_side}px SSIM window")
    g = gaussian_window(p.window_side, p.gaussian_sigma)

    mu_a = _filter_valid(a, g)
    mu_b = _filter_valid(b, g)
    var_a = _filter_valid(a * a, g) - mu_a * mu_a
    var_b = _filter_valid(b * b, g) - mu_b * mu_b
    cov = _filter_valid(a * b, g) - mu_a * mu_b

    num = (2.0 * mu_a * mu_b + p.c1) * (2.0 * cov + p.c2)
    den = (mu_a * mu_a + mu_b * mu_b + p.c1) * (var_a + var_b + p.c2)
    return num / den


def ssim(a, b, p=None):
    """Mean SSIM over all valid window positions (Gaussian window, no padding)."""
    return float(ssim_map(a, b, p).mean())


def ssim_distance(a, b, p=None):
    """``1 - ssim``; lies in [0, 2] because SSIM can be negative."""
    return 1.0 - ssim(a, b, p)


def distance(a, b, metric, ssim_params=None):
    if metric == "frobenius":
        return frobenius_distance(a, b)
    if metric == "ssim":
        return ssim_distance(a, b, ssim_params)
    raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")


@dataclass(frozen=True)
class RetrievalResult:
    test_id: str
    neighbors: tuple  # ((exemplar_id, distance), ...) nearest first

    @property
    def k(self):
        return len(self.neighbors)

    @property
    def ids(self):
        return [n[0] for n in self.neighbors]


def rank_neighbors(test_id, ids, distances, k):
    """Pick the ``k`` smallest distances; ties go to the smaller id."""
    ids = list(ids)
    if not ids:
        raise EmptyPool("the exemplar pool is empty")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > len(ids):
        raise KTooLarge(f"k={k} exceeds pool size {len(ids)}")
    if len(set(ids)) != len(ids):
        raise ValueError("pool contains duplicate ids")
    order = sorted(zip(distances, ids), key=lambda t: (float(t[0]), t[1]))
    return RetrievalResult(test_id, tuple((i, float(d)) for d, i in order[:k]))


def knn_retrieve(test, pool, k, metric="ssim", ssim_params=None, test_id=""):
    """Return the ``k`` pool entries closest to ``test``.

    ``pool`` is a sequence of ``(id, gray_image)`` pairs.
    """
    pool = list(pool)
    if not pool:
        raise EmptyPool("the exemplar pool is empty")
    if k > len(pool):
        raise KTooLarge(f"k={k} exceeds pool size {len(pool)}")
    dists = [distance(test, img, metric, ssim_params) for _, img in pool]
    return rank_neighbors(test_id, [i for i, _ in pool], dists, k)


@dataclass
class DistanceMatrix:
    test_ids: list
    train_ids: list
    values: np.ndarray
    metric: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (len(self.test_ids), len(self.train_ids)):
            raise DimensionMismatch(
                f"values shape {self.values.shape} does not match "
                f"{len(self.test_ids)} tests x {len(self.train_ids)} train ids"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("distance matrix contains non-finite values")
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")

    def row(self, test_id):
        return self.values[self.test_ids.index(test_id)]

    def lookup(self, test_id, train_id):
        return float(self.values[self.test_ids.index(test_id), self.train_ids.index(train_id)])

    def retrieve(self, test_id, k, train_ids=None):
        """kNN for one test row, optionally restricted to a subset of train ids."""
        row = self.row(test_id)
        if train_ids is None:
            return rank_neighbors(test_id, self.train_ids, row, k)
        cols = [self.train_ids.index(t) for t in train_ids]
        return rank_neighbors(test_id, train_ids, row[cols], k)

    def to_csv(self):
        """Header ``test_id,<train ids...>``; one row per test id, 9 significant digits."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["test_id"] + list(self.train_ids))
        for tid, row in zip(self.test_ids, self.values):
            w.writerow([tid] + [f"{v:.9g}" for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, metric):
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise ValueError("empty distance matrix CSV")
        header, body = rows[0], rows[1:]
        values = np.array([[float(v) for v in r[1:]] for r in body], dtype=np.float64)
        values = values.reshape(len(body), len(header) - 1)
        return cls([r[0] for r in body], header[1:], values, metric)

    def rounded(self):
        """Copy with values at the 9 significant digits used on disk."""
        return DistanceMatrix.from_csv(self.to_csv(), self.metric)


def build_distance_matrix(tests, pool, metric, parallelism=1, ssim_params=None):
    """Pairwise distances between ``tests`` and ``pool`` (both ``(id, gray)`` lists).

    Each cell is computed by the same pairwise call regardless of
    ``parallelism``, so the result is identical for any worker count.
    """
    tests = list(tests)
    pool = list(pool)
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")

    def one_row(item):
        _, img = item
        return [distance(img, p_img, metric, ssim_params) for _, p_img in pool]

    if parallelism > 1 and len(tests) > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as ex:
            rows = list(ex.map(one_row, tests))
    else:
        rows = [one_row(t) for t in tests]
    values = np.array(rows, dtype=np.float64).reshape(len(tests), len(pool))
    return DistanceMatrix([t[0] for t in tests], [p[0] for p in pool], values, metric)
