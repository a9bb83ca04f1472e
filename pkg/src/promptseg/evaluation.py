"""
IoU / mIoU scoring, the retrieval-prompting evaluation loop, and the k x metric sweep.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
import csv
import io
import json
import logging
import math
import threading

import numpy as np

from .backends import BackendSpec, binarize, segment
from .errors import DimensionMismatch, EmptyRecordList, KTooLarge, PipelineError, PromptSegError
from .prompt import LAYOUT_VERSION
from .similarity import METRICS, SsimParams, build_distance_matrix

log = logging.getLogger(__name__)

CSV_HEADER = ["k", "metric", "miou", "n_images", "miou_100"]


def iou(pred, gt):
    """Foreground intersection over union; 1.0 when both masks are empty."""
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise DimensionMismatch(f"mask shapes differ: {pred.shape} vs {gt.shape}")
    inter = int(np.count_nonzero(pred & gt))
    union = int(np.count_nonzero(pred | gt))
    if union == 0:
        return 1.0
    return inter / union


@dataclass(frozen=True)
class IoURecord:
    test_id: str
    iou: float
    k: int
    metric: str
    backend: str


def miou(records):
    """Mean of the records' IoU values (exactly rounded, so order never matters)."""
    records = list(records)
    if not records:
        raise EmptyRecordList("cannot average an empty record list")
    return math.fsum(r.iou for r in records) / len(records)


class _SegmentCache:
    """Memoises soft masks by (test id, ordered neighbour ids) across sweep cells."""

    def __init__(self):
        self._store = {}
        self._lock = threading.Lock()

    def get(self, key, compute):
        with self._lock:
            if key in self._store:
                return self._store[key]
        value = compute()
        with self._lock:
            return self._store.setdefault(key, value)


def _check_k(k, n_train, metric=None):
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > n_train:
        cell = f"cell (k={k}, metric={metric}): " if metric else ""
        raise KTooLarge(f"{cell}k={k} exceeds the {n_train} training exemplars")


def compute_distances(dataset, metric, ssim_params=None, parallelism=1):
    """Test x train distance matrix, rounded to the 9 significant digits used on disk.

    Rounding here keeps fresh and cached matrices interchangeable.
    """
    tests = [(ex.id, ex.gray) for ex in dataset.test]
    pool = [(ex.id, ex.gray) for ex in dataset.train]
    return build_distance_matrix(tests, pool, metric, parallelism, ssim_params).rounded()


def _run_cell(dataset, k, metric, backend, distances, threshold, parallelism, cache):
    """Score every test image for one (k, metric) cell.

    Stops at the first failing test (in id order) and returns the records
    completed before it alongside the error.
    """
    train = dataset.train_by_id()
    tests = sorted(dataset.test, key=lambda ex: ex.id)

    def one(test):
        try:
            neighbors = distances.retrieve(test.id, k).ids
            exemplars = [train[i] for i in neighbors]
            soft = cache.get((test.id, tuple(neighbors)),
                             lambda: segment(exemplars, test.image, backend))
            score = iou(binarize(soft, threshold), test.mask)
        except PromptSegError as exc:
            raise PipelineError(test.id, exc) from exc
        return IoURecord(test.id, score, k, metric, backend.tag)

    records = []
    if parallelism > 1 and len(tests) > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as ex:
            futures = [ex.submit(one, t) for t in tests]
            for fut in futures:
                try:
                    records.append(fut.result())
                except PipelineError as exc:
                    for f in futures:
                        f.cancel()
                    return records, exc
    else:
        for t in tests:
            try:
                records.append(one(t))
            except PipelineError as exc:
                return records, exc
    return records, None


def evaluate_once(dataset, k, metric="ssim", backend=None, *, distances=None,
                  ssim_params=None, threshold=0.5, parallelism=1):
    """Retrieve, prompt, segment, binarise and score every test image.

    Returns IoU records sorted by test id. Errors are re-raised as
    :class:`PipelineError` carrying the failing test id.
    """
    backend = backend or BackendSpec()
    _check_k(k, len(dataset.train))
    if distances is None:
        distances = compute_distances(dataset, metric, ssim_params, parallelism)
    records, err = _run_cell(dataset, k, metric, backend, distances, threshold,
                             parallelism, _SegmentCache())
    if err is not None:
        raise err
    return records


@dataclass
class SweepReport:
    cells: list                 # [{"k", "metric", "miou", "n_images"}], ordered by (k, metric)
    records: list               # IoURecord, ordered by (k, metric, test_id)
    config: dict
    failures: list = field(default_factory=list)  # [{"k", "metric", "test_id", "error"}]

    def cell(self, k, metric):
        for c in self.cells:
            if c["k"] == k and c["metric"] == metric:
                return c
        raise KeyError((k, metric))

    def grid(self):
        return {(c["k"], c["metric"]): c["miou"] for c in self.cells}

    @property
    def ok(self):
        return not self.failures

    def to_dict(self):
        return {
            "cells": [dict(c) for c in self.cells],
            "records": [asdict(r) for r in self.records],
            "config": self.config,
            "failures": [dict(f) for f in self.failures],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            cells=[dict(c) for c in d["cells"]],
            records=[IoURecord(**r) for r in d["records"]],
            config=d["config"],
            failures=[dict(f) for f in d.get("failures", [])],
        )


def sweep(dataset, k_range=(1, 15), metrics=METRICS, backend=None, *, ssim_params=None,
          threshold=0.5, parallelism=1, distance_matrices=None, preprocess=None,
          extra_config=None):
    """Evaluate every (k, metric) cell for ``k`` in the inclusive ``k_range``.

    One distance matrix per metric is computed (or taken from
    ``distance_matrices``) and shared by all cells. A failing cell is logged in
    ``report.failures`` and the sweep moves on.
    """
    backend = backend or BackendSpec()
    ssim_params = ssim_params or SsimParams()
    k_min, k_max = int(k_range[0]), int(k_range[1])
    if k_min < 1 or k_max < k_min:
        raise ValueError(f"invalid k range {k_min}..{k_max}")
    metrics = sorted(set(metrics))
    for m in metrics:
        if m not in METRICS:
            raise ValueError(f"unknown metric {m!r}; expected one of {METRICS}")
    _check_k(k_max, len(dataset.train), metrics[0])

    matrices = dict(distance_matrices or {})
    for m in metrics:
        if m not in matrices:
            log.info("computing %s distance matrix", m)
            matrices[m] = compute_distances(dataset, m, ssim_params, parallelism)

    cache = _SegmentCache()
    cells, records, failures = [], [], []
    for k in range(k_min, k_max + 1):
        for m in metrics:
            cell_records, err = _run_cell(dataset, k, m, backend, matrices[m], threshold,
                                          parallelism, cache)
            records.extend(cell_records)
            if err is None:
                value = miou(cell_records)
                log.info("cell k=%d metric=%s miou=%.6f", k, m, value)
            else:
                value = None
                failures.append({"k": k, "metric": m, "test_id": err.test_id, "error": str(err.cause)})
                log.warning("cell k=%d metric=%s failed: %s", k, m, err)
            cells.append({"k": k, "metric": m, "miou": value, "n_images": len(cell_records)})

    config = {
        "k_range": [k_min, k_max],
        "metrics": metrics,
        "backend": backend.to_dict(),
        "ssim": ssim_params.to_dict(),
        "threshold": float(threshold),
        "layout_version": LAYOUT_VERSION,
    }
    if preprocess is not None:
        config["preprocess"] = preprocess.to_dict()
    if extra_config:
        config.update(extra_config)
    return SweepReport(cells, records, config, failures)


def emit_report(report, fmt="csv"):
    """Serialise a report. CSV holds one row per cell; JSON holds everything."""
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for c in report.cells:
            if c["miou"] is None:
                w.writerow([c["k"], c["metric"], "", c["n_images"], ""])
            else:
                w.writerow([c["k"], c["metric"], f"{c['miou']:.6f}", c["n_images"],
                            f"{100.0 * c['miou']:.6f}"])
        return buf.getvalue().encode("utf-8")
    if fmt == "json":
        return (json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n").encode("utf-8")
    raise ValueError(f"unknown report format {fmt!r}; expected 'csv' or 'json'")


def parse_json_report(data):
    return SweepReport.from_dict(json.loads(data))


def report_filename(dataset_hash, backend_tag, layout_version=LAYOUT_VERSION, fmt="csv"):
    return f"sweep-{dataset_hash[:16]}-{backend_tag}-{layout_version}.{fmt}"
