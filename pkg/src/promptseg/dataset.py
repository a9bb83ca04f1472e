"""
Dataset manifests, example loading and cache keys.

A manifest is one JSON file::

    {
      "version": "1",
      "entries": [
        {"id": "img_001", "image_path": "images/img_001.png",
         "mask_path": "masks/img_001.png", "split": "train"},
        ...
      ]
    }

Relative paths resolve against the manifest's directory.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
import hashlib
import json
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import DuplicateId, EntryLoadError, MissingFile, ParseError, PromptSegError
from .imaging import PreprocessConfig, read_image, read_mask, resize_bilinear, resize_nearest, to_grayscale

MANIFEST_VERSION = "1"
SPLITS = ("train", "test")


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    image_path: Path
    mask_path: Path
    split: str


@dataclass(frozen=True)
class Manifest:
    entries: tuple
    version: str = MANIFEST_VERSION
    path: Path = None

    def split(self, name):
        return sorted((e for e in self.entries if e.split == name), key=lambda e: e.id)

    @property
    def train(self):
        return self.split("train")

    @property
    def test(self):
        return self.split("test")

    def counts(self):
        return {s: sum(e.split == s for e in self.entries) for s in SPLITS}


@dataclass(frozen=True, eq=False)
class LabeledExample:
    id: str
    image: np.ndarray  # (side, side, 3) in [0, 1]
    mask: np.ndarray   # (side, side) bool

    @cached_property
    def gray(self):
        return to_grayscale(self.image)


class Dataset(NamedTuple):
    train: list
    test: list

    def train_by_id(self):
        return {ex.id: ex for ex in self.train}

    def test_by_id(self):
        return {ex.id: ex for ex in self.test}


def _read_json(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise MissingFile(str(path))
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}",
                         path=str(path), line=exc.lineno, column=exc.colno) from exc


def _parse_entries(doc, base, path):
    if not isinstance(doc, dict) or not isinstance(doc.get("entries"), list):
        raise ParseError(f"{path}: expected an object with an 'entries' list", path=str(path))
    entries = []
    for n, raw in enumerate(doc["entries"]):
        if not isinstance(raw, dict):
            raise ParseError(f"{path}: entry {n} is not an object", path=str(path))
        missing = [k for k in ("id", "image_path", "mask_path", "split") if k not in raw]
        if missing:
            raise ParseError(f"{path}: entry {n} lacks field(s) {', '.join(missing)}", path=str(path))
        if raw["split"] not in SPLITS:
            raise ParseError(f"{path}: entry {raw['id']!r} has split {raw['split']!r}, "
                             f"expected one of {SPLITS}", path=str(path))
        entries.append(ManifestEntry(
            id=str(raw["id"]),
            image_path=base / raw["image_path"],
            mask_path=base / raw["mask_path"],
            split=raw["split"],
        ))
    return entries


def manifest_problems(path):
    """Parse a manifest and collect every validation problem instead of stopping at the first.

    Returns ``(manifest_or_None, problems)``. A ParseError propagates, since
    nothing else can be checked without a parse.
    """
    path = Path(path)
    doc = _read_json(path)
    entries = _parse_entries(doc, path.parent, path)
    problems = []
    seen = set()
    for e in entries:
        if e.id in seen:
            problems.append(DuplicateId(e.id))
        seen.add(e.id)
        for p in (e.image_path, e.mask_path):
            if not p.is_file():
                problems.append(MissingFile(str(p), e.id))
    manifest = Manifest(tuple(entries), str(doc.get("version", MANIFEST_VERSION)), path)
    return manifest, problems


def load_manifest(path):
    """Load and validate a manifest; raises the first problem found."""
    manifest, problems = manifest_problems(path)
    if problems:
        raise problems[0]
    return manifest


def load_example(entry, cfg):
    side = cfg.target_side
    try:
        image = resize_bilinear(read_image(entry.image_path), side)
        mask = resize_nearest(read_mask(entry.mask_path).astype(np.float64), side) >= 0.5
    except PromptSegError as exc:
        raise EntryLoadError(entry.id, exc) from exc
    return LabeledExample(entry.id, image, mask)


def load_examples(manifest, cfg=None, parallelism=1):
    """Decode and resize every entry. Returns ``Dataset(train, test)``, each sorted by id."""
    cfg = cfg or PreprocessConfig()

    def load(entries):
        if parallelism > 1:
            with ThreadPoolExecutor(max_workers=parallelism) as ex:
                return list(ex.map(lambda e: load_example(e, cfg), entries))
        return [load_example(e, cfg) for e in entries]

    return Dataset(load(manifest.train), load(manifest.test))


def _file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def dataset_digest(manifest):
    """Content hash of the manifest's ids, splits and file bytes."""
    rows = [
        [e.id, e.split, _file_digest(e.image_path), _file_digest(e.mask_path)]
        for e in sorted(manifest.entries, key=lambda e: e.id)
    ]
    return hashlib.sha256(json.dumps(rows, separators=(",", ":")).encode()).hexdigest()


def cache_key(manifest, cfg, metric, extra=None):
    """Stable 256-bit hex key over dataset content, preprocessing, metric and ``extra``."""
    payload = {
        "dataset": dataset_digest(manifest),
        "preprocess": cfg.to_dict(),
        "metric": metric,
        "extra": extra,
    }
    digest = hashlib.sha256(json.dumps(payload, sort_keys=True, separators=(",", ":")).encode())
    return f"{metric}-{digest.hexdigest()}"
