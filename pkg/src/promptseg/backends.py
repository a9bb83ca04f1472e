"""Segmenter backends behind a single ``segment`` entry point."""

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyExemplarList
from .patchmatch import PatchMatchParams, reference_patchmatch
from .prompt import build_prompt

BACKEND_KINDS = ("reference", "remote")
DEFAULT_TIMEOUT = 60.0


@dataclass(frozen=True)
class BackendSpec:
    kind: str = "reference"
    endpoint: str = None
    timeout: float = DEFAULT_TIMEOUT
    patch: PatchMatchParams = field(default_factory=PatchMatchParams)

    def __post_init__(self):
        if self.kind not in BACKEND_KINDS:
            raise ValueError(f"backend kind must be one of {BACKEND_KINDS}, got {self.kind!r}")
        if (self.kind == "remote") != (self.endpoint is not None):
            raise ValueError("an endpoint is required for, and only for, the remote backend")
        if not self.timeout > 0:
            raise ValueError("timeout must be positive")

    @property
    def tag(self):
        return self.kind

    def to_dict(self):
        d = {"kind": self.kind, "timeout": float(self.timeout)}
        if self.kind == "remote":
            d["endpoint"] = self.endpoint
        else:
            d["patch"] = self.patch.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        patch = PatchMatchParams.from_dict(d["patch"]) if "patch" in d else PatchMatchParams()
        return cls(kind=d["kind"], endpoint=d.get("endpoint"),
                   timeout=d.get("timeout", DEFAULT_TIMEOUT), patch=patch)


def segment(exemplars, test, spec=None):
    """Predict a soft foreground mask for ``test`` given ranked exemplars.

    Inputs are never modified. The reference backend is deterministic; the
    remote backend sends the stitched prompt canvas to ``spec.endpoint``.
    """
    spec = spec or BackendSpec()
    exemplars = list(exemplars)
    if not exemplars:
        raise EmptyExemplarList("segment needs at least one exemplar")
    if spec.kind == "reference":
        return reference_patchmatch(exemplars, test, spec.patch)
    from .remote import remote_segment
    return remote_segment(build_prompt(exemplars, test), spec)


def binarize(soft, threshold=0.5):
    """Foreground where ``soft >= threshold``."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    return np.asarray(soft, dtype=np.float64) >= threshold
