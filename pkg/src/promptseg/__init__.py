"""Retrieval-prompted few-shot segmentation: kNN exemplar retrieval, prompt
canvases, pluggable segmenters and IoU evaluation."""

from .backends import BackendSpec, binarize, segment
from .dataset import Dataset, LabeledExample, Manifest, cache_key, load_examples, load_manifest
from .evaluation import IoURecord, SweepReport, emit_report, evaluate_once, iou, miou, sweep
from .imaging import (PreprocessConfig, decode_image, encode_png, normalize_zscore,
                      resize_bilinear, to_grayscale)
from .patchmatch import PatchMatchParams, reference_patchmatch
from .prompt import LAYOUT_VERSION, PromptCanvas, build_prompt, extract_prediction_region, mask_to_panel
from .similarity import (DistanceMatrix, RetrievalResult, SsimParams, build_distance_matrix,
                         frobenius_distance, knn_retrieve, ssim, ssim_distance)

__version__ = "0.1.0"
