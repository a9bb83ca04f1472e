"""
================================================================================
03. Segmenting with the reference patch-match backend
================================================================================

The reference backend needs no trained weights. For each patch of the test
image it finds the most similar patch among the exemplars and copies over the
matching piece of that exemplar's mask.
"""
########################################################################################################################
import numpy as np

from promptseg.backends import BackendSpec, binarize, segment
from promptseg.evaluation import iou
from promptseg.patchmatch import PatchMatchParams
from promptseg.similarity import knn_retrieve
from promptseg.synthetic import make_benchmark

ds = make_benchmark(n_train=20, n_test=4, side=64, seed=4)
pool = [(ex.id, ex.gray) for ex in ds.train]
train = ds.train_by_id()

########################################################################################################################
# Retrieve, segment, threshold at 0.5, score
for test in ds.test:
    ids = knn_retrieve(test.gray, pool, 2, "ssim").ids
    soft = segment([train[i] for i in ids], test.image)
    pred = binarize(soft)
    print(f"{test.id}: neighbours {ids}, IoU {iou(pred, test.mask):.4f}")

########################################################################################################################
# Knobs
# -----
# ``patch_side`` and ``stride`` control the query grid. "patch-vote" pastes the
# whole matched mask patch, while "center-vote" only copies its centre pixel
# and fills the gaps from the nearest centre. ``search_stride`` thins the
# candidate positions for large images.
test = ds.test[0]
ids = knn_retrieve(test.gray, pool, 2, "ssim").ids
for params in (PatchMatchParams(), PatchMatchParams(aggregation="center-vote"),
               PatchMatchParams(patch_side=9, stride=3, search_stride=2)):
    soft = segment([train[i] for i in ids], test.image, BackendSpec(patch=params))
    print(params.aggregation, params.patch_side, params.stride, params.search_stride,
          f"IoU {iou(binarize(soft), test.mask):.4f}", "soft levels", len(np.unique(soft)))
