"""
================================================================================
01. Retrieving in-context exemplars
================================================================================

Before a segmenter sees a test image it is handed a few labelled examples.
This demo shows how those examples are picked: every training image is compared
with the test image in grayscale and the k closest ones are kept.
"""
########################################################################################################################
# A small synthetic dataset
# -------------------------
# Each test image is a noisy copy of one training image, so we know which
# neighbour retrieval should come back with.
import numpy as np

from promptseg.similarity import build_distance_matrix, knn_retrieve, ssim
from promptseg.synthetic import make_benchmark

ds = make_benchmark(n_train=12, n_test=3, side=48, seed=2)
test = ds.test[0]
print("test image:", test.id, test.image.shape)

########################################################################################################################
# Two distances
# -------------
# Frobenius is the plain L2 norm of the pixel difference. SSIM compares local
# means, variances and covariance, and we turn it into a distance as 1 - SSIM.
pool = [(ex.id, ex.gray) for ex in ds.train]
for metric in ("frobenius", "ssim"):
    result = knn_retrieve(test.gray, pool, k=3, metric=metric)
    print(metric)
    for rank, (nid, dist) in enumerate(result.neighbors, 1):
        print(f"  {rank}  {nid}  {dist:.4f}")

print("ssim of the test image with itself:", ssim(test.gray, test.gray))

########################################################################################################################
# Equal distances are broken by id, so the ranking does not depend on pool order
shuffled = [pool[i] for i in np.random.default_rng(0).permutation(len(pool))]
assert knn_retrieve(test.gray, shuffled, 5, "ssim").ids == knn_retrieve(test.gray, pool, 5, "ssim").ids

########################################################################################################################
# A full distance matrix
# ----------------------
# Sweeps reuse one test-by-train matrix per metric. It serialises to CSV so it
# can be cached between runs.
matrix = build_distance_matrix([(t.id, t.gray) for t in ds.test], pool, "ssim")
print(matrix.to_csv().splitlines()[0][:60], "...")
print("nearest to", ds.test[1].id, "->", matrix.retrieve(ds.test[1].id, 1).ids)
