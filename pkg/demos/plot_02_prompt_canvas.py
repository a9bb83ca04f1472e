"""
================================================================================
02. Building the prompt canvas
================================================================================

Retrieved exemplars and the test image are stitched into a single picture.
Each row holds an image on the left and its mask on the right. The last row
has the test image and a black panel that the segmenter is asked to fill in.
"""
########################################################################################################################
import tempfile
from pathlib import Path

from promptseg.prompt import build_prompt, extract_prediction_region, infer_k
from promptseg.synthetic import make_benchmark

ds = make_benchmark(n_train=4, n_test=1, side=64, seed=0)

########################################################################################################################
# Two exemplars give a canvas two panels wide and three panels tall
canvas = build_prompt(ds.train[:2], ds.test[0].image)
print("canvas (h, w):", canvas.height, canvas.width, "layout", canvas.layout_version)
print("exemplars recovered from the height:", infer_k(canvas.height, canvas.width, canvas.panel_side))

########################################################################################################################
# Masks are drawn white on black in all three channels
mask_panel = canvas.panel(0, 1)
print("mask panel values:", sorted(set(mask_panel.ravel().tolist())))
print("output panel is blank:", extract_prediction_region(canvas.image, canvas.panel_side).max() == 0.0)

########################################################################################################################
# The PNG encoding is deterministic, which is what the golden-file tests rely on
out = Path(tempfile.mkdtemp()) / "canvas.png"
out.write_bytes(canvas.to_png())
print("wrote", out, out.stat().st_size, "bytes")
assert canvas.to_png() == build_prompt(ds.train[:2], ds.test[0].image).to_png()
