from pathlib import Path

import numpy as np
import pytest

from fixtures import PANEL, golden_inputs, pattern_image, pattern_mask
from promptseg.dataset import LabeledExample
from promptseg.errors import DimensionMismatch, EmptyExemplarList
from promptseg.imaging import decode_image, quantize
from promptseg.prompt import build_prompt, extract_prediction_region, infer_k, mask_to_panel

DATA = Path(__file__).parent / "data"


def small_examples(k, side=6, seed=0):
    rng = np.random.default_rng(seed)
    return [LabeledExample(f"e{i}", rng.random((side, side, 3)), rng.random((side, side)) > 0.5)
            for i in range(k)]


def test_mask_to_panel():
    assert np.all(mask_to_panel(np.ones((5, 5), bool)) == 1.0)
    assert np.all(mask_to_panel(np.zeros((5, 5), bool)) == 0.0)
    m = np.zeros((8, 8), bool)
    m[3, 5] = True
    panel = mask_to_panel(m)
    assert panel.shape == (8, 8, 3)
    assert np.all(panel[3, 5] == 1.0)
    assert panel.sum() == 3.0
    assert set(np.unique(panel)) == {0.0, 1.0}
    with pytest.raises(DimensionMismatch):
        mask_to_panel(np.zeros((4, 5), bool), panel_side=4)


@pytest.mark.parametrize("k,height", [(1, 896), (2, 1344)])
def test_canvas_dimensions(k, height):
    exemplars, test = golden_inputs(k)
    canvas = build_prompt(exemplars, test)
    assert canvas.image.shape == (height, 896, 3)
    assert canvas.k == k and canvas.panel_side == PANEL and canvas.layout_version == "v1"


def test_canvas_layout_k2():
    exemplars, test = golden_inputs(2)
    img = build_prompt(exemplars, test).image
    np.testing.assert_array_equal(img[896:1344, 0:448], test)
    assert np.all(img[896:1344, 448:896] == 0.0)
    for i, ex in enumerate(exemplars):
        np.testing.assert_array_equal(img[i * 448:(i + 1) * 448, :448], ex.image)
        np.testing.assert_array_equal(img[i * 448:(i + 1) * 448, 448:, 0], ex.mask.astype(float))


@pytest.mark.parametrize("k", [1, 2])
def test_golden_png_bytes(k):
    exemplars, test = golden_inputs(k)
    golden = (DATA / f"golden_canvas_k{k}.png").read_bytes()
    assert build_prompt(exemplars, test).to_png() == golden
    # the golden itself decodes to the expected panels
    dec = decode_image(golden)
    np.testing.assert_array_equal(quantize(dec[k * PANEL:, :PANEL]), quantize(pattern_image(7)))
    np.testing.assert_array_equal(dec[:PANEL, PANEL:, 1] == 1.0, pattern_mask(0))
    assert np.all(dec[k * PANEL:, PANEL:] == 0.0)


def test_build_prompt_errors():
    with pytest.raises(EmptyExemplarList):
        build_prompt([], np.zeros((6, 6, 3)))
    ex = small_examples(1, side=6)
    with pytest.raises(DimensionMismatch):
        build_prompt(ex, np.zeros((7, 7, 3)))
    bad = [LabeledExample("x", np.zeros((6, 6, 3)), np.zeros((5, 5), bool))]
    with pytest.raises(DimensionMismatch):
        build_prompt(bad, np.zeros((6, 6, 3)))


def test_extract_prediction_region():
    img = np.zeros((1344, 896, 3))
    img[896, 448] = [1.0, 0.5, 0.25]
    out = extract_prediction_region(img, 448)
    assert out.shape == (448, 448, 3)
    np.testing.assert_array_equal(out[0, 0], [1.0, 0.5, 0.25])
    assert infer_k(1344, 896, 448) == 2
    with pytest.raises(DimensionMismatch):
        extract_prediction_region(np.zeros((1000, 896, 3)), 448)
    with pytest.raises(DimensionMismatch):
        extract_prediction_region(np.zeros((896, 900, 3)), 448)


def test_roundtrip_every_panel():
    exemplars = small_examples(3)
    test = np.random.default_rng(9).random((6, 6, 3))
    canvas = build_prompt(exemplars, test)
    for i, ex in enumerate(exemplars):
        np.testing.assert_array_equal(canvas.panel(i, 0), ex.image)
        np.testing.assert_array_equal(canvas.panel(i, 1), mask_to_panel(ex.mask))
    np.testing.assert_array_equal(canvas.panel(3, 0), test)
    np.testing.assert_array_equal(extract_prediction_region(canvas.image, 6), np.zeros((6, 6, 3)))


def test_permuting_exemplars_permutes_rows():
    exemplars = small_examples(3, seed=4)
    test = np.random.default_rng(5).random((6, 6, 3))
    base = build_prompt(exemplars, test).image
    perm = [2, 0, 1]
    swapped = build_prompt([exemplars[p] for p in perm], test).image
    for new_row, old_row in enumerate(perm):
        np.testing.assert_array_equal(swapped[new_row * 6:(new_row + 1) * 6],
                                      base[old_row * 6:(old_row + 1) * 6])
    np.testing.assert_array_equal(swapped[18:], base[18:])


def test_canvas_bytes_deterministic():
    exemplars = small_examples(2, seed=3)
    test = np.random.default_rng(1).random((6, 6, 3))
    assert build_prompt(exemplars, test).to_png() == build_prompt(exemplars, test).to_png()
