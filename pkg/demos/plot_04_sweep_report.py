"""
================================================================================
04. Sweeping k and the retrieval metric
================================================================================

How many exemplars help, and which similarity picks better ones? The sweep
runs every (k, metric) pair over the whole test split and reports mean IoU.
"""
########################################################################################################################
import tempfile
from pathlib import Path

from promptseg.cli import main
from promptseg.evaluation import emit_report, sweep
from promptseg.synthetic import make_benchmark, write_dataset

ds = make_benchmark(n_train=16, n_test=4, side=48, seed=6)

########################################################################################################################
# In-process sweep
report = sweep(ds, k_range=(1, 4))
print(emit_report(report, "csv").decode())
best = max(report.cells, key=lambda c: c["miou"])
print("best cell: k =", best["k"], "metric =", best["metric"])

########################################################################################################################
# The same thing from the command line
# ------------------------------------
# Datasets on disk are described by a JSON manifest. ``write_dataset`` produces
# one for the synthetic data. When ``--out`` is a directory the report name is
# derived from the dataset hash, backend and layout version.
work = Path(tempfile.mkdtemp())
manifest = write_dataset(ds, work / "data")
code = main(["sweep", "--manifest", str(manifest), "--side", "48", "--k-max", "4",
             "--format", "json", "--out", str(work), "--cache-dir", str(work / "cache")])
print("exit code", code, [p.name for p in work.glob("sweep-*")])
print("cached distance matrices:", sorted(p.name[:12] for p in (work / "cache").iterdir()))
