"""Matched-budget comparison on Cora, restricted to the first 100 features.

Needs cora.content and cora.cites under $GKAN_CORA_DIR or ./data/cora.
Both models have roughly 10K parameters.
"""

import os
import sys

import numpy as np

from gkan.experiments import DatasetSpec, ExperimentSpec, ModelSpec, run_many
from gkan.graph import find_cora

data_dir = os.environ.get("GKAN_CORA_DIR", "data/cora")
try:
    find_cora(data_dir)
except FileNotFoundError as exc:
    sys.exit(f"skipping: {exc}")

seeds = (0, 1, 2, 3, 4)
for model in (ModelSpec("GCN", 100), ModelSpec("GKAN2", 16, g=3, k=1)):
    spec = ExperimentSpec(dataset=DatasetSpec(data_dir=str(data_dir), features=100), model=model, repeats=5, seeds=seeds)
    recs = run_many([(spec, s) for s in seeds], workers=5)
    acc = 100 * np.array([r.final_test_acc for r in recs])
    print(f"{model.label():22s} {recs[0].num_parameters:6,d} params  test {acc.mean():.2f} +- {acc.std():.2f}")
