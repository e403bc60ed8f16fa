import os
import sys
from pathlib import Path

import pytest

from gkan.graph import export_graph, find_cora, generate_synthetic

ROOT = Path(__file__).resolve().parents[1]


def cora_dir() -> Path:
    return Path(os.environ.get("GKAN_CORA_DIR", ROOT / "data" / "cora"))


def cora_available() -> bool:
    try:
        find_cora(cora_dir())
    except FileNotFoundError:
        return False
    return True


@pytest.fixture
def cora_paths():
    if not cora_available():
        pytest.skip(f"Cora files not found under {cora_dir()} (set GKAN_CORA_DIR)")
    return find_cora(cora_dir())


@pytest.fixture
def fake_cora(tmp_path):
    """Cora-format stand-in: 1600 nodes, 7 classes, 220 binary feature columns."""
    graph = generate_synthetic(1600, 7, 0.01, 0.001, 220, 1.0, seed=3)
    graph.features = (graph.features > 0.8).astype(float)
    graph.label_names = ["Theory", "Neural_Networks", "Rule_Learning", "Genetic_Algorithms",
                         "Case_Based", "Probabilistic_Methods", "Reinforcement_Learning"]
    graph.node_ids = [str(31336 + 7 * i) for i in range(graph.num_nodes)]
    export_graph(graph, tmp_path / "cora", "cora")
    return tmp_path / "cora"


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for line in module.RESULTS:
        terminalreporter.write_line(line)
