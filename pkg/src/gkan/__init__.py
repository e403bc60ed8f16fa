"""Graph Kolmogorov-Arnold networks and a GCN baseline in plain numpy."""

from .graph import (
    Graph,
    NormalizedAdjacency,
    SplitSpec,
    export_graph,
    generate_synthetic,
    load_cora,
    normalize_adjacency,
    spmm,
)
from .kan import KanLayerParams, init_kan_layer, kan_backward, kan_forward, kan_param_count, update_layer_grid
from .models import (
    Model,
    ModelConfig,
    accuracy,
    backward,
    build_model,
    count_parameters,
    forward,
    load_checkpoint,
    masked_cross_entropy,
    save_checkpoint,
)
from .splines import SplineGrid, build_grid, eval_basis, eval_basis_derivative, refit_grid
from .training import Adam, GradCheckReport, TrainConfig, TrainRecord, grad_check, train

__version__ = "0.1.0"
