"""Generalized geodesic distance functions on graphs, learned initial
conditions, and distance-snapshot node features for classification."""

from .backend import BACKEND_NAME
from .graph import (
    INFINITY_CAP,
    Graph,
    PotentialParams,
    build_graph,
    degree,
    degrees,
    load_graph,
    neg_grad_norm,
    potential_eval,
    save_graph,
)
from .solver import (
    BoundarySpec,
    DistanceField,
    SolverConfig,
    dijkstra,
    distance_map_distortion,
    integrate,
    local_solve,
    residual,
    solve_steady,
)
from .learn import (
    MlpParams,
    TrainConfig,
    adam_step,
    boundary_loss,
    loss_and_gradients,
    mlp_forward,
    train_pipeline1,
)
from .pipelines import (
    FeatureMatrix,
    generate_ggd,
    generate_lggd,
    include_new_labels,
)
from .backbone import GcnConfig, evaluate, normalize_adjacency, train_gcn, train_logistic
from .data import (
    LabeledDataset,
    SplitSpec,
    corrupt_edges,
    gen_sbm,
    gen_unit_ball_graph,
    load_dataset,
    make_splits,
)
from .render import render_distance_map

__version__ = "0.1.0"
