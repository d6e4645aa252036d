"""Clusterability analysis of neural network weight graphs.

Turns saved feed-forward networks into undirected weighted graphs, partitions
them with normalized spectral clustering, and judges the result against
shuffle null distributions. Also ships the two training-time interventions
that promote clusterability (an eigenvalue regularizer and a clusterable
initialization) together with a small NumPy trainer to exercise them.
"""

__version__ = "0.1.0"

from .archive import (
    ArchiveBuilder,
    ArchiveFormatError,
    BatchNormSpec,
    LayerSpec,
    WeightArchive,
    read_archive,
    write_archive,
)
from .graph import (
    GraphBuildError,
    NodeId,
    WeightedGraph,
    cnn_to_graph,
    mlp_to_graph,
    strip_dead_nodes,
)
from .spectral import (
    EigensolverError,
    Partition,
    SpectralConfig,
    brute_force_min_ncut,
    ncut,
    ncut_stub_estimate,
    smallest_eigenpairs,
    spectral_cluster,
)
from .shuffles import (
    SHUFFLE_METHODS,
    ShuffleReport,
    run_shuffle_test,
)
from .init_transform import (
    InitTagging,
    apply_clusterable_init,
    assign_tags,
    tag_multipliers,
)
from .model import (
    AdamState,
    MlpModel,
    apply_pruning,
    he_init,
    model_from_archive,
    model_to_archive,
)
from .regularizer import (
    DegenerateEigenvalueError,
    RegularizerConfig,
    eigenvalue_gradient,
    eigenvalue_sum,
    normalize_hidden_units,
    regularizer_loss_and_grad,
)
from .trainer import (
    PruneSchedule,
    TrainConfig,
    TrainResult,
    TrainingDivergedError,
    sparsity_at,
    train,
)
from .datasets import (
    gen_blob_dataset,
    gen_polynomial_dataset,
    gen_random_dataset,
    polynomial_targets,
)
from .scenarios import (
    SCENARIOS,
    build_scenario,
    run_scenario,
)
from .report import (
    archive_digest,
    cluster_report,
    render_json,
    shuffle_test_report,
)
