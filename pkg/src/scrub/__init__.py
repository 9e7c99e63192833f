"""Linear concept-subspace analysis of embeddings across domains."""
from .dataio import (
    EmbeddingDataset,
    PlantedGroundTruth,
    SynthConfig,
    describe,
    filter_rare_professions,
    load_dataset,
    majority_accuracy,
    read_csv,
    save_dataset,
    split_dataset,
    synth_generate,
    write_csv,
)
from .errors import (
    ConfigError,
    DegenerateLabelError,
    DimensionMismatchError,
    FormatError,
    IntegrityError,
    ScrubError,
)
from .inlp import INLP, ConceptSubspace, informative_prefix, run_inlp, truncate
from .linclf import LinearClassifier, LinearProbe, TrainConfig, accuracy, train_binary, train_multiclass
from .subspace import (
    Projection,
    nullspace_projection,
    orthonormalize,
    pca,
    principal_angles,
    projection_pair,
    random_projection_pair,
    rowspace_projection,
)
from .xlingual import (
    direction_similarity,
    overlap_curves,
    per_iteration_accuracy,
    probe_transfer_matrix,
    removal_transfer,
)

__version__ = "0.1.0"
