"""Training experiments that compare learned posteriors with the focal minimizer."""

from focal_entropy.experiments.data import (
    BinnedDataset,
    PosteriorComparison,
    compare_posteriors,
    posterior_from_csv,
    posterior_to_csv,
)
from focal_entropy.experiments.mnist import (
    IdxFormatError,
    ingest_mnist,
    nearest_rank_cuts,
    quantize,
    read_idx,
    write_idx,
    zoning_features,
)
from focal_entropy.experiments.network import (
    TrainConfig,
    TrainRun,
    focal_loss_and_grad,
    train_classifier,
)
from focal_entropy.experiments.synthetic import (
    SyntheticSpec,
    sample_synthetic,
    synthetic_posterior,
    theory_table,
    theory_target,
)

__all__ = [
    "BinnedDataset",
    "IdxFormatError",
    "PosteriorComparison",
    "SyntheticSpec",
    "TrainConfig",
    "TrainRun",
    "compare_posteriors",
    "focal_loss_and_grad",
    "ingest_mnist",
    "nearest_rank_cuts",
    "posterior_from_csv",
    "posterior_to_csv",
    "quantize",
    "read_idx",
    "sample_synthetic",
    "synthetic_posterior",
    "theory_table",
    "theory_target",
    "train_classifier",
    "write_idx",
    "zoning_features",
]
