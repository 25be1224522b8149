"""Manifold alignment for semi-supervised domain adaptation.

Embeds two datasets into one low-dimensional space by filtering each domain's
graph spectrum independently and joining the filtered spectra through a
low-rank update driven by cross-domain correspondences.
"""

__version__ = "0.1.0"

from .align import (
    AlignmentConfig,
    AlignmentModel,
    align,
    embed_new_instance,
    fma_feature,
    fma_instance,
    load_model,
    save_model,
)
from .dataset import (
    DataMatrix,
    SplitSpec,
    load_csv,
    make_s_curve,
    make_split,
    make_swiss_roll,
    standardize,
)
from .graph import (
    IncidenceMatrix,
    SimilarityGraph,
    build_incidence,
    build_knn_graph,
    correspondences_from_labels,
    normalized_operator,
)
from .spectral import (
    Embedding,
    SpectralBasis,
    eig_smallest,
    loss_inter,
    loss_intra,
    loss_joint,
    sma_solve,
)
from .update import SvdTriple, block_svd_update, projection_defect, svd_update

__all__ = [
    "AlignmentConfig",
    "AlignmentModel",
    "DataMatrix",
    "Embedding",
    "IncidenceMatrix",
    "SimilarityGraph",
    "SpectralBasis",
    "SplitSpec",
    "SvdTriple",
    "align",
    "block_svd_update",
    "build_incidence",
    "build_knn_graph",
    "correspondences_from_labels",
    "eig_smallest",
    "embed_new_instance",
    "fma_feature",
    "fma_instance",
    "load_csv",
    "load_model",
    "loss_inter",
    "loss_intra",
    "loss_joint",
    "make_s_curve",
    "make_split",
    "make_swiss_roll",
    "normalized_operator",
    "projection_defect",
    "save_model",
    "sma_solve",
    "standardize",
    "svd_update",
]
