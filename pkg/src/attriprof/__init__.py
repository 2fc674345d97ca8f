"""attriprof: morphological attribute profiles for raster classification.

Five hierarchical image representations (max-tree, min-tree, tree of shapes,
alpha-tree, omega-tree), incremental node attributes, attribute filtering
under four decision rules, profile stacking with local post-processing, PCA
reduction, and a random-forest classification/evaluation pipeline with a CLI.

The hot kernels (union-find hierarchies, level-set labeling) have a compiled
core with a pure-numpy fallback selected at import; see
``attriprof._kernels.active_backend()``.
"""

__version__ = "0.1.0"

from ._kernels import active_backend
from .attributes import (
    ATTRIBUTE_KINDS,
    INCREASING_KINDS,
    NodeAttributes,
    attribute_value,
    attribute_values,
    compute_attributes,
)
from .errors import (
    AttriprofError,
    ExtentError,
    FormatError,
    RangeError,
    ValidationError,
)
from .filtering import (
    Criterion,
    FilterDecisions,
    RULES,
    attribute_thickening,
    attribute_thinning,
    filter_tree,
    reconstruct,
    reconstruct_array,
    self_dual_filter,
)
from .forest import (
    ForestModel,
    ForestParams,
    load_model,
    predict,
    save_model,
    train_forest,
)
from .hierarchy import (
    ComponentTree,
    PartitionTree,
    build_alpha_tree,
    build_max_tree,
    build_min_tree,
    build_omega_tree,
    build_tree_of_shapes,
    dump_tree,
    partition_cut,
    quantize_band,
    selfdual_interpolate,
)
from .metrics import Metrics, evaluate, format_metrics, metrics_from_confusion, metrics_to_csv
from .profiles import (
    ProfileSpec,
    VARIANTS,
    build_alpha_ap,
    build_omega_ap,
    build_profile,
    build_sdap,
    local_feature_post,
    local_histogram_post,
    profile_depth,
)
from .raster import (
    FeatureStack,
    LabelMap,
    LayerMeta,
    Raster,
    load_labels,
    load_raster,
    load_stack,
    require_same_extent,
    save_labels,
    save_raster,
    save_stack,
)
from .spectral import (
    PCAModel,
    components_for_fraction,
    fit_pca,
    inverse_project,
    load_pca,
    project,
    save_pca,
)
