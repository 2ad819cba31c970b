"""Automated brain-MRI tumor detection and segmentation.

Slice classification and bounding-box regression run on a from-scratch
NumPy neural-network engine; predicted boxes seed a GrowCut cellular
automaton that delineates the lesion.  See the ``demos/`` scripts for
guided tours and the ``mricade`` CLI for the file-based pipeline.
"""

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .growcut import (
    CellGrid,
    GrowCutResult,
    SeedSpec,
    generate_seeds,
    growcut_run,
    growcut_step,
    rasterize_seeds,
)
from .imaging import (
    BoundingBox,
    SliceLabel,
    StandardizationStats,
    Study,
    compute_stats,
    load_ground_truth,
    load_volume,
    median_filter,
    rescale_box,
    resize_bilinear,
    save_volume,
    standardize,
)
from .metrics import (
    ConfusionCounts,
    accuracy,
    auc,
    box_mae,
    dsc,
    f_beta,
    paired_t_test,
    precision,
    recall,
)
from .net import (
    Network,
    NetworkSpec,
    backprop,
    build_ccnn,
    build_dcnn,
    infer_shapes,
    layer_count,
    param_count,
)
from .rng import RandomStreams, rng_from_seed
from .synth import synth_generate
from .train import TrainConfig, train

__version__ = "0.1.0"
