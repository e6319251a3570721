"""maploc: evaluation engine for joint multi-view reconstruction and
open-vocabulary point labeling.

Given predicted pointmaps and per-pixel semantic features (or labels) from
any multi-view reconstruction model plus ground-truth depth/pose/label
bundles, maploc aligns predictions to world coordinates and computes the
full metric suite: nearest-neighbor label transfer (mIoU, Acc), per-class
geometric completeness (mComp, mdComp), monocular depth errors (AbsRel,
delta < 1.25), relative pose accuracies (RRA/RTA/mAA@30), and zero-shot
segmentation scoring. It also ships the distillation loss combiner and the
overlap-constrained benchmark curation procedure.
"""

__version__ = "0.1.0"

from .alignment import (  # noqa: E402,F401
    AlignmentResult,
    GlobalAlignment,
    GlobalAlignOptions,
    ViewEdge,
    ViewGraph,
    align_to_world,
    global_align,
    pose_from_pointmaps,
    reference_scale,
    umeyama,
)
from .curation import (  # noqa: F401
    GroupSpec,
    LabelMapping,
    SceneFrame,
    build_groups,
    camera_stats,
    covisibility,
    map_labels,
)
from .geometry import (  # noqa: F401
    Intrinsics,
    LabeledCloud,
    Pointmap,
    RigidTransform,
    SimilarityTransform,
    apply_transform,
    flatten,
    project,
    relative_pose,
    rotation_geodesic,
    translation_angle,
    unproject,
)
from .losses import LossWeights, l2d, total_loss  # noqa: F401
from .metrics import (  # noqa: F401
    ClassEmbeddings,
    DepthScores,
    MapLocateScores,
    PoseScores,
    classify_pixels,
    depth_scores,
    pose_scores,
    resize_labels_nearest,
    segmentation_miou,
    semantic_scores,
)
from .nnindex import PointIndex  # noqa: F401
from .runner import EvalConfig, run_curate, run_eval  # noqa: F401
from .tensorio import Bundle, load_bundle, read_tensor, write_tensor  # noqa: F401
