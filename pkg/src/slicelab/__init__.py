"""slicelab: deterministic augmentation policies, leak-free subject
splitting, slice-vote aggregation, and Grad-CAM++ heatmaps for slice-based
imaging pipelines."""

from .aggregator import (
    MetricsReport,
    SlicePrediction,
    SubjectDecision,
    auc_mann_whitney,
    cross_entropy,
    decide_subject,
    decide_subjects,
    fit_weights,
    metrics,
    softmax2,
)
from .earlystop import EarlyStopState, early_stop_update, run_early_stopping
from .gradcampp import (
    FeatureMapBundle,
    Heatmap,
    alpha,
    channel_weights,
    gradcam_baseline,
    heatmap,
    load_bundle,
    render_overlay,
    save_bundle,
)
from .policies import PolicyError, PolicySpec, augment, grid_enumerate, sample_policy, sample_policy_stages
from .refnet import RefNetParams, backward_feature_grad, forward, init_params, make_bundle
from .rng import Rng, mix64
from .splitter import (
    LeakageReport,
    SplitResult,
    SubjectRecord,
    check_leakage,
    chi2_p,
    split_subjects,
    welch_t_p,
)
from .tensors import (
    TensorFormatError,
    image_read_png,
    image_to_tensor,
    image_write_png,
    tensor_read,
    tensor_write,
    volume_read,
    volume_to_slices,
    volume_write,
)
from .transforms import (
    KINDS,
    TransformInstance,
    TransformKind,
    apply_transform,
    center_crop,
    magnitude_to_param,
    random_crop,
    realize,
    resize_bilinear,
)

__version__ = "0.1.0"
