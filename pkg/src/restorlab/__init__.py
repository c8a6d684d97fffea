"""Consistent restoration estimators on toy problems: samplers, closed-form
estimators, a small manual-backprop GAN, transport and k-NN metrics, and
adversarial robustness measurement."""

__version__ = "0.1.0"

from ._validation import InvalidArgument, ResourceLimit
from .adversarial import (
    IMAGE_ATTACK,
    TOY_ATTACK,
    AttackConfig,
    attack_objective,
    check_upper_bound,
    find_attack,
    ifgsm_attack,
    robustness_practical,
)
from .distributions import (
    ELLIPSE_PRESET,
    EllipseAnnulus,
    SampleSet,
    UnitDisk,
    UnitSquare,
    disk_marginal_inputs,
    posterior_sample_disk,
    sample,
    support_contains,
)
from .estimators import (
    DiskPosteriorSampler,
    EllipseEstimator,
    SineEstimator,
    ZigzagEstimator,
    ellipse_estimate,
    sine_estimate,
    zigzag_curve,
    zigzag_estimate,
    zigzag_transport,
)
from .gan import PAPER_PRESET, REDUCED_PRESET, ToyGAN, TrainConfig, TrainingDiverged, evaluate, train
from .metrics import (
    MetricsReport,
    consistency_error,
    per_input_std,
    precision_recall,
    psnr,
    w2_conditional_sensitivity,
    wasserstein2_exact,
)
