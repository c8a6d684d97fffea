"""Distribution-quality and robustness measurements on 2-D sample sets."""

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from ._validation import InvalidArgument, ResourceLimit, as_inputs, as_points, check_count, make_rng
from .distributions import SampleSet

__all__ = [
    "MetricsReport",
    "W2_SIZE_CAP",
    "wasserstein2_exact",
    "precision_recall",
    "knn_radii",
    "per_input_std",
    "consistency_error",
    "psnr",
    "w2_conditional_sensitivity",
    "w2_sensitivity_debiased",
]

W2_SIZE_CAP = 4096


def _pts(s):
    return s.points if isinstance(s, SampleSet) else as_points(s)


def wasserstein2_exact(a, b, cap=W2_SIZE_CAP):
    """Exact W2 between two equal-size empirical measures.

    Solves the optimal assignment on squared Euclidean costs.
    """
    pa, pb = _pts(a), _pts(b)
    if pa.shape[0] != pb.shape[0]:
        raise InvalidArgument(f"sample sets differ in size: {pa.shape[0]} vs {pb.shape[0]}")
    if pa.shape[0] > cap:
        raise ResourceLimit(f"assignment size {pa.shape[0]} exceeds cap {cap}")
    cost = cdist(pa, pb, metric="sqeuclidean")
    rows, cols = linear_sum_assignment(cost)
    return math.sqrt(max(0.0, float(cost[rows, cols].mean())))


def knn_radii(points, k):
    """Distance from each point to its k-th nearest other member of the set."""
    p = _pts(points)
    if k >= p.shape[0]:
        raise InvalidArgument(f"k={k} must be smaller than the set size {p.shape[0]}")
    d = cdist(p, p)
    # Column 0 of each sorted row is the point itself (distance 0).
    return np.sort(d, axis=1, kind="stable")[:, k]


def _coverage(queries, anchors, radii, chunk=2048):
    covered = np.zeros(queries.shape[0], dtype=bool)
    for start in range(0, queries.shape[0], chunk):
        d = cdist(queries[start : start + chunk], anchors)
        covered[start : start + chunk] = np.any(d <= radii[None, :], axis=1)
    return covered


def precision_recall(real_set, fake_set, k=5):
    """k-NN manifold precision and recall in raw coordinates.

    Precision is the fraction of fake points inside some real point's
    k-NN ball; recall swaps the roles.
    """
    k = check_count(k, "k")
    real, fake = _pts(real_set), _pts(fake_set)
    real_r = knn_radii(real, k)
    fake_r = knn_radii(fake, k)
    precision = float(np.mean(_coverage(fake, real, real_r)))
    recall = float(np.mean(_coverage(real, fake, fake_r)))
    return precision, recall


def per_input_std(est, y, n_seeds, seed=0):
    """Spread of the latent output coordinate over independent seeds at one input."""
    n_seeds = check_count(n_seeds, "n_seeds", minimum=2)
    ys = np.full(n_seeds, float(y))
    out = est.restore(ys, est.sample_noise(make_rng(seed, 30), n_seeds))
    return float(np.std(out[:, 1]))


def consistency_error(est, inputs, seed=0):
    """Largest ``|x_hat_1 - y|`` over ``inputs``."""
    y = as_inputs(inputs)
    if y.size == 0:
        raise InvalidArgument("inputs must be nonempty")
    out = est.predict(y, seed=seed)
    return float(np.max(np.abs(out[:, 0] - y)))


def psnr(a, b, peak=1.0):
    """``10 log10(peak^2 / MSE)`` in dB; ``inf`` when the vectors are equal."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise InvalidArgument(f"length mismatch: {a.size} vs {b.size}")
    if not peak > 0:
        raise InvalidArgument("peak must be positive")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def w2_conditional_sensitivity(est, y, delta, m=256, seed=0):
    """Squared exact W2 between ``m`` outputs at ``y`` and at ``y + delta``.

    The two sides use independent seed draws.
    """
    m = check_count(m, "m")
    y = float(y)
    ya = est.check_inputs(np.full(m, y))
    yb = est.check_inputs(np.full(m, y + float(delta)))
    a = est.restore(ya, est.sample_noise(make_rng(seed, 31, 0), m))
    b = est.restore(yb, est.sample_noise(make_rng(seed, 31, 1), m))
    return wasserstein2_exact(a, b) ** 2


@dataclass
class MetricsReport:
    """Quality and robustness summary for one estimator.

    ``robustness_practical`` is the mean attacked objective (squared
    output units); ``robustness_sqrt`` is its square root, the scale used
    when tabulating toy GAN robustness.
    """

    precision: float
    recall: float
    robustness_practical: float
    per_input_std: float
    consistency_error: float
    w2: float | None = None
    ai_psnr: float | None = None
    robustness_sqrt: float | None = None

    def __post_init__(self):
        for name, val in asdict(self).items():
            if val is not None and not math.isfinite(val):
                raise InvalidArgument(f"{name} must be finite, got {val}")
        for name in ("precision", "recall"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidArgument(f"{name} must lie in [0, 1]")
        if self.robustness_sqrt is None:
            self.robustness_sqrt = math.sqrt(self.robustness_practical)

    def to_dict(self):
        return {k: v for k, v in asdict(self).items() if v is not None}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


def w2_sensitivity_debiased(est, y, delta, m=256, replicates=16, seed=0):
    """Bias-corrected estimate of the conditional W2^2 sensitivity.

    Each replicate subtracts the W2^2 between two independent ``m``-sample
    sets at ``y`` (pure sampling noise) from the W2^2 between independent
    sets at ``y`` and ``y + delta``. Returns ``(mean, standard_error)``
    over replicates.
    """
    replicates = check_count(replicates, "replicates", minimum=2)
    vals = np.empty(replicates)
    for r in range(replicates):
        shifted = w2_conditional_sensitivity(est, y, delta, m, seed=_child(seed, r, 0))
        null = w2_conditional_sensitivity(est, y, 0.0, m, seed=_child(seed, r, 1))
        vals[r] = shifted - null
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(replicates))


def _child(seed, *keys):
    return int(make_rng(seed, 32, *keys).integers(0, 2**63))
