import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from restorlab import InvalidArgument, ResourceLimit
from restorlab.distributions import UnitDisk, disk_marginal_inputs, sample
from restorlab.estimators import DiskPosteriorSampler, SineEstimator, ZigzagEstimator
from restorlab.metrics import (
    MetricsReport,
    consistency_error,
    knn_radii,
    per_input_std,
    precision_recall,
    psnr,
    w2_conditional_sensitivity,
    w2_sensitivity_debiased,
    wasserstein2_exact,
)


def brute_w2(a, b):
    best = math.inf
    for perm in itertools.permutations(range(len(a))):
        best = min(best, float(np.mean(np.sum((a - b[list(perm)]) ** 2, axis=1))))
    return math.sqrt(best)


def test_w2_trivial():
    a = np.random.default_rng(0).normal(size=(9, 2))
    assert wasserstein2_exact(a, a) == 0.0
    assert wasserstein2_exact(np.array([[0.0, 0.0]]), np.array([[3.0, 4.0]])) == 5.0


def test_w2_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(10):
        n = int(rng.integers(1, 8))
        a, b = rng.normal(size=(n, 2)), rng.normal(size=(n, 2))
        assert abs(wasserstein2_exact(a, b) - brute_w2(a, b)) < 1e-9


def test_w2_size_errors():
    with pytest.raises(InvalidArgument):
        wasserstein2_exact(np.zeros((3, 2)), np.zeros((4, 2)))
    with pytest.raises(ResourceLimit):
        wasserstein2_exact(np.zeros((20, 2)), np.zeros((20, 2)), cap=10)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(1, 30))
def test_w2_metric_axioms(seed, n):
    rng = np.random.default_rng(seed)
    a, b, c = (rng.normal(size=(n, 2)) for _ in range(3))
    ab, ba = wasserstein2_exact(a, b), wasserstein2_exact(b, a)
    assert abs(ab - ba) <= 1e-12
    assert ab <= wasserstein2_exact(a, c) + wasserstein2_exact(c, b) + 1e-12
    assert wasserstein2_exact(a, a[rng.permutation(n)]) == 0.0
    if not np.array_equal(a, b):
        assert ab > 0


def test_knn_radius_excludes_self():
    p = np.array([[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]])
    assert knn_radii(p, 1).tolist() == [1.0, 1.0, 2.0]
    assert knn_radii(p, 2).tolist() == [3.0, 2.0, 3.0]
    with pytest.raises(InvalidArgument):
        knn_radii(p, 3)


def test_pr_identical_and_disjoint():
    a = np.random.default_rng(3).random((200, 2))
    assert precision_recall(a, a, 5) == (1.0, 1.0)
    far = a + 1e3 * 1.5
    assert precision_recall(a, far, 5) == (0.0, 0.0)


def test_pr_bruteforce_oracle():
    rng = np.random.default_rng(4)
    real, fake = rng.normal(size=(40, 2)), rng.normal(0.5, 1.0, size=(35, 2))
    k = 3

    def covered(q, anchors):
        hits = 0
        for x in q:
            ok = False
            for j, a in enumerate(anchors):
                others = sorted(np.linalg.norm(anchors[i] - a) for i in range(len(anchors)) if i != j)
                if np.linalg.norm(x - a) <= others[k - 1]:
                    ok = True
                    break
            hits += ok
        return hits / len(q)

    p, r = precision_recall(real, fake, k)
    assert p == covered(fake, real)
    assert r == covered(real, fake)


def test_pr_posterior_high():
    real = sample(UnitDisk(), 1000, 1).points
    y = disk_marginal_inputs(1000, 2)
    fake = DiskPosteriorSampler().predict(y, seed=3)
    p, r = precision_recall(real, fake, 5)
    assert p >= 0.95 and r >= 0.95


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32))
def test_pr_copying_a_real_point_keeps_coverage(seed):
    rng = np.random.default_rng(seed)
    real, fake = rng.normal(size=(30, 2)), rng.normal(size=(30, 2))
    radii = knn_radii(real, 5)
    extra = np.vstack([fake, real[:1]])
    from restorlab.metrics import _coverage

    assert _coverage(extra, real, radii).sum() >= _coverage(fake, real, radii).sum()
    assert _coverage(real[:1], real, radii).all()


def test_pr_errors():
    a = np.zeros((5, 2))
    with pytest.raises(InvalidArgument):
        precision_recall(a, a, 5)
    with pytest.raises(InvalidArgument):
        precision_recall(a, a, 0)


def test_per_input_std():
    assert per_input_std(SineEstimator(50), 0.2, 10) == 0.0
    s = per_input_std(DiskPosteriorSampler(), 0.0, 10000, seed=1)
    assert abs(s - 1 / math.sqrt(3)) < 0.03
    assert per_input_std(DiskPosteriorSampler(), 1.0, 50) == 0.0
    with pytest.raises(InvalidArgument):
        per_input_std(DiskPosteriorSampler(), 0.0, 1)


def test_consistency_error_zero():
    y = disk_marginal_inputs(1000, 0)
    assert consistency_error(SineEstimator(50), y) == 0.0
    assert consistency_error(DiskPosteriorSampler(), y, seed=4) == 0.0
    with pytest.raises(InvalidArgument):
        consistency_error(SineEstimator(1), [])


def test_psnr():
    assert psnr([1.0, 0.0], [0.0, 1.0], peak=1.0) == pytest.approx(0.0)
    assert psnr(np.zeros(10), np.full(10, 0.1)) == pytest.approx(20.0)
    assert psnr([1, 2, 3], [1, 2, 3]) == math.inf
    with pytest.raises(InvalidArgument):
        psnr([1, 2], [1, 2, 3])


def test_sensitivity_deterministic_reduction():
    est = SineEstimator(50)
    for y, d in [(0.1, 1e-3), (-0.7, 0.05), (0.3, 0.0)]:
        g0, g1 = est.restore([y])[0], est.restore([y + d])[0]
        expect = float(np.sum((g1 - g0) ** 2))
        assert abs(w2_conditional_sensitivity(est, y, d, m=64, seed=2) - expect) <= 1e-12
    z = ZigzagEstimator(2)
    assert w2_conditional_sensitivity(z, 0.4, 0.0, m=16) == 0.0


def test_sensitivity_domain_error():
    with pytest.raises(InvalidArgument):
        w2_conditional_sensitivity(SineEstimator(1), 0.99, 0.1)


def test_sensitivity_posterior_closed_form():
    # Each pair costs delta^2 horizontally; vertically the optimal 1-D
    # coupling of U(-1,1) and U(-c,c) costs (1-c)^2/3 with c = sqrt(0.99).
    est = DiskPosteriorSampler()
    expect = 0.1**2 + (1 - math.sqrt(0.99)) ** 2 / 3
    raw = w2_conditional_sensitivity(est, 0.0, 0.1, m=256, seed=5)
    assert 0.01 <= raw <= expect + 0.02
    val, se = w2_sensitivity_debiased(est, 0.0, 0.1, m=256, replicates=32, seed=6)
    assert abs(val - expect) <= 4 * se + 1e-3


def test_report_validation_and_json():
    r = MetricsReport(precision=0.9, recall=0.8, robustness_practical=4e-6, per_input_std=0.0,
                      consistency_error=0.0)
    d = json.loads(r.to_json())
    assert "w2" not in d and "ai_psnr" not in d
    assert d["robustness_sqrt"] == pytest.approx(2e-3)
    assert MetricsReport.from_dict(d) == r
    with pytest.raises(InvalidArgument):
        MetricsReport(precision=1.2, recall=0.5, robustness_practical=0, per_input_std=0, consistency_error=0)
    with pytest.raises(InvalidArgument):
        MetricsReport(precision=0.2, recall=0.5, robustness_practical=math.nan, per_input_std=0,
                      consistency_error=0)
