import math

import numpy as np
import pytest
from scipy.integrate import trapezoid
from hypothesis import given, settings
from hypothesis import strategies as st

from restorlab import InvalidArgument
from restorlab.distributions import (
    ELLIPSE_PRESET,
    EllipseAnnulus,
    SampleSet,
    UnitDisk,
    UnitSquare,
    disk_marginal_inputs,
    disk_marginal_pdf,
    posterior_sample_disk,
    sample,
    support_contains,
)
from restorlab.metrics import wasserstein2_exact

DISTS = [UnitDisk(), UnitSquare(), ELLIPSE_PRESET]


def test_disk_points_inside():
    s = sample(UnitDisk(), 1000, 5)
    assert len(s) == 1000
    assert np.all(s.points[:, 0] ** 2 + s.points[:, 1] ** 2 <= 1.0)


def test_disk_first_moments():
    # E[x1] = 0, Var[x1] = E[x1^2] = 1/4 for the uniform unit disk.
    x1 = sample(UnitDisk(), 10000, 1).points[:, 0]
    assert abs(x1.mean()) <= 3 * 0.5 / math.sqrt(10000)
    assert abs(x1.var() - 0.25) <= 0.02


def test_square_means():
    p = sample(UnitSquare(), 10000, 2).points
    assert np.all(np.abs(p.mean(axis=0) - 0.5) <= 0.02)


def test_zero_count_rejected():
    with pytest.raises(InvalidArgument):
        sample(UnitDisk(), 0, 1)


@pytest.mark.parametrize("dist", DISTS, ids=lambda d: type(d).__name__)
def test_same_seed_same_points(dist):
    assert sample(dist, 257, 99) == sample(dist, 257, 99)
    assert sample(dist, 257, 99) != sample(dist, 257, 100)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**64 - 1), n=st.integers(1, 300))
def test_every_sample_in_support(seed, n):
    for dist in DISTS:
        assert np.all(support_contains(dist, sample(dist, n, seed).points))


def test_support_examples():
    assert support_contains(UnitDisk(), np.array([0.0, 0.0]))
    assert not support_contains(UnitDisk(), np.array([1.1, 0.0]))
    assert not support_contains(EllipseAnnulus(1, 0.5, 0.6, 0.3), np.array([0.0, 0.0]))
    assert support_contains(EllipseAnnulus(1, 0.5, 0.6, 0.3), np.array([0.0, 0.4]))


@pytest.mark.parametrize("axes", [(1, 0.5, 1.2, 0.25), (1, 0.5, 0.6, 0.5), (1, -0.5, 0.6, 0.2), (1, 0.5, 0.6, math.nan)])
def test_bad_annulus(axes):
    with pytest.raises(InvalidArgument):
        EllipseAnnulus(*axes)


def test_annulus_area_fraction():
    # Uniform on the annulus: the fraction inside the half-size ellipse is
    # (area between inner and half-outer) / (annulus area).
    a = EllipseAnnulus(1.0, 0.5, 0.3, 0.1)
    p = sample(a, 20000, 3).points
    half = (p[:, 0] / 0.5) ** 2 + (p[:, 1] / 0.25) ** 2 <= 1.0
    expect = (0.5 * 0.25 - 0.3 * 0.1) / (1.0 * 0.5 - 0.3 * 0.1)
    assert abs(half.mean() - expect) < 0.015


def test_posterior_endpoints_and_chord():
    s = posterior_sample_disk(1.0, 17, 0)
    assert np.array_equal(s.points, np.tile([1.0, 0.0], (17, 1)))
    s = posterior_sample_disk(0.0, 10000, 1)
    assert abs(s.points[:, 1].mean()) < 0.02
    assert np.all(np.abs(s.points[:, 1]) <= 1.0)
    s = posterior_sample_disk(0.6, 1000, 2)
    assert np.all(s.points[:, 0] == 0.6)
    assert np.all(np.abs(s.points[:, 1]) <= 0.8)


def test_posterior_rejects_outside():
    with pytest.raises(InvalidArgument):
        posterior_sample_disk(1.0001, 5, 0)


def test_posterior_mixture_recovers_disk():
    n = 2000
    y = disk_marginal_inputs(n, 4)
    z = np.random.default_rng(8).random(n)
    joint = np.column_stack([y, (2 * z - 1) * np.sqrt(1 - y**2)])
    fresh = sample(UnitDisk(), n, 5)
    other = sample(UnitDisk(), n, 6)
    assert wasserstein2_exact(joint, fresh) / wasserstein2_exact(other, fresh) < 1.5


def test_marginal_pdf_integrates_to_one():
    x = np.linspace(-1, 1, 200001)
    assert abs(trapezoid(disk_marginal_pdf(x), x) - 1.0) < 1e-6
    assert disk_marginal_pdf(1.5) == 0.0


def test_marginal_inputs_laws():
    u = disk_marginal_inputs(20000, 0, law="uniform")
    m = disk_marginal_inputs(20000, 0, law="marginal")
    assert abs(np.mean(u**2) - 1 / 3) < 0.01
    assert abs(np.mean(m**2) - 1 / 4) < 0.01
    with pytest.raises(InvalidArgument):
        disk_marginal_inputs(5, 0, law="gaussian")


def test_sampleset_is_immutable_and_nonempty():
    s = SampleSet(np.zeros((3, 2)), "z")
    with pytest.raises(ValueError):
        s.points[0, 0] = 1.0
    with pytest.raises(InvalidArgument):
        SampleSet(np.zeros((0, 2)))
    with pytest.raises(InvalidArgument):
        SampleSet(np.array([[np.inf, 0.0]]))


def test_csv_roundtrip(tmp_path):
    s = sample(UnitDisk(), 50, 11, label="d")
    path = tmp_path / "s.csv"
    s.to_csv(path)
    text = path.read_text()
    assert text.startswith("x1,x2\n")
    back = SampleSet.from_csv(path, label="d")
    assert back == s
