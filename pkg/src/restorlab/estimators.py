"""Closed-form consistent restoration estimators for the toy problems.

Every estimator maps an observed value ``y`` (and, for stochastic ones, a
seed value ``z``) to a 2-D point whose first coordinate is ``y`` itself,
so consistency holds by construction. They follow the scikit-learn
estimator protocol: hyperparameters are constructor arguments, ``fit``
returns ``self`` and ``predict`` produces restorations.
"""

import math

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import InvalidArgument, as_inputs, make_rng
from .distributions import ELLIPSE_PRESET, EllipseAnnulus, UnitDisk, UnitSquare

__all__ = [
    "RestorationEstimator",
    "SineEstimator",
    "ZigzagEstimator",
    "DiskPosteriorSampler",
    "EllipseEstimator",
    "sine_estimate",
    "zigzag_curve",
    "zigzag_estimate",
    "zigzag_transport",
    "ellipse_estimate",
    "estimate",
]

NOISE_STREAM = 3


class RestorationEstimator(BaseEstimator):
    """Base class: ``x_hat = (y, latent(y, z))``.

    Subclasses implement ``_latent(y, z)`` on validated float vectors and
    set ``domain`` (closed interval of valid inputs) and ``target`` (the
    source distribution the estimator restores).
    """

    stochastic = False
    domain = (-math.inf, math.inf)

    def fit(self, X=None, y=None):
        """No-op for closed-form estimators."""
        return self

    def check_inputs(self, y):
        y = as_inputs(y)
        lo, hi = self.domain
        bad = (y < lo) | (y > hi)
        if np.any(bad):
            raise InvalidArgument(
                f"{type(self).__name__} is defined on [{lo}, {hi}]; got {y[bad][0]!r}"
            )
        return y

    def sample_noise(self, rng, n):
        """Seed-channel values: ``U(0, 1)`` if stochastic, else zeros."""
        if not self.stochastic:
            return np.zeros(n)
        return rng.random(n)

    def draw_noise(self, n, seed):
        return self.sample_noise(make_rng(seed, NOISE_STREAM), n)

    def restore(self, y, z=None):
        """Evaluate ``G(y, z)`` row-wise; returns an ``(n, 2)`` array."""
        y = self.check_inputs(y)
        z = np.zeros_like(y) if z is None else np.broadcast_to(np.asarray(z, dtype=np.float64), y.shape)
        return np.column_stack([y, self._latent(y, z)])

    def predict(self, y, seed=0):
        """One restoration per input, seed values drawn from ``seed``."""
        y = self.check_inputs(y)
        return self.restore(y, self.draw_noise(y.shape[0], seed))

    def _latent(self, y, z):
        raise NotImplementedError


class SineEstimator(RestorationEstimator):
    """Deterministic ``(y, sqrt(1 - y^2) sin(alpha y))`` on the unit disk."""

    domain = (-1.0, 1.0)
    target = UnitDisk()

    def __init__(self, alpha=1.0):
        self.alpha = alpha

    def _latent(self, y, z):
        return np.sqrt(1.0 - y * y) * np.sin(self.alpha * y)


def zigzag_curve(f, y):
    """Triangle wave ``arccos(cos(2 pi f y)) / pi`` with values in [0, 1]."""
    y = np.asarray(y, dtype=np.float64)
    return np.arccos(np.cos(2.0 * math.pi * f * y)) / math.pi


class ZigzagEstimator(RestorationEstimator):
    """Deterministic ``(y, G_f(y))`` on the unit square; larger ``f`` is more erratic."""

    domain = (0.0, 1.0)
    target = UnitSquare()

    def __init__(self, frequency=1):
        self.frequency = frequency

    def _latent(self, y, z):
        return zigzag_curve(self.frequency, y)


def zigzag_transport(f, x1, x2):
    """Horizontal map of ``(x1, x2)`` onto the zigzag within x1's bin.

    Bins have width ``1/(2f)``; odd bins run downward so that
    ``zigzag_curve(f, zigzag_transport(f, x1, x2)) == x2``.
    """
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    k = np.minimum(np.floor(2 * f * x1), 2 * f - 1)
    frac = np.where(np.mod(k, 2) == 1, 1.0 - x2, x2)
    out = (k + frac) / (2 * f)
    return float(out) if out.ndim == 0 else out


class DiskPosteriorSampler(RestorationEstimator):
    """Exact posterior sampler for the unit disk.

    Given ``y`` the latent coordinate is ``(2z - 1) sqrt(1 - y^2)`` with
    ``z ~ U(0, 1)``, i.e. uniform on the chord above ``y``.
    """

    stochastic = True
    domain = (-1.0, 1.0)
    target = UnitDisk()

    def __init__(self):
        pass

    def _latent(self, y, z):
        return (2.0 * z - 1.0) * np.sqrt(1.0 - y * y)


class EllipseEstimator(RestorationEstimator):
    """Handcrafted continuous estimators for the ellipse annulus.

    Both oscillate quickly in ``y`` (frequency ``alpha``) so that their
    images fill a region rather than trace a thin curve. ``mode="avoid"``
    swings inside the upper band only and never enters the hole;
    ``mode="cross"`` swings across the whole vertical chord of the outer
    ellipse, passing through the hole and reaching both bands.
    """

    def __init__(self, mode="avoid", outer_a=1.0, outer_b=0.5, inner_a=0.6, inner_b=0.25,
                 alpha=60.0):
        self.mode = mode
        self.outer_a = outer_a
        self.outer_b = outer_b
        self.inner_a = inner_a
        self.inner_b = inner_b
        self.alpha = alpha

    @property
    def target(self):
        return EllipseAnnulus(self.outer_a, self.outer_b, self.inner_a, self.inner_b)

    @property
    def domain(self):
        return (-self.outer_a, self.outer_a)

    def _latent(self, y, z):
        ann = self.target
        wave = np.sin(self.alpha * y)
        outer = ann.outer_b * np.sqrt(np.clip(1.0 - (y / ann.outer_a) ** 2, 0.0, None))
        if self.mode == "cross":
            return 0.97 * outer * wave
        if self.mode != "avoid":
            raise InvalidArgument(f"mode must be 'avoid' or 'cross', got {self.mode!r}")
        mid = ann.band_midline(y, upper=True)
        # Band half-width is the distance from the midline to the outer edge.
        return mid + 0.9 * (outer - mid) * wave


def _point(est, y, seed=0):
    return est.predict(np.array([y]), seed=seed)[0]


def sine_estimate(alpha, y):
    return _point(SineEstimator(alpha), y)


def zigzag_estimate(f, y):
    return _point(ZigzagEstimator(f), y)


def ellipse_estimate(variant, y, annulus=ELLIPSE_PRESET):
    est = EllipseEstimator(
        variant, annulus.outer_a, annulus.outer_b, annulus.inner_a, annulus.inner_b
    )
    return _point(est, y)


def estimate(est, y, seed=0):
    """A single restoration of scalar ``y`` as a length-2 array."""
    return _point(est, y, seed)
