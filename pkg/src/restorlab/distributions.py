"""Toy source distributions, the exact disk posterior and sample sets."""

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from ._validation import InvalidArgument, as_points, check_count, make_rng

__all__ = [
    "SampleSet",
    "UnitDisk",
    "UnitSquare",
    "EllipseAnnulus",
    "ELLIPSE_PRESET",
    "sample",
    "support_contains",
    "posterior_sample_disk",
    "disk_marginal_pdf",
    "disk_marginal_inputs",
]


@dataclass(frozen=True)
class SampleSet:
    """An immutable, ordered collection of 2-D points.

    ``points[:, 0]`` is the observed coordinate and ``points[:, 1]`` the
    latent one.
    """

    points: np.ndarray
    label: str = ""

    def __post_init__(self):
        pts = as_points(self.points).copy()
        if pts.shape[0] == 0:
            raise InvalidArgument("a SampleSet must be nonempty")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    def __eq__(self, other):
        if not isinstance(other, SampleSet):
            return NotImplemented
        return self.label == other.label and np.array_equal(self.points, other.points)

    __hash__ = None

    def to_csv(self, path=None):
        """Write ``x1,x2`` rows with 17 significant digits.

        Returns the text when ``path`` is None.
        """
        buf = io.StringIO()
        buf.write("x1,x2\n")
        for x1, x2 in self.points:
            buf.write(f"{x1:.17g},{x2:.17g}\n")
        text = buf.getvalue()
        if path is None:
            return text
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        return None

    @classmethod
    def from_csv(cls, path, label=""):
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if [h.strip() for h in header] != ["x1", "x2"]:
                raise InvalidArgument(f"expected header 'x1,x2', got {header!r}")
            rows = [[float(a), float(b)] for a, b in reader]
        return cls(np.array(rows, dtype=np.float64), label=label)


@dataclass(frozen=True)
class UnitDisk:
    """Uniform distribution on the closed unit disk."""

    def contains(self, points):
        p = as_points(points)
        return p[:, 0] ** 2 + p[:, 1] ** 2 <= 1.0

    def _draw(self, n, rng):
        u = rng.random(n)
        theta = 2.0 * math.pi * rng.random(n)
        r = np.sqrt(u)
        return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


@dataclass(frozen=True)
class UnitSquare:
    """Uniform distribution on ``[0, 1]^2``."""

    def contains(self, points):
        p = as_points(points)
        return np.all((p >= 0.0) & (p <= 1.0), axis=1)

    def _draw(self, n, rng):
        return rng.random((n, 2))


@dataclass(frozen=True)
class EllipseAnnulus:
    """Uniform distribution between two concentric, axis-aligned ellipses.

    ``outer_a``/``inner_a`` are the semi-axes along the observed
    coordinate, ``outer_b``/``inner_b`` along the latent one.
    """

    outer_a: float = 1.0
    outer_b: float = 0.5
    inner_a: float = 0.6
    inner_b: float = 0.25

    def __post_init__(self):
        vals = (self.outer_a, self.outer_b, self.inner_a, self.inner_b)
        if not all(math.isfinite(v) and v > 0 for v in vals):
            raise InvalidArgument("ellipse semi-axes must be positive and finite")
        if not (self.inner_a < self.outer_a and self.inner_b < self.outer_b):
            raise InvalidArgument("inner ellipse must lie strictly inside the outer one")

    def _level(self, p, a, b):
        return (p[:, 0] / a) ** 2 + (p[:, 1] / b) ** 2

    def contains(self, points):
        p = as_points(points)
        outer = self._level(p, self.outer_a, self.outer_b)
        inner = self._level(p, self.inner_a, self.inner_b)
        return (outer <= 1.0) & (inner >= 1.0)

    def band_midline(self, x1, upper=True):
        """Latent coordinate halfway between the two boundaries at ``x1``.

        Where ``|x1| >= inner_a`` the band spans the whole outer chord and
        the midline is the half-chord midpoint.
        """
        x1 = np.asarray(x1, dtype=np.float64)
        outer = self.outer_b * np.sqrt(np.clip(1.0 - (x1 / self.outer_a) ** 2, 0.0, None))
        inner = self.inner_b * np.sqrt(np.clip(1.0 - (x1 / self.inner_a) ** 2, 0.0, None))
        mid = 0.5 * (outer + inner)
        return mid if upper else -mid

    def _draw(self, n, rng):
        # Rejection from the outer bounding box. Candidates are consumed in
        # draw order, so the output is a fixed function of the seed.
        out = np.empty((0, 2))
        box = np.array([self.outer_a, self.outer_b])
        while out.shape[0] < n:
            m = max(64, 2 * (n - out.shape[0]))
            cand = (2.0 * rng.random((m, 2)) - 1.0) * box
            out = np.concatenate([out, cand[self.contains(cand)]])
        return out[:n]


ELLIPSE_PRESET = EllipseAnnulus(1.0, 0.5, 0.6, 0.25)


def sample(dist, n, seed, label=""):
    """Draw ``n`` i.i.d. uniform points from ``dist``."""
    n = check_count(n)
    rng = make_rng(seed, 0)
    return SampleSet(dist._draw(n, rng), label=label or type(dist).__name__)


def support_contains(dist, point):
    """Whether ``point`` (or each row of ``point``) lies in the closed support."""
    res = dist.contains(point)
    if np.ndim(point) == 1:
        return bool(res[0])
    return res


def posterior_sample_disk(y, n, seed, label="posterior"):
    """Sample the exact posterior of the unit disk given the first coordinate.

    The latent coordinate is uniform on ``[-sqrt(1-y^2), sqrt(1-y^2)]``.
    """
    y = float(y)
    if not abs(y) <= 1.0:
        raise InvalidArgument(f"|y| must be <= 1, got {y}")
    n = check_count(n)
    u = make_rng(seed, 1).random(n)
    half = math.sqrt(max(0.0, 1.0 - y * y))
    pts = np.column_stack([np.full(n, y), (2.0 * u - 1.0) * half])
    return SampleSet(pts, label=label)


def disk_marginal_pdf(x1):
    """Density of the observed coordinate of the uniform unit disk."""
    x1 = np.asarray(x1, dtype=np.float64)
    return np.where(np.abs(x1) <= 1.0, (2.0 / math.pi) * np.sqrt(np.clip(1.0 - x1**2, 0.0, None)), 0.0)


def disk_marginal_inputs(n, seed, law="marginal"):
    """Draw observed inputs for the disk problem.

    ``law="marginal"`` uses the disk's first-coordinate marginal,
    ``law="uniform"`` draws from ``U(-1, 1)``.
    """
    n = check_count(n)
    if law == "marginal":
        return UnitDisk()._draw(n, make_rng(seed, 2))[:, 0]
    if law == "uniform":
        return 2.0 * make_rng(seed, 2).random(n) - 1.0
    raise InvalidArgument(f"unknown input law {law!r}")
