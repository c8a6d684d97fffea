"""Seeding and input-validation helpers shared across the package."""

import numpy as np

_U64 = (1 << 64) - 1


class InvalidArgument(ValueError):
    """Raised when an argument violates an operation's precondition."""


class ResourceLimit(RuntimeError):
    """Raised when a request exceeds a configured size cap."""


def make_rng(seed, *stream):
    """Return a counter-based generator keyed by ``seed`` and a stream path.

    Philox is keyed from the full ``(seed, *stream)`` tuple, so two
    calls with the same key always yield the same stream no matter what
    else was drawn in between.
    """
    seed = int(seed)
    if seed < 0 or seed > _U64:
        raise InvalidArgument(f"seed must be an unsigned 64-bit integer, got {seed}")
    words = [seed & 0xFFFFFFFF, seed >> 32, *(int(s) for s in stream)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))


def check_count(n, name="n", minimum=1):
    if isinstance(n, bool) or int(n) != n or n < minimum:
        raise InvalidArgument(f"{name} must be an integer >= {minimum}, got {n!r}")
    return int(n)


def as_inputs(y):
    """Coerce scalar or 1-D input values to a float64 vector."""
    arr = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if arr.ndim != 1:
        raise InvalidArgument(f"inputs must be scalar or 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgument("inputs must be finite")
    return arr


def as_points(points):
    """Coerce an array-like of 2-D points to a float64 ``(n, 2)`` array."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1 and arr.shape[0] == 2:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidArgument(f"points must have shape (n, 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgument("points must be finite")
    return arr
