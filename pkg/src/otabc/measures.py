"""Finitely supported probability measures on a metric sample space.

Observed and simulated datasets are turned into empirical measures here; every
transport computation downstream works on :class:`EmpiricalMeasure` objects.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_samples
from .exceptions import InvalidInput, Unsupported

METRIC_KINDS = ("euclidean", "absolute")

_WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class SampleSpaceConfig:
    """Observation space: dimension, ground metric and optional box bounds.

    ``metric_kind="absolute"`` is the sum of coordinatewise absolute differences,
    which coincides with the Euclidean metric when ``dim_y == 1``.
    """

    dim_y: int = 1
    metric_kind: str = "euclidean"
    bounds: tuple | None = None

    def __post_init__(self):
        if isinstance(self.dim_y, bool) or int(self.dim_y) != self.dim_y or self.dim_y < 1:
            raise InvalidInput(f"dim_y must be a positive integer, got {self.dim_y!r}")
        if self.metric_kind not in METRIC_KINDS:
            raise InvalidInput(f"metric_kind must be one of {METRIC_KINDS}, got {self.metric_kind!r}")
        if self.bounds is not None:
            bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
            if len(bounds) != self.dim_y:
                raise InvalidInput("bounds must give one interval per coordinate")
            if any(lo > hi for lo, hi in bounds):
                raise InvalidInput(f"empty interval in bounds {bounds}")
            object.__setattr__(self, "bounds", bounds)

    def check(self, samples):
        """Validate raw samples against the space and return them as (n, d)."""
        arr = check_samples(samples, dim=self.dim_y)
        if self.bounds is not None:
            lo = np.array([b[0] for b in self.bounds])
            hi = np.array([b[1] for b in self.bounds])
            outside = np.any((arr < lo) | (arr > hi), axis=1)
            if outside.any():
                first = int(np.flatnonzero(outside)[0])
                raise InvalidInput(f"sample {first} = {arr[first].tolist()} lies outside bounds {self.bounds}")
        return arr

    def pairwise(self, a, b):
        """Ground-metric distance matrix between rows of ``a`` and ``b``."""
        diff = a[:, None, :] - b[None, :, :]
        if self.metric_kind == "absolute" or self.dim_y == 1:
            return np.abs(diff).sum(axis=-1)
        return np.sqrt((diff * diff).sum(axis=-1))


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """Probability measure with finitely many atoms.

    Parameters
    ----------
    support : array-like, shape (k,) or (k, d)
        Atom locations.
    weights : array-like, shape (k,), optional
        Nonnegative masses; uniform when omitted. They must sum to one within
        1e-12. Zero-weight atoms are pruned and duplicate atoms merged, so the
        stored support is unique and sorted (lexicographically when d > 1).
    """

    support: np.ndarray
    weights: np.ndarray = None
    _cum: np.ndarray = field(default=None, init=False, repr=False)

    def __post_init__(self):
        pts = check_samples(self.support)
        if self.weights is None:
            w = np.full(pts.shape[0], 1.0 / pts.shape[0])
        else:
            w = np.asarray(self.weights, dtype=float).ravel()
            if w.shape[0] != pts.shape[0]:
                raise InvalidInput("support and weights have different lengths")
            if not np.all(np.isfinite(w)) or np.any(w < 0):
                raise InvalidInput("weights must be finite and nonnegative")
            if abs(w.sum() - 1.0) > _WEIGHT_TOL:
                raise InvalidInput(f"weights sum to {w.sum()!r}, not 1")
        keep = w > 0
        pts, w = pts[keep], w[keep]
        uniq, inverse = np.unique(pts, axis=0, return_inverse=True)
        merged = np.zeros(uniq.shape[0])
        np.add.at(merged, inverse.ravel(), w)
        _freeze(self, uniq, merged)

    @classmethod
    def _from_sorted(cls, support, weights):
        # trusted constructor: support already unique and sorted, weights valid
        obj = object.__new__(cls)
        _freeze(obj, support, weights)
        return obj

    @property
    def dim(self):
        return self.support.shape[1]

    @property
    def size(self):
        return self.support.shape[0]

    @property
    def atoms(self):
        """Support as a flat vector (only meaningful when ``dim == 1``)."""
        return self.support[:, 0]

    @property
    def cumulative_weights(self):
        """Running sums of the weights, last entry set to exactly 1."""
        return self._cum

    def __eq__(self, other):
        if not isinstance(other, EmpiricalMeasure):
            return NotImplemented
        return (
            self.support.shape == other.support.shape
            and np.array_equal(self.support, other.support)
            and np.array_equal(self.weights, other.weights)
        )

    __hash__ = None

    def __repr__(self):
        return f"EmpiricalMeasure(size={self.size}, dim={self.dim})"


def _freeze(obj, support, weights):
    support = np.ascontiguousarray(support, dtype=float)
    weights = np.ascontiguousarray(weights, dtype=float)
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    for arr in (support, weights, cum):
        arr.setflags(write=False)
    object.__setattr__(obj, "support", support)
    object.__setattr__(obj, "weights", weights)
    object.__setattr__(obj, "_cum", cum)


def empirical_from_samples(samples, space=None):
    """Empirical measure ``n^-1 sum_k delta_{y_k}`` of a dataset.

    Duplicated observations are merged with their counts, so the result does
    not depend on the order of ``samples``.
    """
    if space is None:
        pts = check_samples(samples)
    else:
        pts = space.check(samples)
    n = pts.shape[0]
    uniq, counts = np.unique(pts, axis=0, return_counts=True)
    return EmpiricalMeasure._from_sorted(uniq, counts / n)


def _require_1d(measure):
    if measure.dim != 1:
        raise Unsupported(f"operation needs a one-dimensional measure, got dim={measure.dim}")


def cdf(measure, y):
    """Right-continuous distribution function ``F(y) = measure(]-inf, y])``.

    ``y`` may be a scalar or an array; the result has the same shape.
    """
    _require_1d(measure)
    y = np.asarray(y, dtype=float)
    idx = np.searchsorted(measure.atoms, y, side="right")
    cum0 = np.concatenate(([0.0], measure.cumulative_weights))
    out = cum0[idx]
    return float(out) if out.ndim == 0 else out


def quantile(measure, t):
    """Left-continuous generalized inverse ``inf{y : F(y) >= t}`` for t in ]0, 1]."""
    _require_1d(measure)
    t_arr = np.asarray(t, dtype=float)
    if np.any(np.isnan(t_arr)) or np.any(t_arr <= 0) or np.any(t_arr > 1):
        raise InvalidInput(f"quantile level must lie in ]0, 1], got {t!r}")
    idx = np.searchsorted(measure.cumulative_weights, t_arr, side="left")
    out = measure.atoms[np.minimum(idx, measure.size - 1)]
    return float(out) if out.ndim == 0 else out


def point_mass(x):
    """Dirac measure at ``x``."""
    return EmpiricalMeasure(np.atleast_2d(np.asarray(x, dtype=float)))
