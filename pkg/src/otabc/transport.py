"""Optimal-transport discrepancies between finitely supported measures.

Four routes are provided:

* :func:`kantorovich_discrete` solves the discrete Kantorovich problem exactly
  as a linear program over couplings;
* :func:`wasserstein_1d` integrates the difference of quantile functions in
  closed form for measures on the real line;
* :func:`sliced_wasserstein` averages 1D distances over random directions;
* :func:`radon_distance` is the total-variation (Radon) metric.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import _random
from ._validation import check_positive_int, check_real, check_seed
from .exceptions import InvalidInput, TooLarge, Unsupported
from .measures import EmpiricalMeasure, SampleSpaceConfig, empirical_from_samples

DEFAULT_CAP = 10_000

_MARGINAL_TOL = 1e-9


@dataclass(frozen=True)
class CostFunction:
    """Unit transport cost ``c(y, y')``.

    ``kind="metric_power"`` gives ``rho(y, y')**p`` for the ground metric of
    ``space``; ``kind="custom_table"`` uses an explicit nonnegative matrix
    indexed by the atoms of the two measures (in their stored order).
    """

    kind: str = "metric_power"
    p: float = 1.0
    table: np.ndarray | None = None
    space: SampleSpaceConfig | None = None

    def __post_init__(self):
        if self.kind == "metric_power":
            check_real(self.p, "p", 1.0, np.inf, high_open=True)
        elif self.kind == "custom_table":
            table = np.asarray(self.table, dtype=float)
            if table.ndim != 2 or not np.all(np.isfinite(table)) or np.any(table < 0):
                raise InvalidInput("custom cost table must be a finite nonnegative matrix")
            object.__setattr__(self, "table", table)
        else:
            raise InvalidInput(f"unknown cost kind {self.kind!r}")

    def matrix(self, mu, nu):
        if self.kind == "custom_table":
            if self.table.shape != (mu.size, nu.size):
                raise InvalidInput(f"cost table shape {self.table.shape} does not match supports ({mu.size}, {nu.size})")
            return self.table
        space = self.space or SampleSpaceConfig(dim_y=mu.dim)
        dist = space.pairwise(mu.support, nu.support)
        return dist if self.p == 1 else dist**self.p


@dataclass(frozen=True)
class DiscreteCoupling:
    """Joint mass matrix with prescribed marginals."""

    mass: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray

    def __post_init__(self):
        mass = np.asarray(self.mass, dtype=float)
        if np.any(mass < 0):
            raise InvalidInput("coupling has negative mass")
        if np.max(np.abs(mass.sum(axis=1) - self.row_marginal)) > _MARGINAL_TOL:
            raise InvalidInput("coupling row sums do not match the first marginal")
        if np.max(np.abs(mass.sum(axis=0) - self.col_marginal)) > _MARGINAL_TOL:
            raise InvalidInput("coupling column sums do not match the second marginal")
        object.__setattr__(self, "mass", mass)


def _check_pair(mu, nu):
    if not isinstance(mu, EmpiricalMeasure) or not isinstance(nu, EmpiricalMeasure):
        raise InvalidInput("expected two EmpiricalMeasure instances")
    if mu.dim != nu.dim:
        raise InvalidInput(f"measures live in different dimensions ({mu.dim} vs {nu.dim})")


def kantorovich_discrete(mu, nu, cost=None, cap=DEFAULT_CAP):
    """Exact minimum-cost coupling between two atomic measures.

    Parameters
    ----------
    mu, nu : EmpiricalMeasure
    cost : CostFunction, optional
        Defaults to ``|y - y'|`` (metric power with p=1).
    cap : int
        Largest admissible ``mu.size * nu.size``.

    Returns
    -------
    value : float
        ``sum_ij mass_ij c(y_i, y'_j)`` at the optimum.
    coupling : DiscreteCoupling
        An optimal vertex of the transportation polytope.
    """
    _check_pair(mu, nu)
    cost = cost or CostFunction()
    k, m = mu.size, nu.size
    if k * m > cap:
        raise TooLarge(f"coupling has {k * m} cells, above the cap of {cap}")
    C = cost.matrix(mu, nu)
    if k == 1 or m == 1:
        # the marginal constraint pins the coupling down
        mass = mu.weights[:, None] * nu.weights[None, :]
    else:
        rows = sparse.kron(sparse.identity(k), np.ones((1, m)))
        cols = sparse.kron(np.ones((1, k)), sparse.identity(m))
        A_eq = sparse.vstack([rows, cols], format="csr")
        b_eq = np.concatenate([mu.weights, nu.weights])
        res = linprog(C.ravel(), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs-ds")
        if res.status != 0:  # pragma: no cover - the transportation LP is always feasible and bounded
            raise RuntimeError(f"transport LP failed: {res.message}")
        mass = np.maximum(res.x.reshape(k, m), 0.0)
    value = float(np.sum(mass * C))
    return value, DiscreteCoupling(mass, mu.weights, nu.weights)


def _quantile_partition(mu, nu):
    # common refinement of the two weight partitions of ]0, 1]
    t = np.union1d(mu.cumulative_weights, nu.cumulative_weights)
    qa = mu.atoms[np.minimum(np.searchsorted(mu.cumulative_weights, t), mu.size - 1)]
    qb = nu.atoms[np.minimum(np.searchsorted(nu.cumulative_weights, t), nu.size - 1)]
    dt = np.diff(t, prepend=0.0)
    return dt, qa, qb


def wasserstein_1d(mu, nu, p=1.0):
    """``W_p`` between measures on the real line, from their quantile functions.

    Both quantile functions are constant on the cells of the common refinement
    of the two weight partitions, so the integral of ``|F^-1 - G^-1|^p`` over
    ``]0, 1]`` is a finite sum.
    """
    _check_pair(mu, nu)
    if mu.dim != 1:
        raise Unsupported("wasserstein_1d needs one-dimensional measures; use wasserstein_p or sliced_wasserstein")
    p = check_real(p, "p", 1.0, np.inf, high_open=True)
    dt, qa, qb = _quantile_partition(mu, nu)
    gap = np.abs(qa - qb)
    if p == 1:
        return float(np.dot(dt, gap))
    return float(np.dot(dt, gap**p)) ** (1.0 / p)


def wasserstein_p(mu, nu, p=1.0, space=None, cap=DEFAULT_CAP):
    """``W_p`` in any dimension: closed form in 1D, exact LP otherwise."""
    _check_pair(mu, nu)
    if mu.dim == 1:
        return wasserstein_1d(mu, nu, p)
    p = check_real(p, "p", 1.0, np.inf, high_open=True)
    if mu.size * nu.size > cap:
        raise TooLarge(
            f"exact W_p in d={mu.dim} needs {mu.size * nu.size} coupling cells (cap {cap}); "
            "use sliced_wasserstein for large supports"
        )
    value, _ = kantorovich_discrete(mu, nu, CostFunction("metric_power", p, space=space), cap=cap)
    return max(value, 0.0) ** (1.0 / p)


def _projected(measure, direction):
    proj = measure.support @ direction
    order = np.argsort(proj, kind="stable")
    proj, w = proj[order], measure.weights[order]
    # merge atoms that collapse onto the same projected value
    keep = np.concatenate(([True], np.diff(proj) != 0))
    starts = np.flatnonzero(keep)
    return EmpiricalMeasure._from_sorted(proj[keep].reshape(-1, 1), np.add.reduceat(w, starts))


def sliced_wasserstein(mu, nu, p=1.0, n_projections=50, seed=0):
    """Monte-Carlo sliced Wasserstein distance.

    Averages ``W_p(proj_u mu, proj_u nu)**p`` over ``n_projections`` directions
    drawn uniformly on the unit sphere, then takes the p-th root. In one
    dimension every projection is the identity up to sign, so the result is
    :func:`wasserstein_1d` itself.
    """
    _check_pair(mu, nu)
    p = check_real(p, "p", 1.0, np.inf, high_open=True)
    n_projections = check_positive_int(n_projections, "n_projections")
    seed = check_seed(seed)
    if mu.dim == 1:
        return wasserstein_1d(mu, nu, p)
    rng = _random.stream(seed, _random.PROJECTIONS)
    dirs = rng.normal(size=(n_projections, mu.dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    total = 0.0
    for u in dirs:
        total += wasserstein_1d(_projected(mu, u), _projected(nu, u), p) ** p
    return (total / n_projections) ** (1.0 / p)


def radon_distance(mu, nu):
    """Radon metric ``sup_{|h| <= 1} int h d(mu - nu)``.

    For atomic measures the supremum is attained at ``h = sign(mu - nu)`` and
    equals the sum of absolute mass differences over the union of supports.
    """
    _check_pair(mu, nu)
    pts = np.concatenate([mu.support, nu.support])
    signed = np.concatenate([mu.weights, -nu.weights])
    _, inverse = np.unique(pts, axis=0, return_inverse=True)
    diff = np.zeros(inverse.max() + 1)
    np.add.at(diff, inverse.ravel(), signed)
    return min(math.fsum(np.abs(diff)), 2.0)


DISCREPANCY_KINDS = ("wasserstein", "sliced_wasserstein", "radon")


@dataclass(frozen=True)
class Discrepancy:
    """A pseudo-distance between probability measures on the sample space.

    Calling the object on two :class:`EmpiricalMeasure` instances evaluates it.
    """

    kind: str = "wasserstein"
    p: float = 1.0
    n_projections: int = 50
    seed: int = 0
    space: SampleSpaceConfig | None = None

    def __post_init__(self):
        if self.kind not in DISCREPANCY_KINDS:
            raise InvalidInput(f"discrepancy kind must be one of {DISCREPANCY_KINDS}, got {self.kind!r}")
        check_real(self.p, "p", 1.0, np.inf, high_open=True)
        check_positive_int(self.n_projections, "n_projections")
        check_seed(self.seed)

    def __call__(self, mu, nu):
        if self.kind == "wasserstein":
            return wasserstein_p(mu, nu, self.p, space=self.space)
        if self.kind == "sliced_wasserstein":
            return sliced_wasserstein(mu, nu, self.p, self.n_projections, self.seed)
        return radon_distance(mu, nu)

    @property
    def is_sorted_matching(self):
        """True when, in 1D, equal-size datasets reduce to matching order statistics."""
        return self.kind in ("wasserstein", "sliced_wasserstein")

    def describe(self):
        out = {"kind": self.kind}
        if self.kind != "radon":
            out["p"] = self.p
        if self.kind == "sliced_wasserstein":
            out["n_projections"] = self.n_projections
            out["seed"] = self.seed
        return out


class DiscrepancyTransformer(TransformerMixin, BaseEstimator):
    """Maps simulated datasets to their discrepancy from a reference dataset.

    ``fit`` stores the empirical measure of the observed data; ``transform``
    takes a batch of datasets, shape (n_datasets, n) or (n_datasets, n, d), and
    returns a column of discrepancies. This makes the acceptance statistic of
    an ABC run usable inside ordinary scikit-learn pipelines.

    Parameters
    ----------
    kind : {"wasserstein", "sliced_wasserstein", "radon"}
    p : float, default=1.0
    n_projections : int, default=50
    random_state : int, default=0
        Seed of the sliced projections.
    """

    def __init__(self, kind="wasserstein", p=1.0, n_projections=50, random_state=0):
        self.kind = kind
        self.p = p
        self.n_projections = n_projections
        self.random_state = random_state

    def fit(self, X, y=None):
        self.discrepancy_ = Discrepancy(self.kind, self.p, self.n_projections, self.random_state)
        self.reference_ = empirical_from_samples(X)
        self.n_features_in_ = self.reference_.dim
        return self

    def transform(self, X):
        check_is_fitted(self, "reference_")
        batch = np.asarray(X, dtype=float)
        if batch.ndim == 2 and self.n_features_in_ == 1:
            batch = batch[:, :, None]
        if batch.ndim != 3 or batch.shape[2] != self.n_features_in_:
            raise InvalidInput(f"expected datasets of dimension {self.n_features_in_}, got array of shape {batch.shape}")
        out = np.array([self.discrepancy_(self.reference_, empirical_from_samples(z)) for z in batch])
        return out.reshape(-1, 1)
