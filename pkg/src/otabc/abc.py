"""ABC rejection sampling with transport-based deviation measures.

A run draws ``theta_i`` from the prior, simulates a dataset ``z_i`` of the same
size as the observations, and records ``d_i = D(y, z_i)``. All draws are kept
together with their discrepancies, so a run can be re-thresholded at any
smaller ``epsilon`` without new simulations; acceptance is the closed ball
``d_i <= epsilon``.
"""

import csv
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import _random
from ._validation import check_positive_int, check_real, check_seed
from .exceptions import InvalidInput, NoPosterior
from .measures import empirical_from_samples
from .transport import Discrepancy

BLOCK_SIZE = 4096

_FLOAT_FMT = ".17g"


class ZeroAcceptanceWarning(UserWarning):
    """A run finished without a single accepted draw."""


@dataclass(frozen=True)
class DeviationMeasure:
    """Pseudo-metric on datasets used in the acceptance rule.

    Either wraps a :class:`~otabc.transport.Discrepancy` applied to the two
    empirical measures (``kind="distribution_discrepancy"``) or a user
    function on raw datasets (``kind="raw_pseudo_metric"``).
    """

    kind: str
    discrepancy: Discrepancy | None = None
    function: object = None

    def __post_init__(self):
        if self.kind == "distribution_discrepancy":
            if not isinstance(self.discrepancy, Discrepancy):
                raise InvalidInput("distribution_discrepancy needs a Discrepancy")
        elif self.kind == "raw_pseudo_metric":
            if not callable(self.function):
                raise InvalidInput("raw_pseudo_metric needs a callable")
        else:
            raise InvalidInput(f"unknown deviation kind {self.kind!r}")

    def __call__(self, y, z):
        if self.kind == "raw_pseudo_metric":
            return float(self.function(np.asarray(y, dtype=float), np.asarray(z, dtype=float)))
        return float(self.discrepancy(empirical_from_samples(y), empirical_from_samples(z)))

    def batch(self, y, Z):
        """Deviation of every dataset in ``Z`` (first axis) from ``y``."""
        y = np.asarray(y, dtype=float)
        Z = np.asarray(Z, dtype=float)
        if self._sorted_matching(y, Z):
            # equal-size uniform 1D measures: W_p matches order statistics
            p = self.discrepancy.p
            gap = np.abs(np.sort(Z, axis=1) - np.sort(y.ravel()))
            if p == 1:
                return gap.mean(axis=1)
            return np.mean(gap**p, axis=1) ** (1.0 / p)
        if self.kind == "distribution_discrepancy":
            mu = empirical_from_samples(y)
            disc = self.discrepancy
            return np.array([disc(mu, empirical_from_samples(z)) for z in Z])
        return np.array([self(y, z) for z in Z])

    def _sorted_matching(self, y, Z):
        if self.kind != "distribution_discrepancy" or not self.discrepancy.is_sorted_matching:
            return False
        scalar_y = y.ndim == 1 or (y.ndim == 2 and y.shape[1] == 1)
        return scalar_y and Z.ndim == 2 and Z.shape[1] == y.shape[0]

    def describe(self):
        if self.kind == "distribution_discrepancy":
            return self.discrepancy.describe()
        return {"kind": "raw_pseudo_metric", "function": getattr(self.function, "__name__", repr(self.function))}


def deviation_from_discrepancy(disc):
    """Deviation measure ``D(y, z) = T(mu_y, mu_z)`` on empirical measures.

    Equality (rather than ``D <= T``) makes the acceptance event coincide with
    the discrepancy event, which the sharpened lower bound relies on.
    """
    return DeviationMeasure("distribution_discrepancy", discrepancy=disc)


@dataclass(frozen=True, eq=False)
class AbcRun:
    """Every prior draw of a rejection run with its discrepancy.

    ``accepted`` is derived: exactly the draws with ``discrepancy <= epsilon``.
    """

    thetas: np.ndarray
    discrepancies: np.ndarray
    epsilon: float
    seed: int
    epsilon0: float = math.inf
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        thetas = np.atleast_2d(np.asarray(self.thetas, dtype=float))
        if thetas.shape[0] == 1 and np.ndim(self.thetas) == 1:
            thetas = thetas.T
        disc = np.asarray(self.discrepancies, dtype=float).ravel()
        if thetas.shape[0] != disc.shape[0]:
            raise InvalidInput("one discrepancy per draw is required")
        check_real(self.epsilon0, "epsilon0", 0.0, math.inf, low_open=True)
        check_real(self.epsilon, "epsilon", 0.0, self.epsilon0, low_open=True, high_open=True)
        thetas.setflags(write=False)
        disc.setflags(write=False)
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "discrepancies", disc)
        object.__setattr__(self, "epsilon", float(self.epsilon))

    @property
    def n_draws(self):
        return self.discrepancies.shape[0]

    @property
    def draw_index(self):
        return np.arange(self.n_draws)

    def acceptance_mask(self, epsilon):
        """Flags ``d_i <= epsilon`` for any threshold, including ``inf``."""
        return self.discrepancies <= epsilon

    @property
    def accepted(self):
        return self.acceptance_mask(self.epsilon)

    @property
    def n_accepted(self):
        return int(np.count_nonzero(self.accepted))

    @property
    def acceptance_rate(self):
        return self.n_accepted / self.n_draws

    @property
    def zero_acceptance(self):
        return self.n_accepted == 0

    @property
    def accepted_thetas(self):
        if self.zero_acceptance:
            raise NoPosterior(f"no draw accepted at epsilon={self.epsilon!r}")
        return self.thetas[self.accepted]

    def rethreshold(self, epsilon):
        """Same draws flagged at a new threshold."""
        return replace(self, epsilon=epsilon)

    def run_metadata(self):
        return {
            "seed": self.seed,
            "epsilon": self.epsilon,
            "epsilon0": None if math.isinf(self.epsilon0) else self.epsilon0,
            "n_draws": self.n_draws,
            "n_accepted": self.n_accepted,
            **self.metadata,
        }

    def to_csv(self, path):
        write_draws_csv(path, self.thetas, self.discrepancies, self.accepted)

    @classmethod
    def from_csv(cls, path, epsilon, seed, **kwargs):
        """Rebuild a run from a ``draws.csv`` file; acceptance is recomputed."""
        thetas, disc, _ = read_draws_csv(path)
        return cls(thetas, disc, epsilon, seed, **kwargs)

    def __repr__(self):
        return f"AbcRun(n_draws={self.n_draws}, epsilon={self.epsilon!r}, n_accepted={self.n_accepted})"


def write_draws_csv(path, thetas, discrepancies, accepted):
    """``draw_index, theta_1..theta_d, discrepancy, accepted`` with 17 significant digits."""
    thetas = np.atleast_2d(thetas)
    header = ["draw_index", *(f"theta_{j + 1}" for j in range(thetas.shape[1])), "discrepancy", "accepted"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i, (theta, d, a) in enumerate(zip(thetas, discrepancies, accepted)):
            writer.writerow([i, *(format(t, _FLOAT_FMT) for t in theta), format(d, _FLOAT_FMT), int(a)])


def read_draws_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [r for r in reader if r]
    n_theta = sum(1 for h in header if h.startswith("theta_"))
    if header[0] != "draw_index" or header[-2:] != ["discrepancy", "accepted"] or n_theta == 0:
        raise InvalidInput(f"{path} is not a draws file (header {header})")
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    if not np.array_equal(data[:, 0], np.arange(len(rows))):
        raise InvalidInput(f"{path}: draw_index is not 0..N-1 in order")
    return data[:, 1 : 1 + n_theta], data[:, -2], data[:, -1].astype(bool)


def _check_data(model, data):
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 2 and model.dim_y == 1 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.size == 0:
        raise InvalidInput("observed data must be nonempty")
    if model.dim_y == 1 and arr.ndim != 1:
        raise InvalidInput(f"model {model.name!r} produces scalar observations; data has shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput("observed data contain non-finite values")
    return arr


def simulate_draws(model, prior, data, dev, n_draws, seed, n_jobs=1, block_size=BLOCK_SIZE):
    """Prior draws and their deviations from ``data``, without thresholding.

    Draws are generated in fixed-size blocks, block ``b`` from its own stream
    derived from ``(seed, b)``; the output is ordered by draw index and does not
    depend on ``n_jobs``.

    Returns
    -------
    thetas : ndarray, shape (n_draws, d_H)
    discrepancies : ndarray, shape (n_draws,)
    """
    n_draws = check_positive_int(n_draws, "n_draws")
    seed = check_seed(seed)
    n_jobs = check_positive_int(n_jobs, "n_jobs")
    block_size = check_positive_int(block_size, "block_size")
    y = _check_data(model, data)
    if not prior.contained_in(model.parameter_space):
        raise InvalidInput(f"prior support is not inside the parameter space {model.parameter_space.bounds}")
    n = y.shape[0]

    def run_block(b):
        rng = _random.stream(seed, _random.ABC_DRAWS, b)
        size = min(block_size, n_draws - b * block_size)
        thetas = prior.sample(rng, size)
        Z = model.simulate_batch(thetas, n, rng)
        return thetas, dev.batch(y, Z)

    n_blocks = -(-n_draws // block_size)
    if n_jobs == 1:
        parts = [run_block(b) for b in range(n_blocks)]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(run_block, range(n_blocks)))
    thetas = np.concatenate([t for t, _ in parts])
    disc = np.concatenate([d for _, d in parts])
    return thetas, disc


def abc_rejection(model, prior, data, dev, epsilon, n_draws, seed, epsilon0=math.inf, n_jobs=1,
                  block_size=BLOCK_SIZE):
    """ABC rejection sampler.

    Parameters
    ----------
    model : GenerativeModel
    prior : Prior
    data : array-like
        Observations ``y^{1:n}``; each simulated dataset has the same size.
    dev : DeviationMeasure
    epsilon : float
        Threshold in ``]0, epsilon0[``; ties ``d_i == epsilon`` are accepted.
    n_draws : int
    seed : int
    epsilon0 : float, default=inf
        Ceiling below which acceptance has positive probability.
    n_jobs : int, default=1
        Worker threads; results are identical for any value.

    Returns
    -------
    AbcRun
        With all draws retained. A run without acceptances is returned as is
        (``run.zero_acceptance``) and posterior queries on it raise
        :class:`~otabc.exceptions.NoPosterior`.
    """
    epsilon0 = check_real(epsilon0, "epsilon0", 0.0, math.inf, low_open=True)
    epsilon = check_real(epsilon, "epsilon", 0.0, epsilon0, low_open=True, high_open=True)
    thetas, disc = simulate_draws(model, prior, data, dev, n_draws, seed, n_jobs, block_size)
    meta = {"model": model.describe(), "prior": prior.describe(), "discrepancy": dev.describe()}
    run = AbcRun(thetas, disc, epsilon, seed, epsilon0, metadata=meta)
    if run.zero_acceptance:
        warnings.warn(f"no draw accepted at epsilon={epsilon!r}", ZeroAcceptanceWarning, stacklevel=2)
    return run


def _region_mask(thetas, region):
    if callable(region):
        mask = np.asarray(region(thetas), dtype=bool)
        if mask.shape != (thetas.shape[0],):
            raise InvalidInput("region predicate must return one flag per parameter draw")
        return mask
    low, high = region
    low = np.broadcast_to(np.asarray(low, dtype=float), (thetas.shape[1],))
    high = np.broadcast_to(np.asarray(high, dtype=float), (thetas.shape[1],))
    return np.all((thetas >= low) & (thetas <= high), axis=1)


def abc_posterior_prob(run, region):
    """ABC posterior mass of ``region`` with its Monte-Carlo standard error.

    ``region`` is a closed box ``(low, high)`` (infinite ends allowed) or a
    predicate mapping an (N, d_H) array of parameters to N booleans.
    """
    if run.zero_acceptance:
        raise NoPosterior(f"no draw accepted at epsilon={run.epsilon!r}")
    acc = run.accepted_thetas
    k = int(np.count_nonzero(_region_mask(acc, region)))
    n_acc = acc.shape[0]
    est = k / n_acc
    return est, math.sqrt(est * (1.0 - est) / n_acc)


def epsilon_from_quantile(discrepancies, q):
    """Order statistic of rank ``ceil(q * N)``; thresholding there keeps at least ``q * N`` draws."""
    d = np.sort(np.asarray(discrepancies, dtype=float).ravel())
    if d.size == 0:
        raise InvalidInput("discrepancy list is empty")
    q = check_real(q, "q", 0.0, 1.0, low_open=True)
    # rounding guards against q*N landing a hair above an integer
    rank = max(1, math.ceil(round(q * d.size, 9)))
    return float(d[rank - 1])


class RejectionABC(BaseEstimator):
    """Scikit-learn style front end to :func:`abc_rejection`.

    ``fit`` takes the observed dataset and runs the sampler; the fitted
    estimator answers posterior queries.

    Parameters
    ----------
    model : GenerativeModel
    prior : Prior
    kind : {"wasserstein", "sliced_wasserstein", "radon"}, default="wasserstein"
    p : float, default=1.0
    n_projections : int, default=50
    epsilon : float, optional
        Fixed threshold. Exactly one of ``epsilon`` and ``quantile`` is set.
    quantile : float, optional
        Acceptance fraction; the threshold is the matching order statistic of
        the simulated discrepancies.
    n_draws : int, default=10_000
    random_state : int, default=0
    n_jobs : int, default=1

    Attributes
    ----------
    run_ : AbcRun
    epsilon_ : float
    """

    def __init__(self, model=None, prior=None, kind="wasserstein", p=1.0, n_projections=50, epsilon=None,
                 quantile=None, n_draws=10_000, random_state=0, n_jobs=1):
        self.model = model
        self.prior = prior
        self.kind = kind
        self.p = p
        self.n_projections = n_projections
        self.epsilon = epsilon
        self.quantile = quantile
        self.n_draws = n_draws
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        if self.model is None or self.prior is None:
            raise InvalidInput("RejectionABC needs both a model and a prior")
        if (self.epsilon is None) == (self.quantile is None):
            raise InvalidInput("set exactly one of epsilon and quantile")
        disc = Discrepancy(self.kind, self.p, self.n_projections, self.random_state)
        dev = deviation_from_discrepancy(disc)
        if self.epsilon is not None:
            self.run_ = abc_rejection(self.model, self.prior, X, dev, self.epsilon, self.n_draws,
                                      self.random_state, n_jobs=self.n_jobs)
        else:
            thetas, d = simulate_draws(self.model, self.prior, X, dev, self.n_draws, self.random_state,
                                       n_jobs=self.n_jobs)
            eps = epsilon_from_quantile(d, self.quantile)
            if eps <= 0:
                raise InvalidInput("quantile threshold is zero; increase quantile")
            meta = {"model": self.model.describe(), "prior": self.prior.describe(), "discrepancy": dev.describe()}
            self.run_ = AbcRun(thetas, d, eps, self.random_state, metadata=meta)
        self.epsilon_ = self.run_.epsilon
        self.n_features_in_ = 1
        return self

    @property
    def accepted_thetas_(self):
        check_is_fitted(self, "run_")
        return self.run_.accepted_thetas

    def posterior_prob(self, region):
        check_is_fitted(self, "run_")
        return abc_posterior_prob(self.run_, region)

    def posterior_mean(self):
        return self.accepted_thetas_.mean(axis=0)


def save_run(run, out_dir, extra=None):
    """Write ``draws.csv`` and ``run.json`` for a run into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    run.to_csv(out / "draws.csv")
    meta = run.run_metadata()
    if extra:
        meta.update(extra)
    (out / "run.json").write_text(json.dumps(meta, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")
