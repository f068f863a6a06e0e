"""Generative models, priors, and the conjugate-Gaussian posterior oracle.

Three simulators are provided:

``normal_location``
    i.i.d. ``Normal(theta, sigma)``; with ``sigma=1`` it has a tractable
    density and a closed-form posterior under a Gaussian prior, with
    ``sigma=2`` it is a deliberately misspecified fit to ``Normal(0, 1)`` data.
``constant_normal``
    the non-ergodic toy ``z^k = V`` for every ``k``, ``V ~ Normal(theta, sigma)``;
    its empirical measures never approach a fixed limit.
``pref_attach``
    a growing-tree network model whose output is the degree sequence; no
    likelihood is exposed.

Every simulator is a pure function of ``(theta, n, rng)``.
"""

from dataclasses import dataclass

import numpy as np
from scipy import stats

from ._validation import check_positive_int, check_real
from .exceptions import InvalidInput, Unsupported

PRIOR_KINDS = ("uniform", "gaussian", "truncated_gaussian")


@dataclass(frozen=True)
class ParameterSpace:
    """Box ``H`` of admissible parameters with its metric."""

    dim_h: int = 1
    bounds: tuple = ((-np.inf, np.inf),)
    metric_kind: str = "euclidean"

    def __post_init__(self):
        check_positive_int(self.dim_h, "dim_h")
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        if len(bounds) != self.dim_h or any(not lo < hi for lo, hi in bounds):
            raise InvalidInput(f"parameter bounds must be {self.dim_h} nonempty intervals, got {self.bounds}")
        if self.metric_kind not in ("euclidean", "absolute"):
            raise InvalidInput(f"unknown metric_kind {self.metric_kind!r}")
        object.__setattr__(self, "bounds", bounds)

    @property
    def low(self):
        return np.array([b[0] for b in self.bounds])

    @property
    def high(self):
        return np.array([b[1] for b in self.bounds])

    def contains(self, theta):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        return theta.shape == (self.dim_h,) and bool(np.all((theta >= self.low) & (theta <= self.high)))

    def check(self, theta):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if not self.contains(theta):
            raise InvalidInput(f"theta={theta.tolist()} is not a point of {self.bounds}")
        return theta

    def distance(self, a, b):
        """Distances between the rows of ``a`` (shape (N, d_H)) and the point ``b``."""
        diff = np.atleast_2d(a) - np.asarray(b, dtype=float)
        if self.metric_kind == "absolute":
            return np.abs(diff).sum(axis=1)
        return np.sqrt((diff * diff).sum(axis=1))


class Prior:
    """Product prior on ``R^{d_H}`` with independent coordinates.

    Parameters
    ----------
    kind : {"uniform", "gaussian", "truncated_gaussian"}
    mean, sd : array-like, for the Gaussian kinds
    low, high : array-like, for the uniform and truncated kinds
    """

    def __init__(self, kind, mean=None, sd=None, low=None, high=None):
        if kind not in PRIOR_KINDS:
            raise InvalidInput(f"prior kind must be one of {PRIOR_KINDS}, got {kind!r}")
        self.kind = kind
        if kind == "uniform":
            self.low, self.high = _vec(low, "low"), _vec(high, "high")
            if self.low.shape != self.high.shape or np.any(self.low >= self.high):
                raise InvalidInput("uniform prior needs low < high coordinatewise")
            if not np.all(np.isfinite(self.low)) or not np.all(np.isfinite(self.high)):
                raise InvalidInput("uniform prior needs finite bounds")
            self._dists = [stats.uniform(lo, hi - lo) for lo, hi in zip(self.low, self.high)]
        else:
            self.mean, self.sd = _vec(mean, "mean"), _vec(sd, "sd")
            if self.mean.shape != self.sd.shape or np.any(self.sd <= 0):
                raise InvalidInput("gaussian prior needs matching mean/sd with sd > 0")
            if kind == "gaussian":
                self.low = np.full(self.mean.shape, -np.inf)
                self.high = np.full(self.mean.shape, np.inf)
                self._dists = [stats.norm(m, s) for m, s in zip(self.mean, self.sd)]
            else:
                self.low, self.high = _vec(low, "low"), _vec(high, "high")
                if self.low.shape != self.mean.shape or np.any(self.low >= self.high):
                    raise InvalidInput("truncated prior needs low < high coordinatewise")
                self._dists = [
                    stats.truncnorm((lo - m) / s, (hi - m) / s, loc=m, scale=s)
                    for m, s, lo, hi in zip(self.mean, self.sd, self.low, self.high)
                ]

    @classmethod
    def from_dict(cls, params):
        params = dict(params)
        return cls(params.pop("kind"), **params)

    @property
    def dim(self):
        return len(self._dists)

    def describe(self):
        out = {"kind": self.kind}
        for name in ("mean", "sd", "low", "high"):
            val = getattr(self, name, None)
            if val is not None and not (self.kind == "gaussian" and name in ("low", "high")):
                out[name] = val.tolist() if val.size > 1 else float(val[0])
        return out

    def sample(self, rng, size):
        """Draw ``size`` parameters, shape (size, d_H)."""
        cols = [d.rvs(size=size, random_state=rng) for d in self._dists]
        return np.column_stack(cols).astype(float)

    def cdf(self, x):
        """Marginal CDF of a one-dimensional prior."""
        if self.dim != 1:
            raise Unsupported("cdf is defined for one-dimensional priors only")
        return self._dists[0].cdf(x)

    def ppf(self, q):
        """Marginal quantile function of a one-dimensional prior."""
        if self.dim != 1:
            raise Unsupported("ppf is defined for one-dimensional priors only")
        return self._dists[0].ppf(q)

    def interval_prob(self, low, high):
        """Exact prior probability of the box ``[low, high]`` (product of marginals)."""
        low = np.broadcast_to(np.asarray(low, dtype=float), (self.dim,))
        high = np.broadcast_to(np.asarray(high, dtype=float), (self.dim,))
        prob = 1.0
        for d, lo, hi in zip(self._dists, low, high):
            if hi <= lo:
                return 0.0
            prob *= max(float(d.cdf(hi) - d.cdf(lo)), 0.0)
        return prob

    def contained_in(self, space):
        return bool(np.all(self.low >= space.low) and np.all(self.high <= space.high))

    def __repr__(self):
        return f"Prior({self.describe()})"


def _vec(value, name):
    if value is None:
        raise InvalidInput(f"prior parameter {name!r} is required")
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.ndim != 1 or np.any(np.isnan(arr)):
        raise InvalidInput(f"prior parameter {name!r} must be a number or a flat list")
    return arr


class GenerativeModel:
    """Simulator ``theta -> z^{1:n}`` with an optional log-density.

    Subclasses implement ``_simulate`` (and ``_simulate_batch`` when a
    vectorised path exists) and set ``parameter_space``.
    """

    name = None
    dim_y = 1
    has_density = False
    min_n = 1
    parameter_space = ParameterSpace()

    def simulate(self, theta, n, rng):
        """Draw one dataset of ``n`` observations at ``theta``.

        Returns shape (n,) when ``dim_y == 1``, else (n, dim_y).
        """
        theta = self.parameter_space.check(theta)
        n = check_positive_int(n, "n", self.min_n)
        return self._simulate(theta, n, rng)

    def simulate_batch(self, thetas, n, rng):
        """One dataset per row of ``thetas``; shape (B, n) for scalar observations."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        n = check_positive_int(n, "n", self.min_n)
        low, high = self.parameter_space.low, self.parameter_space.high
        if np.any(thetas < low) or np.any(thetas > high):
            raise InvalidInput(f"parameters outside {self.parameter_space.bounds}")
        return self._simulate_batch(thetas, n, rng)

    def _simulate_batch(self, thetas, n, rng):
        return np.stack([self._simulate(t, n, rng) for t in thetas])

    def log_density(self, theta, z):
        """Joint log-density of ``z`` at ``theta``; models without one raise Unsupported."""
        raise Unsupported(f"model {self.name!r} has no tractable likelihood")

    def describe(self):
        return {"name": self.name}

    def __repr__(self):
        return f"{type(self).__name__}({self.describe()})"


class NormalLocation(GenerativeModel):
    """i.i.d. ``Normal(theta, sigma)`` observations, sigma fixed."""

    name = "normal_location"
    has_density = True

    def __init__(self, sigma=1.0):
        self.sigma = check_real(sigma, "sigma", 0.0, np.inf, low_open=True, high_open=True)

    def _simulate(self, theta, n, rng):
        return theta[0] + self.sigma * rng.standard_normal(n)

    def _simulate_batch(self, thetas, n, rng):
        return thetas[:, :1] + self.sigma * rng.standard_normal((thetas.shape[0], n))

    def log_density(self, theta, z):
        theta = float(self.parameter_space.check(theta)[0])
        z = np.asarray(z, dtype=float).ravel()
        s2 = self.sigma**2
        return float(np.sum(-0.5 * np.log(2 * np.pi * s2) - (z - theta) ** 2 / (2 * s2)))

    def log_density_many(self, thetas, z):
        """Vectorised :meth:`log_density` over a column of parameters."""
        thetas = np.asarray(thetas, dtype=float).ravel()
        z = np.asarray(z, dtype=float).ravel()
        n, s2 = z.size, self.sigma**2
        # sum_k (z_k - t)^2 = S2 - 2 t S1 + n t^2
        quad = np.sum(z * z) - 2 * thetas * np.sum(z) + n * thetas**2
        return -0.5 * n * np.log(2 * np.pi * s2) - quad / (2 * s2)

    def describe(self):
        return {"name": self.name, "sigma": self.sigma}


class ConstantNormal(GenerativeModel):
    """Non-ergodic toy: one draw ``V ~ Normal(theta, sigma)`` repeated n times."""

    name = "constant_normal"

    def __init__(self, sigma=1.0):
        self.sigma = check_real(sigma, "sigma", 0.0, np.inf, low_open=True, high_open=True)

    def _simulate(self, theta, n, rng):
        return np.full(n, theta[0] + self.sigma * rng.standard_normal())

    def _simulate_batch(self, thetas, n, rng):
        v = thetas[:, 0] + self.sigma * rng.standard_normal(thetas.shape[0])
        return np.repeat(v[:, None], n, axis=1)

    def describe(self):
        return {"name": self.name, "sigma": self.sigma}


class PreferentialAttachment(GenerativeModel):
    """Growing tree with nonlinear preferential attachment.

    Starting from a single edge, each new node attaches by one edge to an
    existing node ``v`` chosen with probability proportional to
    ``deg(v)**theta + 1``. A dataset of size ``n`` is the degree sequence of
    the final ``n``-node tree.
    """

    name = "pref_attach"
    min_n = 2

    def __init__(self, theta_low=0.0, theta_high=3.0):
        self.parameter_space = ParameterSpace(1, ((theta_low, theta_high),))

    def _simulate(self, theta, n, rng):
        return simulate_pref_attach(theta[0], n, rng, _checked=True)

    def describe(self):
        return {"name": self.name, "theta_low": self.parameter_space.bounds[0][0],
                "theta_high": self.parameter_space.bounds[0][1]}


def simulate_pref_attach(theta, n_nodes, rng, _checked=False):
    """Degree sequence of a nonlinear preferential-attachment tree.

    The degrees always sum to ``2 * (n_nodes - 1)``.
    """
    if not _checked:
        theta = check_real(theta, "theta", 0.0, np.inf, high_open=True)
        n_nodes = check_positive_int(n_nodes, "n_nodes", 2)
    deg = np.zeros(n_nodes)
    deg[:2] = 1.0
    weight = np.zeros(n_nodes)
    weight[:2] = 2.0
    draws = rng.random(n_nodes)
    for new in range(2, n_nodes):
        cum = np.cumsum(weight[:new])
        v = int(np.searchsorted(cum, draws[new] * cum[-1], side="right"))
        v = min(v, new - 1)
        deg[v] += 1.0
        weight[v] = deg[v] ** theta + 1.0
        deg[new] = 1.0
        weight[new] = 2.0
    return deg


MODELS = {
    NormalLocation.name: NormalLocation,
    ConstantNormal.name: ConstantNormal,
    PreferentialAttachment.name: PreferentialAttachment,
}


def make_model(name, **params):
    try:
        cls = MODELS[name]
    except KeyError:
        raise InvalidInput(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None
    return cls(**params)


@dataclass(frozen=True)
class NormalPosterior:
    """Gaussian posterior of a location parameter."""

    mean: float
    sd: float

    def cdf(self, x):
        return stats.norm.cdf(x, self.mean, self.sd)

    def interval_prob(self, low, high):
        low, high = float(np.ravel(low)[0]), float(np.ravel(high)[0])
        if high <= low:
            return 0.0
        return float(self.cdf(high) - self.cdf(low))


def normal_true_posterior(prior, data, noise_sd=1.0):
    """Conjugate posterior of ``theta`` for i.i.d. ``Normal(theta, noise_sd)`` data.

    Posterior precision is ``1/s0^2 + n/noise_sd^2`` and the mean is the
    precision-weighted average of the prior mean and the sample mean. With no
    data the prior is returned unchanged.
    """
    if prior.kind != "gaussian" or prior.dim != 1:
        raise InvalidInput("the conjugate oracle needs a one-dimensional gaussian prior")
    m0, s0 = float(prior.mean[0]), float(prior.sd[0])
    data = np.asarray(data, dtype=float).ravel()
    n = data.size
    if n == 0:
        return NormalPosterior(m0, s0)
    prec = 1.0 / s0**2 + n / noise_sd**2
    mean = (m0 / s0**2 + data.sum() / noise_sd**2) / prec
    return NormalPosterior(float(mean), float(np.sqrt(1.0 / prec)))
