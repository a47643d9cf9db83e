"""Finite Markov chains from quadrature discretisation of AR(1) processes.

States are ordered chain-major, shock-minor once a chain is extended with an
independent shock (see :func:`kron_extend`).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .errors import (
    ConvergenceError,
    DimensionError,
    DomainError,
    InvalidDistributionError,
    InvalidParameterError,
)

ROW_SUM_TOL = 1e-12


@dataclass(frozen=True)
class Ar1Params:
    """Log dividend growth ``dd_t = a + x_t + b e_t``, ``x_t = rho x_{t-1} + c eps_t``."""

    mean_level: float
    rho: float
    innov_sd: float
    obs_sd: float

    def __post_init__(self):
        vals = (self.mean_level, self.rho, self.innov_sd, self.obs_sd)
        if not all(math.isfinite(float(v)) for v in vals):
            raise InvalidParameterError(f"non-finite AR(1) parameters: {vals}")
        if not self.innov_sd > 0:
            raise InvalidParameterError(f"innov_sd must be > 0, got {self.innov_sd}")
        if self.obs_sd < 0:
            raise InvalidParameterError(f"obs_sd must be >= 0, got {self.obs_sd}")
        if not 0 < self.rho < 1:
            raise DomainError(f"rho must lie in (0, 1), got {self.rho}")

    @property
    def stationary_sd(self) -> float:
        return self.innov_sd / math.sqrt(1.0 - self.rho**2)

    def as_vector(self) -> np.ndarray:
        """Parameter vector in the order (a, b, c, rho)."""
        return np.array([self.mean_level, self.obs_sd, self.innov_sd, self.rho])

    @classmethod
    def from_vector(cls, theta) -> "Ar1Params":
        a, b, c, rho = (float(v) for v in theta)
        return cls(mean_level=a, rho=rho, innov_sd=c, obs_sd=b)


# Point estimates for quarterly log real dividend growth, 1964Q1-2020Q4.
TABLE_AR1 = Ar1Params(mean_level=0.01037, rho=0.64079, innov_sd=0.01520, obs_sd=0.03630)
# Standard errors in (a, b, c, rho) order.
TABLE_AR1_SE = np.array([0.00416, 0.00272, 0.00901, 0.25901])


@dataclass(frozen=True, eq=False)
class DiscreteMarkovChain:
    """Abscissa, row-stochastic transition matrix and quadrature weights.

    For a chain produced by :func:`kron_extend`, ``abscissa`` repeats each base
    node once per shock value, ``shock`` holds the per-state shock value and
    ``shock_probs`` the shock distribution (identical for every base state).
    """

    abscissa: np.ndarray
    transition: np.ndarray
    weights: np.ndarray
    shock: np.ndarray | None = None
    shock_probs: np.ndarray | None = field(default=None)

    def __post_init__(self):
        x = np.array(self.abscissa, dtype=float)
        p = np.array(self.transition, dtype=float)
        w = np.array(self.weights, dtype=float)
        n = x.shape[0]
        if p.shape != (n, n) or w.shape != (n,):
            raise DimensionError(
                f"inconsistent chain shapes: abscissa {x.shape}, transition {p.shape}, weights {w.shape}"
            )
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(p)) and np.all(np.isfinite(w))):
            raise InvalidParameterError("chain contains non-finite entries")
        if np.any(p < 0) or np.any(p > 1):
            raise InvalidDistributionError("transition entries must lie in [0, 1]")
        if np.max(np.abs(p.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
            raise InvalidDistributionError("transition rows must sum to 1")
        if self.shock is None:
            if n > 1 and not np.all(np.diff(x) > 0):
                raise InvalidParameterError("abscissa must be strictly ascending")
        else:
            s = np.array(self.shock, dtype=float)
            if s.shape != (n,):
                raise DimensionError("shock labels must have one entry per state")
            object.__setattr__(self, "shock", s)
            if self.shock_probs is not None:
                object.__setattr__(self, "shock_probs", np.array(self.shock_probs, dtype=float))
        for name, arr in (("abscissa", x), ("transition", p), ("weights", w)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_states(self) -> int:
        return self.abscissa.shape[0]

    @property
    def n_shocks(self) -> int:
        return 1 if self.shock_probs is None else self.shock_probs.shape[0]

    @property
    def base_abscissa(self) -> np.ndarray:
        return self.abscissa[:: self.n_shocks]

    @property
    def base_weights(self) -> np.ndarray:
        k = self.n_shocks
        return self.weights.reshape(-1, k).sum(axis=1)

    def to_json(self) -> str:
        doc = {
            "abscissa": self.abscissa.tolist(),
            "transition": self.transition.tolist(),
            "weights": self.weights.tolist(),
        }
        if self.shock is not None:
            doc["shock"] = self.shock.tolist()
            doc["shock_probs"] = self.shock_probs.tolist()
        # repr round-trips doubles exactly
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "DiscreteMarkovChain":
        doc = json.loads(text)
        return cls(
            abscissa=np.array(doc["abscissa"]),
            transition=np.array(doc["transition"]),
            weights=np.array(doc["weights"]),
            shock=None if "shock" not in doc else np.array(doc["shock"]),
            shock_probs=None if "shock_probs" not in doc else np.array(doc["shock_probs"]),
        )


def _normal_pdf(x, mean, sd):
    z = (x - mean) / sd
    return np.exp(-0.5 * z * z) / (sd * math.sqrt(2.0 * math.pi))


def gauss_hermite_rule(n_points: int, sd: float, mean: float = 0.0):
    """Nodes and probability weights of the Gauss-Hermite rule for N(mean, sd^2)."""
    z, w = np.polynomial.hermite.hermgauss(n_points)
    # symmetrise exactly; hermgauss roots agree with their mirror to ~1 ulp
    z = 0.5 * (z - z[::-1])
    w = 0.5 * (w + w[::-1]) / math.sqrt(math.pi)
    return mean + math.sqrt(2.0) * sd * z, w


def quadrature_row(x, nodes, weights, params: Ar1Params) -> np.ndarray:
    """Transition probabilities ``pi_k(x)`` out of an arbitrary current state x.

    ``pi_k(x) = f(y_k | x) / (s(x) omega(y_k)) w_k`` with ``f`` the conditional
    Gaussian and ``omega`` the stationary density of x.
    """
    cond = _normal_pdf(nodes, params.rho * x, params.innov_sd)
    stat = _normal_pdf(nodes, 0.0, params.stationary_sd)
    raw = cond / stat * weights
    return raw / raw.sum()


def discretize_ar1(params: Ar1Params, n_points: int) -> DiscreteMarkovChain:
    """Tauchen-Hussey Gauss-Hermite chain for the latent AR(1) state x."""
    if n_points < 2:
        raise DomainError(f"n_points must be >= 2, got {n_points}")
    nodes, weights = gauss_hermite_rule(n_points, params.stationary_sd)
    trans = np.vstack([quadrature_row(x, nodes, weights, params) for x in nodes])
    return DiscreteMarkovChain(abscissa=nodes, transition=trans, weights=weights)


def kron_extend(chain: DiscreteMarkovChain, shock_values, shock_probs) -> DiscreteMarkovChain:
    """Product chain with an independent i.i.d. shock.

    ``transition = chain.transition (x) (ones x shock_probs)``; state ``(j, s)``
    sits at index ``j * S + s``.
    """
    vals = np.asarray(shock_values, dtype=float).ravel()
    probs = np.asarray(shock_probs, dtype=float).ravel()
    if vals.shape != probs.shape or vals.size == 0:
        raise DimensionError("shock_values and shock_probs must have equal nonzero length")
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-10:
        raise InvalidDistributionError(f"shock probabilities must sum to 1, got {probs.sum()!r}")
    if chain.shock is not None:
        raise DomainError("chain is already shock-extended")
    k = vals.size
    block = np.ones((k, 1)) @ probs[None, :]
    trans = np.kron(chain.transition, block)
    # repair the O(eps) drift of the product so rows re-sum to 1
    trans /= trans.sum(axis=1, keepdims=True)
    return DiscreteMarkovChain(
        abscissa=np.repeat(chain.abscissa, k),
        transition=trans,
        weights=np.kron(chain.weights, probs),
        shock=np.tile(vals, chain.n_states),
        shock_probs=probs,
    )


def ergodic_distribution(chain: DiscreteMarkovChain, max_iter: int = 10**6, tol: float = 1e-13) -> np.ndarray:
    """Stationary distribution by power iteration on the transposed transition matrix."""
    n = chain.n_states
    pt = np.ascontiguousarray(chain.transition.T)
    # a non-uniform start so that periodic chains oscillate instead of sitting still
    v0 = np.arange(1.0, n + 1.0)
    v, _, it, ok = kernels.power_iterate(pt, v0 / v0.sum(), tol, max_iter, 1)
    if not ok:
        raise ConvergenceError(
            f"power iteration did not converge in {it} steps; chain may be reducible or periodic"
        )
    v = np.maximum(np.asarray(v), 0.0)
    return v / v.sum()


def two_state_chain(p_gb: float, p_bg: float) -> DiscreteMarkovChain:
    """Good (state 0) / bad (state 1) regime chain ``[[1-p_GB, p_GB], [p_BG, 1-p_BG]]``."""
    if not (0 <= p_gb <= 1 and 0 <= p_bg <= 1):
        raise DomainError("switching probabilities must lie in [0, 1]")
    trans = np.array([[1.0 - p_gb, p_gb], [p_bg, 1.0 - p_bg]])
    return DiscreteMarkovChain(abscissa=np.array([0.0, 1.0]), transition=trans, weights=np.full(2, 0.5))
