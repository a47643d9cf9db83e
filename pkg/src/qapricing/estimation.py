"""Kalman-filter MLE of the dividend-growth model, SDF calibration and the
parameter-uncertainty ensemble."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from ._backend import kernels
from .errors import (
    DataError,
    DegenerateDataError,
    EstimationError,
    InfeasibleRegionError,
    InvalidParameterError,
    ZeroDivergenceError,
)
from .markov import Ar1Params

PARAM_NAMES = ("a", "b", "c", "rho")
WEIGHT_RULES = ("kl", "inverse_kl", "uniform")
MIN_SD = 1e-8
RHO_BOUNDS = (1e-4, 1.0 - 1e-4)


class BoundaryWarning(UserWarning):
    """The likelihood optimum sits on a parameter bound."""


def _as_series(series, min_len: int) -> np.ndarray:
    y = np.ascontiguousarray(series, dtype=float).ravel()
    if y.size < min_len:
        raise DataError(f"series needs at least {min_len} observations, got {y.size}")
    if not np.all(np.isfinite(y)):
        raise DataError("series contains non-finite observations")
    return y


def _theta(params) -> np.ndarray:
    if isinstance(params, Ar1Params):
        return params.as_vector()
    theta = np.asarray(params, dtype=float).ravel()
    if theta.shape != (4,) or not np.all(np.isfinite(theta)):
        raise InvalidParameterError("parameter vector must hold four finite values (a, b, c, rho)")
    return theta


def _initial_variance(theta, init: str) -> float:
    if init == "zero":
        return 0.0
    if init == "stationary":
        _, _, c, rho = theta
        if abs(rho) >= 1:
            return math.inf
        return c * c / (1.0 - rho * rho)
    raise InvalidParameterError(f"unknown filter initialisation {init!r}")


def _loglik(theta, y, init="zero") -> float:
    a, b, c, rho = theta
    return kernels.kalman_loglik(y, a, b, c, rho, _initial_variance(theta, init))


def kalman_loglik(params, series, init: str = "zero") -> float:
    """Gaussian log-likelihood of ``dd_t = a + x_t + b e_t``, ``x_t = rho x_{t-1} + c eps_t``.

    ``params`` is an :class:`Ar1Params` or a raw ``(a, b, c, rho)`` vector.  The
    filter starts at state 0 with variance 0 (``init="zero"``) or with the
    stationary variance (``init="stationary"``).
    """
    y = _as_series(series, 8)
    ll = _loglik(_theta(params), y, init)
    if not math.isfinite(ll):
        raise DegenerateDataError("prediction variance is zero; the likelihood is degenerate")
    return ll


def filter_states(params, series, init: str = "zero") -> np.ndarray:
    """Filtered means ``x_{t|t}``."""
    y = _as_series(series, 1)
    theta = _theta(params)
    a, b, c, rho = theta
    out = np.empty_like(y)
    ll = kernels.kalman_filter(y, a, b, c, rho, _initial_variance(theta, init), out)
    if not math.isfinite(ll):
        raise DegenerateDataError("prediction variance is zero; the likelihood is degenerate")
    return out


@dataclass(frozen=True, eq=False)
class EstimationResult:
    theta_hat: Ar1Params
    covariance: np.ndarray
    loglik: float
    standard_errors: np.ndarray = field(init=False)
    boundary: bool = False
    n_obs: int = 0

    def __post_init__(self):
        cov = np.asarray(self.covariance, dtype=float)
        if cov.shape != (4, 4):
            raise InvalidParameterError("covariance must be 4x4")
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "standard_errors", np.sqrt(np.clip(np.diag(cov), 0.0, None)))

    def to_dict(self) -> dict:
        return {
            "theta_hat": dict(zip(PARAM_NAMES, self.theta_hat.as_vector().tolist())),
            "standard_errors": dict(zip(PARAM_NAMES, self.standard_errors.tolist())),
            "covariance": self.covariance.tolist(),
            "loglik": self.loglik,
            "boundary": self.boundary,
            "n_obs": self.n_obs,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "EstimationResult":
        theta = [doc["theta_hat"][k] for k in PARAM_NAMES]
        return cls(
            theta_hat=Ar1Params.from_vector(theta),
            covariance=np.array(doc["covariance"]),
            loglik=float(doc["loglik"]),
            boundary=bool(doc.get("boundary", False)),
            n_obs=int(doc.get("n_obs", 0)),
        )


def _starting_points(y: np.ndarray) -> list[np.ndarray]:
    mean = float(y.mean())
    sd = max(float(y.std()), 1e-6)
    starts = []
    for rho in (0.15, 0.45, 0.7, 0.9):
        for share in (0.3, 0.8):
            # split the unconditional variance between observation and state noise
            c = sd * math.sqrt(share * (1.0 - rho * rho))
            b = sd * math.sqrt(1.0 - share)
            starts.append(np.array([mean, b, c, rho]))
    return starts


def numerical_hessian(fun, x, rel_step: float = 1e-4) -> np.ndarray:
    """Central-difference Hessian with step ``rel_step * max(|x_i|, 1e-2)``."""
    x = np.asarray(x, dtype=float)
    n = x.size
    h = rel_step * np.maximum(np.abs(x), 1e-2)
    hess = np.empty((n, n))
    f0 = fun(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h[i]
        hess[i, i] = (fun(x + ei) - 2.0 * f0 + fun(x - ei)) / (h[i] * h[i])
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h[j]
            val = (fun(x + ei + ej) - fun(x + ei - ej) - fun(x - ei + ej) + fun(x - ei - ej)) / (4.0 * h[i] * h[j])
            hess[i, j] = hess[j, i] = val
    return hess


def _psd_inverse(hess: np.ndarray) -> tuple[np.ndarray, bool]:
    """Inverse of a symmetric Hessian projected onto the PSD cone.

    Returns the covariance and whether any curvature direction was non-positive.
    """
    sym = 0.5 * (hess + hess.T)
    vals, vecs = np.linalg.eigh(sym)
    ok = bool(np.all(vals > 0))
    inv = np.where(vals > 0, 1.0 / np.where(vals > 0, vals, 1.0), 0.0)
    cov = (vecs * inv) @ vecs.T
    return 0.5 * (cov + cov.T), not ok


def mle_fit(series, init: str = "zero", n_starts: int = 8) -> EstimationResult:
    """Maximum-likelihood estimate by bounded Nelder-Mead from spread starts."""
    y = _as_series(series, 40)
    sd = float(y.std())
    upper_sd = max(10.0 * sd, 1.0)
    span = max(abs(float(y.mean())), sd, 1.0) * 10.0
    bounds = [(-span, span), (MIN_SD, upper_sd), (MIN_SD, upper_sd), RHO_BOUNDS]

    def negll(theta):
        ll = _loglik(theta, y, init)
        return -ll if math.isfinite(ll) else 1e300

    best = None
    for x0 in _starting_points(y)[:n_starts]:
        x0 = np.clip(x0, [b[0] for b in bounds], [b[1] for b in bounds])
        res = minimize(
            negll, x0, method="Nelder-Mead", bounds=bounds,
            options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20000, "maxfev": 40000},
        )
        if not res.success:
            continue
        # restart once from the optimum; simplex search can stall on a ridge
        res = minimize(
            negll, res.x, method="Nelder-Mead", bounds=bounds,
            options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20000, "maxfev": 40000},
        )
        if res.success and (best is None or res.fun < best.fun):
            best = res
    if best is None or best.fun >= 1e300:
        raise EstimationError("no starting point converged")

    theta = best.x.copy()
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    on_bound = bool(np.any(theta - lo <= 1e-6 * np.maximum(1.0, np.abs(lo))) or np.any(hi - theta <= 1e-6))
    cov, indefinite = _psd_inverse(numerical_hessian(negll, theta))
    if on_bound or indefinite:
        warnings.warn(
            "likelihood optimum on or near a parameter bound; covariance is a PSD projection",
            BoundaryWarning,
            stacklevel=2,
        )
    return EstimationResult(
        theta_hat=Ar1Params.from_vector(theta),
        covariance=cov,
        loglik=-float(best.fun),
        boundary=on_bound or indefinite,
        n_obs=int(y.size),
    )


def calibrate_sdf(filtered_states, riskfree_log) -> tuple[float, float]:
    """Intercept and slope of minus log risk-free rates on filtered states.

    ``alpha0`` is the time average of ``-log r_f``; ``alpha1`` is the OLS slope of
    the demeaned target on the filtered state.
    """
    x = np.asarray(filtered_states, dtype=float).ravel()
    r = np.asarray(riskfree_log, dtype=float).ravel()
    if x.shape != r.shape:
        raise DataError(f"length mismatch: {x.size} states vs {r.size} rates")
    if x.size < 8:
        raise DataError("calibration needs at least 8 observations")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(r))):
        raise DataError("non-finite calibration input")
    target = -r
    alpha0 = float(target.mean())
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if not sxx > 0:
        raise DegenerateDataError("filtered states have zero variance; slope is not identified")
    alpha1 = float(xc @ (target - alpha0)) / sxx
    return alpha0, alpha1


def _cov_root(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        # singular covariance: symmetric square root keeps zero directions exact
        vals, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


def _block_rng(seed: int, block: int) -> np.random.Generator:
    # counter-based stream per block: independent of how blocks are scheduled
    return np.random.Generator(np.random.Philox(key=int(seed) & (2**64 - 1), counter=[0, 0, block, 0]))


def draw_gaussian(mean, cov, count: int, seed: int, block_size: int = 4096) -> np.ndarray:
    """``count`` draws from ``N(mean, cov)`` generated blockwise from a Philox stream."""
    mean = np.asarray(mean, dtype=float).ravel()
    cov = np.asarray(cov, dtype=float)
    root = _cov_root(cov)
    out = []
    done = 0
    block = 0
    while done < count:
        m = min(block_size, count - done)
        z = _block_rng(seed, block).standard_normal((block_size, mean.size))[:m]
        out.append(mean + z @ root.T)
        done += m
        block += 1
    return np.vstack(out) if out else np.empty((0, mean.size))


def kl_divergence(theta, theta_hat, cov) -> np.ndarray:
    """``0.5 (theta - theta_hat)' cov^+ (theta - theta_hat)`` row by row."""
    d = np.atleast_2d(np.asarray(theta, dtype=float) - np.asarray(theta_hat, dtype=float))
    prec = np.linalg.pinv(np.asarray(cov, dtype=float), rcond=1e-12, hermitian=True)
    return 0.5 * np.einsum("ij,jk,ik->i", d, prec, d)


def ensemble_weights(kl, rule: str = "kl") -> np.ndarray:
    """Model weights from divergences.

    ``kl`` gives ``KL_j / sum KL``, ``inverse_kl`` gives ``(1/KL_j) / sum(1/KL)``,
    ``uniform`` gives equal weights.
    """
    kl = np.asarray(kl, dtype=float)
    if rule not in WEIGHT_RULES:
        raise InvalidParameterError(f"weight rule must be one of {WEIGHT_RULES}, got {rule!r}")
    if rule == "uniform":
        return np.full(kl.size, 1.0 / kl.size)
    if rule == "kl":
        total = kl.sum()
        if not total > 0:
            raise ZeroDivergenceError("all divergences are zero; KL weights are undefined")
        return kl / total
    if np.any(~(kl > 0)):
        raise ZeroDivergenceError("a zero divergence makes inverse-KL weights undefined")
    inv = 1.0 / kl
    return inv / inv.sum()


@dataclass(frozen=True, eq=False)
class ModelEnsemble:
    draws: list
    kl_divergences: np.ndarray
    weights: np.ndarray
    raw: np.ndarray
    rule: str = "kl"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise InvalidParameterError("ensemble weights must be a probability vector")
        if any(not 0 < d.rho < 1 for d in self.draws):
            raise InvalidParameterError("ensemble draw with rho outside (0, 1)")

    def __len__(self):
        return len(self.draws)

    def to_dict(self) -> dict:
        return {
            "rule": self.rule,
            "draws": [dict(zip(PARAM_NAMES, d.as_vector().tolist())) for d in self.draws],
            "kl": self.kl_divergences.tolist(),
            "weights": self.weights.tolist(),
        }


def draw_ensemble(
    result: EstimationResult,
    count: int,
    seed: int,
    rule: str = "kl",
    max_attempts: int = 10**6,
    block_size: int = 4096,
) -> ModelEnsemble:
    """Draw ``count`` parameter vectors from ``N(theta_hat, cov)`` with ``0 < rho < 1``.

    Divergences use the raw draw; the Ar1Params built from it take ``|b|`` and
    ``|c|`` because only their squares enter the model.
    """
    if count < 1:
        raise InvalidParameterError("count must be positive")
    mean = result.theta_hat.as_vector()
    cov = result.covariance
    root = _cov_root(cov)
    accepted = []
    attempts = 0
    block = 0
    while len(accepted) < count:
        z = _block_rng(seed, block).standard_normal((block_size, 4))
        theta = mean + z @ root.T
        ok = (theta[:, 3] > 0) & (theta[:, 3] < 1) & (np.abs(theta[:, 2]) > 0)
        accepted.extend(theta[ok])
        attempts += block_size
        block += 1
        if attempts >= max_attempts and len(accepted) < 0.01 * attempts:
            raise InfeasibleRegionError(
                f"only {len(accepted)} of {attempts} draws have 0 < rho < 1"
            )
    raw = np.array(accepted[:count])
    kl = kl_divergence(raw, mean, cov)
    weights = ensemble_weights(kl, rule)
    draws = [Ar1Params(mean_level=t[0], rho=t[3], innov_sd=abs(t[2]), obs_sd=abs(t[1])) for t in raw]
    return ModelEnsemble(draws=draws, kl_divergences=kl, weights=weights, raw=raw, rule=rule)


def simulate_series(params: Ar1Params, length: int, seed: int, burn_in: int = 200) -> tuple[np.ndarray, np.ndarray]:
    """Simulated ``(dd_t, x_t)`` paths of the state-space model."""
    rng = np.random.Generator(np.random.Philox(seed))
    n = length + burn_in
    eps = rng.standard_normal(n)
    e = rng.standard_normal(n)
    x = np.empty(n)
    prev = 0.0
    for t in range(n):
        prev = params.rho * prev + params.innov_sd * eps[t]
        x[t] = prev
    y = params.mean_level + x + params.obs_sd * e
    return y[burn_in:], x[burn_in:]
