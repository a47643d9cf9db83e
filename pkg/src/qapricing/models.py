"""Discrete pricing systems for the consumption-based and rare-disaster models.

A system is the fixed point ``nu = (Psi o Pi) nu + b`` with ``Psi = H o M``,
written as ``A nu = b`` with ``A = I - H o M o Pi``.  ``C = B^-1 A`` rescales the
rows so the right-hand side becomes the uniform unit vector.
"""

from __future__ import annotations

import enum
import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.stats import norm

from ._backend import kernels
from .errors import (
    ConvergenceError,
    DegenerateSystemError,
    DimensionError,
    DomainError,
    InvalidParameterError,
    NoSolutionError,
    SingularityError,
)
from .markov import (
    Ar1Params,
    DiscreteMarkovChain,
    discretize_ar1,
    ergodic_distribution,
    kron_extend,
    quadrature_row,
)

# SDF intercept and slope calibrated from 3-month T-bill rates.
TABLE_ALPHA0 = -0.8974
TABLE_ALPHA1 = 1.2038


class UtilityKind(enum.Enum):
    CRRA = "crra"
    RECURSIVE_IES_ONE = "recursive_ies1"


@dataclass(frozen=True)
class UtilitySpec:
    kind: UtilityKind
    gamma: float
    beta: float = 0.99

    def __post_init__(self):
        object.__setattr__(self, "kind", UtilityKind(self.kind))
        if not self.gamma > 0:
            raise InvalidParameterError(f"gamma must be > 0, got {self.gamma}")
        if not 0 < self.beta < 1:
            raise InvalidParameterError(f"beta must lie in (0, 1), got {self.beta}")


@dataclass(frozen=True)
class SdfSpec:
    """Log SDF ``alpha0 + alpha1 x_t + xi w_{t+1}``.

    ``xi_regimes`` carries the (good, bad) loadings of a stochastic-volatility
    model; it is ignored by constant-volatility systems.
    """

    alpha0: float
    alpha1: float
    xi: float
    xi_regimes: tuple[float, float] | None = None

    def __post_init__(self):
        vals = [self.alpha0, self.alpha1, self.xi] + list(self.xi_regimes or ())
        if not all(math.isfinite(v) for v in vals):
            raise InvalidParameterError(f"non-finite SDF parameters: {vals}")


@dataclass(frozen=True)
class SvSpec:
    """Two-regime volatility: ``b_G = gamma_g b`` and ``b_B = b (1 - gamma_g pi_g) / (1 - pi_g)``."""

    pi_g: float
    gamma_g: float
    b_g: float
    b_b: float

    @classmethod
    def from_obs_sd(cls, pi_g: float, gamma_g: float, b: float) -> "SvSpec":
        if not 0 < pi_g < 1:
            raise DomainError(f"pi_g must lie in (0, 1), got {pi_g}")
        if not 0 < gamma_g <= 1:
            raise DomainError(f"gamma_g must lie in (0, 1], got {gamma_g}")
        return cls(pi_g, gamma_g, gamma_g * b, b * (1.0 - gamma_g * pi_g) / (1.0 - pi_g))

    @property
    def regime_sd(self) -> tuple[float, float]:
        return (self.b_g, self.b_b)


def xi_from_utility(spec: UtilitySpec, ar1: Ar1Params, obs_sd: float | None = None) -> float:
    """Loading of the log SDF on the dividend shock.

    CRRA gives ``-b gamma``; recursive utility with unit IES gives
    ``c beta / (1 - beta rho) - (c beta / (1 - beta rho) + b) gamma``.  ``obs_sd``
    overrides ``b`` (used for regime-specific volatilities).
    """
    b = ar1.obs_sd if obs_sd is None else obs_sd
    if spec.kind is UtilityKind.CRRA:
        return -b * spec.gamma
    br = spec.beta * ar1.rho
    if br >= 1.0:
        raise SingularityError(f"beta * rho = {br} >= 1")
    lr = ar1.innov_sd * spec.beta / (1.0 - br)
    return lr - (lr + b) * spec.gamma


def sdf_spec(
    utility: UtilitySpec,
    ar1: Ar1Params,
    alpha0: float = TABLE_ALPHA0,
    alpha1: float = TABLE_ALPHA1,
    sv: SvSpec | None = None,
) -> SdfSpec:
    xi = xi_from_utility(utility, ar1)
    regimes = None
    if sv is not None:
        regimes = tuple(xi_from_utility(utility, ar1, b) for b in sv.regime_sd)
    return SdfSpec(alpha0, alpha1, xi, regimes)


@dataclass(frozen=True, eq=False)
class PricingSystem:
    H: np.ndarray
    M: np.ndarray
    Pi: np.ndarray
    A: np.ndarray
    b: np.ndarray
    Bdiag: np.ndarray
    C: np.ndarray

    @property
    def n(self) -> int:
        return self.b.shape[0]

    @property
    def Psi(self) -> np.ndarray:
        return self.H * self.M

    @property
    def iota(self) -> np.ndarray:
        """Unit-norm right-hand side of ``C nu = iota``."""
        return self.b / self.Bdiag

    def to_json(self) -> str:
        return json.dumps({k: getattr(self, k).tolist() for k in ("H", "M", "Pi", "A", "b", "Bdiag", "C")})


def assemble_system(H, M, Pi) -> PricingSystem:
    """Form ``A, b, B, C`` from the three component matrices."""
    H = np.asarray(H, dtype=float)
    M = np.asarray(M, dtype=float)
    Pi = np.asarray(Pi, dtype=float)
    if not (H.ndim == 2 and H.shape[0] == H.shape[1] and H.shape == M.shape == Pi.shape):
        raise DimensionError(f"H, M, Pi must be equal square shapes: {H.shape}, {M.shape}, {Pi.shape}")
    n = H.shape[0]
    T = H * M * Pi
    A = np.eye(n) - T
    b = T.sum(axis=1)
    if np.any(~(b > 0)):
        raise DegenerateSystemError("row sums of Psi o Pi must be strictly positive (B not invertible)")
    Bdiag = math.sqrt(n) * b
    C = A / Bdiag[:, None]
    return PricingSystem(H=H, M=M, Pi=Pi, A=A, b=b, Bdiag=Bdiag, C=C)


def constant_vol_chain(ar1: Ar1Params, n_abscissa: int) -> DiscreteMarkovChain:
    """Quadrature chain for x extended with a +/- one-s.d. shock of probability 1/2 each."""
    return kron_extend(discretize_ar1(ar1, n_abscissa), [1.0, -1.0], [0.5, 0.5])


def sv_chain(ar1: Ar1Params, n_abscissa: int, sv: SvSpec) -> DiscreteMarkovChain:
    """Quadrature chain extended with the regime block ``[pi_G, 1 - pi_G]``."""
    return kron_extend(discretize_ar1(ar1, n_abscissa), [1.0, -1.0], [sv.pi_g, 1.0 - sv.pi_g])


def build_system(
    chain: DiscreteMarkovChain, ar1: Ar1Params, sdf: SdfSpec, sv: SvSpec | None = None
) -> PricingSystem:
    """Assemble H, M and Pi for a shock-extended chain.

    Entry ``((i, s), (j, s'))`` of H is ``exp(a + x_i) exp(w_s' b_s)`` and of M is
    ``exp(alpha0 + alpha1 x_i) exp(w_s' xi_s)``: the current abscissa and row
    block ``s`` pick the level and the volatility regime, the column's shock
    value ``w_s'`` picks the sign.  Without SV every row block uses ``b`` and
    ``xi``.
    """
    if chain.shock is None:
        raise DimensionError("build_system needs a shock-extended chain (see kron_extend)")
    n = chain.n_states
    k = chain.n_shocks
    x = chain.abscissa
    w = chain.shock
    if sv is None:
        b_row = np.full(n, ar1.obs_sd)
        xi_row = np.full(n, sdf.xi)
    else:
        if k != 2:
            raise DimensionError("stochastic volatility needs a two-state regime extension")
        xi_g, xi_b = sdf.xi_regimes if sdf.xi_regimes is not None else (sdf.xi, sdf.xi)
        regime = np.arange(n) % 2
        b_row = np.where(regime == 0, sv.b_g, sv.b_b)
        xi_row = np.where(regime == 0, xi_g, xi_b)
    H = np.exp(ar1.mean_level + x)[:, None] * np.exp(np.outer(b_row, w))
    M = np.exp(sdf.alpha0 + sdf.alpha1 * x)[:, None] * np.exp(np.outer(xi_row, w))
    return assemble_system(H, M, chain.transition)


def solve_classical(sys: PricingSystem) -> np.ndarray:
    """Solve ``A nu = b`` by LU with partial pivoting."""
    A = sys.A
    scale = float(np.max(np.abs(A)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=True)
    if np.min(np.abs(np.diag(lu))) < 1e-14 * scale:
        raise SingularityError("A is numerically singular")
    nu = scipy.linalg.lu_solve((lu, piv), sys.b)
    if not np.all(np.isfinite(nu)):
        raise SingularityError("non-finite solution")
    resid = np.max(np.abs(A @ nu - sys.b))
    if resid >= 1e-10 * max(np.max(np.abs(sys.b)), 1.0):
        raise SingularityError(f"solution residual {resid:.3e} too large")
    return nu


def nystrom_extend(
    sys: PricingSystem,
    chain: DiscreteMarkovChain,
    ar1: Ar1Params,
    sdf: SdfSpec,
    x: float,
    nu: np.ndarray | None = None,
    row_shock: int = 0,
    sv: SvSpec | None = None,
) -> float:
    """Off-grid price-dividend ratio ``sum_k (1 + nu_k) psi(y_k, x) pi_k(x)``.

    ``row_shock`` selects the current regime block; it only matters under SV.
    """
    if not math.isfinite(x):
        raise DomainError("x must be finite")
    if nu is None:
        nu = solve_classical(sys)
    k = chain.n_shocks
    nodes = chain.base_abscissa
    weights = chain.base_weights
    pi_x = np.kron(quadrature_row(x, nodes, weights, ar1), chain.shock_probs)
    if sv is None:
        b_s, xi_s = ar1.obs_sd, sdf.xi
    else:
        xi_pair = sdf.xi_regimes if sdf.xi_regimes is not None else (sdf.xi, sdf.xi)
        b_s, xi_s = sv.regime_sd[row_shock % k], xi_pair[row_shock % k]
    w = chain.shock
    psi = np.exp(ar1.mean_level + x + sdf.alpha0 + sdf.alpha1 * x) * np.exp(w * (b_s + xi_s))
    return float(np.sum((1.0 + nu) * psi * pi_x))


def long_run_eigenpair(M, Pi, max_iter: int = 10**6, tol: float = 1e-13):
    """Perron root and unit-norm positive eigenvector of ``M o Pi``."""
    K = np.asarray(M, dtype=float) * np.asarray(Pi, dtype=float)
    n = K.shape[0]
    v, rho, it, ok = kernels.power_iterate(K, np.full(n, 1.0 / math.sqrt(n)), tol, max_iter, 2)
    if not ok:
        raise ConvergenceError(f"power iteration did not converge in {it} steps")
    phi = np.asarray(v)
    return float(rho), phi / np.linalg.norm(phi)


@dataclass(frozen=True)
class RareDisasterSpec:
    delta: float = 0.0657
    gamma: float = 4.0
    g_d: float = 0.025
    p_dis: float = 0.0363
    B_recov: float = 0.66
    phi_h: float = 0.13
    sigma_h: float | None = None
    n_states: int = 11

    def __post_init__(self):
        for name in ("delta", "gamma", "g_d", "p_dis", "B_recov", "phi_h"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidParameterError(f"{name} must be finite")
        if not 0 < self.p_dis < 1:
            raise DomainError("disaster probability must lie in (0, 1)")
        if not 0 < self.B_recov <= 1:
            raise DomainError("recovery rate must lie in (0, 1]")
        if not self.phi_h > 0:
            raise DomainError("phi_h must be > 0")
        if self.sigma_h is None:
            object.__setattr__(self, "sigma_h", 0.1 * self.h_star)
        if not self.sigma_h > 0:
            raise DomainError("sigma_h must be > 0")

    @property
    def h_star(self) -> float:
        return compute_h_star(self.p_dis, self.B_recov, self.gamma)

    @property
    def growth_discount(self) -> float:
        return math.exp(-self.delta + self.g_d)


def compute_h_star(p_dis: float, B_recov: float, gamma: float) -> float:
    """Resilience constant ``p (B^(1 - gamma) - 1)``."""
    if not B_recov > 0:
        raise DomainError("recovery rate must be > 0")
    h = p_dis * (B_recov ** (1.0 - gamma) - 1.0)
    if not math.isfinite(h):
        raise InvalidParameterError("H* is not finite")
    return h


def resilience_chain(spec: RareDisasterSpec) -> DiscreteMarkovChain:
    """Equally spaced grid for the resilience deviation with Tauchen binning.

    The grid spans three stationary s.d. of the linearised process (AR
    coefficient ``exp(-phi_h)``); the conditional law is Gaussian with the
    nonlinear mean ``(1 + H*) / (1 + H* + h) exp(-phi_h) h`` and s.d. ``sigma_h``.
    """
    n = spec.n_states
    if n < 3:
        raise DomainError("rare-disaster grid needs at least 3 states")
    ar = math.exp(-spec.phi_h)
    sd_stat = spec.sigma_h / math.sqrt(1.0 - ar * ar)
    grid = np.linspace(-3.0 * sd_stat, 3.0 * sd_stat, n)
    hs = spec.h_star
    if np.any(1.0 + hs + grid <= 0):
        raise DomainError("resilience grid reaches 1 + H <= 0")
    mean = (1.0 + hs) / (1.0 + hs + grid) * ar * grid
    edges = 0.5 * (grid[1:] + grid[:-1])
    cdf = norm.cdf((edges[None, :] - mean[:, None]) / spec.sigma_h)
    cdf = np.hstack([np.zeros((n, 1)), cdf, np.ones((n, 1))])
    trans = np.diff(cdf, axis=1)
    trans = np.clip(trans, 0.0, None)
    trans /= trans.sum(axis=1, keepdims=True)
    placeholder = DiscreteMarkovChain(abscissa=grid, transition=trans, weights=np.full(n, 1.0 / n))
    return DiscreteMarkovChain(abscissa=grid, transition=trans, weights=ergodic_distribution(placeholder))


def rare_disaster_system(spec: RareDisasterSpec) -> tuple[DiscreteMarkovChain, PricingSystem]:
    """Pricing system whose solution is the ex-dividend ratio ``nu - 1``.

    With ``T = exp(-delta + g_D) diag(1 + h) Pi`` the cum-dividend recursion
    ``nu = 1 + T nu`` becomes ``nu' = T (1 + nu')`` for ``nu' = nu - 1``, the
    same form as the consumption models, so HHL and diagnostics apply as is.
    """
    chain = resilience_chain(spec)
    n = chain.n_states
    H = np.repeat((1.0 + chain.abscissa)[:, None], n, axis=1)
    M = np.full((n, n), spec.growth_discount)
    T = H * M * chain.transition
    radius = float(np.max(np.abs(np.linalg.eigvals(T))))
    if radius >= 1.0:
        raise NoSolutionError(f"spectral radius {radius:.6f} >= 1: price-dividend ratio diverges")
    return chain, assemble_system(H, M, chain.transition)


def solve_rare_disaster(spec: RareDisasterSpec) -> tuple[DiscreteMarkovChain, np.ndarray]:
    """Cum-dividend price-dividend ratio on the resilience grid."""
    chain, sys = rare_disaster_system(spec)
    nu = 1.0 + solve_classical(sys)
    if np.any(nu <= 0):
        raise NoSolutionError("non-positive price-dividend ratio")
    return chain, nu
