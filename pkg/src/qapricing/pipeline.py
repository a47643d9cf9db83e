"""Model construction and experiment steps shared by the CLI and tests."""

from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import ModelSpec, RunConfig, VolSpec
from .errors import DataError, QapError
from .estimation import (
    EstimationResult,
    ModelEnsemble,
    calibrate_sdf,
    draw_ensemble,
    filter_states,
    mle_fit,
)
from .io import read_series
from .markov import TABLE_AR1, TABLE_AR1_SE, Ar1Params, DiscreteMarkovChain
from .measurement import (
    DataState,
    ambiguity_scan,
    data_state,
    expectation,
    mixed_state,
    pricing_error_state,
    worst_outcome_operator,
)
from .models import (
    TABLE_ALPHA0,
    TABLE_ALPHA1,
    PricingSystem,
    SvSpec,
    UtilityKind,
    UtilitySpec,
    build_system,
    constant_vol_chain,
    rare_disaster_system,
    sdf_spec,
    solve_classical,
    sv_chain,
)
from .qsolver import (
    HhlConfig,
    QuantumState,
    circuit_hhl,
    condition_number,
    fidelity,
    hermitian_embed,
    ideal_hhl,
    prepare_state,
    sparsity,
)


def tagged(name: str, exc: QapError) -> QapError:
    """Same error class with the model name prefixed to the message."""
    try:
        out = type(exc)(f"{name}: {exc}")
    except TypeError:
        out = QapError(f"{name}: {exc}")
        out.exit_code = exc.exit_code
    return out


def run_ordered(fn, items, jobs: int = 1) -> list:
    """``[fn(x) for x in items]`` on up to ``jobs`` threads, results in input order."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# --- model construction ------------------------------------------------------


def model_system(
    spec: ModelSpec,
    ar1: Ar1Params,
    n_abscissa: int,
    alpha0: float = TABLE_ALPHA0,
    alpha1: float = TABLE_ALPHA1,
) -> tuple[DiscreteMarkovChain, PricingSystem]:
    """Chain and pricing system for one model at one parameter vector."""
    if spec.kind == "rare_disaster":
        return rare_disaster_system(spec.rare_disaster(n_abscissa))
    if spec.kind == "sv":
        sv = SvSpec.from_obs_sd(spec.pi_g, spec.gamma_g, ar1.obs_sd)
        utility = UtilitySpec(UtilityKind(spec.utility), spec.gamma)
        chain = sv_chain(ar1, n_abscissa, sv)
        return chain, build_system(chain, ar1, sdf_spec(utility, ar1, alpha0, alpha1, sv=sv), sv=sv)
    utility = UtilitySpec(UtilityKind(spec.kind), spec.gamma)
    chain = constant_vol_chain(ar1, n_abscissa)
    return chain, build_system(chain, ar1, sdf_spec(utility, ar1, alpha0, alpha1))


def price_dividend(spec: ModelSpec, system: PricingSystem) -> np.ndarray:
    """Price-dividend ratios from a solved system (cum-dividend for rare disasters)."""
    nu = solve_classical(system)
    return 1.0 + nu if spec.kind == "rare_disaster" else nu


def embedded_reference(nu_system: np.ndarray) -> QuantumState:
    """Unit state ``(0, nu)`` solving the Hermitian embedding of ``C nu = iota``."""
    nu_system = np.asarray(nu_system, dtype=float)
    return prepare_state(np.concatenate([np.zeros_like(nu_system), nu_system]))


@dataclass
class SolveResult:
    model: str
    n_states: int
    nu: np.ndarray
    states: dict = field(default_factory=dict)
    success_probability: float | None = None
    hhl: dict | None = None
    fidelities: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "n_states": self.n_states,
            "nu": self.nu,
            "states": {k: v.to_dict() for k, v in self.states.items()},
            "success_probability": self.success_probability,
            "hhl": self.hhl,
            "fidelities": self.fidelities,
        }


def solve_model(
    spec: ModelSpec,
    ar1: Ar1Params,
    n_abscissa: int,
    alpha0: float,
    alpha1: float,
    modes=("classical", "ideal", "circuit"),
    hhl: HhlConfig | None = None,
) -> SolveResult:
    """Solve one model classically and, on request, with ideal and circuit HHL."""
    try:
        _, system = model_system(spec, ar1, n_abscissa, alpha0, alpha1)
        nu_sys = solve_classical(system)
        nu = 1.0 + nu_sys if spec.kind == "rare_disaster" else nu_sys
        out = SolveResult(spec.name, system.n, nu)
        reference = embedded_reference(nu_sys)
        out.states["classical"] = reference
        herm = hermitian_embed(system.C, system.iota) if {"ideal", "circuit"} & set(modes) else None
        if "ideal" in modes:
            out.states["ideal"] = ideal_hhl(herm)
        if "circuit" in modes:
            cfg = hhl or HhlConfig()
            state, p_anc = circuit_hhl(herm, cfg)
            out.states["circuit"] = state
            out.success_probability = p_anc
            out.hhl = {
                "clock_qubits": cfg.clock_qubits,
                "evolution_time": cfg.evolution_time,
                "rotation_constant": cfg.rotation_constant,
            }
        names = list(out.states)
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                out.fidelities[f"{a}/{b}"] = fidelity(out.states[a], out.states[b])
        return out
    except QapError as exc:
        raise tagged(spec.name, exc) from exc


def diagnose_model(spec: ModelSpec, ar1: Ar1Params, n_abscissa: int, alpha0: float, alpha1: float) -> dict:
    """Sparsity and condition number of the Hermitian embedding HHL inverts.

    The embedding of ``C`` has the singular values of ``C`` twice over, so its
    condition number is that of ``C``; its sparsity is the larger of the row
    and column counts of ``C``.
    """
    try:
        _, system = model_system(spec, ar1, n_abscissa, alpha0, alpha1)
        herm = hermitian_embed(system.C, system.iota)
        return {
            "model": spec.name,
            "N": n_abscissa,
            "dim": herm.dim,
            "sparsity": sparsity(herm.matrix),
            "condition": condition_number(herm.matrix),
        }
    except QapError as exc:
        raise tagged(spec.name, exc) from exc


# --- run context ---------------------------------------------------------------


class RunContext:
    """Parameters, data and lazily built ensembles for one configured run."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self._lock = threading.RLock()
        self._fit: EstimationResult | None = None
        self._ensemble: ModelEnsemble | None = None
        self._error_cache: dict = {}
        self._data: DataState | None = None
        self.dates, self.dividends = read_series(cfg.dividends)

    # parameters
    def fit(self) -> EstimationResult:
        with self._lock:
            if self._fit is None:
                self._fit = mle_fit(self.dividends, init=self.cfg.kalman_init)
            return self._fit

    @property
    def ar1(self) -> Ar1Params:
        return TABLE_AR1 if self.cfg.parameter_source == "table" else self.fit().theta_hat

    @property
    def covariance(self) -> np.ndarray:
        if self.cfg.covariance_source == "table_se":
            return np.diag(np.asarray(TABLE_AR1_SE) ** 2)
        return self.fit().covariance

    def sampling_distribution(self) -> EstimationResult:
        """Centre ``ar1`` with the configured covariance, for ensemble draws."""
        fit = self.fit() if self.cfg.covariance_source == "estimate" else None
        return EstimationResult(
            theta_hat=self.ar1,
            covariance=self.covariance,
            loglik=fit.loglik if fit else 0.0,
            boundary=fit.boundary if fit else False,
            n_obs=fit.n_obs if fit else self.dividends.size,
        )

    def sdf_coefficients(self) -> tuple[float, float]:
        cfg = self.cfg
        if cfg.calibrate_sdf:
            return self.calibrated_sdf()
        if cfg.alpha0 is not None:
            return cfg.alpha0, cfg.alpha1
        return TABLE_ALPHA0, TABLE_ALPHA1

    def calibrated_sdf(self) -> tuple[float, float]:
        rf_dates, rf = read_series(self.cfg.riskfree)
        if np.any(rf <= 0):
            raise DataError(f"{self.cfg.riskfree}: risk-free rates must be positive to take logs")
        x = filter_states(self.ar1, self.dividends, init=self.cfg.kalman_init)
        index = {d: i for i, d in enumerate(self.dates)}
        pairs = [(index[d], r) for d, r in zip(rf_dates, rf) if d in index]
        if len(pairs) < 8:
            raise DataError("fewer than 8 dates shared by dividends and risk-free series")
        idx = np.array([i for i, _ in pairs])
        return calibrate_sdf(x[idx], np.log([r for _, r in pairs]))

    # ensemble
    def ensemble(self) -> ModelEnsemble:
        with self._lock:
            if self._ensemble is None:
                self._ensemble = draw_ensemble(
                    self.sampling_distribution(), self.cfg.ensemble_count, self.cfg.seed, self.cfg.weight_rule
                )
            return self._ensemble

    # measurement
    def data(self, n: int) -> DataState:
        if self.cfg.price_dividend is None:
            raise DataError("data.price_dividend is required for measurement and scans")
        _, pd = read_series(self.cfg.price_dividend)
        return data_state(pd, n)

    def error_state(self, spec: ModelSpec, mode: str | None = None) -> QuantumState:
        """Pricing-error state of a model against the data.

        ``ensemble`` superposes the error states of every parameter draw with the
        ensemble weights; rare-disaster models have no estimated parameters and
        always use the single calibrated solution.
        """
        mode = mode or self.cfg.error_states
        key = (spec.name, mode)
        if key in self._error_cache:
            return self._error_cache[key]
        a0, a1 = self.sdf_coefficients()
        n = self.cfg.n_abscissa
        try:
            if mode == "pure" or spec.kind == "rare_disaster":
                _, system = model_system(spec, self.ar1, n, a0, a1)
                nu = price_dividend(spec, system)
                state = pricing_error_state(self.data(nu.size), nu).state
            else:
                ens = self.ensemble()
                d = None
                errors = []
                for draw in ens.draws:
                    _, system = model_system(spec, draw, n, a0, a1)
                    nu = solve_classical(system)
                    d = d or self.data(nu.size)
                    errors.append(pricing_error_state(d, nu).state)
                state = mixed_state(errors, ens.weights, "superposed")
        except QapError as exc:
            raise tagged(spec.name, exc) from exc
        self._error_cache[key] = state
        return state


# --- experiments -----------------------------------------------------------------


def tail_table(ctx: RunContext, jobs: int = 1) -> list[dict]:
    """Worst-outcome expectation ``<e|P_0|e>`` per model row and volatility column."""
    cfg = ctx.cfg
    cells = []
    for row in cfg.tail_rows:
        spec = cfg.model(row)
        for vol in cfg.vol_specs:
            if spec.kind == "rare_disaster" and vol.stochastic:
                continue
            cells.append((spec, vol))

    def cell(item):
        spec, vol = item
        variant = spec if spec.kind == "rare_disaster" else spec.with_vol(vol)
        e = ctx.error_state(variant)
        return expectation(worst_outcome_operator(e.dim), e)

    # build the shared ensemble before fanning out
    if cfg.error_states == "ensemble":
        ctx.ensemble()
    values = run_ordered(cell, cells, jobs)
    table = {row: {v.name: None for v in cfg.vol_specs} for row in cfg.tail_rows}
    for (spec, vol), val in zip(cells, values):
        table[spec.name][vol.name] = val
    return [{"model": row, **table[row]} for row in cfg.tail_rows]


@dataclass
class ScanRun:
    benchmark: str
    target: str
    reference_p: float
    delta_range: tuple | None
    scan: object

    @property
    def label(self) -> str:
        which = "full" if self.delta_range is None else "restricted"
        return f"{self.target}_vs_{self.benchmark}_ref{self.reference_p:g}_{which}"


def scan_runs(ctx: RunContext, jobs: int = 1) -> list[ScanRun]:
    """Ambiguity scans for each target against the benchmark, per reference mix and delta range."""
    cfg = ctx.cfg
    bench_spec = cfg.model(cfg.scan_benchmark)
    names = [cfg.scan_benchmark, *[t for t in cfg.scan_targets if t != cfg.scan_benchmark]]
    if cfg.error_states == "ensemble":
        ctx.ensemble()
    states = dict(zip(names, run_ordered(lambda n: ctx.error_state(cfg.model(n)), names, jobs)))
    bench = states[bench_spec.name]
    d = ctx.data(bench.logical_dim)
    out = []
    for target in cfg.scan_targets:
        for ref in cfg.reference_p:
            for dr in cfg.delta_ranges:
                s = ambiguity_scan(
                    states[target], d, bench, reference_p=ref, grid_points=cfg.grid_points, delta_range=dr
                )
                out.append(ScanRun(cfg.scan_benchmark, target, ref, dr, s))
    return out


def restricted_delta() -> tuple[float, float]:
    return (3.0 * math.pi / 8.0, 5.0 * math.pi / 8.0)


__all__ = [
    "RunContext",
    "ScanRun",
    "SolveResult",
    "VolSpec",
    "diagnose_model",
    "embedded_reference",
    "model_system",
    "price_dividend",
    "restricted_delta",
    "run_ordered",
    "scan_runs",
    "solve_model",
    "tagged",
    "tail_table",
]
