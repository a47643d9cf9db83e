"""Run configuration loaded from YAML."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import yaml

from .errors import ConfigError
from .estimation import WEIGHT_RULES
from .io import resolve_path
from .models import RareDisasterSpec

MODEL_KINDS = ("crra", "recursive_ies1", "sv", "rare_disaster")
SOLVE_MODES = ("classical", "ideal", "circuit")
SHOCK_SCHEMES = ("pm1",)
DEFAULT_CONFIG = "bundled:default.yaml"


@dataclass(frozen=True)
class VolSpec:
    """One column of the tail table: ``None`` values mean constant volatility."""

    name: str
    pi_g: float | None = None
    gamma_g: float | None = None

    @property
    def stochastic(self) -> bool:
        return self.pi_g is not None


@dataclass(frozen=True)
class ModelSpec:
    name: str
    kind: str
    gamma: float | None = None
    utility: str = "recursive_ies1"
    pi_g: float | None = None
    gamma_g: float | None = None
    rd: dict | None = None

    def rare_disaster(self, n_abscissa: int) -> RareDisasterSpec:
        opts = dict(self.rd or {})
        if opts.get("n_states") is None:
            # match the consumption models' state count
            opts["n_states"] = 2 * n_abscissa
        return RareDisasterSpec(**opts)

    def with_vol(self, vol: VolSpec) -> "ModelSpec":
        """Same preferences under the given volatility column."""
        if self.kind == "rare_disaster":
            raise ConfigError(f"{self.name}: rare-disaster model has no volatility variants")
        if not vol.stochastic:
            base = self.utility if self.kind == "sv" else self.kind
            return replace(self, name=f"{self.name}@{vol.name}", kind=base, pi_g=None, gamma_g=None)
        utility = self.utility if self.kind == "sv" else self.kind
        return replace(self, name=f"{self.name}@{vol.name}", kind="sv", utility=utility,
                       pi_g=vol.pi_g, gamma_g=vol.gamma_g)


@dataclass(frozen=True)
class RunConfig:
    dividends: Path
    riskfree: Path | None
    price_dividend: Path | None
    models: tuple[ModelSpec, ...]
    parameter_source: str = "table"
    covariance_source: str = "estimate"
    kalman_init: str = "zero"
    alpha0: float | None = None
    alpha1: float | None = None
    calibrate_sdf: bool = False
    n_abscissa: int = 4
    shock_scheme: str = "pm1"
    clock_qubits: int = 4
    modes: tuple[str, ...] = SOLVE_MODES
    evolution_time: float | None = None
    rotation_constant: float | None = None
    scan_benchmark: str = "crra_g10"
    scan_targets: tuple[str, ...] = ("ies1_g2",)
    reference_p: tuple[float, ...] = (0.1, 0.5, 0.9)
    delta_ranges: tuple = (None,)
    grid_points: int = 2001
    error_states: str = "ensemble"
    ensemble_count: int = 1000
    seed: int = 0
    weight_rule: str = "kl"
    tail_rows: tuple[str, ...] = ()
    vol_specs: tuple[VolSpec, ...] = (VolSpec("without_sv"),)
    diagnose_abscissa: tuple[int, ...] = (32, 64)
    output: Path = field(default_factory=lambda: Path("out"))

    def model(self, name: str) -> ModelSpec:
        for m in self.models:
            if m.name == name:
                return m
        raise ConfigError(f"unknown model {name!r}; configured: {[m.name for m in self.models]}")


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def _opt_float(v, key):
    if v is None:
        return None
    try:
        return float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be a number, got {v!r}") from None


def _parse_model(doc: dict) -> ModelSpec:
    _require(isinstance(doc, dict), f"model entries must be mappings, got {doc!r}")
    name = doc.get("name")
    kind = doc.get("kind")
    _require(isinstance(name, str) and name, "every model needs a name")
    _require(kind in MODEL_KINDS, f"{name}: kind must be one of {MODEL_KINDS}, got {kind!r}")
    gamma = _opt_float(doc.get("gamma"), f"{name}.gamma")
    if kind != "rare_disaster":
        _require(gamma is not None and gamma > 0, f"{name}: gamma must be positive")
    utility = doc.get("utility", "recursive_ies1")
    _require(utility in ("crra", "recursive_ies1"), f"{name}: utility must be crra or recursive_ies1")
    sv = doc.get("sv") or {}
    pi_g = _opt_float(sv.get("pi_g"), f"{name}.sv.pi_g")
    gamma_g = _opt_float(sv.get("gamma_g"), f"{name}.sv.gamma_g")
    if kind == "sv":
        _require(pi_g is not None and gamma_g is not None, f"{name}: sv models need sv.pi_g and sv.gamma_g")
    rd = doc.get("rd")
    if rd is not None:
        _require(isinstance(rd, dict), f"{name}: rd must be a mapping")
        allowed = {"delta", "gamma", "g_d", "p_dis", "B_recov", "phi_h", "sigma_h", "n_states"}
        unknown = set(rd) - allowed
        _require(not unknown, f"{name}: unknown rd keys {sorted(unknown)}")
    spec = ModelSpec(name=name, kind=kind, gamma=gamma, utility=utility, pi_g=pi_g, gamma_g=gamma_g,
                     rd=dict(rd) if rd else None)
    if kind == "rare_disaster":
        try:
            spec.rare_disaster(4)
        except Exception as exc:
            raise ConfigError(f"{name}: {exc}") from exc
    return spec


def _delta_range(v):
    if v is None or v == "full":
        return None
    _require(isinstance(v, (list, tuple)) and len(v) == 2, f"delta range must be [lo, hi] or 'full', got {v!r}")
    lo, hi = (_opt_float(x, "scan.delta_ranges") for x in v)
    _require(lo <= hi, "delta range needs lo <= hi")
    return (lo, hi)


def parse_config(doc: dict, base: Path | None = None) -> RunConfig:
    _require(isinstance(doc, dict), "config root must be a mapping")
    data = doc.get("data") or {}
    _require("dividends" in data, "data.dividends is required")

    def path_of(key, required):
        v = data.get(key)
        if v is None:
            _require(not required, f"data.{key} is required")
            return None
        p = resolve_path(v, base)
        _require(p.exists(), f"data.{key}: {p} does not exist")
        return p

    params = doc.get("parameters") or {}
    sdf = doc.get("sdf") or {}
    disc = doc.get("discretization") or {}
    hhl = doc.get("hhl") or {}
    scan = doc.get("scan") or {}
    ens = doc.get("ensemble") or {}
    measure = doc.get("measure") or {}
    diag = doc.get("diagnose") or {}

    models = tuple(_parse_model(m) for m in doc.get("models") or [])
    _require(models, "at least one model is required")
    names = [m.name for m in models]
    _require(len(set(names)) == len(names), "model names must be unique")

    modes = hhl.get("modes", list(SOLVE_MODES))
    if isinstance(modes, str):
        modes = [modes]
    _require(all(m in SOLVE_MODES for m in modes) and modes, f"hhl.modes must be drawn from {SOLVE_MODES}")

    vols = []
    for v in measure.get("vol_specs") or [{"name": "without_sv"}]:
        _require(isinstance(v, dict) and isinstance(v.get("name"), str), f"vol spec needs a name, got {v!r}")
        vols.append(VolSpec(v["name"], _opt_float(v.get("pi_g"), "pi_g"), _opt_float(v.get("gamma_g"), "gamma_g")))

    cfg = RunConfig(
        dividends=path_of("dividends", True),
        riskfree=path_of("riskfree", False),
        price_dividend=path_of("price_dividend", False),
        models=models,
        parameter_source=params.get("source", "table"),
        covariance_source=params.get("covariance", "estimate"),
        kalman_init=params.get("kalman_init", "zero"),
        alpha0=_opt_float(sdf.get("alpha0"), "sdf.alpha0"),
        alpha1=_opt_float(sdf.get("alpha1"), "sdf.alpha1"),
        calibrate_sdf=bool(sdf.get("calibrate", False)),
        n_abscissa=int(disc.get("n_abscissa", 4)),
        shock_scheme=disc.get("shock_scheme", "pm1"),
        clock_qubits=int(hhl.get("clock_qubits", 4)),
        modes=tuple(modes),
        evolution_time=_opt_float(hhl.get("evolution_time"), "hhl.evolution_time"),
        rotation_constant=_opt_float(hhl.get("rotation_constant"), "hhl.rotation_constant"),
        scan_benchmark=scan.get("benchmark", "crra_g10"),
        scan_targets=tuple(scan.get("targets", ["ies1_g2"])),
        reference_p=tuple(float(p) for p in scan.get("reference_p", [0.5])),
        delta_ranges=tuple(_delta_range(v) for v in scan.get("delta_ranges", [None])),
        grid_points=int(scan.get("grid_points", 2001)),
        error_states=scan.get("error_states", "ensemble"),
        ensemble_count=int(ens.get("count", 1000)),
        seed=int(ens.get("seed", 0)),
        weight_rule=ens.get("weight_rule", "kl"),
        tail_rows=tuple(measure.get("rows", names)),
        vol_specs=tuple(vols),
        diagnose_abscissa=tuple(int(n) for n in diag.get("n_abscissa", [32, 64])),
        output=resolve_path(doc.get("output", "out"), base),
    )
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    _require(cfg.parameter_source in ("table", "estimate"), "parameters.source must be table or estimate")
    _require(cfg.covariance_source in ("estimate", "table_se"), "parameters.covariance must be estimate or table_se")
    _require(cfg.kalman_init in ("zero", "stationary"), "parameters.kalman_init must be zero or stationary")
    _require(cfg.n_abscissa >= 2, "discretization.n_abscissa must be >= 2")
    _require(cfg.shock_scheme in SHOCK_SCHEMES, f"discretization.shock_scheme must be one of {SHOCK_SCHEMES}")
    _require(cfg.clock_qubits >= 1, "hhl.clock_qubits must be >= 1")
    _require(cfg.grid_points >= 3, "scan.grid_points must be >= 3")
    _require(all(0.0 <= p <= 1.0 for p in cfg.reference_p), "scan.reference_p values must lie in [0, 1]")
    _require(cfg.error_states in ("ensemble", "pure"), "scan.error_states must be ensemble or pure")
    _require(cfg.ensemble_count >= 1, "ensemble.count must be positive")
    _require(0 <= cfg.seed < 2**64, "ensemble.seed must be an unsigned 64-bit integer")
    _require(cfg.weight_rule in WEIGHT_RULES, f"ensemble.weight_rule must be one of {WEIGHT_RULES}")
    _require(all(n >= 2 for n in cfg.diagnose_abscissa), "diagnose.n_abscissa values must be >= 2")
    _require((cfg.alpha0 is None) == (cfg.alpha1 is None), "sdf.alpha0 and sdf.alpha1 go together")
    if cfg.calibrate_sdf:
        _require(cfg.riskfree is not None, "sdf.calibrate needs data.riskfree")
    for v in cfg.vol_specs:
        _require((v.pi_g is None) == (v.gamma_g is None), f"vol spec {v.name}: give both pi_g and gamma_g or neither")
    names = {m.name for m in cfg.models}
    for key in (cfg.scan_benchmark, *cfg.scan_targets, *cfg.tail_rows):
        _require(key in names, f"unknown model {key!r} referenced in config")
    for lo_hi in cfg.delta_ranges:
        _require(lo_hi is None or all(math.isfinite(x) for x in lo_hi), "delta range must be finite")


def load_config(path=None) -> RunConfig:
    """Read a YAML config; ``None`` loads the bundled default."""
    if path is None or str(path) == DEFAULT_CONFIG:
        text = (resources.files("qapricing") / "data" / "default.yaml").read_text()
        base = Path.cwd()
        where = DEFAULT_CONFIG
    else:
        p = Path(path)
        _require(p.exists(), f"config file {p} not found")
        text = p.read_text()
        base = p.resolve().parent
        where = str(p)
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{where}: invalid YAML: {exc}") from exc
    return parse_config(doc or {}, base)
