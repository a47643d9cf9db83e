"""Command-line entry point: ``qapricing <command> [options]``."""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import platform
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import BACKEND
from .config import SOLVE_MODES, RunConfig, load_config
from .errors import ConfigError, QapError
from .estimation import PARAM_NAMES, filter_states, mle_fit
from .io import read_series, write_csv, write_json
from .markov import Ar1Params
from .pipeline import (
    RunContext,
    diagnose_model,
    model_system,
    run_ordered,
    scan_runs,
    solve_model,
    tagged,
    tail_table,
)
from .qsolver import HhlConfig

log = logging.getLogger("qapricing")


# --- commands ------------------------------------------------------------------


def cmd_estimate(cfg: RunConfig, jobs: int) -> list[Path]:
    dates, y = read_series(cfg.dividends)
    result = mle_fit(y, init=cfg.kalman_init)
    x_hat = filter_states(result.theta_hat, y, init=cfg.kalman_init)
    doc = {"source": str(cfg.dividends), "estimation": result.to_dict()}
    if cfg.riskfree is not None:
        ctx = RunContext(replace(cfg, parameter_source="estimate"))
        ctx._fit = result
        a0, a1 = ctx.calibrated_sdf()
        doc["sdf_calibration"] = {"alpha0": a0, "alpha1": a1, "source": str(cfg.riskfree)}
    out = cfg.output
    return [
        write_json(out / "estimation.json", doc),
        write_csv(out / "filtered_states.csv", ["date", "x_hat"], zip(dates, x_hat)),
    ]


def cmd_discretize(cfg: RunConfig, jobs: int) -> list[Path]:
    ctx = RunContext(cfg)
    a0, a1 = ctx.sdf_coefficients()

    def one(spec):
        try:
            chain, system = model_system(spec, ctx.ar1, cfg.n_abscissa, a0, a1)
        except QapError as exc:
            raise tagged(spec.name, exc) from exc
        doc = {
            "model": spec.name,
            "chain": json.loads(chain.to_json()),
            "system": json.loads(system.to_json()),
        }
        return write_json(cfg.output / "chains" / f"{spec.name}.json", doc)

    return run_ordered(one, cfg.models, jobs)


def _hhl_config(cfg: RunConfig) -> HhlConfig:
    return HhlConfig(
        clock_qubits=cfg.clock_qubits,
        evolution_time=cfg.evolution_time,
        rotation_constant=cfg.rotation_constant,
    )


def cmd_solve(cfg: RunConfig, jobs: int) -> list[Path]:
    ctx = RunContext(cfg)
    a0, a1 = ctx.sdf_coefficients()
    hhl = _hhl_config(cfg)

    def one(spec):
        res = solve_model(spec, ctx.ar1, cfg.n_abscissa, a0, a1, cfg.modes, hhl)
        write_json(cfg.output / "solve" / f"{spec.name}.json", res.to_dict())
        return res

    results = run_ordered(one, cfg.models, jobs)
    fid_rows, sol_rows = [], []
    for res in results:
        for pair, value in res.fidelities.items():
            a, b = pair.split("/")
            fid_rows.append((res.model, res.n_states, a, b, value, res.success_probability))
        sol_rows.extend((res.model, i, v) for i, v in enumerate(res.nu))
    paths = [cfg.output / "solve" / f"{m.name}.json" for m in cfg.models]
    paths.append(write_csv(cfg.output / "fidelity.csv",
                           ["model", "n_states", "mode_a", "mode_b", "fidelity", "success_probability"], fid_rows))
    paths.append(write_csv(cfg.output / "solutions.csv", ["model", "state", "nu"], sol_rows))
    return paths


def cmd_diagnose(cfg: RunConfig, jobs: int) -> list[Path]:
    ctx = RunContext(cfg)
    a0, a1 = ctx.sdf_coefficients()
    tasks = [(spec, n) for n in cfg.diagnose_abscissa for spec in cfg.models]
    rows = run_ordered(lambda t: diagnose_model(t[0], ctx.ar1, t[1], a0, a1), tasks, jobs)
    return [
        write_csv(
            cfg.output / "diagnostics.csv",
            ["model", "N", "dim", "sparsity", "condition"],
            [(r["model"], r["N"], r["dim"], r["sparsity"], r["condition"]) for r in rows],
        )
    ]


def cmd_measure(cfg: RunConfig, jobs: int) -> list[Path]:
    ctx = RunContext(cfg)
    table = tail_table(ctx, jobs)
    cols = [v.name for v in cfg.vol_specs]
    return [
        write_csv(cfg.output / "tail_table.csv", ["model", *cols], [[r["model"], *(r[c] for c in cols)] for r in table]),
        write_json(
            cfg.output / "tail_table.json",
            {"operator": "worst_outcome", "error_states": cfg.error_states, "rows": table},
        ),
    ]


def cmd_scan(cfg: RunConfig, jobs: int) -> list[Path]:
    ctx = RunContext(cfg)
    runs = scan_runs(ctx, jobs)
    paths, summary = [], []
    for run in runs:
        s = run.scan
        ref = np.full(s.p_grid.size, s.reference_level)
        paths.append(
            write_csv(
                cfg.output / "scan" / f"{run.label}.csv",
                ["p", "classical_loss", "envelope_low", "envelope_high", "reference_level"],
                zip(s.p_grid, s.classical_loss, s.envelope_low, s.envelope_high, ref),
            )
        )
        lo, hi = run.delta_range if run.delta_range is not None else (None, None)
        summary.append({
            "benchmark": run.benchmark,
            "target": run.target,
            "reference_p": run.reference_p,
            "delta_lo": lo,
            "delta_hi": hi,
            **s.summary(),
        })
    cols = ["benchmark", "target", "reference_p", "delta_lo", "delta_hi", "p_L", "p_C", "p_U",
            "clamped_low", "clamped_high", "empty", "multiple_crossings", "r_d", "r_B", "phase_gap"]
    paths.append(write_csv(cfg.output / "scan_summary.csv", cols, [[row[c] for c in cols] for row in summary]))
    paths.append(write_json(cfg.output / "scan_summary.json", {"error_states": cfg.error_states, "scans": summary}))
    return paths


def cmd_ensemble(cfg: RunConfig, jobs: int) -> list[Path]:
    ctx = RunContext(cfg)
    ens = ctx.ensemble()
    rows = [(i, *ens.raw[i], ens.kl_divergences[i], ens.weights[i]) for i in range(len(ens))]
    doc = {
        "count": len(ens),
        "seed": cfg.seed,
        "rule": ens.rule,
        "centre": dict(zip(PARAM_NAMES, ctx.ar1.as_vector())),
        "kl_mean": float(np.mean(ens.kl_divergences)),
        "kl_max": float(np.max(ens.kl_divergences)),
    }
    return [
        write_csv(cfg.output / "ensemble.csv", ["draw", *PARAM_NAMES, "kl", "weight"], rows),
        write_json(cfg.output / "ensemble.json", doc),
    ]


COMMANDS = {
    "estimate": (cmd_estimate, "fit the dividend-growth model and filter the latent state"),
    "discretize": (cmd_discretize, "write each model's Markov chain and pricing matrices"),
    "solve": (cmd_solve, "solve each model classically and with simulated HHL"),
    "diagnose": (cmd_diagnose, "sparsity and condition number of each model's HHL matrix"),
    "measure": (cmd_measure, "worst-outcome tail expectations per model and volatility setting"),
    "scan": (cmd_scan, "ambiguity scans of target models against the benchmark"),
    "ensemble": (cmd_ensemble, "draw the parameter ensemble and its weights"),
}


# --- argument handling -----------------------------------------------------------


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    # SUPPRESS keeps an option given before the subcommand from being reset after it
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="YAML run configuration (default: bundled default.yaml)")
    common.add_argument("--seed", type=_u64, help="ensemble seed (overrides ensemble.seed)")
    common.add_argument("--jobs", type=_positive, help="models processed concurrently (default 1)")
    common.add_argument("--out", help="output directory (overrides output)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(
        prog="qapricing",
        description="Discrete-state asset pricing with simulated quantum linear solvers and measurement.",
        parents=[common],
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, parents=[common])
        if name == "solve":
            p.add_argument("--modes", nargs="+", choices=SOLVE_MODES, help="solver modes to run")
            p.add_argument("--clock-qubits", type=_positive, help="QPE clock register size")
        if name == "scan":
            p.add_argument("--reference-p", type=float, nargs="+", help="reference mixture weights")
            p.add_argument("--error-states", choices=("ensemble", "pure"))
    return parser


GLOBAL_DEFAULTS = {"config": None, "seed": None, "jobs": 1, "out": None, "verbose": False}


def apply_overrides(cfg: RunConfig, ns: argparse.Namespace) -> RunConfig:
    changes = {}
    if ns.seed is not None:
        changes["seed"] = ns.seed
    if ns.out is not None:
        changes["output"] = Path(ns.out)
    if getattr(ns, "modes", None):
        changes["modes"] = tuple(ns.modes)
    if getattr(ns, "clock_qubits", None):
        changes["clock_qubits"] = ns.clock_qubits
    if getattr(ns, "reference_p", None):
        if not all(0.0 <= p <= 1.0 for p in ns.reference_p):
            raise ConfigError("--reference-p values must lie in [0, 1]")
        changes["reference_p"] = tuple(ns.reference_p)
    if getattr(ns, "error_states", None):
        changes["error_states"] = ns.error_states
    return replace(cfg, **changes) if changes else cfg


def _write_metadata(cfg: RunConfig, command: str, ns, paths) -> None:
    write_json(
        cfg.output / "metadata" / f"{command}.json",
        {
            "command": command,
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            "version": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "backend": BACKEND,
            "config": ns.config or "bundled:default.yaml",
            "seed": cfg.seed,
            "jobs": ns.jobs,
            "outputs": [str(p) for p in paths],
        },
    )


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    for key, value in GLOBAL_DEFAULTS.items():
        if not hasattr(ns, key):
            setattr(ns, key, value)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    fn, _ = COMMANDS[ns.command]
    try:
        cfg = apply_overrides(load_config(ns.config), ns)
        log.info("running %s with backend %s", ns.command, BACKEND)
        paths = fn(cfg, ns.jobs)
        _write_metadata(cfg, ns.command, ns, paths)
    except QapError as exc:
        print(f"qapricing {ns.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"qapricing {ns.command}: I/O error: {exc}", file=sys.stderr)
        return 1
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
