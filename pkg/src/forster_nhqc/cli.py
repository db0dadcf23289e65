"""Command-line front end: ``forster-nhqc <command> --config FILE --out DIR``.

Commands
--------
design      pulse CSV and a summary with omega_max, T, eta and q_s
simulate    fidelity, population and phase traces for one scenario
sweep       one row per grid point of epsilon, delta_prime, defect or gamma
montecarlo  AWGN realisations over consecutive seeds
truthtable  4x4 output populations over computational inputs
phases      dynamic and geometric phase ledger of the gate eigenvector

Exit codes are 0 on success, 2 for configuration errors and 3 for
numerical failures.  Every command writes ``<command>.json`` next to its
CSV files with ``config_hash``, ``versions``, ``wall_time`` and ``rows``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__, atom
from .config import ConfigError, ScenarioConfig, SweepSpec, load_config, parse_input_state
from .dynamics import (ConvergenceError, TraceDriftError, add_awgn, certify)
from .metrics import (FidelityTrace, accumulated_phases, effective_state_trace, gate_fidelity,
                      simulated_phases, state_fidelity, write_columns_csv, write_phase_csv)
from .operators import NotHermitianError
from .pulses import design_trajectory, control_fields, sensitivity_qs, write_pulse_csv
from . import simulation as sim

log = logging.getLogger("forster_nhqc")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
NUMERICAL_ERRORS = (ConvergenceError, TraceDriftError, NotHermitianError, FloatingPointError,
                    np.linalg.LinAlgError)
COMP_LABELS = ("00", "01", "10", "11")


# ---------------------------------------------------------------------------
# Scenario evaluation (importable, picklable)
# ---------------------------------------------------------------------------


def _stage(cfg: ScenarioConfig) -> str:
    return "effective" if cfg.frame == "effective" else "full"


def build_pulse(cfg: ScenarioConfig):
    T, _, _ = cfg.resolved()
    return control_fields(design_trajectory(T=T, eta=cfg.eta, n_points=cfg.n_points))


def evaluate(cfg: ScenarioConfig, pulse=None) -> dict:
    """Final figures of merit of one scenario.

    Closed runs report the average gate fidelity; runs with ``gamma > 0``
    go through the Lindblad equation and add the fidelity of
    ``input_state`` and the truth-table minimum.
    """
    params = cfg.model_params()
    pulse = build_pulse(cfg) if pulse is None else pulse
    target = cfg.target()
    stage = _stage(cfg)

    if params.gamma > 0:
        def run(pc):
            return sim.open_system_channel(params, pulse, stage=stage, config=pc)
        channel = run(cfg.propagation_config())
        result = {"fidelity": channel.average_fidelity(target)}
        if cfg.certify:
            _, delta = certify(lambda pc: run(pc).average_fidelity(target),
                               cfg.propagation_config(), channel.n_steps)
            result["certificate"] = delta
        c = parse_input_state(cfg.input_state)
        result["state_fidelity"] = channel.state_fidelity(c, target @ c)
        result["truth_min"] = channel.truth_table().min_success(target)
        return result

    def fid(pc):
        return sim.gate_fidelity_at_T(params, pulse, target, stage=stage, config=pc)

    result = {"fidelity": fid(cfg.propagation_config())}
    if cfg.certify:
        n = _reference_steps(cfg, params, pulse, stage)
        _, result["certificate"] = certify(fid, cfg.propagation_config(), n)
    return result


def _reference_steps(cfg, params, pulse, stage) -> int:
    from .dynamics import default_step_count
    src, _ = sim._frame(stage, params, pulse)
    return cfg.steps or default_step_count(src, 0.0, params.T, cfg.propagation_config())


def _apply_channel(cfg: ScenarioConfig, channel: str, value: float) -> ScenarioConfig:
    return replace(cfg, **{channel: float(value)})


def _sweep_task(args) -> dict:
    index, cfg, channel, value = args
    t0 = time.perf_counter()
    row = {"index": index, "channel": channel, "value": float(value), "seed": cfg.seed}
    try:
        row.update(evaluate(_apply_channel(cfg, channel, value)))
        row["status"] = "ok"
    except NUMERICAL_ERRORS as exc:
        row.update(status="failed", error=f"{type(exc).__name__}: {exc}")
    row["runtime"] = time.perf_counter() - t0
    return row


def _montecarlo_task(args) -> dict:
    index, cfg, seed = args
    t0 = time.perf_counter()
    row = {"index": index, "seed": int(seed), "snr": cfg.snr}
    try:
        noisy = add_awgn(build_pulse(cfg), cfg.snr, int(seed), unit=cfg.snr_unit)
        res = evaluate(cfg, pulse=noisy)
        row.update(res, infidelity=1.0 - res["fidelity"], status="ok")
    except NUMERICAL_ERRORS as exc:
        row.update(status="failed", error=f"{type(exc).__name__}: {exc}")
    row["runtime"] = time.perf_counter() - t0
    return row


def run_tasks(fn, tasks: list, jobs: int) -> list[dict]:
    """Run `fn` over `tasks`, in-process for one job; rows come back in task order."""
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        rows = list(pool.map(fn, tasks))
    return sorted(rows, key=lambda r: r["index"])


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def versions() -> dict:
    return {"forster_nhqc": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


def write_manifest(out: Path, command: str, cfg: ScenarioConfig, t0: float, rows: list,
                   summary: dict | None = None) -> Path:
    manifest = {
        "command": command,
        "config_hash": cfg.hash(),
        "versions": versions(),
        "wall_time": time.perf_counter() - t0,
        "rows": rows,
        "summary": summary or {},
        "config": cfg.to_dict(),
    }
    path = out / f"{command}.json"
    path.write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")
    return path


def _rows_csv(path: Path, rows: list[dict], columns: list[str]) -> None:
    import csv
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            out = []
            for c in columns:
                v = r.get(c, "")
                out.append(f"{v:.12g}" if isinstance(v, float) else v)
            w.writerow(out)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_design(cfg: ScenarioConfig, out: Path, jobs: int = 1) -> dict:
    t0 = time.perf_counter()
    pulse = build_pulse(cfg)
    write_pulse_csv(out / "pulse.csv", pulse)
    T = pulse.T
    summary = {
        "T": T,
        "eta": cfg.eta,
        "omega_max": pulse.omega_max,
        "omega_max_T": pulse.omega_max * T,
        "omega_max_over_2pi": pulse.omega_max / (2 * math.pi),
        "q_s": sensitivity_qs(cfg.eta).closed_form,
        "q_s_quadrature": sensitivity_qs(cfg.eta).quadrature,
    }
    write_manifest(out, "design", cfg, t0, [], summary)
    print(f"omega_max * T = {summary['omega_max_T']:.4f}   q_s = {summary['q_s']:.3e}")
    return summary


def cmd_simulate(cfg: ScenarioConfig, out: Path, jobs: int = 1) -> dict:
    t0 = time.perf_counter()
    params = cfg.model_params()
    pulse = build_pulse(cfg)
    target = cfg.target()
    times = np.linspace(0.0, params.T, cfg.trace_points)
    pc = cfg.propagation_config()
    stage = _stage(cfg)

    us = sim.gate_propagators(params, pulse, times, stage=stage, config=pc)
    trace = FidelityTrace(times, np.clip([gate_fidelity(u, target) for u in us], 0, 1))
    columns = {"t": times, f"fidelity_{stage}": trace.values}
    summary = {f"fidelity_{stage}": trace.final}
    if stage == "full":
        ue = sim.gate_propagators(params, pulse, times, stage="effective", config=pc)
        columns["fidelity_effective"] = [gate_fidelity(u, target) for u in ue]
        summary["fidelity_effective"] = columns["fidelity_effective"][-1]
    write_columns_csv(out / "fidelity.csv", columns)

    c = parse_input_state(cfg.input_state)
    psi = us @ c
    goal = target @ c
    pops = {"t": times}
    for k, lab in enumerate(COMP_LABELS):
        pops[f"p_{lab}"] = np.abs(psi[:, k]) ** 2
    pops["leakage"] = 1.0 - np.sum(np.abs(psi) ** 2, axis=1)
    pops["state_fidelity"] = np.abs(psi @ goal.conj()) ** 2
    write_columns_csv(out / "populations.csv", pops)
    summary["state_fidelity"] = float(pops["state_fidelity"][-1])

    traj = design_trajectory(T=params.T, eta=cfg.eta, n_points=cfg.n_points)
    ledger = accumulated_phases(traj)
    write_phase_csv(out / "phases.csv", ledger)
    summary.update(dynamic_phase_T=ledger.dynamic[-1], geometric_phase_T=ledger.geometric[-1])

    if params.gamma > 0:
        channel = sim.open_system_channel(params, pulse, stage=stage, config=pc)
        summary["open_fidelity"] = channel.average_fidelity(target)
        summary["open_state_fidelity"] = channel.state_fidelity(c, goal)
    write_manifest(out, "simulate", cfg, t0, [], summary)
    for k, v in summary.items():
        print(f"{k:>22} = {v:.6f}")
    return summary


def cmd_sweep(cfg: ScenarioConfig, out: Path, jobs: int = 1) -> list[dict]:
    if cfg.sweep is None:
        raise ConfigError("sweep: no sweep range given (config key 'sweep' or --range)")
    t0 = time.perf_counter()
    spec = cfg.sweep
    tasks = [(i, cfg, spec.channel, v) for i, v in enumerate(spec.values)]
    rows = run_tasks(_sweep_task, tasks, jobs)
    cols = ["index", "value", "fidelity", "state_fidelity", "truth_min", "seed", "status"]
    _rows_csv(out / f"sweep_{spec.channel}.csv", rows, cols)
    ok = [r for r in rows if r["status"] == "ok"]
    summary = {"channel": spec.channel, "points": len(rows), "failed": len(rows) - len(ok)}
    if ok:
        best = max(ok, key=lambda r: r["fidelity"])
        worst = min(ok, key=lambda r: r["fidelity"])
        summary.update(min_fidelity=worst["fidelity"], min_at=worst["value"],
                       max_fidelity=best["fidelity"], max_at=best["value"])
    write_manifest(out, "sweep", cfg, t0, rows, summary)
    for r in rows:
        print(f"{spec.channel}={r['value']:.6g}  F={r.get('fidelity', float('nan')):.6f}  {r['status']}")
    return rows


def cmd_montecarlo(cfg: ScenarioConfig, out: Path, jobs: int = 1) -> list[dict]:
    if math.isinf(cfg.snr):
        log.info("snr = inf: every run equals the noiseless baseline")
    t0 = time.perf_counter()
    tasks = [(i, cfg, cfg.seed + i) for i in range(cfg.n_runs)]
    rows = run_tasks(_montecarlo_task, tasks, jobs)
    _rows_csv(out / "montecarlo.csv", rows, ["index", "seed", "snr", "fidelity", "infidelity",
                                              "status"])
    inf = np.array([r["infidelity"] for r in rows if r["status"] == "ok"])
    summary = {"snr": cfg.snr, "snr_unit": cfg.snr_unit, "runs": len(rows),
               "failed": len(rows) - inf.size,
               "mean_infidelity": float(inf.mean()) if inf.size else math.nan,
               "std_infidelity": float(inf.std(ddof=1)) if inf.size > 1 else 0.0}
    write_manifest(out, "montecarlo", cfg, t0, rows, summary)
    print(f"SNR {cfg.snr} {cfg.snr_unit}: mean 1-F = {summary['mean_infidelity']:.5f} "
          f"(std {summary['std_infidelity']:.5f}, {inf.size} runs)")
    return rows


def cmd_truthtable(cfg: ScenarioConfig, out: Path, jobs: int = 1):
    t0 = time.perf_counter()
    params = cfg.model_params()
    pulse = build_pulse(cfg)
    pc = cfg.propagation_config()
    stage = _stage(cfg)
    if params.gamma > 0:
        table = sim.open_system_channel(params, pulse, stage=stage, config=pc).truth_table()
    else:
        table = sim.closed_truth_table(params, pulse, stage=stage, config=pc)
    table.write(out / "truthtable.txt")
    table.write_csv(out / "truthtable.csv")
    target = cfg.target()
    summary = {"min_success": table.min_success(target),
               "populations": table.populations.tolist()}
    write_manifest(out, "truthtable", cfg, t0, [], summary)
    print(table.to_text(), end="")
    print(f"minimum success population = {summary['min_success']:.5f}")
    return table


def cmd_phases(cfg: ScenarioConfig, out: Path, jobs: int = 1):
    t0 = time.perf_counter()
    T, _, _ = cfg.resolved()
    traj = design_trajectory(T=T, eta=cfg.eta, n_points=cfg.n_points)
    ledger = accumulated_phases(traj)
    states, hams = effective_state_trace(traj, epsilon=cfg.epsilon,
                                         steps=cfg.steps or 4 * (cfg.n_points - 1))
    measured = simulated_phases(traj, states, hams)
    write_columns_csv(out / "phases.csv", {
        "t": traj.t, "dynamic": ledger.dynamic, "geometric": ledger.geometric,
        "dynamic_simulated": measured.dynamic, "geometric_simulated": measured.geometric,
    })
    summary = {"dynamic_T": ledger.dynamic[-1], "geometric_T": ledger.geometric[-1],
               "dynamic_T_simulated": measured.dynamic[-1],
               "geometric_T_simulated": measured.geometric[-1]}
    write_manifest(out, "phases", cfg, t0, [], summary)
    for k, v in summary.items():
        print(f"{k:>22} = {v:+.9f}")
    return summary


COMMANDS = {
    "design": cmd_design,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "montecarlo": cmd_montecarlo,
    "truthtable": cmd_truthtable,
    "phases": cmd_phases,
}


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="forster-nhqc", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", type=Path, help="key = value scenario file")
    ap.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    ap.add_argument("--seed", type=int, help="base seed (overrides the config)")
    ap.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                    help="parallel worker processes for sweeps and Monte Carlo")
    ap.add_argument("--frame", choices=("full", "effective"), help="Hamiltonian used")
    ap.add_argument("--integrator", choices=("rk", "expm"), help="propagation method")
    ap.add_argument("--channel", help="sweep channel (with --range)")
    ap.add_argument("--range", nargs=3, metavar=("START", "STOP", "N"),
                    help="sweep range, quantities may carry units")
    ap.add_argument("--snr", type=float, help="AWGN signal-to-noise ratio")
    ap.add_argument("--runs", type=int, help="Monte-Carlo runs")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _configure(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.frame:
        changes["frame"] = args.frame
    if args.integrator:
        changes["integrator"] = args.integrator
    if args.snr is not None:
        changes["snr"] = args.snr
    if args.runs is not None:
        changes["n_runs"] = args.runs
    if args.range or args.channel:
        if not (args.range and args.channel):
            raise ConfigError("sweep: --channel and --range must be given together")
        changes["sweep"] = SweepSpec.parse(f"{args.channel} {' '.join(args.range)}")
    try:
        return replace(cfg, **changes) if changes else cfg
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _configure(args)
        if args.jobs < 1:
            raise ConfigError("jobs: must be at least 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    args.out.mkdir(parents=True, exist_ok=True)
    try:
        result = COMMANDS[args.command](cfg, args.out, jobs=args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if isinstance(result, list) and any(r.get("status") != "ok" for r in result):
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
