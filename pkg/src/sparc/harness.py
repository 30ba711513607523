"""Experiment orchestration: config parsing, seeded sweeps and result records.

A config is a JSON object with a ``schema`` version; the master seed and the
output path come from the command line.  Every experiment returns a result
record (plain dict) that binds its numbers to the sha256 of the config and
seed; bulk series are returned separately as CSV tables.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotic import asymptotic_record, r_un_inf
from .channel import ChannelSpec, capacity, sample_output
from .code import (CodeParams, build_design_variances, build_matrix, effective_rate, encode,
                   random_message, seed_mask, uniform_design, DesignFunction)
from .errors import InvalidSpec, SparcError
from .gamp import gamp_decode
from .io import config_hash, dumps, write_csv
from .potential import free_energy_gap, potential_curve, r_pot
from .se import SEConfig, r_co, r_un, trajectory_un

SCHEMA = 1
EXPERIMENTS = ("simulate", "se-track", "thresholds", "saturation", "potential-curve", "asymptotic")


@dataclass
class ExperimentConfig:
    experiment: str
    channel: ChannelSpec
    B: int = 2
    L: int = 256
    rates: list = field(default_factory=list)
    rates_relative_to: str | None = None      # None | "r_un" | "r_un_inf"
    trials: int = 1
    n_iter: int = 100
    stop_tol: float = 1e-8
    init: str = "zero"
    coupling: dict | None = None              # {"gamma", "w", "design"?}
    sweep: list = field(default_factory=list)  # [[gamma, w], ...] for saturation
    grid: int = 401
    rate_tol: float = 1e-4
    se: dict = field(default_factory=dict)
    schema: int = SCHEMA

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if d.get("schema", SCHEMA) != SCHEMA:
            raise InvalidSpec(f"unsupported config schema {d.get('schema')}")
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise InvalidSpec(f"unknown config fields {sorted(extra)}")
        if d.get("experiment") not in EXPERIMENTS:
            raise InvalidSpec(f"experiment must be one of {EXPERIMENTS}")
        if "channel" not in d:
            raise InvalidSpec("config needs a channel")
        d["channel"] = ChannelSpec.from_dict(d["channel"])
        cfg = cls(**d)
        if cfg.trials < 0 or cfg.n_iter < 0:
            raise InvalidSpec("trials and n_iter must be nonnegative")
        if cfg.rates_relative_to not in (None, "r_un", "r_un_inf"):
            raise InvalidSpec("rates_relative_to must be null, 'r_un' or 'r_un_inf'")
        if cfg.init not in ("zero", "prior"):
            raise InvalidSpec("init must be 'zero' or 'prior'")
        if any(r <= 0 for r in cfg.rates):
            raise InvalidSpec("rates must be positive")
        CodeParams(cfg.L, cfg.B, 1.0)      # validates B and L
        return cfg

    def to_dict(self) -> dict:
        d = asdict(self)
        d["channel"] = self.channel.to_dict()
        return d

    def se_config(self, seed: int) -> SEConfig:
        return SEConfig(master_seed=seed, **self.se)


def _coupling(cfg: ExperimentConfig, gamma=None, w=None):
    c = cfg.coupling or {}
    gamma = c.get("gamma") if gamma is None else gamma
    w = c.get("w") if w is None else w
    design = c.get("design", "uniform")
    if design == "uniform":
        df = uniform_design(w)
    else:
        g = np.asarray(design["samples"], dtype=float)
        df = DesignFunction(tuple(g), design.get("g_lower", g.min()),
                            design.get("g_upper", g.max()), design.get("g_star", 0.0))
    return build_design_variances(df, gamma, w)


def _resolve_rates(cfg, sec):
    rates = [float(r) for r in cfg.rates]
    if cfg.rates_relative_to == "r_un":
        base = r_un(cfg.channel, cfg.B, sec, cfg.rate_tol).value
    elif cfg.rates_relative_to == "r_un_inf":
        base = r_un_inf(cfg.channel)
    else:
        return rates, None
    return [r * base for r in rates], base


def trial_rng(seed: int, rate_idx: int, trial_idx: int) -> np.random.Generator:
    """Independent stream per (rate, trial), derived from the master seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rate_idx, trial_idx)))


def run_trial(cfg, R, rng, coupling=None):
    params = CodeParams(cfg.L, cfg.B, R, coupling.gamma if coupling else 1)
    msg = random_message(cfg.L, cfg.B, rng)
    if coupling is not None:
        msg.known = seed_mask(cfg.L, coupling.gamma, coupling.w)
    F = build_matrix(params, coupling, rng)
    y = sample_output(cfg.channel, encode(F, msg), rng)
    _, trace = gamp_decode(y, F, cfg.channel, cfg.n_iter, msg, cfg.stop_tol, init=cfg.init)
    return params, trace


def _mean_se(v):
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        return None, None
    se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), se


def _record(cfg, seed, results):
    return {"schema": SCHEMA, "tool_version": __version__, "experiment": cfg.experiment,
            "seed": seed, "config": cfg.to_dict(),
            "config_hash": config_hash({"config": cfg.to_dict(), "seed": seed}),
            "results": results}


def run_simulate(cfg: ExperimentConfig, seed: int):
    """Encode, transmit and decode ``trials`` times per rate; errors are recorded per trial."""
    sec = cfg.se_config(seed)
    rates, base = _resolve_rates(cfg, sec) if cfg.rates else ([], None)
    coupling = _coupling(cfg) if cfg.coupling else None
    out, tables = [], {}
    for i, R in enumerate(rates):
        trials = []
        for j in range(cfg.trials):
            try:
                params, tr = run_trial(cfg, R, trial_rng(seed, i, j), coupling)
                trials.append({"ser": tr.ser[-1], "mse": tr.mse[-1], "mse_trace": tr.mse,
                               "ser_trace": tr.ser, "iterations": tr.iterations_run,
                               "converged": tr.converged, "M": params.M,
                               "realized_rate": params.realized_rate})
                tables[f"trace_r{i}_t{j}"] = (["t", "mse", "ser"], tr.rows())
            except SparcError as err:
                trials.append({"error": err.kind, "message": str(err)})
        ok = [t for t in trials if "error" not in t]
        ser_m, ser_se = _mean_se([t["ser"] for t in ok])
        mse_m, mse_se = _mean_se([t["mse"] for t in ok])
        entry = {"rate": R, "trials": trials, "ser_mean": ser_m, "ser_stderr": ser_se,
                 "mse_mean": mse_m, "mse_stderr": mse_se, "n_errors": len(trials) - len(ok)}
        if coupling is not None:
            entry["effective_rate"] = effective_rate(R, coupling.w, coupling.gamma)
        out.append(entry)
    return _record(cfg, seed, {"rates": out, "rate_base": base}), tables


def run_se_track(cfg: ExperimentConfig, seed: int):
    """GAMP trajectories next to the scalar state evolution from E = 1, aligned by t."""
    sec = cfg.se_config(seed)
    rates, base = _resolve_rates(cfg, sec)
    out, tables = [], {}
    for i, R in enumerate(rates):
        traces, errors = [], []
        rr = None
        for j in range(cfg.trials):
            try:
                params, tr = run_trial(cfg, R, trial_rng(seed, i, j))
                traces.append(tr.mse)
                rr = params.realized_rate
            except SparcError as err:
                errors.append({"trial": j, "error": err.kind, "message": str(err)})
        T = max((len(t) for t in traces), default=1) - 1
        R_se = rr if rr is not None else CodeParams(cfg.L, cfg.B, R).realized_rate
        se_traj = trajectory_un(1.0, cfg.channel, R_se, cfg.B, sec, n_iter=T)
        padded = np.array([t + [t[-1]] * (T + 1 - len(t)) for t in traces]) if traces else np.zeros((0, T + 1))
        gamp_mean = padded.mean(axis=0) if traces else np.full(T + 1, np.nan)
        rows = [[t, gamp_mean[t], se_traj[t]] for t in range(T + 1)]
        tables[f"track_r{i}"] = (["t", "gamp_mse", "se_E"], rows)
        out.append({"rate": R, "realized_rate": R_se, "se": se_traj,
                    "gamp_mean": [float(v) for v in gamp_mean] if traces else [],
                    "gamp_trials": traces, "errors": errors})
    return _record(cfg, seed, {"rates": out, "rate_base": base}), tables


def run_thresholds(cfg: ExperimentConfig, seed: int):
    sec = cfg.se_config(seed)
    spec = cfg.channel
    ru = r_un(spec, cfg.B, sec, cfg.rate_tol)
    rp = r_pot(spec, cfg.B, sec, cfg.rate_tol)
    res = {"B": cfg.B, "r_un": ru.to_dict(), "r_pot": rp.to_dict(),
           "capacity": capacity(spec), "r_un_inf": r_un_inf(spec),
           "note": "finite-B thresholds from state evolution and the potential"}
    return _record(cfg, seed, res), {}


def run_saturation(cfg: ExperimentConfig, seed: int):
    """Coupled thresholds over (gamma, w) pairs next to r_un and r_pot."""
    sec = cfg.se_config(seed)
    spec = cfg.channel
    ru = r_un(spec, cfg.B, sec, cfg.rate_tol)
    rp = r_pot(spec, cfg.B, sec, cfg.rate_tol)
    table = []
    for gamma, w in cfg.sweep:
        if w == 0:
            entry = {"gamma": gamma, "w": 0, "r_co": ru.to_dict()}
        else:
            rc = r_co(_coupling(cfg, gamma, w), spec, cfg.B, sec, cfg.rate_tol)
            entry = {"gamma": gamma, "w": w, "r_co": rc.to_dict(),
                     "r_co_effective": effective_rate(rc.value, w, gamma)}
        entry["label"] = "finite (gamma, w) approximation"
        table.append(entry)
    res = {"B": cfg.B, "r_un": ru.to_dict(), "r_pot": rp.to_dict(), "table": table}
    tables = {"saturation": (["gamma", "w", "r_co"],
                             [[e["gamma"], e["w"], e["r_co"]["value"]] for e in table])}
    return _record(cfg, seed, res), tables


def run_potential_curve(cfg: ExperimentConfig, seed: int):
    sec = cfg.se_config(seed)
    rates, base = _resolve_rates(cfg, sec)
    grid = np.linspace(0.0, 1.0, cfg.grid)
    out, tables = [], {}
    for i, R in enumerate(rates):
        pc = potential_curve(grid, cfg.channel, R, cfg.B, sec)
        gap = free_energy_gap(cfg.channel, R, cfg.B, sec, grid=cfg.grid)
        tables[f"potential_r{i}"] = (["E", "U", "S", "F"], list(zip(pc.E, pc.U, pc.S, pc.F)))
        out.append({"rate": R, "gap": gap.to_dict()})
    return _record(cfg, seed, {"rates": out, "rate_base": base}), tables


def run_asymptotic(cfg: ExperimentConfig, seed: int):
    return _record(cfg, seed, asymptotic_record(cfg.channel)), {}


RUNNERS = {
    "simulate": run_simulate,
    "se-track": run_se_track,
    "thresholds": run_thresholds,
    "saturation": run_saturation,
    "potential-curve": run_potential_curve,
    "asymptotic": run_asymptotic,
}


def run(cfg: ExperimentConfig, seed: int, out: str | Path):
    """Run the configured experiment and write ``out`` (JSON) plus ``<out>.<table>.csv`` files."""
    record, tables = RUNNERS[cfg.experiment](cfg, seed)
    out = Path(out)
    out.write_text(dumps(record))
    for name, (header, rows) in tables.items():
        write_csv(out.with_name(f"{out.name}.{name}.csv"), header, rows)
    return record
