"""``drift-lab`` command-line front end.

Usage::

    drift-lab <subcommand> --config run.json [overrides] --out outdir

Subcommands: simulate, stationary, scan-bs, convergence, drift, allan.
Exit codes: 0 success, 2 configuration/validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .dynamics import G1_SIGNS, SYSTEMS, reconstruct, rhs_averaged, system_rhs
from .errors import (ConfigError, DegenerateAmplitude, InvalidParams, NumericalError,
                     ParseError, UnknownKey, ValidationError)
from .experiments import (DEFAULT_EPSILONS, allan_deviation, averaging_convergence,
                          bloch_siegert_scan, drift_experiment,
                          resonance_condition_report, worker_count)
from .integrate import DEFAULT_DT, SYSTEM_LABELS, extract_frequency, integrate
from .model import ModelParams, check_amplitude
from .stationary import stationary_general, stationary_resonance, stationary_values

log = logging.getLogger("drift_lab")

PARAM_KEYS = ("gamma1", "gamma2", "lambda", "omega1", "epsilon", "delta")
RUN_KEYS = ("system", "initial", "t_end", "dt", "stride", "g1_sign", "output_dir")

INITIAL_KEYS = {
    "full": ("r1", "r2", "r3"),
    "polar": ("a", "z", "psi"),
    "standard": ("a", "z", "theta"),
    "averaged": ("a_bar", "z_bar", "theta_bar"),
}

#: Summary key holding wall time; the only non-deterministic value written.
WALL_TIME_KEY = "wall_time_s"


@dataclass
class RunConfig:
    params: ModelParams
    system: str = None
    initial: tuple = None
    t_end: float = None
    dt: float = DEFAULT_DT
    stride: int = 1
    g1_sign: str = "derived"
    output_dir: str = None


def _number(raw, key, *, integer=False):
    value = raw[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(key, f"expected a number, got {value!r}")
    if integer and (not float(value).is_integer()):
        raise ValidationError(key, f"expected an integer, got {value!r}")
    if not math.isfinite(value):
        raise ValidationError(key, "must be finite")
    return int(value) if integer else float(value)


def _initial_state(value, system, params):
    """Initial state in the chart of ``system``; ``"stationary"`` is allowed."""
    if value == "stationary":
        try:
            a, z, theta = stationary_values(params)
        except InvalidParams as exc:
            raise ValidationError("initial", f"no stationary point: {exc}")
        if system == "standard":
            return reconstruct((a, z, theta), 0.0, params)
        if system == "averaged":
            return (a, z, theta)
        # t = 0, so psi = -theta
        if system == "polar":
            return (a, z, -theta)
        return (a * math.cos(-theta), a * math.sin(-theta), z)
    names = INITIAL_KEYS[system]
    if isinstance(value, dict):
        extra = set(value) - set(names)
        if extra:
            raise UnknownKey(f"initial.{sorted(extra)[0]}")
        missing = [n for n in names if n not in value]
        if missing:
            raise ValidationError("initial", f"missing component {missing[0]!r}")
        value = [value[n] for n in names]
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ValidationError("initial", "expected 3 numbers, a keyed object or 'stationary'")
    state = []
    for v in value:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ValidationError("initial", f"non-numeric component {v!r}")
        state.append(float(v))
    if system != "full":
        try:
            check_amplitude(state[0])
        except DegenerateAmplitude as exc:
            raise ValidationError("initial", str(exc))
    return tuple(state)


def config_from_dict(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ValidationError("<root>", "configuration must be a JSON object")
    for key in raw:
        if key not in PARAM_KEYS and key not in RUN_KEYS:
            raise UnknownKey(key)
    for key in PARAM_KEYS:
        if key not in raw:
            if key == "delta":
                continue
            raise ValidationError(key, "required key missing")
    values = {key: _number(raw, key) for key in PARAM_KEYS if key in raw}
    for key in ("gamma1", "gamma2", "omega1"):
        if values[key] < 0:
            raise ValidationError(key, f"must be >= 0, got {values[key]}")
    if not 0.0 <= values["epsilon"] < 1.0:
        raise ValidationError("epsilon", f"must lie in [0, 1), got {values['epsilon']}")
    try:
        params = ModelParams(values["gamma1"], values["gamma2"], values["lambda"],
                             values["omega1"], values["epsilon"], values.get("delta", 0.0))
    except InvalidParams as exc:
        raise ValidationError("delta", str(exc))

    cfg = RunConfig(params=params)
    if "dt" in raw:
        cfg.dt = _number(raw, "dt")
        if cfg.dt <= 0:
            raise ValidationError("dt", "must be positive")
    if "stride" in raw:
        cfg.stride = _number(raw, "stride", integer=True)
        if cfg.stride < 1:
            raise ValidationError("stride", "must be >= 1")
    if "g1_sign" in raw:
        if raw["g1_sign"] not in G1_SIGNS:
            raise ValidationError("g1_sign", f"must be one of {G1_SIGNS}")
        cfg.g1_sign = raw["g1_sign"]
    if "output_dir" in raw:
        if not isinstance(raw["output_dir"], str):
            raise ValidationError("output_dir", "must be a string")
        cfg.output_dir = raw["output_dir"]
    if "system" in raw:
        if raw["system"] not in SYSTEMS:
            raise ValidationError("system", f"must be one of {SYSTEMS}")
        cfg.system = raw["system"]
    if "t_end" in raw:
        cfg.t_end = _number(raw, "t_end")
        if cfg.t_end <= 0:
            raise ValidationError("t_end", "must be positive")
    if "initial" in raw:
        if cfg.system is None:
            raise ValidationError("initial", "requires 'system' to fix its chart")
        cfg.initial = _initial_state(raw["initial"], cfg.system, params)
    return cfg


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON run configuration, applying defaults."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from exc
    return config_from_dict(raw)


def _require(cfg: RunConfig, *keys):
    for key in keys:
        if getattr(cfg, key) is None:
            raise ValidationError(key, "required by this subcommand")


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------

def _norm_sq(samples, system):
    if system == "full":
        return np.sum(samples ** 2, axis=1)
    return samples[:, 0] ** 2 + samples[:, 1] ** 2


def cmd_simulate(cfg: RunConfig, args, out: Path) -> dict:
    _require(cfg, "system", "initial", "t_end")
    params = cfg.params
    traj = integrate(system_rhs(cfg.system, params), cfg.initial, 0.0, cfg.t_end, cfg.dt,
                     stride=cfg.stride, label=SYSTEM_LABELS[cfg.system])
    io.write_trajectory_csv(traj, out / "trajectory.csv")
    io.write_gnuplot(out / "trajectory.csv", (2, 3, 4), "t", "state")
    if cfg.system == "averaged":
        # drift of the atomic frequency: 1 - d(theta_bar)/dt
        freq = np.array([1.0 - rhs_averaged(s, params)[2] for s in traj.samples])
        times = traj.times
        rec = np.array([reconstruct(s, t, params, cfg.g1_sign)
                        for s, t in zip(traj.samples, times)])
        io.write_csv(out / "reconstructed.csv", io.TRAJECTORY_HEADER,
                     np.column_stack([times, rec]))
        io.write_gnuplot(out / "reconstructed.csv", (2, 3, 4), "t", "state")
    else:
        times, freq = extract_frequency(traj)
    io.write_frequency_csv(times, freq, out / "frequency.csv")
    io.write_gnuplot(out / "frequency.csv", (2,), "t", "frequency")
    norm = _norm_sq(traj.samples, cfg.system)
    return {
        "subcommand": "simulate",
        "params": params.as_dict(),
        "system": cfg.system,
        "t_end": cfg.t_end,
        "dt": cfg.dt,
        "stride": cfg.stride,
        "g1_sign": cfg.g1_sign,
        "n_samples": len(traj),
        "initial_state": list(cfg.initial),
        "final_time": traj.t_final,
        "final_state": list(traj.final),
        "norm_sq_drift": float(np.max(np.abs(norm - norm[0]))),
        "mean_frequency": float(np.mean(freq)),
    }


def cmd_stationary(cfg: RunConfig, args, out: Path) -> dict:
    params = cfg.params.at_resonance() if args.resonance else cfg.params
    sp = stationary_resonance(params) if args.resonance else stationary_general(params)
    io.write_json(out / "stationary.json", sp.to_json_dict())
    report = resonance_condition_report(params, sp.state)
    return {"subcommand": "stationary", "params": params.as_dict(),
            "resonance": bool(args.resonance), "conditions": report}


def cmd_scan_bs(cfg: RunConfig, args, out: Path) -> dict:
    grid = None
    if args.delta_min is not None or args.delta_max is not None:
        if args.delta_min is None or args.delta_max is None:
            raise ValidationError("delta-min/delta-max", "give both bounds or neither")
        grid = np.linspace(args.delta_min, args.delta_max, args.points or 64)
    elif args.points is not None:
        from .experiments import default_delta_grid
        grid = default_delta_grid(cfg.params, args.points)
    scan = bloch_siegert_scan(cfg.params, grid, validate=args.validate, dt=cfg.dt)
    rows = [(d, r["a_s"], r["z_s"], r["theta_s"]) for d, r in zip(scan.axis_values, scan.records)]
    io.write_csv(out / "scan_bs.csv", ("delta", "a_s", "z_s", "theta_s"), rows)
    io.write_gnuplot(out / "scan_bs.csv", (2,), "delta", "stationary amplitude")
    io.write_json(out / "scan_bs.json", scan.to_json_dict())
    return {"subcommand": "scan-bs", **scan.summary}


def cmd_convergence(cfg: RunConfig, args, out: Path) -> dict:
    eps_grid = args.epsilons or DEFAULT_EPSILONS
    initial = cfg.initial if cfg.system == "standard" else None
    scan = averaging_convergence(cfg.params, eps_grid, horizon=args.horizon,
                                 initial=initial, g1_sign=cfg.g1_sign, dt=cfg.dt,
                                 workers=worker_count())
    rows = [(e, r["err_bare"], r["err_first_order"])
            for e, r in zip(scan.axis_values, scan.records)]
    io.write_csv(out / "convergence.csv", ("epsilon", "err_bare", "err_first_order"), rows)
    io.write_gnuplot(out / "convergence.csv", (2, 3), "epsilon", "sup error", logscale=True)
    io.write_json(out / "convergence.json", scan.to_json_dict())
    return {"subcommand": "convergence", **scan.summary}


def cmd_drift(cfg: RunConfig, args, out: Path) -> dict:
    offset = (args.offset_a, args.offset_z, args.offset_theta)
    res = drift_experiment(cfg.params, offset, horizon=args.horizon, dt=cfg.dt)
    traj = res.trajectory
    k = cfg.stride
    io.write_csv(out / "trajectory.csv", io.TRAJECTORY_HEADER,
                 np.column_stack([traj.times[::k], traj.samples[::k]]))
    io.write_gnuplot(out / "trajectory.csv", (2, 3, 4), "t", "state")
    io.write_frequency_csv(res.times[::k], res.frequency[::k], out / "frequency.csv")
    io.write_gnuplot(out / "frequency.csv", (2,), "t", "instantaneous frequency")
    valid = ~np.isnan(res.slow_frequency)
    idx = np.flatnonzero(valid)[::k]
    io.write_frequency_csv(res.times[idx], res.slow_frequency[idx], out / "slow_frequency.csv")
    io.write_gnuplot(out / "slow_frequency.csv", (2,), "t", "period-averaged frequency")
    summary = res.summary
    io.write_json(out / "drift.json", summary)
    return {"subcommand": "drift", **summary}


def cmd_allan(cfg, args, out: Path) -> dict:
    if args.input is None:
        raise ValidationError("input", "allan needs --input <t,freq CSV>")
    try:
        series = io.read_frequency_csv(args.input)
    except (OSError, ValueError) as exc:
        raise ValidationError("input", str(exc))
    result = allan_deviation(series, args.taus)
    io.write_allan_csv(result, out / "allan.csv")
    io.write_gnuplot(out / "allan.csv", (2,), "tau", "sigma_y", logscale=True)
    return {"subcommand": "allan", "n_samples": len(series), "n_taus": len(result)}


COMMANDS = {
    "simulate": cmd_simulate,
    "stationary": cmd_stationary,
    "scan-bs": cmd_scan_bs,
    "convergence": cmd_convergence,
    "drift": cmd_drift,
    "allan": cmd_allan,
}


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drift-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="JSON run configuration")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--epsilon", type=float)
        p.add_argument("--delta", type=float)
        p.add_argument("--omega1", type=float)
        p.add_argument("--gamma1", type=float)
        p.add_argument("--gamma2", type=float)
        p.add_argument("--lambda", dest="lam", type=float)
        p.add_argument("--t-end", type=float)
        p.add_argument("--dt", type=float)
        p.add_argument("--stride", type=int)
        p.add_argument("--system", choices=SYSTEMS)
        p.add_argument("--g1-sign", choices=G1_SIGNS)
        p.add_argument("-v", "--verbose", action="store_true")
        return p

    common(sub.add_parser("simulate", help="integrate one system and write its trajectory"))
    p = common(sub.add_parser("stationary", help="stationary point and stability"))
    p.add_argument("--resonance", action="store_true",
                   help="place the detuning on the shifted resonance first")
    p = common(sub.add_parser("scan-bs", help="Bloch-Siegert detuning scan"))
    p.add_argument("--delta-min", type=float)
    p.add_argument("--delta-max", type=float)
    p.add_argument("--points", type=int)
    p.add_argument("--validate", action="store_true",
                   help="also integrate the peak grid point to steady state")
    p = common(sub.add_parser("convergence", help="averaging-order study"))
    p.add_argument("--epsilons", type=_float_list)
    p.add_argument("--horizon", type=float, default=5.0, help="slow-time horizon")
    p = common(sub.add_parser("drift", help="first-order drift from an offset start"))
    p.add_argument("--offset-a", type=float, default=0.0)
    p.add_argument("--offset-z", type=float, default=0.0)
    p.add_argument("--offset-theta", type=float, default=0.1)
    p.add_argument("--horizon", type=float, default=20.0, help="slow-time horizon")
    p = common(sub.add_parser("allan", help="Allan deviation of a t,freq CSV"),
               config_required=False)
    p.add_argument("--input", help="CSV with header t,freq")
    p.add_argument("--taus", type=_float_list)
    return parser


OVERRIDES = {
    "epsilon": "epsilon", "delta": "delta", "omega1": "omega1", "gamma1": "gamma1",
    "gamma2": "gamma2", "lam": "lambda", "t_end": "t_end", "dt": "dt", "stride": "stride",
    "system": "system", "g1_sign": "g1_sign",
}


def load_config(args) -> RunConfig:
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        raise ValidationError("config", f"cannot read {args.config}: {exc}")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{args.config}: malformed JSON: {exc}") from exc
    if isinstance(raw, dict):
        for attr, key in OVERRIDES.items():
            value = getattr(args, attr, None)
            if value is not None:
                raw[key] = value
    return config_from_dict(raw)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args) if args.config else None
        out = args.out or (cfg.output_dir if cfg else None)
        if out is None:
            raise ValidationError("out", "no output directory (--out or output_dir)")
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        start = time.perf_counter()
        summary = COMMANDS[args.command](cfg, args, out)
        summary[WALL_TIME_KEY] = time.perf_counter() - start
        io.write_json(out / "summary.json", summary)
        log.info("wrote outputs to %s", out)
    except (ConfigError, InvalidParams) as exc:
        print(f"drift-lab: configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"drift-lab: numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
