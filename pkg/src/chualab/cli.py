"""Command-line experiments: ``chualab {simulate,sweep,sync,comm,sound}``.

Settings come from defaults, then an optional ``key=value`` file (``--config``),
then command-line flags. The effective settings are echoed to
``run_config.txt`` in the output directory; feeding that file back with
``--config`` reproduces the run. A ``report.json`` lists outputs and metrics.

Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 file error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import re
import sys
import time
from decimal import Decimal
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .analysis import (
    ClassifyConfig,
    LyapunovConfig,
    order_inversions,
    sweep_bifurcation,
    write_bifurcation_csv,
    write_sweep_csv,
)
from .audio import NODES, SINE, STAIRCASE, Modulation, synthesize, write_samples_csv, write_wav
from .circuit import TABLE_I, CellParams, CircuitParams, ModelError, build_diode
from .integrator import DivergenceError, simulate, write_phase_csv, write_trajectory_csv
from .io import atomic_open, read_csv
from .sync import (
    DRIVES,
    SyncConfig,
    drive_rms,
    mask_transmit,
    masking_correlation,
    recover_message,
    run_synchronization,
    tone,
    write_channel_csv,
    write_message_csv,
    write_sync_csv,
)

log = logging.getLogger("chualab")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# -- value parsing -----------------------------------------------------------

_SI = {"p": -12, "n": -9, "u": -6, "µ": -6, "m": -3, "k": 3, "K": 3, "M": 6, "G": 9}
_NUM = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([pnuµmkKMG]?)\s*$")


def parse_si(text: str) -> float:
    """'18m' -> 0.018, '2.2k' -> 2200.0, '1e-7' -> 1e-7."""
    m = _NUM.match(str(text))
    if not m:
        raise ConfigError(f"not a number: {text!r}")
    # scale in decimal so '18m' is the same double as 0.018
    v = float(Decimal(m.group(1)).scaleb(_SI.get(m.group(2), 0)))
    if not math.isfinite(v):
        raise ConfigError(f"not finite: {text!r}")
    return v


def _int(text: str) -> int:
    try:
        return int(str(text).strip())
    except ValueError:
        raise ConfigError(f"not an integer: {text!r}") from None


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off", ""):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(parse_si(v) for v in str(text).split(",") if v.strip())


def _opt_float(text: str) -> float | None:
    return None if str(text).strip().lower() in ("", "none") else parse_si(text)


def _str(text: str) -> str:
    return str(text).strip()


def parse_range(text: str) -> tuple[float, ...]:
    """'2000:1800:5' -> 2000, 1995, ..., 1800 (end inclusive); otherwise a comma list."""
    text = str(text).strip()
    if ":" not in text:
        vals = _floats(text)
        if not vals:
            raise ConfigError("empty r0 list")
        return vals
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"range must be start:stop:step, got {text!r}")
    a, b, step = (parse_si(v) for v in parts)
    if not step > 0:
        raise ConfigError("range step must be positive")
    n = int(math.floor(abs(b - a) / step + 1e-9)) + 1
    sign = 1.0 if b >= a else -1.0
    return tuple(a + sign * k * step for k in range(n))


def parse_mismatch(text: str) -> dict[str, float]:
    """'none' | 'c=5%' | 'r0=5%' | 'c1=2%,l=-1%' -> relative changes per component."""
    text = str(text).strip()
    if text.lower() in ("", "none"):
        return {}
    out = {}
    for item in text.split(","):
        if "=" not in item:
            raise ConfigError(f"mismatch item must be name=value, got {item!r}")
        k, v = (s.strip() for s in item.split("=", 1))
        if k not in ("c", "c1", "c2", "l", "r0"):
            raise ConfigError(f"unknown mismatch component {k!r}")
        rel = parse_si(v[:-1]) / 100.0 if v.endswith("%") else parse_si(v)
        if not rel > -1:
            raise ConfigError("mismatch must keep the component positive")
        if k == "c":
            out["c1"] = out["c2"] = rel
        else:
            out[k] = rel
    return out


def apply_mismatch(p: CircuitParams, mm: dict[str, float]) -> CircuitParams:
    return p.scaled(**{k: 1.0 + v for k, v in mm.items()})


# -- settings table ------------------------------------------------------------

@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: str
    help: str = ""


_CELL_A = TABLE_I["cell_a"]
_CELL_B = TABLE_I["cell_b"]

KEYS: dict[str, Key] = {
    "l": Key(parse_si, "18m", "inductance, H"),
    "c1": Key(parse_si, "10n", "F"),
    "c2": Key(parse_si, "100n", "F"),
    "r0": Key(parse_si, "1800", "coupling resistor, ohm"),
    "e_sat": Key(parse_si, "8.3", "op-amp saturation voltage, V"),
    "cell_a.r_in": Key(parse_si, f"{_CELL_A[0]:g}"),
    "cell_a.r_fb": Key(parse_si, f"{_CELL_A[1]:g}"),
    "cell_a.r_gnd": Key(parse_si, f"{_CELL_A[2]:g}"),
    "cell_b.r_in": Key(parse_si, f"{_CELL_B[0]:g}"),
    "cell_b.r_fb": Key(parse_si, f"{_CELL_B[1]:g}"),
    "cell_b.r_gnd": Key(parse_si, f"{_CELL_B[2]:g}"),
    "init": Key(_floats, "0.1,0,0", "v_c1,v_c2,i_l"),
    "dt": Key(parse_si, "1e-7", "integration step, s"),
    "t_end": Key(_opt_float, "none", "end time, s (command default if none)"),
    "record_every": Key(_int, "10"),
    "sweep.values": Key(parse_range, "2200,1900,1870,1850,1800,1700,1500,1000"),
    "sweep.workers": Key(_int, "0", "0 = one per CPU"),
    "sweep.refine": Key(_opt_float, "none", "bisect label changes down to this step, ohm"),
    "sweep.transient": Key(parse_si, "0.1"),
    "sweep.window": Key(parse_si, "0.4"),
    "sync.t_sync": Key(parse_si, "0.1"),
    "sync.settle": Key(parse_si, "0.02"),
    "sync.drive": Key(_str, "v_c1"),
    "sync.coupling": Key(_str, "substitution"),
    "sync.r_c": Key(_opt_float, "none"),
    "sync.mismatch": Key(parse_mismatch, "none"),
    "sync.slave_init": Key(_floats, "-0.1,0.05,0"),
    "comm.tone_freq": Key(parse_si, "500"),
    "comm.tone_amp": Key(parse_si, "0.02", "fraction of the drive RMS"),
    "comm.message": Key(_str, "", "CSV t,value (overrides the tone)"),
    "comm.mismatch": Key(parse_mismatch, "none"),
    "comm.mask_ratio": Key(parse_si, "0.05"),
    "sound.mod": Key(_str, STAIRCASE),
    "sound.freq": Key(parse_si, "100"),
    "sound.levels": Key(_floats, "2000,1800,1600"),
    "sound.center": Key(parse_si, "1850"),
    "sound.depth": Key(parse_si, "150"),
    "sound.duration": Key(parse_si, "1.0"),
    "sound.rate": Key(_int, "44100"),
    "sound.node": Key(_str, "v_c1"),
    "sound.csv": Key(_bool, "false", "also dump pre-quantization samples"),
}

T_END_DEFAULT = {"simulate": 0.05, "sweep": None, "sync": 0.2, "comm": 0.2, "sound": None}


def read_config_file(path) -> dict[str, str]:
    raw: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise OSError(f"cannot read config {path}: {e.strerror or e}") from e
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        if k not in KEYS:
            raise ConfigError(f"{path}:{n}: unknown key {k!r}")
        raw[k] = v
    return raw


def resolve(raw: dict[str, str]) -> tuple[dict[str, Any], dict[str, str]]:
    """Parse every key (defaults filled in). Returns (values, text echo)."""
    unknown = set(raw) - set(KEYS)
    if unknown:
        raise ConfigError(f"unknown keys: {sorted(unknown)}")
    text = {k: str(raw.get(k, spec.default)) for k, spec in KEYS.items()}
    vals = {}
    for k, spec in KEYS.items():
        try:
            vals[k] = spec.parse(text[k])
        except ConfigError as e:
            raise ConfigError(f"{k}: {e}") from None
    if len(vals["init"]) != 3 or len(vals["sync.slave_init"]) != 3:
        raise ConfigError("initial states need three values")
    if vals["record_every"] < 1:
        raise ConfigError("record_every must be >= 1")
    if not vals["dt"] > 0:
        raise ConfigError("dt must be positive")
    return vals, text


def circuit_from(vals: dict[str, Any], r0: float | None = None) -> CircuitParams:
    e = vals["e_sat"]
    a = CellParams(vals["cell_a.r_in"], vals["cell_a.r_fb"], vals["cell_a.r_gnd"], e)
    b = CellParams(vals["cell_b.r_in"], vals["cell_b.r_fb"], vals["cell_b.r_gnd"], e)
    return CircuitParams(vals["l"], vals["c1"], vals["c2"], vals["r0"] if r0 is None else r0,
                         build_diode(a, b))


# -- report --------------------------------------------------------------------

@dataclass
class RunReport:
    command: str
    config: dict[str, str]
    elapsed: float = 0.0
    files: list[str] = field(default_factory=list)
    metrics: dict[str, Any] = field(default_factory=dict)
    version: str = __version__

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=_jsonable)


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(type(v).__name__)


def _finite_or_none(v: float):
    return float(v) if math.isfinite(v) else None


# -- commands ------------------------------------------------------------------

def cmd_simulate(vals, out: Path) -> tuple[dict, list[tuple[str, Callable[[Path], None]]]]:
    p = circuit_from(vals)
    t_end = vals["t_end"] or T_END_DEFAULT["simulate"]
    tr = simulate(p, vals["init"], t_end, vals["dt"], record_every=vals["record_every"])
    metrics = {"r0": p.r0, "samples": len(tr), "final_state": list(tr.final())}
    return metrics, [
        ("trajectory.csv", lambda f: write_trajectory_csv(tr, f)),
        ("phase.csv", lambda f: write_phase_csv(tr, f)),
    ]


def cmd_sweep(vals, out: Path):
    p = circuit_from(vals)
    base = ClassifyConfig()
    cfg = ClassifyConfig(
        transient=vals["sweep.transient"], window=vals["sweep.window"], dt=vals["dt"],
        record_every=vals["record_every"],
        lyapunov=LyapunovConfig(base.lyapunov.d0, base.lyapunov.tau, vals["sweep.window"],
                                vals["sweep.transient"], vals["dt"]),
    )
    pts = sweep_bifurcation(p, vals["sweep.values"], cfg, vals["init"],
                            workers=vals["sweep.workers"] or None, refine_step=vals["sweep.refine"])
    ok = [pt for pt in pts if pt.regime is not None]
    if not ok:
        raise ArithmeticError("no sweep point classified: " + "; ".join(pt.error or "" for pt in pts))
    metrics = {
        "points": len(pts),
        "failed": [{"r0": pt.r0, "error": pt.error} for pt in pts if pt.regime is None],
        "regimes": [{"r0": pt.r0, "regime": pt.label, "lambda1": _finite_or_none(pt.lambda1)} for pt in pts],
        "inversions": [[a.r0, a.label, b.r0, b.label] for a, b in order_inversions(pts)],
    }
    return metrics, [
        ("sweep.csv", lambda f: write_sweep_csv(pts, f)),
        ("bifurcation.csv", lambda f: write_bifurcation_csv(pts, f)),
    ]


def _sync_config(vals, mismatch_key: str, **kw) -> SyncConfig:
    master = circuit_from(vals)
    slave = apply_mismatch(master, vals[mismatch_key])
    drive = vals["sync.drive"]
    if drive not in DRIVES:
        raise ConfigError(f"sync.drive must be one of {DRIVES}")
    return SyncConfig(
        master=master, slave=slave, t_sync=vals["sync.t_sync"],
        t_end=vals["t_end"] or T_END_DEFAULT["sync"], drive_variable=drive,
        coupling=vals["sync.coupling"], r_c=vals["sync.r_c"],
        master_init=vals["init"], slave_init=vals["sync.slave_init"], dt=vals["dt"],
        record_every=vals["record_every"], settle=vals["sync.settle"], **kw)


def cmd_sync(vals, out: Path):
    cfg = _sync_config(vals, "sync.mismatch")
    res = run_synchronization(cfg)
    m = res.metrics
    metrics = {**asdict(m), "ratio": m.ratio, "pre_ratio": m.rms_pre / m.signal_rms}
    return metrics, [("sync.csv", lambda f: write_sync_csv(res, f))]


def _load_message(path: str, dt: float, n: int) -> np.ndarray:
    t, v = read_csv(path, ("t", "value"))
    if len(t) < 2 or np.any(np.diff(t) <= 0):
        raise ConfigError("message CSV needs at least two rows with increasing t")
    return np.interp(dt * np.arange(n), t, v, left=0.0, right=0.0)


def cmd_comm(vals, out: Path):
    cfg = _sync_config(vals, "comm.mismatch", mask_ratio=vals["comm.mask_ratio"])
    if cfg.drive_variable != "v_c1":
        raise ConfigError("masking needs sync.drive = v_c1")
    tx_cfg = replace(cfg, slave=cfg.master)
    rate = 1.0 / cfg.dt
    n = int(round(cfg.t_end / cfg.dt)) + 1
    rms = drive_rms(tx_cfg)
    if vals["comm.message"]:
        msg = _load_message(vals["comm.message"], cfg.dt, n)
    else:
        msg = tone(vals["comm.tone_freq"], vals["comm.tone_amp"] * rms, cfg.t_end, rate)
    ch = mask_transmit(msg, tx_cfg, rate)
    rec = recover_message(ch, cfg)
    corr = masking_correlation(msg, rec)
    k = int(math.ceil(rec.valid_from / cfg.dt - 1e-9))
    m = min(len(msg), len(rec.recovered))
    err = rec.recovered[k:m] - msg[k:m]
    metrics = {
        "correlation": corr,
        "drive_rms": rms,
        "message_rms": float(np.sqrt(np.mean(np.square(msg[k:m])))),
        "recovery_error_rms": float(np.sqrt(np.mean(np.square(err)))),
        "warning": ch.warning,
    }
    step = cfg.record_every
    t = ch.t[::step]
    return metrics, [
        ("channel.csv", lambda f: write_channel_csv(f, t, ch.channel[::step])),
        ("message.csv", lambda f: write_message_csv(f, t, ch.message[::step], rec.recovered[::step])),
    ]


def cmd_sound(vals, out: Path):
    p = circuit_from(vals)
    kind = vals["sound.mod"]
    duration = vals["t_end"] or vals["sound.duration"]
    if kind == STAIRCASE:
        mod = Modulation.staircase(vals["sound.levels"], vals["sound.freq"], duration)
    elif kind == SINE:
        mod = Modulation.sine(vals["sound.center"], vals["sound.depth"], vals["sound.freq"], duration)
    else:
        raise ConfigError(f"sound.mod must be {STAIRCASE} or {SINE}")
    if vals["sound.node"] not in NODES:
        raise ConfigError(f"sound.node must be one of {NODES}")
    clip, raw = synthesize(p, mod, vals["sound.rate"], vals["sound.node"], vals["dt"],
                           vals["record_every"], vals["init"])
    metrics = {"rate": clip.rate, "samples": len(clip.samples), "raw_peak": float(np.max(np.abs(raw)))}
    files = [("sound.wav", lambda f: write_wav(clip, f))]
    if vals["sound.csv"]:
        files.append(("sound.csv", lambda f: write_samples_csv(f, clip.rate, clip.samples)))
    return metrics, files


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "sync": cmd_sync,
    "comm": cmd_comm,
    "sound": cmd_sound,
}


# -- argument handling -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value settings file")
    common.add_argument("--out", default=".", help="output directory (created if missing)")
    common.add_argument("--dt", help="integration step, s")
    common.add_argument("--t-end", help="end time, s (sound: clip length)")
    common.add_argument("--record-every", help="record one sample per this many steps")
    common.add_argument("--r0", help="coupling resistor, ohm (SI suffixes allowed)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any settings key; repeatable")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="chualab", description="Chua's circuit experiments")
    ap.add_argument("--version", action="version", version=f"chualab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", parents=[common], help="trajectory and phase-space CSVs")

    sw = sub.add_parser("sweep", parents=[common], help="regime classification over r0")
    sw.add_argument("--values", help="comma list or start:stop:step (inclusive)")
    sw.add_argument("--workers", help="parallel workers (default: CPU count)")
    sw.add_argument("--refine", help="bisect regime changes down to this r0 step")

    sy = sub.add_parser("sync", parents=[common], help="master/slave synchronization")
    sy.add_argument("--mismatch", help="none | c=5%% | r0=5%% | c1=..,c2=..,l=..")
    sy.add_argument("--t-sync", help="switch-close time, s")
    sy.add_argument("--coupling", choices=["substitution", "resistive"])
    sy.add_argument("--r-c", help="coupling resistor for resistive mode, ohm")

    cm = sub.add_parser("comm", parents=[common], help="chaotic masking round trip")
    cm.add_argument("--mismatch", help="receiver mismatch, as for sync")
    cm.add_argument("--tone-freq", help="message tone frequency, Hz")
    cm.add_argument("--tone-amp", help="tone amplitude as a fraction of the drive RMS")
    cm.add_argument("--message", help="message CSV with header t,value")

    so = sub.add_parser("sound", parents=[common], help="modulated-r0 WAV synthesis")
    so.add_argument("--mod", choices=[STAIRCASE, SINE])
    so.add_argument("--freq", help="modulation frequency, Hz")
    so.add_argument("--levels", help="staircase levels, ohm, comma separated")
    so.add_argument("--center", help="sine center, ohm")
    so.add_argument("--depth", help="sine depth, ohm")
    so.add_argument("--rate", help="audio sample rate, Hz")
    so.add_argument("--node", choices=list(NODES))
    so.add_argument("--csv", action="store_true", help="also write pre-quantization samples")
    return ap


_FLAG_KEYS = {
    "dt": "dt", "t_end": "t_end", "record_every": "record_every", "r0": "r0",
    "values": "sweep.values", "workers": "sweep.workers", "refine": "sweep.refine",
    "t_sync": "sync.t_sync", "coupling": "sync.coupling", "r_c": "sync.r_c",
    "tone_freq": "comm.tone_freq", "tone_amp": "comm.tone_amp", "message": "comm.message",
    "mod": "sound.mod", "freq": "sound.freq", "levels": "sound.levels", "center": "sound.center",
    "depth": "sound.depth", "rate": "sound.rate", "node": "sound.node",
}


def _raw_settings(args) -> dict[str, str]:
    raw = read_config_file(args.config) if args.config else {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = (s.strip() for s in item.split("=", 1))
        if k not in KEYS:
            raise ConfigError(f"unknown key {k!r}")
        raw[k] = v
    for attr, key in _FLAG_KEYS.items():
        v = getattr(args, attr, None)
        if v is not None:
            raw[key] = str(v)
    if getattr(args, "mismatch", None) is not None:
        raw["sync.mismatch" if args.command == "sync" else "comm.mismatch"] = args.mismatch
    if getattr(args, "csv", False):
        raw["sound.csv"] = "true"
    return raw


def config_echo(text: dict[str, str]) -> str:
    return "".join(f"{k} = {v}\n" for k, v in text.items())


def run(args) -> RunReport:
    """Validate, compute, then write every output; raises on any failure."""
    start = time.perf_counter()
    vals, text = resolve(_raw_settings(args))
    out = Path(args.out)
    metrics, writers = COMMANDS[args.command](vals, out)
    out.mkdir(parents=True, exist_ok=True)
    report = RunReport(args.command, text, metrics=metrics)
    written = []
    try:
        for name, write in writers:
            write(out / name)
            written.append(out / name)
        with atomic_open(out / "run_config.txt") as fh:
            fh.write(config_echo(text))
        written.append(out / "run_config.txt")
        report.files = [str(f) for f in written] + [str(out / "report.json")]
        report.elapsed = time.perf_counter() - start
        with atomic_open(out / "report.json") as fh:
            fh.write(report.to_json() + "\n")
    except BaseException:
        for f in written:
            f.unlink(missing_ok=True)
        raise
    return report


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        report = run(args)
    except (ConfigError, ModelError, ValueError) as e:
        print(f"chualab: invalid input: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (DivergenceError, ArithmeticError, FloatingPointError) as e:
        print(f"chualab: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as e:
        print(f"chualab: file error: {e}", file=sys.stderr)
        return EXIT_IO
    print(json.dumps({"command": report.command, "files": report.files,
                      "metrics": report.metrics}, default=_jsonable, sort_keys=True)[:4000])
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
