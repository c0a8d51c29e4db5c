"""Drive-response synchronization and chaotic masking.

A master circuit drives a slave through one state variable (v_c1 by
default). Before the switch closes at ``t_sync`` both run freely; after it,
the slave's drive variable is replaced by the master's (substitution) or pulled
towards it through a resistor. The slave's remaining (v_c2, i_l) subsystem is a
damped LC tank and converges onto the master's.

Masking: the transmitted channel is v_c1 + message, and the same channel
signal also feeds the transmitter's own C2 node. A matched receiver driven by
the channel therefore reproduces the transmitter's (v_c2, i_l) exactly,
regenerates v_c1 from its own first equation, and recovers the message as
channel - regenerated v_c1.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._backend import kernels
from .circuit import CircuitParams, State, as_state, table_one
from .integrator import (
    CLOSE_SWITCH,
    DEFAULT_DT,
    DIVERGENCE_LIMIT,
    Coupling,
    DivergenceError,
    Event,
    Schedule,
    _diode_arrays,
    _n_steps,
    simulate_pair,
    step_index,
)
from .io import read_csv, write_csv

DRIVES = ("v_c1", "v_c2", "i_l")
DEFAULT_MASTER_INIT = State(0.1, 0.0, 0.0)
DEFAULT_SLAVE_INIT = State(-0.1, 0.05, 0.0)


@dataclass(frozen=True)
class SyncConfig:
    master: CircuitParams = field(default_factory=table_one)
    slave: CircuitParams = field(default_factory=table_one)
    t_sync: float = 0.1
    t_end: float = 0.2
    drive_variable: str = "v_c1"
    coupling: str = "substitution"
    r_c: float | None = None
    master_init: State = DEFAULT_MASTER_INIT
    slave_init: State = DEFAULT_SLAVE_INIT
    dt: float = DEFAULT_DT
    record_every: int = 10
    settle: float = 0.02
    mask_ratio: float = 0.05

    def __post_init__(self):
        if not 0 < self.t_sync < self.t_end:
            raise ValueError("need 0 < t_sync < t_end")
        if self.drive_variable not in DRIVES:
            raise ValueError(f"drive_variable must be one of {DRIVES}")
        if not 0 <= self.settle < self.t_end - self.t_sync:
            raise ValueError("settle must be shorter than the synchronized window")
        object.__setattr__(self, "master_init", as_state(self.master_init))
        object.__setattr__(self, "slave_init", as_state(self.slave_init))
        self.link  # validates coupling / r_c

    @property
    def drive_index(self) -> int:
        return DRIVES.index(self.drive_variable)

    @property
    def link(self) -> Coupling:
        return Coupling(self.coupling, self.drive_index, self.r_c)


@dataclass(frozen=True)
class SyncMetrics:
    rms_pre: float
    rms_post: float
    max_glitch_post: float
    signal_rms: float
    signal_peak: float

    @property
    def ratio(self) -> float:
        """rms_post / signal_rms."""
        return self.rms_post / self.signal_rms if self.signal_rms > 0 else math.inf


@dataclass(frozen=True)
class SyncResult:
    t: np.ndarray = field(repr=False)
    master_v_y: np.ndarray = field(repr=False)
    slave_v_y: np.ndarray = field(repr=False)
    difference: np.ndarray = field(repr=False)
    t_sync: float
    metrics: SyncMetrics | None = None


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(x))))


def sync_error_metrics(result: SyncResult, settle: float) -> SyncMetrics:
    """Error statistics before the switch and after ``t_sync + settle``."""
    t = result.t
    t_end = float(t[-1])
    if not 0 <= settle < t_end - result.t_sync:
        raise ValueError("settle must be shorter than the synchronized window")
    pre = t < result.t_sync
    post = t >= result.t_sync + settle - 1e-12
    if not pre.any() or not post.any():
        raise ValueError("empty metric window")
    d = result.difference
    return SyncMetrics(
        rms_pre=_rms(d[pre]),
        rms_post=_rms(d[post]),
        max_glitch_post=float(np.max(np.abs(d[post]))),
        signal_rms=_rms(result.master_v_y[post]),
        signal_peak=float(np.max(np.abs(result.master_v_y[post]))),
    )


def run_synchronization(cfg: SyncConfig) -> SyncResult:
    """Run master and slave, close the switch at ``t_sync``, compare v_c2."""
    sched = Schedule((Event(cfg.t_sync, CLOSE_SWITCH),))
    tr = simulate_pair(cfg.master, cfg.slave, cfg.master_init, cfg.slave_init, cfg.t_end,
                       cfg.dt, sched, cfg.link, cfg.record_every)
    m, s = tr.master[:, 1].copy(), tr.slave[:, 1].copy()
    res = SyncResult(tr.t, m, s, m - s, cfg.t_sync)
    return SyncResult(res.t, m, s, res.difference, cfg.t_sync, sync_error_metrics(res, cfg.settle))


def write_sync_csv(result: SyncResult, path) -> None:
    write_csv(path, ("t", "v_y_master", "v_y_slave", "difference"),
              (result.t, result.master_v_y, result.slave_v_y, result.difference))


def read_sync_csv(path, t_sync: float) -> SyncResult:
    cols = read_csv(path, ("t", "v_y_master", "v_y_slave", "difference"))
    return SyncResult(cols[0], cols[1], cols[2], cols[3], t_sync)


# -- masking ---------------------------------------------------------------

@dataclass(frozen=True)
class Channel:
    """Transmitted signal and the clean chaotic drive, both at step rate."""

    dt: float
    channel: np.ndarray = field(repr=False)
    drive: np.ndarray = field(repr=False)
    message: np.ndarray = field(repr=False)
    warning: str | None = None

    @property
    def t(self) -> np.ndarray:
        return self.dt * np.arange(len(self.channel))


def tone(freq: float, amplitude: float, duration: float, rate: float) -> np.ndarray:
    """Sampled sinusoid ``amplitude * sin(2 pi freq t)``, inclusive of t = duration."""
    n = int(round(duration * rate)) + 1
    return amplitude * np.sin(2.0 * np.pi * freq * np.arange(n) / rate)


def _message_at_steps(message: np.ndarray, rate: float, n: int, dt: float) -> np.ndarray:
    """Message resampled onto step boundaries (linear interpolation, zero past its end)."""
    message = np.asarray(message, dtype=np.float64)
    tm = np.arange(len(message)) / rate
    ts = dt * np.arange(n)
    return np.interp(ts, tm, message, left=0.0, right=0.0) if len(message) else np.zeros(n)


def drive_rms(cfg: SyncConfig) -> float:
    """RMS of the message-free master drive over [t_sync, t_end]."""
    ch = mask_transmit(np.zeros(1), cfg, rate=1.0 / cfg.dt, check_amplitude=False)
    k = step_index(cfg.t_sync, cfg.dt)
    return _rms(ch.drive[k:])


def mask_transmit(message: Sequence[float], cfg: SyncConfig, rate: float | None = None,
                  check_amplitude: bool = True) -> Channel:
    """Simulate the master with the message added to its transmitted v_c1.

    ``message`` is sampled at ``rate`` (default: the step rate 1/dt) starting at
    t = 0; past its end it is taken as zero. A message peak above
    ``mask_ratio`` times the drive RMS is allowed but flagged.
    """
    if cfg.drive_variable != "v_c1":
        raise ValueError("masking is implemented for the v_c1 drive only")
    rate = 1.0 / cfg.dt if rate is None else float(rate)
    n = _n_steps(cfg.t_end, cfg.dt)
    msg = _message_at_steps(message, rate, n + 1, cfg.dt)
    p = cfg.master
    bp, sl, gb, nb = _diode_arrays(p)
    state = np.array(cfg.master_init, dtype=np.float64)
    chan = np.empty(n + 1)
    drv = np.empty(n + 1)
    bad = kernels.transmit(state, n, cfg.dt, p.consts(), p.r0, bp, sl, gb, nb,
                           msg, cfg.dt, chan, drv, DIVERGENCE_LIMIT)
    if bad >= 0:
        raise DivergenceError(bad * cfg.dt)
    warning = None
    if check_amplitude:
        k = step_index(cfg.t_sync, cfg.dt)
        limit = cfg.mask_ratio * _rms(drv[k:])
        peak = float(np.max(np.abs(msg))) if len(msg) else 0.0
        if peak > limit:
            warning = (f"message peak {peak:.4g} V exceeds {cfg.mask_ratio:g} x drive RMS "
                       f"({limit:.4g} V); recovery will degrade")
            warnings.warn(warning, RuntimeWarning, stacklevel=2)
    return Channel(cfg.dt, chan, drv, msg, warning)


@dataclass(frozen=True)
class Recovered:
    dt: float
    regenerated: np.ndarray = field(repr=False)
    recovered: np.ndarray = field(repr=False)
    valid_from: float

    @property
    def t(self) -> np.ndarray:
        return self.dt * np.arange(len(self.recovered))


def recover_message(channel: Channel | Sequence[float], cfg: SyncConfig) -> Recovered:
    """Drive the slave with the channel and subtract its regenerated v_c1.

    ``channel`` must be sampled at the step rate 1/cfg.dt from t = 0. The
    result is meaningful after ``t_sync + settle`` (``valid_from``).
    """
    s = np.ascontiguousarray(channel.channel if isinstance(channel, Channel) else channel,
                             dtype=np.float64)
    if len(s) < 2:
        raise ValueError("channel too short")
    n = len(s) - 1
    p = cfg.slave
    bp, sl, gb, nb = _diode_arrays(p)
    state = np.array(cfg.slave_init, dtype=np.float64)
    regen = np.empty(n + 1)
    bad = kernels.receive(state, n, cfg.dt, p.consts(), p.r0, bp, sl, gb, nb, s,
                          step_index(cfg.t_sync, cfg.dt), regen, DIVERGENCE_LIMIT)
    if bad >= 0:
        raise DivergenceError(bad * cfg.dt)
    return Recovered(cfg.dt, regen, s - regen, cfg.t_sync + cfg.settle)


def masking_correlation(original: np.ndarray, rec: Recovered) -> float:
    """Pearson correlation of original and recovered message after ``valid_from``."""
    k = step_index(rec.valid_from, rec.dt)
    m = min(len(original), len(rec.recovered))
    a = np.asarray(original, dtype=np.float64)[k:m]
    b = rec.recovered[k:m]
    if np.std(a) == 0 or np.std(b) == 0:
        return 0.0
    return float(np.corrcoef(a, b)[0, 1])


def write_message_csv(path, t: np.ndarray, original: np.ndarray, recovered: np.ndarray) -> None:
    write_csv(path, ("t", "original", "recovered"), (t, original, recovered))


def write_channel_csv(path, t: np.ndarray, channel: np.ndarray) -> None:
    write_csv(path, ("t", "channel"), (t, channel))
