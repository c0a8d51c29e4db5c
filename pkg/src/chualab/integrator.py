"""Fixed-step RK4 integration of the circuit with scheduled parameter changes.

Schedules carry timed actions (``set_r0``, ``close_sync_switch``,
``open_sync_switch``) and optionally a continuous r0 waveform. Actions take
effect at the first step boundary at or after their time. The hot loops live
in the kernel backend (compiled or pure Python, see ``chualab._backend``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._backend import kernels, python_kernels
from .circuit import CircuitParams, State, as_state, vector_field
from .io import write_csv

DEFAULT_DT = 1e-7
DEFAULT_RECORD_EVERY = 10
DIVERGENCE_LIMIT = 1e6

SET_R0 = "set_r0"
CLOSE_SWITCH = "close_sync_switch"
OPEN_SWITCH = "open_sync_switch"
_ACTIONS = (SET_R0, CLOSE_SWITCH, OPEN_SWITCH)


class DivergenceError(ArithmeticError):
    """State left the physical range (or became non-finite)."""

    def __init__(self, t: float, msg: str = ""):
        self.t = float(t)
        super().__init__(msg or f"trajectory diverged at t = {self.t:.9g} s")


@dataclass(frozen=True)
class Event:
    time: float
    action: str
    value: float | None = None

    def __post_init__(self):
        if self.action not in _ACTIONS:
            raise ValueError(f"unknown schedule action {self.action!r}")
        if not (math.isfinite(self.time) and self.time >= 0):
            raise ValueError(f"event time must be finite and >= 0, got {self.time!r}")
        if self.action == SET_R0:
            if self.value is None or not (math.isfinite(self.value) and self.value > 0):
                raise ValueError(f"set_r0 needs a positive resistance, got {self.value!r}")


@dataclass(frozen=True)
class SineR0:
    """r0(t) = center + depth * sin(2*pi*freq*t)."""

    center: float
    depth: float
    freq: float

    def __post_init__(self):
        if not (self.center > 0 and 0 <= self.depth < self.center and self.freq > 0):
            raise ValueError("need center > depth >= 0 and freq > 0")

    def __call__(self, t: float) -> float:
        return self.center + self.depth * math.sin(2.0 * math.pi * self.freq * t)


@dataclass(frozen=True)
class Schedule:
    events: tuple[Event, ...] = ()
    r0_waveform: SineR0 | Callable[[float], float] | None = None

    def __post_init__(self):
        ev = tuple(self.events)
        object.__setattr__(self, "events", ev)
        for a, b in zip(ev, ev[1:]):
            if b.time < a.time:
                raise ValueError("schedule events must be in non-decreasing time order")

    @classmethod
    def empty(cls) -> "Schedule":
        return cls()


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled states; row k is at ``t0 + k * dt_record``."""

    t0: float
    dt_record: float
    samples: np.ndarray = field(repr=False)
    params_used: CircuitParams

    def __post_init__(self):
        if not self.dt_record > 0:
            raise ValueError("dt_record must be positive")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt_record * np.arange(len(self.samples))

    @property
    def v_c1(self) -> np.ndarray:
        return self.samples[:, 0]

    @property
    def v_c2(self) -> np.ndarray:
        return self.samples[:, 1]

    @property
    def i_l(self) -> np.ndarray:
        return self.samples[:, 2]

    @property
    def rate(self) -> float:
        return 1.0 / self.dt_record

    def final(self) -> State:
        return State(*map(float, self.samples[-1]))

    def window(self, t_start: float) -> "Trajectory":
        """Drop samples before ``t_start``."""
        k = max(0, int(math.ceil((t_start - self.t0) / self.dt_record - 1e-9)))
        return Trajectory(self.t0 + k * self.dt_record, self.dt_record, self.samples[k:], self.params_used)


def step_index(t: float, dt: float) -> int:
    """First step boundary at or after time ``t``."""
    return max(0, int(math.ceil(t / dt - 1e-9)))


def _n_steps(t_end: float, dt: float) -> int:
    if not (t_end > 0 and dt > 0):
        raise ValueError("t_end and dt must be positive")
    return int(round(t_end / dt))


def _diode_arrays(p: CircuitParams):
    bp, sl, gb = p.diode.arrays()
    nb = len(bp)
    if nb == 0:
        bp = np.array([np.inf])
        gb = np.zeros(1)
    return bp, sl, gb, nb


def step_rk4(s: Sequence[float], t: float, dt: float, p: CircuitParams,
             r0: float | Callable[[float], float] | None = None) -> State:
    """One classical RK4 step of the state equations."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if callable(r0):
        ra, rb, rc = r0(t), r0(t + 0.5 * dt), r0(t + dt)
    else:
        ra = rb = rc = p.r0 if r0 is None else r0
    x, y, z = (float(v) for v in s)
    hh = 0.5 * dt
    k1 = vector_field((x, y, z), p, ra)
    k2 = vector_field((x + hh * k1[0], y + hh * k1[1], z + hh * k1[2]), p, rb)
    k3 = vector_field((x + hh * k2[0], y + hh * k2[1], z + hh * k2[2]), p, rb)
    k4 = vector_field((x + dt * k3[0], y + dt * k3[1], z + dt * k3[2]), p, rc)
    h6 = dt / 6.0
    out = State(
        x + h6 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y + h6 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        z + h6 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
    )
    if not all(math.isfinite(v) for v in out):
        raise DivergenceError(t + dt)
    return out


def _segments(nsteps: int, dt: float, sched: Schedule, r0: float):
    """Split [0, nsteps) at set_r0 events -> list of (k_start, k_stop, r0)."""
    cuts = []
    for ev in sched.events:
        if ev.action == SET_R0:
            k = step_index(ev.time, dt)
            if k < nsteps:
                cuts.append((k, ev.value))
    segs = []
    k_prev, r_prev = 0, r0
    for k, r in cuts:
        if k > k_prev:
            segs.append((k_prev, k, r_prev))
        k_prev, r_prev = max(k_prev, k), r
    segs.append((k_prev, nsteps, r_prev))
    return [s for s in segs if s[1] > s[0]]


def simulate(p: CircuitParams, init: Sequence[float], t_end: float, dt: float = DEFAULT_DT,
             sched: Schedule | None = None, record_every: int = DEFAULT_RECORD_EVERY,
             discard: float = 0.0) -> Trajectory:
    """Integrate from t = 0 to ``t_end`` and record every ``record_every`` steps.

    The initial state is the first sample. ``discard`` drops the leading
    transient from the returned trajectory.
    """
    init = as_state(init)
    nsteps = _n_steps(t_end, dt)
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    sched = sched or Schedule()
    if any(ev.action != SET_R0 for ev in sched.events):
        raise ValueError("switch events need a coupled pair, see simulate_pair")

    out = np.empty((nsteps // record_every + 1, 3))
    out[0] = init
    state = np.array(init, dtype=np.float64)
    pos = 1
    bp, sl, gb, nb = _diode_arrays(p)
    cc = p.consts()
    wf = sched.r0_waveform

    if wf is not None and not isinstance(wf, SineR0):
        # arbitrary waveform: Python callback per stage, slow path
        x, y, z = init
        for k in range(nsteps):
            t = k * dt
            x, y, z = python_kernels._rk4(x, y, z, dt, wf(t), wf(t + 0.5 * dt), wf(t + dt),
                                          p.c1, p.c2, p.l, list(bp), list(sl), list(gb), nb)
            if python_kernels._bad((x, y, z), DIVERGENCE_LIMIT):
                raise DivergenceError((k + 1) * dt)
            if (k + 1) % record_every == 0:
                out[pos] = (x, y, z)
                pos += 1
    else:
        if wf is not None:
            segs = [(0, nsteps, wf.center, wf.depth, 2.0 * math.pi * wf.freq)]
        else:
            segs = [(a, b, r, 0.0, 0.0) for a, b, r in _segments(nsteps, dt, sched, p.r0)]
        for k0, k1, rc, rd, rw in segs:
            pos, bad = kernels.integrate(state, k0, k1 - k0, dt, cc, rc, rd, rw,
                                         bp, sl, gb, nb, record_every, out, pos, DIVERGENCE_LIMIT)
            if bad >= 0:
                raise DivergenceError(bad * dt)

    tr = Trajectory(0.0, dt * record_every, out[:pos], p)
    return tr.window(discard) if discard > 0 else tr


@dataclass(frozen=True)
class Coupling:
    """How the slave is tied to the master while the switch is closed.

    ``substitution``: the slave's ``drive`` variable is overwritten by the
    master's. ``resistive``: a current (v_master - v_slave)/r_c flows into the
    slave's ``drive`` node (v_c1 or v_c2 only).
    """

    mode: str = "substitution"
    drive: int = 0
    r_c: float | None = None

    def __post_init__(self):
        if self.mode not in ("substitution", "resistive"):
            raise ValueError(f"unknown coupling mode {self.mode!r}")
        if self.drive not in (0, 1, 2):
            raise ValueError("drive must index v_c1 (0), v_c2 (1) or i_l (2)")
        if self.mode == "resistive":
            if self.drive == 2:
                raise ValueError("resistive coupling needs a capacitor node (v_c1 or v_c2)")
            if self.r_c is None or not self.r_c > 0:
                raise ValueError("resistive coupling needs r_c > 0")

    @property
    def kernel_mode(self) -> int:
        return 1 if self.mode == "substitution" else 2


@dataclass(frozen=True)
class PairTrajectory:
    t0: float
    dt_record: float
    master: np.ndarray = field(repr=False)
    slave: np.ndarray = field(repr=False)

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt_record * np.arange(len(self.master))


def simulate_pair(master: CircuitParams, slave: CircuitParams, init_master: Sequence[float],
                  init_slave: Sequence[float], t_end: float, dt: float = DEFAULT_DT,
                  sched: Schedule | None = None, coupling: Coupling = Coupling(),
                  record_every: int = DEFAULT_RECORD_EVERY) -> PairTrajectory:
    """Master and slave circuits stepped in lockstep; switch events toggle coupling."""
    nsteps = _n_steps(t_end, dt)
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    sched = sched or Schedule()
    if sched.r0_waveform is not None or any(ev.action == SET_R0 for ev in sched.events):
        raise ValueError("r0 changes are not supported for a coupled pair")

    cuts = [(step_index(ev.time, dt), ev.action == CLOSE_SWITCH) for ev in sched.events]
    segs = []
    k_prev, on = 0, False
    for k, new_on in cuts:
        k = min(k, nsteps)
        if k > k_prev:
            segs.append((k_prev, k, on))
        k_prev, on = max(k, k_prev), new_on
    segs.append((k_prev, nsteps, on))

    state = np.array(list(as_state(init_master)) + list(as_state(init_slave)), dtype=np.float64)
    out = np.empty((nsteps // record_every + 1, 6))
    out[0] = state
    pos = 1
    dm = _diode_arrays(master)
    ds = _diode_arrays(slave)
    rc = coupling.r_c if coupling.r_c is not None else 1.0
    for k0, k1, closed in segs:
        if k1 <= k0:
            continue
        mode = coupling.kernel_mode if closed else 0
        if closed and mode == 1:
            state[3 + coupling.drive] = state[coupling.drive]
        pos, bad = kernels.integrate_pair(state, k0, k1 - k0, dt, master.consts(), master.r0,
                                          slave.consts(), slave.r0, *dm, *ds, mode, coupling.drive,
                                          rc, record_every, out, pos, DIVERGENCE_LIMIT)
        if bad >= 0:
            raise DivergenceError(bad * dt)
    out = out[:pos]
    return PairTrajectory(0.0, dt * record_every, out[:, :3], out[:, 3:])


def boxcar_resample(x: np.ndarray, rate_in: float, rate_out: float) -> np.ndarray:
    """Average ``x`` (along axis 0) over each output interval, one value per interval."""
    x = np.asarray(x, dtype=np.float64)
    if not rate_out > 0:
        raise ValueError("target rate must be positive")
    if rate_out > rate_in * (1 + 1e-12):
        raise ValueError(f"target rate {rate_out} Hz exceeds recording rate {rate_in} Hz")
    rate_out = min(rate_out, rate_in)
    n_out = int(math.floor(len(x) * rate_out / rate_in + 1e-9))
    if n_out == 0:
        return x[:0].copy()
    edges = np.floor(np.arange(n_out + 1) * (rate_in / rate_out) + 1e-9).astype(np.int64)
    edges[-1] = min(edges[-1], len(x))
    sums = np.add.reduceat(x[: edges[-1]], edges[:-1], axis=0)
    counts = np.diff(edges).reshape((-1,) + (1,) * (x.ndim - 1))
    return sums / counts


def decimate(tr: Trajectory, target_rate: float) -> np.ndarray:
    """Boxcar anti-alias and resample the recorded states to ``target_rate``."""
    return boxcar_resample(tr.samples, tr.rate, target_rate)


TRAJECTORY_HEADER = ("t", "v_c1", "v_c2", "i_l")
PHASE_HEADER = ("v_c1", "v_c2")


def write_trajectory_csv(tr: Trajectory, path) -> None:
    write_csv(path, TRAJECTORY_HEADER, (tr.t, tr.v_c1, tr.v_c2, tr.i_l))


def write_phase_csv(tr: Trajectory, path) -> None:
    write_csv(path, PHASE_HEADER, (tr.v_c1, tr.v_c2))
