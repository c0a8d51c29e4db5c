"""Chua's circuit: component values, the op-amp diode and the state equations.

The nonlinear resistor is built from two saturating op-amp negative-impedance
cells. Each cell has a three-segment odd I-V curve; their sum is the
five-segment characteristic stored canonically as a :class:`DiodeModel`
(positive breakpoints plus one slope per region, innermost first).

Everything is in SI units: volts, amperes, ohms, farads, henries, seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

DEFAULT_E_SAT = 8.3


class ModelError(ValueError):
    """Invalid or degenerate circuit model."""


def _check_finite(v: float, what: str = "voltage") -> float:
    v = float(v)
    if not math.isfinite(v):
        raise ModelError(f"non-finite {what}: {v!r}")
    return v


@dataclass(frozen=True)
class CellParams:
    """One op-amp negative-impedance cell.

    ``r_in`` is the resistor between the input node and the op-amp output,
    ``r_fb`` / ``r_gnd`` form the divider feeding the inverting input.
    """

    r_in: float
    r_fb: float
    r_gnd: float
    e_sat: float = DEFAULT_E_SAT

    def __post_init__(self):
        for name in ("r_in", "r_fb", "r_gnd", "e_sat"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ModelError(f"{name} must be positive and finite, got {v!r}")

    @property
    def knee(self) -> float:
        """Input voltage at which the op-amp output saturates."""
        return self.r_gnd / (self.r_fb + self.r_gnd) * self.e_sat

    @property
    def inner_slope(self) -> float:
        return -self.r_fb / (self.r_in * self.r_gnd)

    @property
    def outer_slope(self) -> float:
        return 1.0 / self.r_in


def cell_current(v: float, cell: CellParams) -> float:
    """Input current of one cell at input voltage ``v``.

    Negative resistance ``-r_fb/(r_in*r_gnd)`` while the op-amp is linear,
    ``+1/r_in`` once its output is pinned at ``±e_sat``.
    """
    v = _check_finite(v)
    knee = cell.knee
    a = abs(v)
    if a <= knee:
        i = cell.inner_slope * a
    else:
        i = cell.inner_slope * knee + cell.outer_slope * (a - knee)
    return i if v >= 0 else -i


@dataclass(frozen=True)
class DiodeModel:
    """Odd, continuous piecewise-linear I-V curve ``i = g(v)``.

    ``slopes[k]`` is the conductance for ``breakpoints[k-1] < |v| <= breakpoints[k]``
    (with ``breakpoints[-1]`` read as +inf for the last slope).
    """

    breakpoints: tuple[float, ...]
    slopes: tuple[float, ...]
    # g evaluated at each breakpoint; derived, keeps every evaluation path on
    # the same arithmetic
    knee_currents: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        sl = tuple(float(s) for s in self.slopes)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "slopes", sl)
        if len(sl) != len(bp) + 1:
            raise ModelError("need exactly one more slope than breakpoints")
        if not all(math.isfinite(s) for s in sl):
            raise ModelError("slopes must be finite")
        prev = 0.0
        for b in bp:
            if not (math.isfinite(b) and b > prev):
                raise ModelError("breakpoints must be positive and strictly ascending")
            prev = b
        gb = []
        g = 0.0
        lo = 0.0
        for k, b in enumerate(bp):
            g = sl[0] * b if k == 0 else g + sl[k] * (b - lo)
            gb.append(g)
            lo = b
        object.__setattr__(self, "knee_currents", tuple(gb))

    @property
    def n_regions(self) -> int:
        return len(self.slopes)

    def region_of(self, v: float) -> int:
        """Index of the region containing ``|v|`` (0 = innermost)."""
        a = abs(v)
        k = 0
        for b in self.breakpoints:
            if a > b:
                k += 1
            else:
                break
        return k

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(breakpoints, slopes, knee currents) as contiguous float64 arrays."""
        return (
            np.ascontiguousarray(self.breakpoints, dtype=np.float64),
            np.ascontiguousarray(self.slopes, dtype=np.float64),
            np.ascontiguousarray(self.knee_currents, dtype=np.float64),
        )

    def scaled(self, factor: float) -> "DiodeModel":
        """Same slopes, breakpoints multiplied by ``factor``."""
        return DiodeModel(tuple(b * factor for b in self.breakpoints), self.slopes)


def build_diode(cell_a: CellParams, cell_b: CellParams) -> DiodeModel:
    """Sum of two cell curves as a canonical five-segment diode."""
    ka, kb = cell_a.knee, cell_b.knee
    if math.isclose(ka, kb, rel_tol=1e-12, abs_tol=0.0):
        raise ModelError(f"cells share the knee voltage {ka!r}; the diode would be degenerate")
    lo, hi = (cell_a, cell_b) if ka < kb else (cell_b, cell_a)
    slopes = (
        lo.inner_slope + hi.inner_slope,
        lo.outer_slope + hi.inner_slope,
        lo.outer_slope + hi.outer_slope,
    )
    return DiodeModel((lo.knee, hi.knee), slopes)


def diode_current(v: float, d: DiodeModel) -> float:
    """Evaluate ``g(v)``.

    The arithmetic here is mirrored exactly by the integration kernels.
    """
    v = _check_finite(v)
    a = abs(v)
    bp = d.breakpoints
    k = 0
    nb = len(bp)
    while k < nb and a > bp[k]:
        k += 1
    if k == 0:
        r = d.slopes[0] * a
    else:
        r = d.knee_currents[k - 1] + d.slopes[k] * (a - bp[k - 1])
    return r if v >= 0 else -r


def diode_slope(v: float, d: DiodeModel) -> float:
    """Incremental conductance ``g'(v)`` (right-continuous at breakpoints)."""
    return d.slopes[d.region_of(v)]


@dataclass(frozen=True)
class CircuitParams:
    l: float
    c1: float
    c2: float
    r0: float
    diode: DiodeModel

    def __post_init__(self):
        for name in ("l", "c1", "c2", "r0"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ModelError(f"{name} must be positive and finite, got {v!r}")

    def with_r0(self, r0: float) -> "CircuitParams":
        return replace(self, r0=float(r0))

    def scaled(self, *, l: float = 1.0, c1: float = 1.0, c2: float = 1.0, r0: float = 1.0) -> "CircuitParams":
        """Copy with component values multiplied by the given factors (mismatch studies)."""
        return replace(self, l=self.l * l, c1=self.c1 * c1, c2=self.c2 * c2, r0=self.r0 * r0)

    @property
    def tank_impedance(self) -> float:
        """sqrt(L/C2); converts inductor current to a voltage scale."""
        return math.sqrt(self.l / self.c2)

    def consts(self) -> np.ndarray:
        return np.array([self.c1, self.c2, self.l], dtype=np.float64)


class State(NamedTuple):
    v_c1: float
    v_c2: float
    i_l: float

    def __neg__(self) -> "State":
        return State(-self.v_c1, -self.v_c2, -self.i_l)


def as_state(s: Sequence[float]) -> State:
    v = tuple(float(x) for x in s)
    if len(v) != 3:
        raise ModelError(f"state needs 3 components, got {len(v)}")
    if not all(math.isfinite(x) for x in v):
        raise ModelError(f"non-finite state {v!r}")
    return State(*v)


def vector_field(s: Sequence[float], p: CircuitParams, r0: float | None = None) -> State:
    """Time derivative ``(dV_c1/dt, dV_c2/dt, dI_L/dt)``.

    ``r0`` overrides ``p.r0`` (used while the coupling resistor is modulated).
    """
    x, y, z = s
    r = p.r0 if r0 is None else r0
    return State(
        ((y - x) / r - diode_current(x, p.diode)) / p.c1,
        ((x - y) / r + z) / p.c2,
        -y / p.l,
    )


# Component values of the reference build.
TABLE_I = {
    "l": 18e-3,
    "c1": 10e-9,
    "c2": 100e-9,
    "cell_a": (220.0, 220.0, 2200.0),
    "cell_b": (22e3, 22e3, 3300.0),
}


def default_cells(e_sat: float = DEFAULT_E_SAT) -> tuple[CellParams, CellParams]:
    return (
        CellParams(*TABLE_I["cell_a"], e_sat=e_sat),
        CellParams(*TABLE_I["cell_b"], e_sat=e_sat),
    )


def table_one(r0: float = 1800.0, e_sat: float = DEFAULT_E_SAT) -> CircuitParams:
    """Reference circuit with coupling resistor ``r0``."""
    a, b = default_cells(e_sat)
    return CircuitParams(
        l=TABLE_I["l"], c1=TABLE_I["c1"], c2=TABLE_I["c2"], r0=float(r0), diode=build_diode(a, b)
    )
