"""Equilibria, regional eigenvalues, Lyapunov exponent and regime classification.

The realized diode has three regions on each side (inner, middle, outer).
Stability of each region is read off the 3x3 Jacobian of the state equations
with the diode replaced by that region's slope.
"""

from __future__ import annotations

import cmath
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from ._backend import kernels
from .circuit import CircuitParams, State, as_state, diode_current, vector_field
from .io import write_rows
from .integrator import DEFAULT_DT, DIVERGENCE_LIMIT, DivergenceError, _diode_arrays, simulate

log = logging.getLogger(__name__)

REGION_NAMES = ("inner", "middle", "outer")
DEFAULT_INIT = State(0.1, 0.0, 0.0)


def region_index(p: CircuitParams, region: str | int) -> int:
    n = p.diode.n_regions
    if isinstance(region, str):
        names = REGION_NAMES if n == 3 else tuple(f"region{k}" for k in range(n))
        if region not in names:
            raise ValueError(f"unknown region {region!r}; expected one of {names}")
        return names.index(region)
    k = int(region)
    if not 0 <= k < n:
        raise ValueError(f"region index {k} out of range for a {n}-region diode")
    return k


def region_name(p: CircuitParams, k: int) -> str:
    return REGION_NAMES[k] if p.diode.n_regions == 3 else f"region{k}"


# -- equilibria -------------------------------------------------------------

def equilibria(p: CircuitParams) -> list[tuple[State, str]]:
    """All equilibria, origin first, then ``(+v, -v)`` pairs by increasing |v|.

    At rest v_c2 = 0, i_l = -v_c1/r0 and v_c1 solves g(v) + v/r0 = 0; each
    linear segment of g contributes at most one root per side.
    """
    d = p.diode
    g0 = 1.0 / p.r0
    found = [(State(0.0, 0.0, 0.0), region_name(p, 0))]
    lo = 0.0
    for k in range(1, d.n_regions):
        lo = d.breakpoints[k - 1]
        hi = d.breakpoints[k] if k < len(d.breakpoints) else math.inf
        s = d.slopes[k]
        if s + g0 == 0.0:
            continue
        # g(v) = G + s (v - lo) on this segment
        v = (s * lo - d.knee_currents[k - 1]) / (s + g0)
        if lo < v <= hi:
            name = region_name(p, k)
            found.append((State(v, 0.0, -v / p.r0), name))
            found.append((State(-v, 0.0, v / p.r0), name))
    return found


# -- linearization ----------------------------------------------------------

def jacobian(p: CircuitParams, region: str | int) -> np.ndarray:
    """Jacobian of the state equations with g'(v) = slope of ``region``."""
    s = p.diode.slopes[region_index(p, region)]
    r, c1, c2, l = p.r0, p.c1, p.c2, p.l
    return np.array([
        [(-1.0 / r - s) / c1, 1.0 / (r * c1), 0.0],
        [1.0 / (r * c2), -1.0 / (r * c2), 1.0 / c2],
        [0.0, -1.0 / l, 0.0],
    ])


def _cubic_newton(a: float, b: float, c: float, z: complex, iters: int = 3) -> complex:
    def f(w):
        return ((w + a) * w + b) * w + c

    fz = abs(f(z))
    for _ in range(iters):
        dfz = (3.0 * z + 2.0 * a) * z + b
        if dfz == 0:
            break
        z2 = z - f(z) / dfz
        f2 = abs(f(z2))
        if not f2 < fz:
            break
        z, fz = z2, f2
    return z


def eigenvalues3(m: np.ndarray) -> np.ndarray:
    """Eigenvalues of a real 3x3 matrix from its characteristic cubic.

    Closed form (Cardano / trigonometric) on the matrix scaled to unit max
    entry, a couple of Newton steps on each root, and the complex pair taken
    from the deflated quadratic so it is exactly conjugate.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3) or not np.all(np.isfinite(m)):
        raise ValueError("need a finite 3x3 matrix")
    scale = float(np.max(np.abs(m)))
    if scale == 0.0:
        return np.zeros(3, dtype=complex)
    ms = m / scale
    tr = ms[0, 0] + ms[1, 1] + ms[2, 2]
    minors = (
        ms[0, 0] * ms[1, 1] - ms[0, 1] * ms[1, 0]
        + ms[0, 0] * ms[2, 2] - ms[0, 2] * ms[2, 0]
        + ms[1, 1] * ms[2, 2] - ms[1, 2] * ms[2, 1]
    )
    det = float(np.linalg.det(ms))
    # lambda^3 + a lambda^2 + b lambda + c
    a, b, c = -tr, minors, -det
    p = b - a * a / 3.0
    q = 2.0 * a ** 3 / 27.0 - a * b / 3.0 + c
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    shift = -a / 3.0

    if disc > 0:
        sq = math.sqrt(disc)
        u = -q / 2.0 - math.copysign(sq, q)
        u = math.copysign(abs(u) ** (1.0 / 3.0), u)
        t = u - p / (3.0 * u) if u != 0.0 else 0.0
        r = _cubic_newton(a, b, c, complex(t + shift)).real
        # synthetic division by (lambda - r)
        bq = a + r
        cq = b + r * bq
        dq = bq * bq - 4.0 * cq
        if dq < 0:
            re, im = -bq / 2.0, math.sqrt(-dq) / 2.0
            z = _cubic_newton(a, b, c, complex(re, im))
            roots = [complex(r), z, z.conjugate()]
        else:
            sdq = math.sqrt(dq)
            q1 = -0.5 * (bq + math.copysign(sdq, bq))
            r1 = q1
            r2 = cq / q1 if q1 != 0 else 0.0
            roots = [complex(r), _cubic_newton(a, b, c, complex(r1)),
                     _cubic_newton(a, b, c, complex(r2))]
    else:
        if p == 0.0:
            ts = [0.0, 0.0, 0.0]
        else:
            rr = 2.0 * math.sqrt(-p / 3.0)
            arg = 3.0 * q / (2.0 * p) * math.sqrt(-3.0 / p)
            phi = math.acos(max(-1.0, min(1.0, arg))) / 3.0
            ts = [rr * math.cos(phi - 2.0 * math.pi * k / 3.0) for k in range(3)]
        roots = [complex(_cubic_newton(a, b, c, complex(t + shift)).real) for t in ts]
    out = np.array(roots, dtype=complex) * scale
    return out[np.lexsort((out.imag, out.real))]


def char_residual(m: np.ndarray, lam: complex) -> float:
    """|det(m - lam I)| / ||m||_F^3."""
    m = np.asarray(m, dtype=np.float64)
    nrm = float(np.linalg.norm(m))
    if nrm == 0:
        return abs(lam) ** 3
    return float(abs(np.linalg.det(m.astype(complex) - lam * np.eye(3))) / nrm ** 3)


@dataclass(frozen=True)
class EigenReport:
    eigenvalues: tuple[complex, complex, complex]
    stable: bool
    region: str

    @property
    def n_unstable_real(self) -> int:
        return sum(1 for z in self.eigenvalues if z.imag == 0 and z.real > 0)

    @property
    def complex_pair(self) -> tuple[complex, complex] | None:
        cz = [z for z in self.eigenvalues if z.imag != 0]
        return (cz[0], cz[1]) if len(cz) == 2 else None


def eigen_report(p: CircuitParams, region: str | int) -> EigenReport:
    k = region_index(p, region)
    ev = eigenvalues3(jacobian(p, k))
    return EigenReport(tuple(complex(z) for z in ev), bool(np.all(ev.real < 0)), region_name(p, k))


# -- Lyapunov exponent ------------------------------------------------------

@dataclass(frozen=True)
class LyapunovConfig:
    d0: float = 1e-8
    tau: float = 1e-4
    t_total: float = 0.4
    transient: float = 0.1
    dt: float = DEFAULT_DT

    def scaled(self, factor: float) -> "LyapunovConfig":
        return replace(self, transient=self.transient * factor, t_total=self.t_total * factor)


def largest_lyapunov(p: CircuitParams, init: Sequence[float] = DEFAULT_INIT,
                     cfg: LyapunovConfig = LyapunovConfig()) -> float:
    """Benettin estimate of the largest Lyapunov exponent (1/s).

    The perturbed copy starts ``d0`` away along v_c1 and is pulled back to
    distance ``d0`` every ``tau``; the estimate is the mean log stretch per
    second over ``t_total`` after ``transient``. Distances use
    (v_c1, v_c2, sqrt(L/C2) * i_l).
    """
    state = np.array(as_state(init), dtype=np.float64)
    n_tau = max(1, int(round(cfg.tau / cfg.dt)))
    n_int = max(1, int(round(cfg.t_total / (n_tau * cfg.dt))))
    n_tr = int(round(cfg.transient / cfg.dt))
    bp, sl, gb, nb = _diode_arrays(p)
    acc, bad = kernels.lyapunov(state, cfg.dt, n_tr, n_tau, n_int, cfg.d0, p.consts(), p.r0,
                                bp, sl, gb, nb, p.tank_impedance, DIVERGENCE_LIMIT)
    if bad >= 0:
        raise DivergenceError(bad * cfg.dt)
    return acc / (n_int * n_tau * cfg.dt)


# -- regime classification --------------------------------------------------

EQUILIBRIUM = "Equilibrium"
PERIODIC = "PeriodN"
SPIRAL = "SpiralChaos"
DOUBLE_SCROLL = "DoubleScroll"
SATURATED = "SaturatedCycle"
TAGS = (EQUILIBRIUM, PERIODIC, SPIRAL, DOUBLE_SCROLL, SATURATED)


class Inconclusive(RuntimeError):
    """Maxima analysis and Lyapunov estimate disagree; use a longer window."""

    def __init__(self, msg: str, evidence: "Evidence | None" = None):
        super().__init__(msg)
        self.evidence = evidence


@dataclass(frozen=True)
class Evidence:
    lambda1: float
    n_clusters: int
    visits: tuple[int, int]  # entries into the balls around (-E, +E)
    period: int | None = None
    peak: float = 0.0  # max |v_c1| in the window


@dataclass(frozen=True)
class RegimeClass:
    tag: str
    evidence: Evidence
    n: int | None = None
    maxima: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False, compare=False)
    levels: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False, compare=False)

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown regime tag {self.tag!r}")
        if (self.tag == PERIODIC) != (self.n is not None):
            raise ValueError("PeriodN needs n; other tags must not carry one")

    @property
    def label(self) -> str:
        return f"PeriodN({self.n})" if self.tag == PERIODIC else self.tag

    @property
    def chaotic(self) -> bool:
        return self.tag in (SPIRAL, DOUBLE_SCROLL)

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class ClassifyConfig:
    transient: float = 0.1
    window: float = 0.4
    dt: float = DEFAULT_DT
    record_every: int = 10
    cluster_tol: float = 0.01  # fraction of the v_c1 peak-to-peak
    n_max: int = 16
    field_tol: float = 1.0  # V/s, scaled field norm at the end of the window
    lambda_chaos_min: float = 200.0
    lambda_periodic_max: float = 50.0
    scroll_radius: float = 0.5  # fraction of the first breakpoint
    min_scroll_visits: int = 5
    lyapunov: LyapunovConfig = LyapunovConfig()
    retries: int = 2  # sweep: re-run inconclusive points with 2x longer windows

    def scaled(self, factor: float) -> "ClassifyConfig":
        return replace(self, transient=self.transient * factor, window=self.window * factor,
                       lyapunov=self.lyapunov.scaled(factor))


def local_maxima(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Indices (fractional, parabola-refined) and values of the strict local maxima."""
    x = np.asarray(x, dtype=np.float64)
    if len(x) < 3:
        return np.empty(0), np.empty(0)
    i = np.nonzero((x[1:-1] > x[:-2]) & (x[1:-1] >= x[2:]))[0] + 1
    a, b, c = x[i - 1], x[i], x[i + 1]
    den = a - 2.0 * b + c
    with np.errstate(divide="ignore", invalid="ignore"):
        off = np.where(den != 0, 0.5 * (a - c) / den, 0.0)
    off = np.clip(off, -0.5, 0.5)
    return i + off, b - 0.25 * (a - c) * off


def cluster_labels(values: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Leader clustering of sorted values: a cluster spans at most ``tol``.

    Returns (labels per value, cluster centers).
    """
    values = np.asarray(values, dtype=np.float64)
    if len(values) == 0:
        return np.empty(0, dtype=int), np.empty(0)
    order = np.argsort(values, kind="stable")
    labels = np.empty(len(values), dtype=int)
    starts = []
    lab = -1
    lead = -math.inf
    for j in order:
        v = values[j]
        if v - lead > tol:
            lab += 1
            lead = v
            starts.append(j)
        labels[j] = lab
    centers = np.array([values[labels == k].mean() for k in range(lab + 1)])
    return labels, centers


def minimal_period(labels: np.ndarray, n_max: int) -> int | None:
    """Smallest n <= n_max with labels[k + n] == labels[k] everywhere."""
    m = len(labels)
    for n in range(1, n_max + 1):
        if m < 3 * n:
            return None
        if np.array_equal(labels[n:], labels[:-n]):
            return n
    return None


def scroll_visits(samples: np.ndarray, p: CircuitParams, radius: float) -> tuple[int, int]:
    """Entries into the balls around the negative / positive scroll equilibria."""
    eq = [s for s, _ in equilibria(p)[1:]]
    if not eq:
        return 0, 0
    z0 = p.tank_impedance
    w = samples * np.array([1.0, 1.0, z0])
    counts = []
    for e in (eq[1], eq[0]):  # (-E, +E)
        c = np.array(e) * np.array([1.0, 1.0, z0])
        inside = np.linalg.norm(w - c, axis=1) < radius
        entries = int(np.count_nonzero(inside[1:] & ~inside[:-1])) + int(inside[0])
        counts.append(entries)
    return counts[0], counts[1]


def _field_norm(s: State, p: CircuitParams) -> float:
    f = vector_field(s, p)
    return math.sqrt(f[0] ** 2 + f[1] ** 2 + (f[2] * p.tank_impedance) ** 2)


def classify_regime(p: CircuitParams, init: Sequence[float] = DEFAULT_INIT,
                    cfg: ClassifyConfig = ClassifyConfig()) -> RegimeClass:
    """Long-run behaviour of the circuit started at ``init``.

    Local maxima of v_c1 are clustered by amplitude; a periodic label sequence
    with a near-zero Lyapunov exponent is a period-n orbit (a symmetric cycle
    reaching past the outer breakpoint on both sides is the saturated cycle).
    Aperiodic maxima with a clearly positive exponent are chaos, split into
    spiral / double scroll by how often each outer equilibrium is revisited.
    Anything else raises :class:`Inconclusive`.
    """
    tr = simulate(p, init, cfg.transient + cfg.window, cfg.dt, record_every=cfg.record_every,
                  discard=cfg.transient)
    x = tr.v_c1
    lam = largest_lyapunov(p, init, cfg.lyapunov)
    peak = float(np.max(np.abs(x)))
    visits = scroll_visits(tr.samples, p, cfg.scroll_radius * p.diode.breakpoints[0])

    if _field_norm(tr.final(), p) < cfg.field_tol:
        return RegimeClass(EQUILIBRIUM, Evidence(lam, 0, visits, peak=peak))

    _, mx = local_maxima(x)
    ptp = float(np.ptp(x))
    labels, centers = cluster_labels(mx, cfg.cluster_tol * ptp)
    n = minimal_period(labels, cfg.n_max)
    ev = Evidence(lam, len(centers), visits, n, peak)

    if n is not None:
        if lam > cfg.lambda_periodic_max:
            raise Inconclusive(f"maxima repeat with period {n} but lambda1 = {lam:.4g} 1/s", ev)
        outer = p.diode.breakpoints[-1]
        if x.max() > outer and x.min() < -outer:
            return RegimeClass(SATURATED, ev, maxima=mx, levels=centers)
        return RegimeClass(PERIODIC, ev, n=n, maxima=mx, levels=centers)

    if lam >= cfg.lambda_chaos_min:
        k = cfg.min_scroll_visits
        tag = DOUBLE_SCROLL if visits[0] >= k and visits[1] >= k else SPIRAL
        return RegimeClass(tag, ev, maxima=mx, levels=centers)

    if lam < 0 and len(mx) >= 2 and np.all(np.diff(np.abs(mx - np.mean(x))) <= 0):
        # still spiralling into a stable equilibrium
        return RegimeClass(EQUILIBRIUM, ev, maxima=mx, levels=centers)

    raise Inconclusive(
        f"aperiodic maxima ({len(centers)} clusters) but lambda1 = {lam:.4g} 1/s", ev)


# -- bifurcation sweep -------------------------------------------------------

@dataclass
class SweepPoint:
    r0: float
    regime: RegimeClass | None
    error: str | None = None

    @property
    def label(self) -> str:
        if self.regime is not None:
            return self.regime.label
        return "Inconclusive" if self.error and self.error.startswith("Inconclusive") else "Error"

    @property
    def lambda1(self) -> float:
        return self.regime.evidence.lambda1 if self.regime else math.nan

    @property
    def maxima(self) -> np.ndarray:
        return self.regime.maxima if self.regime else np.empty(0)

    @property
    def levels(self) -> np.ndarray:
        return self.regime.levels if self.regime else np.empty(0)


def _classify_point(p: CircuitParams, r0: float, init, cfg: ClassifyConfig) -> SweepPoint:
    pr = p.with_r0(r0)
    err = None
    for attempt in range(cfg.retries + 1):
        c = cfg if attempt == 0 else cfg.scaled(2.0 ** attempt)
        try:
            return SweepPoint(r0, classify_regime(pr, init, c))
        except Inconclusive as e:
            err = f"Inconclusive: {e}"
            log.debug("r0=%g attempt %d inconclusive: %s", r0, attempt, e)
        except (DivergenceError, ValueError) as e:
            return SweepPoint(r0, None, f"{type(e).__name__}: {e}")
    return SweepPoint(r0, None, err)


def sweep_bifurcation(p: CircuitParams, r0_values: Iterable[float], cfg: ClassifyConfig = ClassifyConfig(),
                      init: Sequence[float] = DEFAULT_INIT, workers: int | None = None,
                      refine_step: float | None = None, max_points: int = 2000) -> list[SweepPoint]:
    """Classify each r0 (in the given order); failures are recorded, not raised.

    With ``refine_step`` the sweep bisects between neighbouring points whose
    labels differ until neighbours are at most ``refine_step`` apart; the
    result then lists every point in descending r0.
    """
    r0_values = [float(r) for r in r0_values]
    if not r0_values:
        raise ValueError("empty sweep")
    if any(not r > 0 for r in r0_values):
        raise ValueError("r0 values must be positive")
    init = as_state(init)
    workers = workers or os.cpu_count() or 1

    def run(rs):
        if workers == 1 or len(rs) == 1:
            return [_classify_point(p, r, init, cfg) for r in rs]
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(lambda r: _classify_point(p, r, init, cfg), rs))

    points = run(r0_values)
    if refine_step is None:
        return points

    done = {pt.r0: pt for pt in points}
    while len(done) < max_points:
        rs = sorted(done, reverse=True)
        mids = [
            0.5 * (a + b) for a, b in zip(rs, rs[1:])
            if a - b > refine_step and done[a].label != done[b].label
        ]
        if not mids:
            break
        for pt in run(mids[: max_points - len(done)]):
            done[pt.r0] = pt
    return [done[r] for r in sorted(done, reverse=True)]


def regime_rank(label: str) -> float | None:
    """Position of a label along the route to chaos; None if it has no place."""
    if label == EQUILIBRIUM:
        return 0.0
    if label.startswith("PeriodN("):
        n = int(label[8:-1])
        if n & (n - 1):
            return None  # not a period-doubling orbit
        return 1.0 + math.log2(n)
    return {SPIRAL: 10.0, DOUBLE_SCROLL: 11.0, SATURATED: 12.0}.get(label)


def order_inversions(points: Sequence[SweepPoint]) -> list[tuple[SweepPoint, SweepPoint]]:
    """Adjacent classified points (r0 descending) whose rank goes backwards.

    Unclassified points are skipped; labels without a rank count as inversions
    against both neighbours.
    """
    pts = sorted((pt for pt in points if pt.regime is not None), key=lambda q: -q.r0)
    bad = []
    prev = None
    for pt in pts:
        rk = regime_rank(pt.label)
        if prev is not None:
            pr = regime_rank(prev.label)
            if rk is None or pr is None or rk < pr:
                bad.append((prev, pt))
        prev = pt
    return bad


# -- export ------------------------------------------------------------------

SWEEP_HEADER = ("r0", "regime", "n", "lambda1", "maxima...")
BIFURCATION_HEADER = ("r0", "maximum_v_c1")


def write_sweep_csv(points: Sequence[SweepPoint], path) -> None:
    """One row per point: r0, regime tag, period, lambda1, then the distinct maxima levels.

    Failed points carry ``Inconclusive`` or ``Error`` as the regime and empty n.
    """
    rows = []
    for pt in points:
        if pt.regime is None:
            rows.append([pt.r0, pt.label, "", "nan"])
            continue
        rc = pt.regime
        rows.append([pt.r0, rc.tag, "" if rc.n is None else str(rc.n), rc.evidence.lambda1,
                     *map(float, rc.levels)])
    write_rows(path, SWEEP_HEADER, rows)


def read_sweep_csv(path) -> list[tuple[float, str, int | None, float, list[float]]]:
    out = []
    with open(path) as fh:
        head = fh.readline().strip().split(",")
        if tuple(head) != SWEEP_HEADER:
            raise ValueError(f"{path}: not a sweep CSV")
        for line in fh:
            f = line.rstrip("\n").split(",")
            out.append((float(f[0]), f[1], int(f[2]) if f[2] else None, float(f[3]),
                        [float(v) for v in f[4:]]))
    return out


def write_bifurcation_csv(points: Sequence[SweepPoint], path) -> None:
    """One row per recorded local maximum of v_c1, for a bifurcation diagram."""
    rows = ((pt.r0, float(m)) for pt in points for m in pt.maxima)
    write_rows(path, BIFURCATION_HEADER, rows)
