import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from chualab.analysis import (
    DOUBLE_SCROLL,
    EQUILIBRIUM,
    PERIODIC,
    SATURATED,
    SPIRAL,
    ClassifyConfig,
    Evidence,
    Inconclusive,
    LyapunovConfig,
    RegimeClass,
    SweepPoint,
    char_residual,
    classify_regime,
    cluster_labels,
    eigen_report,
    eigenvalues3,
    equilibria,
    jacobian,
    largest_lyapunov,
    local_maxima,
    minimal_period,
    order_inversions,
    read_sweep_csv,
    regime_rank,
    sweep_bifurcation,
    write_bifurcation_csv,
    write_sweep_csv,
)
from chualab.circuit import diode_current, table_one, vector_field
from chualab.integrator import simulate

MODEL_SHIFT = ("the model's period-doubling cascade sits at 1960-2015 ohm, about 5% above "
               "the quoted values; e_sat cannot move it (see decisions ledger)")


# -- equilibria ------------------------------------------------------------------

def test_origin_always_equilibrium():
    for r0 in (500.0, 1800.0, 5000.0):
        s, region = equilibria(table_one(r0))[0]
        assert s == (0.0, 0.0, 0.0) and region == "inner"


@pytest.mark.parametrize("r0", [1000.0, 1800.0, 2200.0, 3000.0])
def test_equilibria_match_root_finder(r0):
    p = table_one(r0)
    h = lambda v: diode_current(v, p.diode) + v / r0  # noqa: E731
    grid = np.linspace(1e-6, 40.0, 40001)
    hv = np.array([h(v) for v in grid])
    roots = [brentq(h, grid[i], grid[i + 1]) for i in np.nonzero(np.sign(hv[:-1]) != np.sign(hv[1:]))[0]]
    found = sorted(s.v_c1 for s, _ in equilibria(p) if s.v_c1 > 0)
    np.testing.assert_allclose(found, roots, rtol=1e-9)
    for s, _ in equilibria(p):
        np.testing.assert_allclose(vector_field(s, p), 0.0, atol=1e-6)


def test_equilibria_symmetric_pairs():
    eq = equilibria(table_one(1800))
    assert len(eq) == 3
    (a, ra), (b, rb) = eq[1], eq[2]
    assert a == -b and ra == rb == "middle"
    assert a.i_l == pytest.approx(-a.v_c1 / 1800.0)


def test_outer_pair_closed_form():
    p = table_one(1800)
    b0 = p.diode.breakpoints[0]
    m1, m0 = -p.diode.slopes[0], -p.diode.slopes[1]
    v = equilibria(p)[1][0].v_c1
    assert v == pytest.approx(b0 * (m1 - m0) / (1 / p.r0 - m0), rel=1e-12)


# -- linearization ---------------------------------------------------------------

@pytest.mark.parametrize("region,v", [("inner", 0.3), ("middle", 4.0), ("outer", 9.0)])
def test_jacobian_matches_finite_difference(region, v):
    p = table_one(1800)
    s = np.array([v, 0.2, 1e-4])
    h = np.array([1e-6, 1e-6, 1e-9])
    fd = np.column_stack([
        (np.array(vector_field(s + e, p)) - np.array(vector_field(s - e, p))) / (2 * e.sum())
        for e in np.diag(h)
    ])
    np.testing.assert_allclose(jacobian(p, region), fd, rtol=1e-6)


def test_jacobian_unknown_region(p):
    with pytest.raises(ValueError):
        jacobian(p, "basement")
    with pytest.raises(ValueError):
        jacobian(p, 7)


def test_eigenvalues_diagonal():
    np.testing.assert_allclose(eigenvalues3(np.diag([-1.0, -2.0, -3.0])), [-3, -2, -1], atol=1e-14)


def test_eigenvalues_companion():
    # lambda^3 - lambda
    m = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
    np.testing.assert_allclose(eigenvalues3(m), [-1, 0, 1], atol=1e-14)


def test_eigenvalues_lossless_tank():
    p = table_one(1e12)
    m = jacobian(p, 0)
    m[0, 0] = 0.0  # slope 0, r0 -> inf
    ev = eigenvalues3(m)
    w = 1 / math.sqrt(p.l * p.c2)
    np.testing.assert_allclose(sorted(abs(ev.imag)), [0, w, w], rtol=1e-6, atol=1e-3)
    assert np.max(np.abs(ev.real)) < 1e-3


def test_eigenvalue_residuals_random(rng):
    worst = 0.0
    for _ in range(100):
        m = rng.normal(size=(3, 3)) * 10.0 ** rng.uniform(-3, 3)
        ev = eigenvalues3(m)
        worst = max(worst, max(char_residual(m, z) for z in ev))
        np.testing.assert_allclose(np.sort_complex(ev), np.sort_complex(np.linalg.eigvals(m)),
                                   rtol=1e-7, atol=1e-9 * np.abs(m).max())
    assert worst < 1e-8


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1e4, 1e4, allow_nan=False), min_size=9, max_size=9))
def test_eigenvalue_conjugacy_and_trace(entries):
    m = np.array(entries).reshape(3, 3)
    ev = eigenvalues3(m)
    nonreal = ev[ev.imag != 0]
    assert len(nonreal) in (0, 2)
    if len(nonreal) == 2:
        assert nonreal[0] == nonreal[1].conjugate()
    scale = max(np.abs(m).max(), 1e-300)
    assert abs(ev.sum().real - np.trace(m)) <= 1e-9 * scale * 3


def test_eigenvalues_reject_bad_input():
    with pytest.raises(ValueError):
        eigenvalues3(np.eye(2))
    with pytest.raises(ValueError):
        eigenvalues3(np.full((3, 3), np.nan))


def test_inner_region_saddle_focus_at_1800():
    rep = eigen_report(table_one(1800), "inner")
    assert rep.n_unstable_real == 1
    pair = rep.complex_pair
    assert pair is not None and pair[0].real < 0


def test_middle_region_stable_at_2200():
    rep = eigen_report(table_one(2200), "middle")
    assert rep.stable and all(z.real < 0 for z in rep.eigenvalues)


def test_stability_consistency_near_equilibrium():
    p = table_one(2200)
    for s, region in equilibria(p)[1:]:
        if not eigen_report(p, region).stable:
            continue
        s0 = np.array(s) + np.array([1e-3, 0.0, 0.0])
        tr = simulate(p, s0, 0.02)
        assert np.linalg.norm(np.array(tr.final()) - np.array(s)) < 1e-3


# -- helpers ----------------------------------------------------------------------

def test_local_maxima_parabola_exact():
    t = np.arange(20, dtype=float)
    x = -(t - 7.3) ** 2 + 4.0
    idx, val = local_maxima(x)
    assert idx == pytest.approx([7.3]) and val == pytest.approx([4.0])


def test_cluster_labels_leader():
    lab, centers = cluster_labels(np.array([1.0, 1.005, 2.0, 1.002, 2.004]), 0.01)
    assert lab.tolist() == [0, 0, 1, 0, 1]
    np.testing.assert_allclose(centers, [1.0023333333, 2.002])


def test_cluster_labels_do_not_chain():
    vals = np.arange(0, 1, 0.004)
    _, centers = cluster_labels(vals, 0.01)
    assert len(centers) > 50


def test_minimal_period():
    assert minimal_period(np.array([0, 1] * 10), 16) == 2
    assert minimal_period(np.array([0] * 5), 16) == 1
    assert minimal_period(np.array([0, 1, 2, 0, 1]), 16) is None
    assert minimal_period(np.arange(100) % 7 == 0, 5) is None


def test_regime_class_validation():
    ev = Evidence(0.0, 1, (0, 0))
    with pytest.raises(ValueError):
        RegimeClass(PERIODIC, ev)
    with pytest.raises(ValueError):
        RegimeClass(SPIRAL, ev, n=2)
    with pytest.raises(ValueError):
        RegimeClass("Wobbly", ev)
    assert RegimeClass(PERIODIC, ev, n=4).label == "PeriodN(4)"


def test_regime_rank_order():
    labels = [EQUILIBRIUM, "PeriodN(1)", "PeriodN(2)", "PeriodN(4)", "PeriodN(8)", SPIRAL,
              DOUBLE_SCROLL, SATURATED]
    ranks = [regime_rank(x) for x in labels]
    assert ranks == sorted(ranks)
    assert regime_rank("PeriodN(3)") is None


def test_order_inversions():
    ev = Evidence(0.0, 1, (0, 0))
    mk = lambda r, tag, n=None: SweepPoint(r, RegimeClass(tag, ev, n=n))  # noqa: E731
    good = [mk(3, EQUILIBRIUM), mk(2, PERIODIC, 1), mk(1, SPIRAL), SweepPoint(0.5, None, "Error: x")]
    assert order_inversions(good) == []
    bad = good + [mk(0.1, PERIODIC, 2)]
    assert len(order_inversions(bad)) == 1
    window = [mk(3, SPIRAL), mk(2, PERIODIC, 3), mk(1, DOUBLE_SCROLL)]
    assert len(order_inversions(window)) == 2


# -- Lyapunov exponent and classification ---------------------------------------------

@pytest.mark.slow
def test_lyapunov_negative_at_equilibrium():
    assert largest_lyapunov(table_one(2200)) < 0


@pytest.mark.slow
def test_lyapunov_periodic_near_zero():
    assert abs(largest_lyapunov(table_one(2000))) <= 50.0


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason=MODEL_SHIFT)
def test_lyapunov_periodic_at_1900():
    assert abs(largest_lyapunov(table_one(1900))) <= 50.0


@pytest.mark.slow
def test_lyapunov_chaotic_at_1800():
    assert largest_lyapunov(table_one(1800)) >= 200.0


def test_lyapunov_short_config_runs():
    lam = largest_lyapunov(table_one(1800), cfg=LyapunovConfig(t_total=0.01, transient=0.005))
    assert math.isfinite(lam)


@pytest.mark.slow
@pytest.mark.parametrize("r0,label", [
    (2200.0, EQUILIBRIUM),
    (2000.0, "PeriodN(1)"),
    (1970.0, "PeriodN(2)"),
    (1962.0, "PeriodN(4)"),
    (1950.0, SPIRAL),
    (1700.0, DOUBLE_SCROLL),
    (1000.0, SATURATED),
])
def test_classify_regime(r0, label):
    rc = classify_regime(table_one(r0))
    assert rc.label == label
    lam = rc.evidence.lambda1
    if rc.tag == PERIODIC:
        assert lam <= 50.0
    if rc.chaotic:
        assert lam >= 200.0


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason=MODEL_SHIFT)
@pytest.mark.parametrize("r0,label", [
    (1900.0, "PeriodN(1)"),
    (1870.0, "PeriodN(2)"),
    (1850.0, "PeriodN(4)"),
    (1800.0, SPIRAL),
])
def test_classify_quoted_points(r0, label):
    assert classify_regime(table_one(r0)).label == label


@pytest.mark.slow
def test_spiral_mirror_symmetry():
    p = table_one(1950)
    a = classify_regime(p, (0.1, 0.0, 0.0))
    b = simulate(p, (-0.1, 0.0, 0.0), 0.5, discard=0.1)
    assert a.tag == SPIRAL
    _, mirrored = local_maxima(-b.v_c1)
    np.testing.assert_allclose(np.sort(mirrored), np.sort(a.maxima), atol=0.01 * np.ptp(a.maxima))


def test_inconclusive_carries_evidence(monkeypatch):
    import chualab.analysis as an
    monkeypatch.setattr(an, "largest_lyapunov", lambda *a, **k: 120.0)
    cfg = ClassifyConfig(transient=0.01, window=0.02)
    with pytest.raises(Inconclusive) as e:
        classify_regime(table_one(2000), cfg=cfg)
    assert e.value.evidence.lambda1 == 120.0


# -- sweep ----------------------------------------------------------------------

FAST = ClassifyConfig(transient=0.02, window=0.05, lyapunov=LyapunovConfig(t_total=0.05, transient=0.02))


def test_singleton_sweep_equals_classify():
    p = table_one()
    pts = sweep_bifurcation(p, [2200.0], FAST)
    direct = classify_regime(p.with_r0(2200.0), cfg=FAST)
    assert len(pts) == 1 and pts[0].regime == direct


def test_sweep_records_failures(monkeypatch):
    import chualab.analysis as an

    def boom(p, init, cfg):
        if p.r0 == 1900.0:
            raise Inconclusive("forced")
        return RegimeClass(EQUILIBRIUM, Evidence(-1.0, 0, (0, 0)))

    monkeypatch.setattr(an, "classify_regime", boom)
    pts = sweep_bifurcation(table_one(), [2000.0, 1900.0, 1800.0], FAST, workers=2)
    assert [pt.r0 for pt in pts] == [2000.0, 1900.0, 1800.0]
    assert pts[1].label == "Inconclusive" and pts[0].label == EQUILIBRIUM
    assert math.isnan(pts[1].lambda1)


def test_sweep_validation():
    with pytest.raises(ValueError):
        sweep_bifurcation(table_one(), [], FAST)
    with pytest.raises(ValueError):
        sweep_bifurcation(table_one(), [100.0, -1.0], FAST)


def test_sweep_refinement_bisects(monkeypatch):
    import chualab.analysis as an

    def fake(p, init, cfg):
        if p.r0 > 1933.0:
            return RegimeClass(EQUILIBRIUM, Evidence(-1.0, 0, (0, 0)))
        return RegimeClass(SPIRAL, Evidence(500.0, 9, (0, 9)))

    monkeypatch.setattr(an, "classify_regime", fake)
    pts = sweep_bifurcation(table_one(), [2000.0, 1900.0], FAST, refine_step=2.0, workers=1)
    rs = [pt.r0 for pt in pts]
    assert rs == sorted(rs, reverse=True)
    edge = [(a.r0, b.r0) for a, b in zip(pts, pts[1:]) if a.label != b.label]
    assert len(edge) == 1 and edge[0][0] - edge[0][1] <= 2.0
    assert edge[0][1] <= 1933.0 < edge[0][0]


def test_sweep_and_bifurcation_csv(tmp_path):
    pts = sweep_bifurcation(table_one(), [2000.0, 1700.0], FAST, workers=1)
    pts.append(SweepPoint(1.0, None, "Inconclusive: forced"))
    f = tmp_path / "sweep.csv"
    write_sweep_csv(pts, f)
    rows = read_sweep_csv(f)
    assert f.read_text().splitlines()[0] == "r0,regime,n,lambda1,maxima..."
    assert [r[0] for r in rows] == [2000.0, 1700.0, 1.0]
    assert rows[0][1] == PERIODIC and rows[0][2] == 1
    assert rows[0][3] == pts[0].lambda1
    np.testing.assert_array_equal(rows[0][4], pts[0].levels)
    assert rows[2][1] == "Inconclusive" and math.isnan(rows[2][3])

    b = tmp_path / "bif.csv"
    write_bifurcation_csv(pts, b)
    lines = b.read_text().splitlines()
    assert lines[0] == "r0,maximum_v_c1"
    assert len(lines) - 1 == sum(len(pt.maxima) for pt in pts)


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="a period-9 window sits at 1870 ohm inside the chaotic band")
def test_descending_5_ohm_sweep_has_no_inversions():
    pts = sweep_bifurcation(table_one(), np.arange(2000.0, 1799.0, -5.0))
    assert order_inversions(pts) == []
