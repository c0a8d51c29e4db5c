import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chualab.circuit import (
    CellParams,
    CircuitParams,
    DiodeModel,
    ModelError,
    State,
    build_diode,
    cell_current,
    default_cells,
    diode_current,
    diode_slope,
    table_one,
    vector_field,
)

volts = st.floats(-15.0, 15.0, allow_nan=False)
E_SAT = 8.3

# analytic values of the reference cells
CELL_A_SLOPE = -1.0 / 2200.0
M1 = 1.0 / 2200.0 + 1.0 / 3300.0
M0 = 1.0 / 2200.0 - 1.0 / 22000.0
M_OUT = 1.0 / 220.0 + 1.0 / 22000.0
KNEE_B = 3300.0 / 25300.0 * E_SAT
KNEE_A = 2200.0 / 2420.0 * E_SAT


def test_cell_current_zero():
    a, b = default_cells()
    assert cell_current(0.0, a) == 0.0
    assert cell_current(0.0, b) == 0.0


def test_cell_current_inner_value():
    a = CellParams(220.0, 220.0, 2200.0, E_SAT)
    assert cell_current(1.0, a) == pytest.approx(CELL_A_SLOPE, rel=1e-12)
    assert a.knee == pytest.approx(KNEE_A, rel=1e-12)


def test_cell_current_saturated_slope():
    a = CellParams(220.0, 220.0, 2200.0, E_SAT)
    v = a.knee + 1.0
    assert cell_current(v, a) - cell_current(a.knee, a) == pytest.approx(1.0 / 220.0, rel=1e-9)


@pytest.mark.parametrize("cell", default_cells())
def test_cell_current_continuous_at_knee(cell):
    k = cell.knee
    lo, hi = cell_current(k * (1 - 1e-15), cell), cell_current(k * (1 + 1e-15), cell)
    assert abs(lo - hi) <= 1e-12 * abs(cell_current(k, cell))


@pytest.mark.parametrize("v", [math.nan, math.inf, -math.inf])
def test_cell_current_rejects_non_finite(v):
    with pytest.raises(ModelError):
        cell_current(v, default_cells()[0])


def test_cell_params_validation():
    with pytest.raises(ModelError):
        CellParams(0.0, 1.0, 1.0)
    with pytest.raises(ModelError):
        CellParams(1.0, 1.0, 1.0, e_sat=-1.0)


def test_build_diode_reference_values():
    d = build_diode(*default_cells())
    np.testing.assert_allclose(d.slopes, [-M1, -M0, M_OUT], rtol=1e-12)
    np.testing.assert_allclose(d.breakpoints, [KNEE_B, KNEE_A], rtol=1e-12)
    # rounded figures quoted for the reference build
    np.testing.assert_allclose(d.slopes, [-7.576e-4, -4.091e-4, 4.591e-3], rtol=1e-3)
    np.testing.assert_allclose(d.breakpoints, [1.083, 7.545], rtol=1e-3)


def test_build_diode_slope_ordering():
    d = build_diode(*default_cells())
    m1, m0 = -d.slopes[0], -d.slopes[1]
    assert m1 > m0 > 0


def test_build_diode_order_independent():
    a, b = default_cells()
    assert build_diode(a, b) == build_diode(b, a)


def test_build_diode_equal_knees():
    a = CellParams(1000.0, 1000.0, 1000.0)
    b = CellParams(2000.0, 2000.0, 2000.0)
    with pytest.raises(ModelError):
        build_diode(a, b)


@pytest.mark.parametrize("e", [4.0, 8.3, 12.0])
def test_e_sat_scales_breakpoints_only(e):
    ref = build_diode(*default_cells(1.0))
    d = build_diode(*default_cells(e))
    assert d.slopes == ref.slopes
    np.testing.assert_allclose(d.breakpoints, np.array(ref.breakpoints) * e, rtol=1e-14)


def test_diode_model_validation():
    with pytest.raises(ModelError):
        DiodeModel((1.0,), (1.0,))
    with pytest.raises(ModelError):
        DiodeModel((2.0, 1.0), (1.0, 1.0, 1.0))
    with pytest.raises(ModelError):
        DiodeModel((-1.0,), (1.0, 1.0))


def test_diode_current_values():
    d = build_diode(*default_cells())
    assert diode_current(0.0, d) == 0.0
    assert diode_current(0.5, d) == pytest.approx(-0.5 * M1, rel=1e-12)
    assert diode_current(0.5, d) == pytest.approx(-3.788e-4, rel=1e-3)
    # middle segment from the closed form
    v = 4.0
    assert diode_current(v, d) == pytest.approx(-M1 * KNEE_B - M0 * (v - KNEE_B), rel=1e-12)


def test_diode_slope_regions():
    d = build_diode(*default_cells())
    assert diode_slope(0.1, d) == d.slopes[0]
    assert diode_slope(-3.0, d) == d.slopes[1]
    assert diode_slope(10.0, d) == d.slopes[2]


@settings(max_examples=1000, deadline=None)
@given(volts)
def test_diode_odd_symmetry(v):
    d = build_diode(*default_cells())
    assert diode_current(v, d) + diode_current(-v, d) == 0.0


@settings(max_examples=1000, deadline=None)
@given(volts)
def test_diode_is_sum_of_cells(v):
    a, b = default_cells()
    d = build_diode(a, b)
    assert abs(diode_current(v, d) - (cell_current(v, a) + cell_current(v, b))) < 1e-12


@settings(max_examples=1000, deadline=None)
@given(st.floats(-1.0, 1.0), st.sampled_from([0, 1]))
def test_diode_continuous_at_breakpoints(u, k):
    # random breakpoint sets; g must not jump at any of them
    d = build_diode(*default_cells(E_SAT * (1.5 + u)))
    b = d.breakpoints[k]
    eps = 1e-9
    gap = abs(diode_current(b - eps, d) - diode_current(b + eps, d))
    assert gap < 1e-6 * (abs(diode_current(b, d)) + 1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(-1.0, 1.0))
def test_diode_inner_region_linear(s):
    d = build_diode(*default_cells())
    v = s * d.breakpoints[0]
    assert diode_current(v, d) == d.slopes[0] * v


def test_vector_field_origin(p):
    assert vector_field((0.0, 0.0, 0.0), p) == (0.0, 0.0, 0.0)


def test_vector_field_hand_value(p):
    f = vector_field((1.0, 0.0, 0.0), p)
    assert f.v_c2 == pytest.approx(1.0 / 1800.0 / 100e-9, rel=1e-12)
    assert f.v_c2 == pytest.approx(5555.6, rel=1e-4)
    assert f.i_l == 0.0
    assert f.v_c1 == pytest.approx((-1.0 / 1800.0 + M1) / 10e-9, rel=1e-12)


@settings(max_examples=300, deadline=None)
@given(volts, volts, st.floats(-0.05, 0.05))
def test_vector_field_odd(x, y, z):
    p = table_one()
    f, g = vector_field((x, y, z), p), vector_field((-x, -y, -z), p)
    assert tuple(-c for c in g) == f


@settings(max_examples=200, deadline=None)
@given(volts, st.floats(-0.05, 0.05))
def test_inductor_current_still_when_v_c2_zero(x, z):
    assert vector_field((x, 0.0, z), table_one()).i_l == 0.0


def test_circuit_params_validation():
    d = build_diode(*default_cells())
    for bad in ({"l": 0.0}, {"c1": -1e-9}, {"r0": math.inf}):
        kw = dict(l=18e-3, c1=10e-9, c2=100e-9, r0=1800.0, diode=d)
        kw.update(bad)
        with pytest.raises(ModelError):
            CircuitParams(**kw)


def test_circuit_params_helpers(p):
    assert p.with_r0(2000).r0 == 2000.0
    q = p.scaled(c1=1.05, c2=1.05)
    assert q.c1 == pytest.approx(10.5e-9) and q.c2 == pytest.approx(105e-9) and q.l == p.l
    assert p.tank_impedance == pytest.approx(math.sqrt(18e-3 / 100e-9))


def test_state_negation():
    assert -State(1.0, -2.0, 3.0) == State(-1.0, 2.0, -3.0)
