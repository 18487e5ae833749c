import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixed_moments.asymptotics import (
    DegenerateFit,
    _cached_contour,
    constant_cf,
    contour_term,
    fit_exponent,
    lfun_derivative_at_one,
    predict,
    residual_scan,
    scan_from_values,
    two_diagonal_main_term,
)
from mixed_moments.hecke import DELTA
from mixed_moments.lfun import lfun_near_one
from mixed_moments.weights import PLAIN, BumpFunction, integral_c, log_weighted_integral

TS = [500.0, 1000.0, 2000.0, 4000.0]
CF = complex(-0.007081357844984822, 0.000206835201069865)


@pytest.fixture(scope="module")
def L1(small_table):
    return lfun_near_one(0.0, DELTA, small_table).value


def test_linear_main_term(small_table, L1):
    p = predict(1000.0, "zeta_linear", PLAIN, DELTA, small_table, c_f=CF)
    assert p.main_term == 1000.0 * integral_c(PLAIN) * L1
    q = predict(2000.0, "zeta_linear", PLAIN, DELTA, small_table, c_f=CF)
    assert q.main_term == pytest.approx(2 * p.main_term, rel=1e-15)


@given(st.floats(100, 1e5))
@settings(max_examples=20, deadline=None)
def test_square_doubling_identity(small_table, T):
    a = predict(T, "zeta_square", PLAIN, DELTA, small_table, c_f=CF)
    b = predict(2 * T, "zeta_square", PLAIN, DELTA, small_table, c_f=CF)
    ident = a.c * a.L1 * T * math.log(2)
    assert abs((b.main_term - 2 * a.main_term) - ident) <= 1e-12 * abs(b.main_term)


def test_predict_guards(small_table):
    with pytest.raises(ValueError):
        predict(50.0, "zeta_linear", PLAIN, DELTA, small_table, c_f=CF)
    with pytest.raises(ValueError):
        predict(500.0, "cube", PLAIN, DELTA, small_table, c_f=CF)


def test_cf_plain(small_table):
    assert abs(constant_cf(PLAIN, DELTA, small_table) - CF) < 1e-10


def test_cf_linear_in_V(small_table):
    a = constant_cf(PLAIN, DELTA, small_table)
    b = constant_cf(PLAIN.scaled(3.0), DELTA, small_table)
    assert abs(b - 3 * a) <= 1e-14


def test_term2_imag(small_table, L1):
    c = integral_c(PLAIN)
    term2 = L1 * log_weighted_integral(PLAIN)
    assert term2.imag == pytest.approx(0.25 * math.pi * c * L1, rel=1e-15)


def test_contour_truncation(small_table):
    base = _cached_contour(DELTA, small_table)
    wide = contour_term(DELTA, small_table, v_max=12.0)
    assert abs(base - wide) <= 1e-12


def test_contour_abscissa_guard(small_table):
    with pytest.raises(ValueError):
        contour_term(DELTA, small_table, eps=0.6)


def test_synthetic_half(small_table):
    preds = [predict(T, "zeta_square", PLAIN, DELTA, small_table, c_f=CF).main_term for T in TS]
    scan = scan_from_values(TS, [p + T**0.5 for p, T in zip(preds, TS)], preds)
    assert scan.fit_ok
    assert abs(scan.slope - 0.5) <= 1e-6


def test_synthetic_zero(small_table):
    preds = [predict(T, "zeta_linear", PLAIN, DELTA, small_table).main_term for T in TS]
    scan = scan_from_values(TS, preds, preds)
    assert not scan.fit_ok and math.isnan(scan.slope)


def test_scan_synthetic_via_measured(small_table):
    preds = [predict(T, "zeta_linear", PLAIN, DELTA, small_table).main_term for T in TS]
    scan = residual_scan(TS, "zeta_linear", PLAIN, DELTA, small_table,
                         measured=[p + 2 * T**0.7 for p, T in zip(preds, TS)])
    assert scan.slope == pytest.approx(0.7, abs=1e-9)


def test_partial_floor():
    with pytest.raises(DegenerateFit):
        scan_from_values([1.0, 2.0, 3.0], [1.0, 2.5, 3.5], [1.0, 2.0, 3.0])


@pytest.mark.parametrize("Ts", [[1.0, 2.0], [3.0, 2.0, 4.0]])
def test_scan_input_guards(Ts):
    with pytest.raises(ValueError):
        scan_from_values(Ts, [1.0] * len(Ts), [0.0] * len(Ts))


def test_smoothed_scan_needs_weight(small_table):
    with pytest.raises(ValueError):
        residual_scan(TS, "zeta_linear", None, DELTA, small_table, measured=[0j] * 4)


@given(st.floats(-2, 2), st.floats(-5, 5))
@settings(max_examples=30, deadline=None)
def test_fit_exact_power(p, logk):
    Ts = [100.0, 300.0, 900.0]
    slope, icpt = fit_exponent(Ts, [math.exp(logk) * T**p for T in Ts])
    assert slope == pytest.approx(p, abs=1e-9)
    assert icpt == pytest.approx(logk, abs=1e-8)


def test_derivative_at_one(small_table):
    h = 1e-3
    fd = (lfun_near_one(-h, DELTA, small_table).value - lfun_near_one(h, DELTA, small_table).value) / (2 * h)
    assert abs(lfun_derivative_at_one(DELTA, small_table) - fd) < 1e-6


def test_two_diagonal_linear(small_table):
    a = two_diagonal_main_term(500.0, PLAIN, DELTA, small_table, L1p=0.1)
    b = two_diagonal_main_term(500.0, PLAIN.scaled(2.0), DELTA, small_table, L1p=0.1)
    assert abs(b - 2 * a) <= 1e-12 * abs(a)


def test_plateau_cf_close_to_indicator(small_table):
    wide = BumpFunction("plateau", 100.0)
    lw_ind = complex(0.5 * (2 * math.log(2) - 1 - math.log(2 * math.pi)), math.pi / 4)
    L1 = lfun_near_one(0.0, DELTA, small_table).value
    ind = _cached_contour(DELTA, small_table) + L1 * lw_ind
    assert abs(constant_cf(wide, DELTA, small_table) - ind) <= 3 / 100 * abs(ind)
