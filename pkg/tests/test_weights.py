import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixed_moments.weights import (
    DERIVATIVE_CONSTANTS,
    PLAIN,
    BumpFunction,
    UnsupportedOrder,
    check_delta,
    eval_V,
    integral_c,
    log_weighted_integral,
    mellin_V,
)

# mpmath quad of exp(-1/((x-1)(2-x))) and of the log-weighted real part, 40 digits
C_PLAIN = 0.0070298584066096562392
LOGW_PLAIN = -0.0050499214880049361157

KINDS = [PLAIN, BumpFunction("plateau", 2.0), BumpFunction("plateau", 10.0)]


def test_midpoint():
    assert eval_V(PLAIN, 1.5) == pytest.approx(math.exp(-4), abs=1e-16)
    assert eval_V(BumpFunction("plateau", 10.0), 1.5) == 1.0


@pytest.mark.parametrize("V", KINDS)
@pytest.mark.parametrize("i", range(5))
def test_outside_support(V, i):
    assert eval_V(V, 0.5, i) == 0.0
    assert eval_V(V, 2.5, i) == 0.0


def test_unsupported_order():
    with pytest.raises(UnsupportedOrder):
        eval_V(PLAIN, 1.5, 5)


@pytest.mark.parametrize("kw", [dict(kind="tent"), dict(kind="plateau", delta=1.0),
                                dict(support=(0.5, 2.0))])
def test_bad_weights(kw):
    with pytest.raises(ValueError):
        BumpFunction(**kw)


@given(st.floats(1.05, 1.95), st.sampled_from(KINDS), st.integers(1, 4))
@settings(max_examples=80, deadline=None)
def test_derivatives_match_differences(x, V, i):
    h = 1e-4 / (V.delta if V.kind == "plateau" else 1.0)
    fd = (eval_V(V, x + h, i - 1) - eval_V(V, x - h, i - 1)) / (2 * h)
    scale = DERIVATIVE_CONSTANTS[i] * V.delta**i
    assert abs(eval_V(V, x, i) - fd) <= 1e-4 * scale


@pytest.mark.parametrize("delta", [2.0, 5.0, 20.0])
def test_derivative_bounds(delta):
    V = BumpFunction("plateau", delta)
    xs = np.linspace(1, 2, 40001)
    for i in range(5):
        assert np.max(np.abs(eval_V(V, xs, i))) <= DERIVATIVE_CONSTANTS[i] * delta**i


def test_c_plain():
    assert integral_c(PLAIN) == pytest.approx(C_PLAIN, rel=1e-10)


@pytest.mark.parametrize("delta", [2.0, 10.0, 100.0])
def test_c_plateau(delta):
    # S(y) + S(1 - y) = 1 makes each transition contribute exactly 1/(2 delta)
    c = integral_c(BumpFunction("plateau", delta))
    assert c == pytest.approx(1 - 1 / delta, abs=1e-12)
    if delta == 100.0:
        assert abs(c - 1) <= 2 / delta


def test_scaling():
    from scipy import integrate

    T = 3.0
    val, _ = integrate.quad(lambda t: eval_V(PLAIN, t / T), T, 2 * T, epsabs=1e-15)
    assert val == pytest.approx(integral_c(PLAIN) * T, rel=1e-10)


def test_normalization_linear():
    assert integral_c(PLAIN.scaled(2.0)) == pytest.approx(2 * integral_c(PLAIN), rel=1e-14)


@pytest.mark.parametrize("V", KINDS)
def test_log_weighted_imag(V):
    lw = log_weighted_integral(V)
    assert lw.imag == 0.25 * math.pi * integral_c(V)


def test_log_weighted_plain():
    lw = log_weighted_integral(PLAIN)
    assert lw.real < 0
    assert lw.real == pytest.approx(LOGW_PLAIN, rel=1e-9)


def test_log_weighted_plateau_closed_form():
    def F(x):
        return x * math.log(x) - x - x * math.log(2 * math.pi)

    delta = 100.0
    ref = 0.5 * (F(2) - F(1))
    assert abs(log_weighted_integral(BumpFunction("plateau", delta)).real - ref) <= 3 / delta


@pytest.mark.parametrize("V", KINDS)
def test_mellin_at_one(V):
    assert mellin_V(V, 1) == pytest.approx(integral_c(V), rel=1e-12)


def test_mellin_decay():
    K = [abs(mellin_V(PLAIN, 1j * A)) * (1 + A) ** 3 for A in (10, 20, 40)]
    assert max(K) <= 10.0


@given(st.floats(-5, 5), st.floats(-60, 60))
@settings(max_examples=30, deadline=None)
def test_mellin_reflection(sig, tau):
    s = complex(sig, tau)
    a, b = mellin_V(PLAIN, s), mellin_V(PLAIN, s.conjugate())
    assert abs(a - b.conjugate()) <= 1e-14 + 1e-12 * abs(a)


def test_mellin_against_direct():
    from scipy import integrate

    s = complex(0.5, 7.0)
    re, _ = integrate.quad(lambda x: eval_V(PLAIN, x) * (x ** (s - 1)).real, 1, 2, epsabs=1e-15)
    im, _ = integrate.quad(lambda x: eval_V(PLAIN, x) * (x ** (s - 1)).imag, 1, 2, epsabs=1e-15)
    assert abs(mellin_V(PLAIN, s) - complex(re, im)) < 1e-13


def test_check_delta():
    T = 1000.0
    lim = math.sqrt(T) / math.log(T)
    assert check_delta(BumpFunction("plateau", 4.0), T)
    assert not check_delta(BumpFunction("plateau", lim + 0.1), T)
    assert check_delta(PLAIN, T)
