import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixed_moments.hecke import DELTA, ZETA
from mixed_moments.lfun import _kernel_width, truncation_length, w_chebyshev, w_values
from mixed_moments.special import (
    GAUSS,
    QUARTIC,
    CutoffKernel,
    DomainError,
    GammaFactorPlan,
    PoleError,
    cutoff_W,
    gamma_ratio,
    log_gamma,
    log_gamma_factor,
    stirling_ratio_first,
    stirling_ratio_second,
)

# mpmath loggamma(10 + 100i) at 40 digits
LG_10_100 = complex(-112.39736554967237892570698, 374.98942296222949950761542)


def test_log_gamma_fixed():
    assert abs(log_gamma(1.0)) < 1e-15
    assert log_gamma(0.5) == pytest.approx(0.5723649429247001, abs=1e-14)
    assert abs(log_gamma(complex(10, 100)) - LG_10_100) < 1e-12


@pytest.mark.parametrize("z", [0, -1, -7])
def test_log_gamma_poles(z):
    with pytest.raises(PoleError):
        log_gamma(complex(z, 0))


@given(st.floats(0.1, 60), st.floats(-3000, 3000))
@settings(max_examples=80, deadline=None)
def test_log_gamma_mpmath(x, y):
    mpmath = pytest.importorskip("mpmath")
    z = complex(x, y)
    ref = complex(mpmath.loggamma(z))
    assert abs(log_gamma(z) - ref) <= 1e-12 * max(1.0, abs(ref))


@given(st.floats(0.5, 30), st.floats(1, 500))
@settings(max_examples=40, deadline=None)
def test_log_gamma_recurrence(x, y):
    z = complex(x, y)
    assert abs(log_gamma(z + 1) - log_gamma(z) - np.log(z)) < 1e-11 * max(1, abs(log_gamma(z)))


def test_gamma_ratio_trivial():
    assert gamma_ratio(DELTA, complex(0.5, 100), 0) == 1


def test_gamma_ratio_zeta_oracle():
    s = complex(0.5, 50)
    ref = np.exp(log_gamma((s + 1) / 2) - log_gamma(s / 2)) / math.sqrt(math.pi)
    assert abs(gamma_ratio(ZETA, s, 1) - ref) < 1e-13 * abs(ref)


@pytest.mark.parametrize("eps", [0.05, 0.1, 0.25])
def test_gamma_ratio_stirling_modulus(eps):
    s = complex(0.5, 100)
    u = 2 * eps
    # each of the two factors grows like (|s|/2)^{u/2}
    expect = (abs(s) / 2) ** (DELTA.degree * u / 2) * math.pi ** (-DELTA.degree * u / 2)
    assert abs(gamma_ratio(DELTA, s, u)) / expect == pytest.approx(1.0, abs=1e-3)


def test_stirling_first():
    assert stirling_ratio_first(1000, 0, ZETA) == 1
    approx = stirling_ratio_first(1000, 0.01, ZETA)
    exact = gamma_ratio(ZETA, complex(0.5, 1000), 0.01)
    assert abs(approx / exact - 1) <= 5e-3


@pytest.mark.parametrize("form", [ZETA, DELTA])
def test_stirling_first_sign(form):
    a = stirling_ratio_first(300, 0.2, form)
    b = stirling_ratio_first(-300, 0.2, form)
    assert abs(a) == pytest.approx(abs(b), rel=1e-14)
    assert abs(a * b.conjugate() - np.exp(2j * math.pi * form.degree * 0.2 / 4) * abs(a) ** 2) < 1e-10 * abs(a) ** 2


@given(st.floats(10, 1e5))
@settings(max_examples=50, deadline=None)
def test_stirling_second_unitary(t):
    for form in (ZETA, DELTA):
        assert abs(abs(stirling_ratio_second(t, form)) - 1) < 1e-12
        assert abs(stirling_ratio_second(-t, form) - stirling_ratio_second(t, form).conjugate()) < 1e-9


def test_stirling_second_oracle():
    t = 500.0
    s = complex(0.5, t)
    exact = np.exp(log_gamma((1 - s) / 2) - log_gamma(s / 2))
    assert abs(stirling_ratio_second(t, ZETA) / exact - 1) <= 1e-2


@pytest.mark.parametrize("fn", [stirling_ratio_second])
def test_stirling_domain(fn):
    with pytest.raises(DomainError):
        fn(5.0, ZETA)


def test_kernel_validation():
    with pytest.raises(ValueError):
        CutoffKernel("cubic")
    with pytest.raises(ValueError):
        CutoffKernel("gauss", -1.0)
    k = QUARTIC.resolved(0.3)
    assert k(0) == 1 and k(0.7j) == pytest.approx(k(-0.7j))


def test_plan_validation():
    with pytest.raises(ValueError):
        GammaFactorPlan(c=0)
    with pytest.raises(ValueError):
        GammaFactorPlan(v_max=4)


def test_W_small_x():
    s = complex(0.5, 200)
    k = GAUSS.resolved(0.3)
    # below the effective length W is 1 up to the kernel residue tail
    assert abs(cutoff_W(ZETA, s, 1e-3, kernel=k, plan=GammaFactorPlan.for_kernel(k, ZETA, c=0.5)).value - 1) < 1e-6


def test_W_decay_delta():
    t = 1000.0
    s = complex(0.5, t)
    k = GAUSS.resolved(_kernel_width(DELTA, GAUSS, s))
    x = 10 * t ** (DELTA.degree / 2)
    w = cutoff_W(DELTA, s, x, kernel=k, plan=GammaFactorPlan.for_kernel(k, DELTA, c=0.5))
    assert abs(w.value) <= 1e-6


def test_W_kernels_differ():
    s = complex(0.5, 300)
    plan = GammaFactorPlan(c=0.5, v_max=12)
    a = cutoff_W(ZETA, s, 5.0, plan, GAUSS.resolved(0.4)).value
    b = cutoff_W(ZETA, s, 5.0, plan, QUARTIC.resolved(0.4)).value
    assert a != b


@pytest.mark.parametrize("form,t", [(ZETA, 100.0), (ZETA, 3000.0), (DELTA, 500.0)])
def test_chebyshev_W_matches_reference(form, t):
    s = complex(0.5, t)
    width = _kernel_width(form, GAUSS, s)
    k = GAUSS.resolved(width)
    # the trapezoid path is anchored where W has decayed, as in the AFE
    n = truncation_length(form, s, width)
    coef = w_chebyshev(form, s, k, width, math.log(2 * n) + 0.25)
    fast = w_values(coef, n)
    ns = np.array([1, 7, n // 3, n])
    ref = cutoff_W(form, s, ns.astype(float), GammaFactorPlan.for_kernel(k, form, c=0.5), k).value
    assert np.max(np.abs(fast[ns - 1] - ref)) < 1e-9


def test_log_gamma_factor_shape():
    s = np.array([0.5 + 10j, 0.5 + 20j])
    assert log_gamma_factor(DELTA, s).shape == (2,)
