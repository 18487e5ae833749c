import math

import numpy as np
import pytest

from mixed_moments.osclab import (
    DEFAULT_PROBLEMS,
    BoundaryStationaryPoint,
    NoStationaryPoint,
    PhaseProblem,
    ProblemParseError,
    ResolutionError,
    check_inert,
    check_phase,
    decay_certificate,
    direct_oscillatory_integral,
    load_problems,
    locate_stationary_point,
    parse_problems,
    stationary_error_slope,
    stationary_leading_term,
)
from mixed_moments.weights import PLAIN, BumpFunction, integral_c

# mpmath quad of the plain bump times e^{200 i xi} over [1, 2], 40 digits
FOURIER_200 = complex(1.014490263444166178e-12, 4.590035030288888083e-11)


def test_no_oscillation():
    p = PhaseProblem("linear", lam=0.0)
    assert direct_oscillatory_integral(p).value == pytest.approx(integral_c(PLAIN), rel=1e-12)


def test_fourier_200():
    val = direct_oscillatory_integral(PhaseProblem("linear", lam=200.0)).value
    assert abs(val - FOURIER_200) <= 1e-10 * max(1.0, abs(FOURIER_200))
    # the oracle agreement is much tighter in absolute terms
    assert abs(val - FOURIER_200) <= 1e-16


@pytest.mark.parametrize("kind,xi0", [("linear", None), ("quadratic", 1.3), ("loglinear", 1.7)])
def test_conjugation(kind, xi0):
    p = PhaseProblem(kind, lam=150.0, xi0=xi0)
    a = direct_oscillatory_integral(p).value
    b = direct_oscillatory_integral(p, conj=True).value
    assert abs(a - b.conjugate()) < 1e-15


def test_linear_decay():
    cert = decay_certificate(PhaseProblem("linear", lam=100.0))
    assert cert.passes(-3.0)
    assert cert.slope <= -3.0


def test_plateau_decay_against_ratio():
    p = PhaseProblem("linear", lam=100.0, weight=BumpFunction("plateau", 10.0))
    cert = decay_certificate(p)
    assert all(r >= 1 for r in cert.ratios)
    assert cert.ratios[0] == pytest.approx(p.Y / 10.0)
    assert cert.passes(-3.0)


def test_decay_sign_flip():
    a = direct_oscillatory_integral(PhaseProblem("linear", lam=300.0)).value
    b = direct_oscillatory_integral(PhaseProblem("linear", lam=-300.0)).value
    assert abs(a) == pytest.approx(abs(b), rel=1e-12)


def test_decay_needs_nonstationary():
    with pytest.raises(ValueError):
        decay_certificate(PhaseProblem("quadratic", lam=100.0, xi0=1.5))


def test_stationary_location():
    p = PhaseProblem("quadratic", lam=1e4, xi0=1.5)
    assert locate_stationary_point(p) == 1.5
    lead = stationary_leading_term(p)
    assert abs(lead.value) == pytest.approx(math.sqrt(math.pi / 1e4) * math.exp(-4), rel=1e-12)
    direct = direct_oscillatory_integral(p).value
    assert abs(direct - lead.value) <= 1e-2 * abs(direct)


def test_stationary_slope():
    slope, errs = stationary_error_slope(PhaseProblem("quadratic", lam=1e3, xi0=1.5))
    assert slope <= -1.4
    assert errs[0] > errs[-1]


def test_stationary_loglinear():
    p = PhaseProblem("loglinear", lam=5e3, xi0=1.4)
    direct = direct_oscillatory_integral(p).value
    assert abs(direct - stationary_leading_term(p).value) <= 1e-2 * abs(direct)


def test_negative_curvature():
    p = PhaseProblem("quadratic", lam=-4e3, xi0=1.5)
    q = PhaseProblem("quadratic", lam=4e3, xi0=1.5)
    assert stationary_leading_term(p).value == pytest.approx(
        stationary_leading_term(q).value.conjugate(), rel=1e-14)


def test_translation_covariance():
    p = PhaseProblem("quadratic", lam=4e3, xi0=1.5)
    q = PhaseProblem("quadratic", lam=4e3, xi0=1.5, shift=0.1)
    assert abs(direct_oscillatory_integral(q).value) == pytest.approx(
        abs(direct_oscillatory_integral(p).value), rel=1e-11)
    assert abs(stationary_leading_term(q).value) == pytest.approx(
        abs(stationary_leading_term(p).value), rel=1e-12)


def test_stationary_failures():
    with pytest.raises(NoStationaryPoint):
        stationary_leading_term(PhaseProblem("linear", lam=100.0))
    with pytest.raises(BoundaryStationaryPoint):
        stationary_leading_term(PhaseProblem("quadratic", lam=100.0, xi0=1.0))


def test_resolution_budget():
    with pytest.raises(ResolutionError):
        direct_oscillatory_integral(PhaseProblem("linear", lam=1e9))


@pytest.mark.parametrize("kw", [dict(kind="cubic"), dict(Z=0.0), dict(kind="quadratic"),
                                dict(kind="loglinear", xi0=-1.0)])
def test_problem_validation(kw):
    with pytest.raises(ValueError):
        PhaseProblem(**kw)


def test_inert_and_phase():
    assert check_inert(PhaseProblem("linear", lam=10.0))
    assert check_inert(PhaseProblem("linear", lam=10.0, weight=BumpFunction("plateau", 10.0), Z=5.0))
    assert check_phase(PhaseProblem("quadratic", lam=50.0, xi0=1.5))
    p = PhaseProblem("linear", lam=10.0)
    xs = np.linspace(1, 2, 11)
    assert np.all(p.w(xs) >= 0)


def test_default_problems():
    probs = parse_problems(DEFAULT_PROBLEMS)
    assert [p.kind for p in probs] == ["quadratic", "linear"]
    assert probs[0].lam == 1000.0 and probs[0].xi0 == 1.5


@pytest.mark.parametrize("text", ["", "[a]\nkind = linear\n", "[a]\nlam = 1\ncolour = red\n",
                                  "[a]\nlam = abc\n", "no section\n"])
def test_parse_errors(text):
    with pytest.raises(ProblemParseError):
        parse_problems(text)


def test_load_missing(tmp_path):
    with pytest.raises(ProblemParseError):
        load_problems(tmp_path / "none.ini")
