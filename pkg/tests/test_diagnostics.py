import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from sklearn.base import clone

from gshypo._numbers import ExactComplex
from gshypo.diagnostics import (DecayClassifier, decay_classify, diophantine_profile, hypoellipticity_verdict,
                                shell_eps_csv, solvability_verdict)
from gshypo.eigen import Harmonic1D
from gshypo.exceptions import ContractError, DegenerateSystemError
from gshypo.spectral_core import Bounds, SpaceParams, SpectralField, weights
from gshypo.symbols import OperatorSpec, PolynomialSymbol, SystemSpec
from gshypo.synthetic import planted_system, smooth_field

F = Fraction


def field_from(bounds, params, fn, rng=None):
    modes = bounds.all_modes()
    w = weights(params, modes)
    phase = np.exp(2j * np.pi * rng.random(len(modes))) if rng is not None else 1.0
    return SpectralField(bounds, modes, fn(w) * phase)


def single(d):
    return SystemSpec((OperatorSpec(PolynomialSymbol.time_derivative(1, 1), d),), Harmonic1D(), SpaceParams())


def l_system(rho=F(7, 10), theta=math.sqrt(2)):
    m = 2
    return SystemSpec((OperatorSpec(PolynomialSymbol.time_derivative(1, m), ExactComplex(F(0), rho)),
                       OperatorSpec(PolynomialSymbol.time_derivative(2, m), theta)), Harmonic1D(), SpaceParams(m=m))


@pytest.mark.parametrize("rate", [0.05, 0.3, 1.0, 2.5])
def test_exponential_decay_is_smooth_with_planted_rate(rate, rng):
    b, p = Bounds.cube(40, 40), SpaceParams()
    v = decay_classify(field_from(b, p, lambda w: 3.0 * np.exp(-rate * w), rng), p)
    assert v.label == "Smooth"
    assert v.epsilon_hat == pytest.approx(rate, rel=0.02)
    # the envelope bounds every coefficient
    pts = v.profile.points
    assert np.all(pts[:, 1] >= v.epsilon_hat * pts[:, 0] - v.profile.envelope_intercept - 1e-9)


def test_polynomial_factor_does_not_move_rate(rng):
    b, p = Bounds.cube(40, 40), SpaceParams()
    v = decay_classify(field_from(b, p, lambda w: w ** 6 * np.exp(-0.5 * w), rng), p)
    assert v.label == "Smooth" and v.epsilon_hat == pytest.approx(0.5, rel=0.05)


@pytest.mark.parametrize("fn", [lambda w: np.ones_like(w), lambda w: w ** 3, lambda w: w ** 8])
def test_subexponential_growth_is_ultradistribution(fn, rng):
    b, p = Bounds.cube(40, 40), SpaceParams()
    assert decay_classify(field_from(b, p, fn, rng), p).label == "Ultradistribution"


def test_exponential_growth_is_neither(rng):
    b, p = Bounds.cube(40, 40), SpaceParams()
    v = decay_classify(field_from(b, p, lambda w: np.exp(0.5 * w), rng), p)
    assert v.label == "Neither" and v.growth_rate == pytest.approx(0.5, rel=0.05)


def test_too_little_data_is_neither_with_caveat():
    b = Bounds.cube(2, 2)
    v = decay_classify(SpectralField.from_dict(b, {(0, 0): 1.0, (1, 1): 0.1}))
    assert v.label == "Neither" and "insufficient" in v.caveat


def test_zero_field_is_smooth():
    assert decay_classify(SpectralField.zeros(Bounds.cube(3, 3))).label == "Smooth"


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-200, 1e200), st.floats(0.0, 2.0))
def test_label_is_scale_equivariant(scale, rate):
    # a rate sitting on the threshold is decided by rounding noise
    assume(abs(rate - 1e-3) > 1e-9)
    b, p = Bounds.cube(20, 20), SpaceParams()
    f = field_from(b, p, lambda w: np.exp(-rate * w), np.random.default_rng(1))
    a, c = decay_classify(f, p), decay_classify(f * scale, p)
    assert a.label == c.label
    if a.epsilon_hat is not None:
        assert c.epsilon_hat == pytest.approx(a.epsilon_hat, rel=1e-9, abs=1e-9)


def test_decay_classifier_estimator(rng):
    b, p = Bounds.cube(20, 20), SpaceParams()
    f = smooth_field(b, p, rng, rate=0.7)
    est = DecayClassifier(params=p).fit(f)
    assert est.label_ == "Smooth" and est.epsilon_hat_ == pytest.approx(0.7, rel=0.02)
    assert est.predict([f, f * 0 + field_from(b, p, np.ones_like)]) == ["Smooth", "Ultradistribution"]
    twin = clone(est)
    assert twin.get_params()["params"] == p and not hasattr(twin, "label_")


def test_profile_exact_systems():
    rep = diophantine_profile(single(-1), Bounds.cube(200, 200), 8)
    assert rep.trend == "ConditionHolds" and rep.certificate.value == 1
    assert len(rep.zero_modes) == 100
    assert all(e == 0.0 for e in rep.eps_values)
    rep = diophantine_profile(l_system(), Bounds.cube(300, 300, 2), 8)
    assert rep.certificate.value == F(7, 10)


def test_profile_planted_small_divisors_fail():
    spec, wit = planted_system(range(3, 148, 3))
    rep = diophantine_profile(spec, Bounds.cube(300, 150), 8)
    assert rep.trend == "ConditionFails"
    outer = rep.eps_values[4:]
    assert all(0.9 <= e <= 1.1 for e in outer if e > 0)
    assert rep.worst_modes[0][0] in wit
    rates = [m[2] for m in rep.worst_modes]
    assert rates == sorted(rates, reverse=True) and len(rep.worst_modes) == 10


def test_enlarging_grid_keeps_failure():
    spec, _ = planted_system(range(3, 148, 3))
    small = diophantine_profile(spec, Bounds.cube(300, 150), 8)
    big = diophantine_profile(spec, Bounds.cube(400, 200), 8)
    assert small.trend == big.trend == "ConditionFails"


@pytest.mark.parametrize("d", [math.sqrt(2), (1 + math.sqrt(5)) / 2, math.pi])
def test_irrational_couplings_never_fail(d):
    rep = diophantine_profile(single(d), Bounds.cube(2000, 2000), 8)
    assert rep.certificate is None
    assert rep.trend in ("ConditionHolds", "Inconclusive")
    assert max(rep.eps_values[4:]) < 1e-2


def test_degenerate_system_rejected():
    spec = SystemSpec((OperatorSpec(PolynomialSymbol({}, 1), 0),), Harmonic1D(), SpaceParams())
    with pytest.raises(DegenerateSystemError):
        diophantine_profile(spec, Bounds.cube(3, 3), 8)
    with pytest.raises(ContractError):
        diophantine_profile(single(1), Bounds.cube(3, 3), 2)


def test_verdicts_resonant_and_zero_free():
    b = Bounds.cube(200, 200)
    hyp = hypoellipticity_verdict(single(-1), b)
    sol = solvability_verdict(single(-1), b)
    assert (hyp.kind, hyp.exact) == ("Fails", True) and hyp.resonance.infinite
    assert (sol.kind, sol.exact) == ("Holds", True)
    for v in (hypoellipticity_verdict(single(F(1, 2)), b), solvability_verdict(single(F(1, 2)), b)):
        assert (v.kind, v.exact) == ("Holds", True)


def test_verdict_l_system_holds_exactly():
    v = hypoellipticity_verdict(l_system(), Bounds.cube(2000, 2000, 2))
    assert v.kind == "Holds" and v.exact
    assert v.report.certificate.value >= F(7, 10)


def test_verdict_json_and_csv():
    v = hypoellipticity_verdict(single(-1), Bounds.cube(20, 20))
    d = v.to_dict()
    assert {"verdict", "reason", "exact", "grid", "shellEps", "trend", "worstModes", "zeroSet",
            "lowerBound", "caveats"} <= set(d)
    json.dumps(d)
    lines = shell_eps_csv(v.report).splitlines()
    assert lines[0] == "R,epsHat" and len(lines) == 9


def test_profile_thread_count_does_not_change_output():
    spec, _ = planted_system(range(3, 148, 3))
    one = diophantine_profile(spec, Bounds.cube(300, 150), 8, threads=1).to_dict()
    eight = diophantine_profile(spec, Bounds.cube(300, 150), 8, threads=8).to_dict()
    assert json.dumps(one, sort_keys=True) == json.dumps(eight, sort_keys=True)
