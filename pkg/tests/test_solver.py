import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gshypo._numbers import ExactComplex
from gshypo.diagnostics import decay_classify
from gshypo.eigen import Harmonic1D
from gshypo.exceptions import AdmissibilityError, ContractError, InvalidWitnessError, ShapeError
from gshypo.solver import (DataVector, SymbolDivisionSolver, admissibility_check, apply_system, counterexample_pair,
                           division_field, load_data_vector, relative_mode_error, save_data_vector, solve,
                           solve_with_report)
from gshypo.spectral_core import Bounds, SpaceParams, SpectralField, mode
from gshypo.symbols import OperatorSpec, PolynomialSymbol, SystemSpec, symbol_exact
from gshypo.synthetic import planted_system, smooth_field

F = Fraction


def dt(k=1, m=1):
    return PolynomialSymbol.time_derivative(k, m)


def single(d):
    return SystemSpec((OperatorSpec(dt(), d),), Harmonic1D(), SpaceParams())


def m_system():
    return SystemSpec((OperatorSpec(dt(1, 2), F(1, 2)), OperatorSpec(dt(2, 2), F(1, 3))), Harmonic1D(),
                      SpaceParams(m=2))


def l_system():
    return SystemSpec((OperatorSpec(dt(1, 2), ExactComplex(F(0), F(7, 10))), OperatorSpec(dt(2, 2), math.sqrt(2))),
                      Harmonic1D(), SpaceParams(m=2))


@pytest.mark.parametrize("make", [m_system, l_system, lambda: single(F(1, 2))])
def test_round_trip(make, rng):
    spec = make()
    b = Bounds.cube(8, 8, spec.params.m)
    u = smooth_field(b, spec.params, rng)
    Fv = apply_system(spec, u)
    rep = admissibility_check(spec, Fv)
    assert rep.admissible and rep.commutation_residual <= 1e-12
    assert relative_mode_error(u, solve(spec, Fv)) <= 1e-12


def test_solution_formula_against_exact_division(rng):
    spec = m_system()
    b = Bounds.cube(4, 4, 2)
    u = smooth_field(b, spec.params, rng)
    Fv = apply_system(spec, u)
    got = solve(spec, Fv)
    for md, _ in u.items():
        sig = [symbol_exact(spec, r, md) for r in (1, 2)]
        r_star = max(range(2), key=lambda r: (sig[r].abs2(), -r))
        want = Fv[r_star].get(md) / complex(sig[r_star])
        assert got.get(md) == pytest.approx(want, rel=1e-15)


def test_kernel_violation_is_rejected():
    spec = single(-1)
    b = Bounds.cube(5, 3)
    f = SpectralField.from_dict(b, {(3, 1): 1.0, (0, 0): 2.0})  # (3, 1) is a zero of D_t - H
    with pytest.raises(AdmissibilityError) as info:
        solve(spec, DataVector((f,)))
    rep = info.value.report
    assert not rep.admissible and rep.kernel_violations == [(1, mode(3, 1))]


def test_commutation_violation_is_rejected(rng):
    spec = m_system()
    b = Bounds.cube(3, 3, 2)
    u = smooth_field(b, spec.params, rng)
    bad = DataVector((u, u))
    rep = admissibility_check(spec, bad)
    assert not rep.admissible and rep.commutation_residual > 1e-3
    with pytest.raises(AdmissibilityError):
        SymbolDivisionSolver(spec).fit(bad)


def test_kernel_added_on_zero_set(rng):
    spec = single(-1)
    b = Bounds.cube(9, 4)
    u = smooth_field(b, spec.params, rng)
    Fv = apply_system(spec, u)
    kernel = SpectralField.from_dict(b, {(1, 0): 5.0, (7, 3): -1j})
    v, rep = solve_with_report(spec, Fv, kernel)
    assert v.get(mode(1, 0)) == 5.0 and v.get(mode(7, 3)) == -1j
    assert rep.reproduction_residual <= 1e-14
    zeros = {(1, 0), (3, 1), (5, 2), (7, 3), (9, 4)}
    for md, val in u.items():
        if (md.tau[0], md.j) not in zeros:
            assert v.get(md) == pytest.approx(val, rel=1e-13)
        elif (md.tau[0], md.j) in ((3, 1), (5, 2), (9, 4)):
            assert v.get(md) == 0
    with pytest.raises(ContractError):
        solve(spec, Fv, SpectralField.from_dict(b, {(2, 0): 1.0}))


def test_shape_mismatch():
    with pytest.raises(ShapeError):
        solve(m_system(), DataVector((SpectralField.zeros(Bounds.cube(1, 1, 2)),)))


def test_data_vector_files_round_trip(tmp_path, rng):
    spec = m_system()
    Fv = apply_system(spec, smooth_field(Bounds.cube(3, 3, 2), spec.params, rng))
    manifest = save_data_vector(Fv, tmp_path, "f", spec.params)
    assert load_data_vector(manifest) == Fv
    with pytest.raises(ContractError):
        load_data_vector(tmp_path / "missing.json")


def test_estimator_round_trip(rng):
    spec = m_system()
    u = smooth_field(Bounds.cube(4, 4, 2), spec.params, rng)
    est = SymbolDivisionSolver(spec)
    Fv = est.inverse_transform(u)
    assert relative_mode_error(u, est.fit(Fv).transform(Fv)) <= 1e-12
    assert est.report_.admissible


def test_counterexample_gh_planted():
    spec, wit = planted_system(range(3, 148, 3))
    b = Bounds.cube(300, 150)
    Fv, u = counterexample_pair(spec, wit, "GH", b)
    back = apply_system(spec, u)
    assert relative_mode_error(Fv[0], back[0]) <= 1e-12
    f_label = decay_classify(Fv[0], spec.params)
    u_label = decay_classify(u, spec.params)
    assert f_label.label == "Smooth" and f_label.epsilon_hat == pytest.approx(1.0, rel=0.1)
    assert u_label.label == "Ultradistribution"


def test_counterexample_gs_planted():
    spec, wit = planted_system(range(3, 148, 3))
    Fv, u = counterexample_pair(spec, wit, "GS", Bounds.cube(300, 150))
    assert u is None and Fv[0].nnz == len(wit) and np.all(Fv[0].values == 1)
    assert admissibility_check(spec, Fv).admissible
    assert decay_classify(division_field(spec, Fv), spec.params).label == "Neither"


def test_counterexample_rejects_zero_witness():
    with pytest.raises(InvalidWitnessError):
        counterexample_pair(single(-1), [mode(1, 0)])
    with pytest.raises(ContractError):
        counterexample_pair(single(F(1, 2)), [mode(1, 0)], "XX")


@settings(max_examples=30, deadline=None)
@given(st.fractions(-3, 3, max_denominator=5), st.fractions(-3, 3, max_denominator=5), st.integers(0, 2 ** 32 - 1))
def test_apply_solve_property(rho, theta, seed):
    spec = SystemSpec((OperatorSpec(dt(1, 2), rho), OperatorSpec(dt(2, 2), theta)), Harmonic1D(), SpaceParams(m=2))
    b = Bounds.cube(3, 3, 2)
    u = smooth_field(b, spec.params, np.random.default_rng(seed))
    Fv = apply_system(spec, u)
    v = solve(spec, Fv)
    # u and v agree wherever the system does not vanish; L v = F everywhere
    assert max((apply_system(spec, v)[r] - Fv[r]).max_abs() for r in range(2)) <= 1e-12
