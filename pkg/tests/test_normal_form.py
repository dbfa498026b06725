import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.special import jv

from gshypo.eigen import Harmonic1D
from gshypo.exceptions import ContractError, RegularityRestrictionError, ResolutionError
from gshypo.normal_form import (PsiConjugation, SampledCoefficient, TimeCoefficientSet, TimeDependentSystem,
                                TrigCoefficient, average_coefficient, compat_integral, conjugation_residual,
                                interior_mask, load_samples, normal_form_verdict, phase_A, psi_apply,
                                reduce_system)
from gshypo.solver import relative_mode_error
from gshypo.spectral_core import Bounds, SpaceParams, SpectralField
from gshypo.synthetic import smooth_field


def system(const="1/2", cos=("1",), sin=(), params=None):
    params = params or SpaceParams()
    a = TrigCoefficient(const, cos, sin)
    return TimeDependentSystem(TimeCoefficientSet([a], params.sigma), Harmonic1D(), params)


def test_average_is_exact():
    La = system()
    assert average_coefficient(La.coeffs.coeffs[0]) == Fraction(1, 2)
    spec = reduce_system(La)
    assert spec.ops[0].d == Fraction(1, 2)


def test_phase_is_mean_free_antiderivative():
    t = np.linspace(0, 2 * np.pi, 17)
    assert np.allclose(phase_A(system().coeffs, t), np.sin(t), atol=1e-15)
    La = system("0", ("0", "3"), ("2",))
    # int_0^t 3 cos 2s + 2 sin s ds = 3/2 sin 2t + 2 (1 - cos t)
    assert np.allclose(phase_A(La.coeffs, t), 1.5 * np.sin(2 * t) + 2 * (1 - np.cos(t)), atol=1e-14)


def test_sampled_coefficient_matches_trig():
    n = 64
    t = 2 * np.pi * np.arange(n) / n
    s = SampledCoefficient(np.cos(t) + 0.5)
    assert s.mean == pytest.approx(0.5, abs=1e-15)
    tt = np.linspace(0, 2 * np.pi, 11)
    assert np.allclose(s.drift_free_integral(tt), np.sin(tt), atol=1e-14)
    assert s.quadrature_error < 1e-14


def test_load_samples(tmp_path):
    n = 16
    t = 2 * np.pi * np.arange(n) / n
    (tmp_path / "a.csv").write_text("t,value\n" + "".join(f"{float(x)!r},{math.cos(x)!r}\n" for x in t))
    s = load_samples(tmp_path / "a.csv")
    assert s.mean == pytest.approx(0.0, abs=1e-15)
    (tmp_path / "b.csv").write_text("t,value\n0,1\n1,1\n2,1\n3,1\n")
    with pytest.raises(ContractError):
        load_samples(tmp_path / "b.csv")
    (tmp_path / "c.csv").write_text("t,value\n0,x\n")
    with pytest.raises(ContractError):
        load_samples(tmp_path / "c.csv")


def test_regularity_restriction():
    La = system(params=SpaceParams(mu=1, bigM=4))
    with pytest.raises(RegularityRestrictionError):
        reduce_system(La)


def test_resolution_contract(rng):
    La = system()
    u = smooth_field(Bounds.cube(64, 4), La.params, rng)
    with pytest.raises(ResolutionError):
        psi_apply("forward", u, La, n_t=100)


def test_psi_round_trip_on_interior(rng):
    La = system()
    b = Bounds.cube(64, 4)
    u = smooth_field(b, La.params, rng)
    fwd = psi_apply("forward", u, La, 512, report=True)
    back = psi_apply("inverse", fwd.field, La, 512)
    mask = interior_mask(b, fwd.interior_band)
    diff = np.abs(back.to_dense() - u.to_dense())[mask]
    assert mask.any() and diff.max() <= 1e-10 * np.abs(u.to_dense()).max()


@pytest.mark.parametrize("j", [0, 2, 4])
def test_psi_column_is_jacobi_anger(j):
    # e^{-i lambda sin t} e^{i tau0 t} = sum_k J_k(-lambda) e^{i (tau0 + k) t}
    La = system()
    b = Bounds.cube(64, 4)
    tau0 = 3
    u = SpectralField.from_dict(b, {(tau0, j): 1.0})
    out = psi_apply("forward", u, La, 512).to_dense()[:, j]
    lam = 2 * j + 1
    ks = np.arange(-64, 65) - tau0
    want = jv(ks, -lam)
    assert np.abs(out - want).max() <= 1e-8


def test_conjugation_identity_and_wraparound(rng):
    La = system()
    u = smooth_field(Bounds.cube(64, 4), La.params, rng)
    rep = conjugation_residual(La, u, 512, report=True)
    assert rep.residual <= 1e-8 and rep.wraparound < 1e-10
    # a much stronger coefficient on the minimum grid cannot be resolved
    strong = system("1/2", ("40",))
    rep = conjugation_residual(strong, u, 130, report=True)
    assert rep.wraparound > 1e-3


def _apply_time_dependent(u: SpectralField, const, c1):
    """(D_t + (const + c1 cos t) lambda_j) u, spectrally; u must vanish at |tau| = T."""
    dense = u.to_dense()
    T = u.bounds.tau_max[0]
    tau = np.arange(-T, T + 1)[:, None]
    lam = 2.0 * np.arange(u.bounds.j_max + 1)[None, :] + 1.0
    shifted = np.zeros_like(dense)
    shifted[1:] += dense[:-1] / 2  # e^{it} u
    shifted[:-1] += dense[1:] / 2  # e^{-it} u
    return SpectralField.from_dense(u.bounds, tau * dense + lam * (const * dense + c1 * shifted))


def test_compat_integral_vanishes_on_admissible_data(rng):
    La = system("1", ("1",))  # a0 = 1 so a0 * lambda_j is an integer for every j
    b = Bounds.cube(64, 4)
    g = smooth_field(b, La.params, rng)
    g = SpectralField.from_dense(b, np.where(np.abs(np.arange(-64, 65))[:, None] < 64, g.to_dense(), 0))
    f = _apply_time_dependent(g, 1.0, 1.0)
    for j in range(5):
        assert compat_integral(La, 1, j, f, 512) <= 1e-10
    bad = SpectralField.from_dict(b, {(0, 1): 1.0})
    assert compat_integral(La, 1, 1, bad, 512) > 1e-3


def test_compat_integral_only_on_resonant_modes():
    La = system()
    f = SpectralField.from_dict(Bounds.cube(8, 4), {(0, 1): 1.0})
    assert compat_integral(La, 1, 1, f, 64) is None


def test_normal_form_verdict():
    v = normal_form_verdict(system(), Bounds.cube(64, 4), 8)
    assert v.verdict.kind == "Holds" and v.averages == [Fraction(1, 2)]
    v = normal_form_verdict(system("1", ("1",)), Bounds.cube(64, 4), 8)
    assert v.verdict.kind == "Fails"


def test_threads_do_not_change_psi(rng):
    La = system()
    u = smooth_field(Bounds.cube(64, 4), La.params, rng)
    assert psi_apply("forward", u, La, 512, threads=1) == psi_apply("forward", u, La, 512, threads=8)


def test_psi_estimator(rng):
    La = system()
    u = smooth_field(Bounds.cube(32, 3), La.params, rng)
    est = PsiConjugation(La, n_t=256).fit(u)
    assert est.n_t_ == (256,)
    assert relative_mode_error(est.transform(u), psi_apply("forward", u, La, 256)) == 0.0
    with pytest.raises(ContractError):
        psi_apply("sideways", u, La, 256)
