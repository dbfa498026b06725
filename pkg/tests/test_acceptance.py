"""Acceptance criteria 1-9, each printing one PASS/FAIL line."""

import io
import json
import math
import time
from contextlib import contextmanager
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from scipy.special import jv

from gshypo._numbers import ExactComplex
from gshypo.cli import run_cli
from gshypo.diagnostics import decay_classify, diophantine_profile, hypoellipticity_verdict, solvability_verdict
from gshypo.eigen import Harmonic1D, weyl_fit
from gshypo.liouville import ContinuedFraction, exp_liouville_test
from gshypo.normal_form import (TimeCoefficientSet, TimeDependentSystem, TrigCoefficient, average_coefficient,
                                compat_integral, conjugation_residual, interior_mask, psi_apply)
from gshypo.solver import (admissibility_check, apply_system, counterexample_pair, division_field,
                           relative_mode_error, save_data_vector, solve)
from gshypo.spectral_core import Bounds, SpaceParams, SpectralField
from gshypo.symbols import OperatorSpec, PolynomialSymbol, SystemSpec, resonance_exact
from gshypo.synthetic import planted_system, smooth_field

F = Fraction
CONFIGS = Path(__file__).resolve().parent.parent / "configs"
RESULTS = {}


@contextmanager
def criterion(number, capsys, title):
    t0 = time.perf_counter()
    try:
        yield
    except BaseException:
        RESULTS[number] = ("FAIL", title, time.perf_counter() - t0)
        _print(number, capsys)
        raise
    RESULTS[number] = ("PASS", title, time.perf_counter() - t0)
    _print(number, capsys)


def _print(number, capsys):
    status, title, dt = RESULTS[number]
    with capsys.disabled():
        print(f"\ncriterion {number}: {status} ({dt:.2f} s) {title}")


def dt(k=1, m=1):
    return PolynomialSymbol.time_derivative(k, m)


def single(d, q=None):
    return SystemSpec((OperatorSpec(q or dt(), d),), Harmonic1D(), SpaceParams())


def l_system():
    return SystemSpec((OperatorSpec(dt(1, 2), ExactComplex(F(0), F(7, 10))), OperatorSpec(dt(2, 2), math.sqrt(2))),
                      Harmonic1D(), SpaceParams(m=2))


def cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run_cli([str(a) for a in argv], stdout=out, stderr=err)
    assert code == 0, err.getvalue()
    return out.getvalue()


def test_c1_eigen_layer(capsys):
    with criterion(1, capsys, "Harmonic1D eigenvalues exact, Weyl fit exponent 1 and rho 2"):
        t0 = time.perf_counter()
        h = Harmonic1D()
        js = np.arange(10 ** 6 + 1)
        assert np.array_equal(h.eigenvalues(js), 2.0 * js + 1)
        assert all(h.eigenvalue(j) == 2 * j + 1 for j in (0, 1, 7, 999_999, 10 ** 6))
        fit = weyl_fit(h, (10 ** 3, 10 ** 6))
        assert abs(fit.exponent_hat - 1.0) <= 0.01 and abs(fit.rho_hat - 2.0) <= 0.02
        assert time.perf_counter() - t0 < 1.0


def test_c2_l_system(capsys):
    with criterion(2, capsys, "system with L1 = D_t1 + 0.7i H holds with exact bound 0.7"):
        t0 = time.perf_counter()
        v = hypoellipticity_verdict(l_system(), Bounds.cube(2000, 2000, 2), 8)
        assert v.kind == "Holds" and v.exact
        assert v.report.certificate.value >= F(7, 10)
        assert time.perf_counter() - t0 < 10.0


def test_c3_exact_resonance(capsys):
    with criterion(3, capsys, "D_t - H resonant and solvable, D_t + H/2 zero free"):
        t0 = time.perf_counter()
        b = Bounds.cube(200, 200)
        res = single(-1)
        assert resonance_exact(res).kind == "InfiniteCertified"
        hyp, sol = hypoellipticity_verdict(res, b), solvability_verdict(res, b)
        assert hyp.kind == "Fails" and hyp.exact
        assert sol.kind == "Holds" and sol.exact and sol.report.certificate.value >= 1
        half = single(F(1, 2))
        zf = resonance_exact(half)
        assert zf.kind == "FiniteCertified" and zf.count == 0
        for v in (hypoellipticity_verdict(half, b), solvability_verdict(half, b)):
            assert v.kind == "Holds" and v.exact
        assert time.perf_counter() - t0 < 5.0


def _random_affine_system(rng):
    m = int(rng.integers(1, 3))
    ell = int(rng.integers(1, 3))

    def q():
        return F(int(rng.integers(-4, 5)), int(rng.integers(1, 5)))

    ops = []
    for r in range(ell):
        coeffs = {tuple(int(i == k) for i in range(m)): q() for k in range(m)}
        coeffs[(0,) * m] = q()
        d = q()
        if d == 0 and all(c == 0 for a, c in coeffs.items() if any(a)):
            d = F(1)
        ops.append(OperatorSpec(PolynomialSymbol({a: c for a, c in coeffs.items() if c}, m), d))
    return SystemSpec(tuple(ops), Harmonic1D(), SpaceParams(m=m))


def test_c4_hypo_implies_solv(capsys):
    with criterion(4, capsys, "hypoellipticity implies solvability on 120 random rational-affine systems"):
        rng = np.random.default_rng(4)
        holds = violations = 0
        for _ in range(120):
            spec = _random_affine_system(rng)
            size = int(rng.integers(10, 31))
            b = Bounds.cube(size, size, spec.params.m)
            rep = diophantine_profile(spec, b, 4)
            hyp = hypoellipticity_verdict(spec, b, 4, report=rep)
            sol = solvability_verdict(spec, b, 4, report=rep)
            if hyp.kind == "Holds":
                holds += 1
                violations += sol.kind != "Holds"
        assert violations == 0
        assert holds >= 10  # the implication is exercised, not vacuous


def test_c5_solver_round_trip(capsys):
    with criterion(5, capsys, "1000 smooth fields recovered to 1e-12, smooth data gives smooth solutions"):
        systems = [single(F(1, 2)), single(ExactComplex(F(0), F(7, 10))),
                   single(F(1, 2), PolynomialSymbol({(1,): F(2)}, 1)),
                   single(F(1, 1), PolynomialSymbol({(2,): F(1)}, 1))]
        b = Bounds.cube(64, 64)
        profiles = [diophantine_profile(s, b, 8).trend for s in systems]
        rng = np.random.default_rng(5)
        smooth_checks = 0
        for i in range(1000):
            spec = systems[i % len(systems)]
            u = smooth_field(b, spec.params, rng, rate=float(rng.uniform(0.5, 2.0)))
            Fv = apply_system(spec, u)
            rep = admissibility_check(spec, Fv)
            assert rep.admissible and rep.commutation_residual <= 1e-12
            v = solve(spec, Fv)
            assert relative_mode_error(u, v) <= 1e-12
            if i % 10 == 0:
                f_smooth = all(decay_classify(Fv[r], spec.params).label == "Smooth" for r in range(spec.ell))
                if f_smooth and profiles[i % len(systems)] == "ConditionHolds":
                    assert decay_classify(v, spec.params).label == "Smooth"
                    smooth_checks += 1
        assert smooth_checks >= 50


def test_c6_counterexamples(capsys):
    with criterion(6, capsys, "planted GH and GS counterexamples classify as stated, rate within 10%"):
        for eps in (1.0, 0.5):
            spec, wit = planted_system(range(3, 148, 3), eps)
            b = Bounds.cube(300, 150)
            Fv, u = counterexample_pair(spec, wit, "GH", b)
            f = decay_classify(Fv[0], spec.params)
            assert f.label == "Smooth" and abs(f.epsilon_hat - eps) <= 0.1 * eps
            assert decay_classify(u, spec.params).label == "Ultradistribution"
            G, none = counterexample_pair(spec, wit, "GS", b)
            assert none is None and admissibility_check(spec, G).admissible
            assert decay_classify(division_field(spec, G), spec.params).label == "Neither"


def test_c7_liouville(capsys):
    with criterion(7, capsys, "omega not flagged, 2^q rule flagged, golden ratio not flagged"):
        for cf, depth, want in ((ContinuedFraction.factorial_power(10), 4, "NotFlaggedUpToDepth"),
                                (ContinuedFraction.exp_rule(2), 3, "Flagged"),
                                (ContinuedFraction.exp_rule(2), 4, "Flagged"),
                                (ContinuedFraction.golden(), 20, "NotFlaggedUpToDepth")):
            t0 = time.perf_counter()
            v = exp_liouville_test(cf, 1, depth)
            assert v.verdict == want and v.certified
            if want == "Flagged":
                assert v.order_witness >= 0.69
            assert time.perf_counter() - t0 < 1.0
        # only double precision floats leave the log-space bounds
        rows = exp_liouville_test(ContinuedFraction.factorial_power(10), 1, 4).rows
        assert all(type(x) in (int, float, str, bool, type(None)) for r in rows for x in r.values())


def _trig_system(const, c1):
    params = SpaceParams()
    return TimeDependentSystem(TimeCoefficientSet([TrigCoefficient(const, (c1,), ())], params.sigma),
                               Harmonic1D(), params)


def _apply_time_dependent(u: SpectralField, const, c1):
    dense = u.to_dense()
    T = u.bounds.tau_max[0]
    tau = np.arange(-T, T + 1)[:, None]
    lam = 2.0 * np.arange(u.bounds.j_max + 1)[None, :] + 1.0
    shifted = np.zeros_like(dense)
    shifted[1:] += dense[:-1] / 2
    shifted[:-1] += dense[1:] / 2
    return SpectralField.from_dense(u.bounds, tau * dense + lam * (const * dense + c1 * shifted))


def test_c8_normal_form(capsys):
    with criterion(8, capsys, "a(t) = cos t + 1/2: exact mean, Psi round trip, conjugation, Bessel columns"):
        t0 = time.perf_counter()
        La = _trig_system("1/2", "1")
        b = Bounds.cube(64, 4)
        n_t = 512
        assert average_coefficient(La.coeffs.coeffs[0]) == F(1, 2)
        u = smooth_field(b, La.params, np.random.default_rng(8))
        fwd = psi_apply("forward", u, La, n_t, report=True)
        back = psi_apply("inverse", fwd.field, La, n_t)
        mask = interior_mask(b, fwd.interior_band)
        assert mask.any()
        assert np.abs(back.to_dense() - u.to_dense())[mask].max() <= 1e-10
        assert conjugation_residual(La, u, n_t) <= 1e-8
        for j in range(5):
            col = psi_apply("forward", SpectralField.from_dict(b, {(3, j): 1.0}), La, n_t).to_dense()[:, j]
            assert np.abs(col - jv(np.arange(-64, 65) - 3, -(2 * j + 1))).max() <= 1e-8
        # a0 lambda_j = j + 1/2 is never an integer: no compatibility conditions to test
        f = _apply_time_dependent(u, 0.5, 1.0)
        assert all(compat_integral(La, 1, j, f, n_t) is None for j in range(5))
        # with a0 = 1 every j is resonant and admissible data must pass
        Lb = _trig_system("1", "1")
        g = SpectralField.from_dense(b, np.where(np.abs(np.arange(-64, 65))[:, None] < 64, u.to_dense(), 0))
        fb = _apply_time_dependent(g, 1.0, 1.0)
        assert max(compat_integral(Lb, 1, j, fb, n_t) for j in range(5)) <= 1e-10
        assert time.perf_counter() - t0 < 30.0


def test_c9_determinism(capsys, tmp_path):
    with criterion(9, capsys, "JSON byte identical for 1 and 8 threads on criteria 2, 5 and 8"):
        spec = single(F(1, 2))
        b = Bounds.cube(64, 64)
        Fv = apply_system(spec, smooth_field(b, spec.params, np.random.default_rng(9)))
        save_data_vector(Fv, tmp_path, "f", spec.params)
        runs = [("check-hypo", "--spec", CONFIGS / "l_system.toml"),
                ("solve", "--spec", CONFIGS / "half.toml", "--data", tmp_path / "f_manifest.json"),
                ("normal-form", "--spec", CONFIGS / "cos_half.toml", "--n-t", 512)]
        for argv in runs:
            one = cli(*argv, "--threads", 1, "--out", tmp_path / "one")
            eight = cli(*argv, "--threads", 8, "--out", tmp_path / "eight")
            assert one == eight
            json.loads(one)
        for name in ("shell_eps.csv", "u.csv"):
            assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "eight" / name).read_bytes()
