import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gshypo.eigen import Harmonic1D, HarmonicND, hermite_eval
from gshypo.exceptions import ContractError, ShapeError
from gshypo.spectral_core import (Bounds, SpaceParams, SpectralField, enumerate_shells, euclidean_mode_norm,
                                  load_field, mode, reconstruct, save_field, weight, weights)


def test_space_params_contracts():
    with pytest.raises(ContractError):
        SpaceParams(sigma=Fraction(1, 2))
    with pytest.raises(ContractError):
        SpaceParams(mu=Fraction(1, 3))
    with pytest.raises(ContractError):
        SpaceParams(bigM=1)
    p = SpaceParams(m=2, sigma=2, mu=1)
    assert SpaceParams.from_dict(p.to_dict()) == p


def test_weight_by_hand():
    p = SpaceParams(m=2, n=1, sigma=2, mu=1)
    # ||(3,4)||^(1/2) + (8+1)^(1/2) = sqrt(5) + 3
    assert weight(p, mode((3, 4), 8)) == pytest.approx(math.sqrt(5) + 3, rel=1e-15)
    assert weight(SpaceParams(), mode(0, 0)) == 1.0


def test_weights_vectorised_agrees():
    p = SpaceParams(m=2, sigma=Fraction(3, 2))
    b = Bounds.cube(3, 4, 2)
    modes = b.all_modes()
    w = weights(p, modes)
    for row, x in zip(modes[::7], w[::7]):
        assert x == pytest.approx(weight(p, mode(tuple(row[:-1]), row[-1])), rel=1e-14)


def test_bounds_indexing():
    b = Bounds((2, 1), 3)
    assert b.shape == (5, 3, 4) and b.size == 60
    modes = b.all_modes()
    assert np.array_equal(b.flat_index(modes), np.arange(60))
    assert not b.contains(np.array([[3, 0, 0]]))[0]
    assert Bounds.from_dict(b.to_dict()) == b


def test_shells_partition_the_grid():
    b = Bounds.cube(5, 5, 1)
    shells = enumerate_shells(b, 4)
    assert sum(len(s) for s in shells) == b.size
    seen = {md for s in shells for md in s}
    assert len(seen) == b.size
    p = SpaceParams()
    edges = [max(weight(p, md) for md in s) for s in shells if s]
    assert edges == sorted(edges)


def test_field_dense_roundtrip_and_arithmetic():
    b = Bounds.cube(2, 2, 1)
    f = SpectralField.from_dict(b, {(1, 0): 2.0, (-2, 2): 1j, (0, 1): 0.0})
    assert f.nnz == 2
    g = SpectralField.from_dense(b, f.to_dense())
    assert g == f
    assert (f + f) == 2 * f
    assert (f - f).nnz == 0
    assert f.get(mode(-2, 2)) == 1j and f.get(mode(0, 0)) == 0
    with pytest.raises(ShapeError):
        SpectralField.from_dict(b, {(3, 0): 1.0})
    with pytest.raises(ShapeError):
        f + SpectralField.zeros(Bounds.cube(1, 1, 1))


def test_field_csv_roundtrip_bit_exact(tmp_path, rng):
    b = Bounds.cube(4, 3, 2)
    modes = b.all_modes()
    vals = rng.normal(size=len(modes)) * 10.0 ** rng.integers(-300, 300, size=len(modes)) + 1j * rng.normal(size=len(modes))
    f = SpectralField(b, modes, vals)
    p = SpaceParams(m=2, sigma=Fraction(3, 2))
    save_field(f, tmp_path / "f.csv", p)
    g, q = load_field(tmp_path / "f.csv")
    assert g == f and q == p


def test_load_field_needs_sidecar(tmp_path):
    f = SpectralField.from_dict(Bounds.cube(1, 1, 1), {(0, 0): 1.0})
    save_field(f, tmp_path / "f.csv")
    (tmp_path / "f.csv.json").unlink()
    with pytest.raises(ContractError):
        load_field(tmp_path / "f.csv")
    g, _ = load_field(tmp_path / "f.csv", Bounds.cube(1, 1, 1))
    assert g == f


def test_reconstruct_against_direct_sum():
    b = Bounds.cube(2, 3, 1)
    f = SpectralField.from_dict(b, {(1, 0): 1.0, (-2, 3): 0.5j, (0, 2): -0.25})
    t = np.linspace(0, 2 * np.pi, 7)
    x = np.linspace(-2, 2, 5)
    got = reconstruct(f, t, x, Harmonic1D())
    want = np.zeros((7, 5), complex)
    for md, v in f.items():
        for a, tt in enumerate(t):
            for c, xx in enumerate(x):
                want[a, c] += v * np.exp(1j * md.tau[0] * tt) * hermite_eval(md.j, xx)
    assert np.allclose(got, want, atol=1e-14)


def test_reconstruct_two_dimensional_space():
    b = Bounds.cube(0, 3, 1)
    f = SpectralField.from_dict(b, {(0, 2): 1.0})
    p = HarmonicND(2)
    pts = np.array([[0.1, 0.7], [-1.0, 0.2]])
    got = reconstruct(f, np.zeros((1, 1)), pts, p)
    assert np.allclose(got[0], p.eigenfunctions([2], pts)[0])


def test_euclidean_norm_uses_zero_based_j():
    assert euclidean_mode_norm(np.array([[3, 4]]))[0] == 5.0
    assert euclidean_mode_norm(np.array([[0, 0]]))[0] == 0.0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(-3, 3), st.integers(0, 3), st.floats(-1e3, 1e3, allow_nan=False)),
                max_size=20, unique_by=lambda t: t[:2]))
def test_field_from_dict_matches_dense(entries):
    b = Bounds.cube(3, 3, 1)
    f = SpectralField.from_dict(b, {(t, j): v for t, j, v in entries})
    dense = f.to_dense()
    for t, j, v in entries:
        assert dense[t + 3, j] == v
    assert f.nnz == sum(1 for *_, v in entries if v != 0)
