"""Synthetic inputs with known answers: planted small divisors and smooth random fields."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .eigen import Harmonic1D
from .exceptions import ContractError
from .spectral_core import Bounds, SpaceParams, SpectralField, weight, mode, weights
from .symbols import OperatorSpec, SystemSpec, TabulatedSymbol


def _tiny(eps: float, w: float) -> Fraction:
    """A dyadic rational within double precision of ``exp(-eps * w) / 2`` (no underflow)."""
    y = eps * w / math.log(2.0)
    k = math.floor(y)
    return Fraction(2.0 ** -(y - k)) / 2 ** (k + 1)


def planted_system(witness_js, eps: float = 1.0):
    """One operator on T x R with ``sigma(tau, j) = a(tau) - lambda_j`` and planted small values.

    ``a(tau) = tau + 1/2`` except at ``tau_k = 2 j_k + 1`` where
    ``a(tau_k) = lambda_{j_k} + delta_k`` with ``delta_k ~ exp(-eps w_k) / 2``
    and ``w_k`` the weight of ``(tau_k, j_k)``. Away from the witnesses
    ``|sigma| >= 1/2``. Returns ``(spec, witness modes)``.
    """
    params = SpaceParams(m=1, n=1, sigma=1, mu=Fraction(1, 2), bigM=2)
    eigen = Harmonic1D()
    planted = {}
    for j in witness_js:
        tau = 2 * int(j) + 1
        if tau in planted:
            raise ContractError(f"witness j={j} repeated", contract="distinct witnesses")
        w = weight(params, mode(tau, j))
        planted[tau] = Fraction(2 * int(j) + 1) + _tiny(eps, w)

    def exact(tau):
        t = tau[0]
        return planted.get(t, Fraction(2 * t + 1, 2))

    def values(taus):
        taus = np.asarray(taus).reshape(-1, 1)
        out = taus[:, 0] + 0.5
        for i, t in enumerate(taus[:, 0]):
            if int(t) in planted:
                out[i] = float(planted[int(t)])
        return out.astype(complex)

    q = TabulatedSymbol(values, 1, growth_c=2.0, growth_nu=1.0, exact_func=exact, name="planted")
    spec = SystemSpec((OperatorSpec(q, -1),), eigen, params)
    witnesses = [mode(2 * int(j) + 1, int(j)) for j in witness_js]
    return spec, witnesses


def smooth_field(bounds: Bounds, params: SpaceParams, rng: np.random.Generator, rate: float = 1.0,
                 scale: float = 1.0) -> SpectralField:
    """``scale * exp(-rate * w) * e^{i phi}`` with uniform random phases on every grid mode."""
    modes = bounds.all_modes()
    w = weights(params, modes)
    phase = np.exp(2j * np.pi * rng.random(len(modes)))
    return SpectralField(bounds, modes, scale * np.exp(-rate * w) * phase)


__all__ = ["planted_system", "smooth_field"]
