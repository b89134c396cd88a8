"""Key rates averaged over the fading laws of the two channels."""
from __future__ import annotations

import numpy as np

from ..channel import DiscreteDistribution
from ..errors import ParameterError
from .common import KeyRatePoint, check_compensation

# pairs of bins whose joint mass falls below this are skipped
PAIR_MASS_FLOOR = 1e-14
_CHUNK = 1 << 15


def _support(d: DiscreteDistribution):
    d.check_normalized()
    keep = d.mass > 0
    return d.eta[keep], d.mass[keep]


def min_distribution(a: DiscreteDistribution, b: DiscreteDistribution) -> DiscreteDistribution:
    """Law of ``min(eta_a, eta_b)``, i.e. of the larger attenuation."""
    if not a.same_grid(b):
        raise ParameterError("distributions live on different grids")
    a.check_normalized()
    b.check_normalized()
    cab = np.cumsum(a.mass) * np.cumsum(b.mass)  # P(both attenuations <= grid value)
    mass = np.diff(np.concatenate([[0.0], cab]))
    lost = 1.0 - (1.0 - a.lost) * (1.0 - b.lost)
    return DiscreteDistribution(np.clip(mass, 0.0, None), a.lo, a.step, lost, {"component": "min"})


def _pairs(a: DiscreteDistribution, b: DiscreteDistribution, compensation: str):
    if compensation == "Compensated":
        eta, m = _support(min_distribution(a, b))
        return eta, eta, m
    ea, ma = _support(a)
    eb, mb = _support(b)
    M = ma[:, None] * mb[None, :]
    keep = M >= PAIR_MASS_FLOOR
    ia, ib = np.nonzero(keep)
    return ea[ia], eb[ib], M[ia, ib]


def average_over_pdte(point_fn, pdte_a: DiscreteDistribution, pdte_b: DiscreteDistribution,
                      compensation: str = "NonCompensated", mu: float = float("nan"),
                      rep_rate: float = 1.0) -> KeyRatePoint:
    """Mass-weighted mean rate; errors are weighted by mass times gain.

    ``point_fn(eta_a, eta_b)`` maps efficiency arrays to a dict with at least
    ``rate``, ``e_x``, ``e_z`` and ``gain`` arrays. The lost bins count as zero
    transmittance and contribute nothing.
    """
    check_compensation(compensation)
    ea, eb, m = _pairs(pdte_a, pdte_b, compensation)
    sums = {"rate": 0.0, "gain": 0.0, "e_x": 0.0, "e_z": 0.0}
    for s in range(0, m.size, _CHUNK):
        sl = slice(s, s + _CHUNK)
        out = point_fn(ea[sl], eb[sl])
        wg = m[sl] * out["gain"]
        sums["rate"] += float(np.dot(m[sl], out["rate"]))
        sums["gain"] += float(wg.sum())
        sums["e_x"] += float(np.dot(wg, out["e_x"]))
        sums["e_z"] += float(np.dot(wg, out["e_z"]))
    g = sums["gain"]
    e_x = sums["e_x"] / g if g > 0 else 0.5
    e_z = sums["e_z"] / g if g > 0 else 0.5
    aux = {"gain": g, "pairs": int(m.size), "mass_used": float(m.sum())}
    r = sums["rate"]
    return KeyRatePoint(mu, r, r * rep_rate, float(np.clip(e_x, 0, 0.5)), float(np.clip(e_z, 0, 0.5)), aux)
