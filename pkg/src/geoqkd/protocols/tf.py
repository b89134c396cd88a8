"""Asymmetric twin-field QKD with phase-error estimation from photon-number yields.

Key bits come from the X (interference) windows; the phase error is bounded
from the Z-window yields ``Y_nm`` of ``n`` photons from Alice and ``m`` from
Bob, which infinite decoy states give exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from ..errors import ParameterError
from .common import (F_EC, REP_RATE_HZ, DetectorParams, KeyRatePoint, binary_entropy,
                     check_compensation, misalignment_angle)

_MAX_PHOTONS = 60
_TAIL = 1e-13


@dataclass(frozen=True)
class TFParams:
    mu_grid: tuple = tuple(np.round(np.linspace(0.005, 0.2, 40), 4))
    theta: float = misalignment_angle(1e-3)  # phase mismatch
    phi: float = misalignment_angle(1e-3)  # polarization mismatch
    f_ec: float = F_EC
    photon_cutoff: int = 10
    compensation: str = "Compensated"
    phase_error_bound: str = "parity"  # or "printed"
    sending_prob: float = 0.5
    rep_rate: float = REP_RATE_HZ

    def __post_init__(self):
        mu = np.asarray(self.mu_grid, dtype=float)
        if mu.size == 0 or np.any(mu <= 0) or np.any(np.diff(mu) <= 0):
            raise ParameterError("mu_grid must be positive and ascending")
        if self.f_ec < 1:
            raise ParameterError("f_ec must be >= 1")
        if self.photon_cutoff < 5:
            raise ParameterError("photon_cutoff must be >= 5")
        if self.phase_error_bound not in ("parity", "printed"):
            raise ParameterError("phase_error_bound must be 'parity' or 'printed'")
        if not 0 < self.sending_prob < 1:
            raise ParameterError("sending_prob must lie in (0, 1)")
        check_compensation(self.compensation)


def photon_cutoff(mu: float, minimum: int = 10) -> tuple[int, float]:
    """Smallest cutoff >= ``minimum`` whose sqrt-Poisson tail is below 1e-13, and that tail."""
    n = np.arange(_MAX_PHOTONS + 200)
    c = np.sqrt(stats.poisson.pmf(n, mu))
    tail = np.cumsum(c[::-1])[::-1]  # tail[k] = sum_{n >= k} c_n
    for N in range(minimum, _MAX_PHOTONS + 1):
        if tail[N + 1] < _TAIL:
            return N, float(tail[N + 1])
    return _MAX_PHOTONS, float(tail[_MAX_PHOTONS + 1])


def _binom_table(eta, N):
    """``B[s, n, k] = C(n, k) eta^k (1-eta)^(n-k)`` for n, k <= N."""
    n = np.arange(N + 1)
    k = n
    with np.errstate(invalid="ignore"):
        b = stats.binom.pmf(k[None, None, :], n[None, :, None], np.asarray(eta)[:, None, None])
    return np.nan_to_num(b)


def fock_yield(eta_a, eta_b, pd: float, N: int) -> np.ndarray:
    """Probability that only one given detector fires for ``n`` and ``m`` input photons.

    Surviving photons meet at a balanced beamsplitter; ``k`` and ``l`` of them
    all leave through the same port with probability ``C(k+l, k) / 2^(k+l)``.
    Shape ``(S, N+1, N+1)`` for ``S`` efficiency pairs (detector efficiency included).
    """
    ea = np.atleast_1d(np.asarray(eta_a, dtype=float))
    eb = np.atleast_1d(np.asarray(eta_b, dtype=float))
    ba, bb = _binom_table(ea, N), _binom_table(eb, N)
    k = np.arange(N + 1)
    G = special.comb(k[:, None] + k[None, :], k[:, None]) / 2.0 ** (k[:, None] + k[None, :])
    one_port = np.einsum("snk,kl,sml->snm", ba, G, bb)
    none = (1 - ea)[:, None, None] ** k[None, :, None] * (1 - eb)[:, None, None] ** k[None, None, :]
    return np.clip((1 - pd) * (one_port - (1 - pd) * none), 0.0, 1.0)


def _x_basis(ga, gb, pd, theta, phi):
    x = np.sqrt(ga * gb) * math.cos(theta) * math.cos(phi)
    gbar = 0.5 * (ga + gb)
    p_xx = 0.5 * (1 - pd) * (np.exp(-x) + np.exp(x)) * np.exp(-gbar) - (1 - pd) ** 2 * np.exp(-(ga + gb))
    num = np.exp(-x) - (1 - pd) * np.exp(-gbar)
    den = np.exp(-x) + np.exp(x) - 2 * (1 - pd) * np.exp(-gbar)
    with np.errstate(invalid="ignore", divide="ignore"):
        e_xx = np.where(den > 0, num / den, 0.5)
    return np.clip(p_xx, 0.0, 1.0), np.clip(e_xx, 0.0, 0.5)


def tf_arrays(mu_a: float, mu_b: float, eta_a, eta_b, det: DetectorParams, params: TFParams) -> dict:
    """Vectorized evaluation over arrays of channel efficiencies (detector excluded)."""
    if mu_a < 0 or mu_b < 0:
        raise ParameterError("intensities must be >= 0")
    ea = np.atleast_1d(np.asarray(eta_a, dtype=float))
    eb = np.atleast_1d(np.asarray(eta_b, dtype=float))
    if np.any(ea < 0) or np.any(eb < 0) or np.any(ea > 1) or np.any(eb > 1):
        raise ParameterError("efficiencies must lie in [0, 1]")
    if params.compensation == "Compensated":
        ea = eb = np.minimum(ea, eb)
    pd = det.dark_prob
    ta, tb = ea * det.efficiency, eb * det.efficiency
    p_xx, e_xx = _x_basis(mu_a * ta, mu_b * tb, pd, params.theta, params.phi)

    N, tail = photon_cutoff(max(mu_a, mu_b), params.photon_cutoff)
    n = np.arange(N + 1)
    Pa, Pb = stats.poisson.pmf(n, mu_a), stats.poisson.pmf(n, mu_b)
    Y = fock_yield(ta, tb, pd, N)
    sqY = np.sqrt(Y)
    z_gain = np.einsum("n,snm,m->s", Pa, Y, Pb)
    if params.phase_error_bound == "parity":
        # single photons carry odd total parity; both-even and both-odd classes are phase errors
        w = np.sqrt(Pa)[:, None] * np.sqrt(Pb)[None, :]
        ee = (n[:, None] % 2 == 0) & (n[None, :] % 2 == 0)
        oo = (n[:, None] % 2 == 1) & (n[None, :] % 2 == 1)
        bound = (np.einsum("snm,nm->s", sqY, w * ee) ** 2
                 + np.einsum("snm,nm->s", sqY, w * oo) ** 2)
    else:
        bound = np.einsum("n,snm,m->s", Pa, np.sqrt(Y * z_gain[:, None, None]), Pb)
    with np.errstate(invalid="ignore", divide="ignore"):
        e_zz = np.where(p_xx > 0, np.minimum(bound / p_xx, 0.5), 0.5)

    # Z windows of the sending-or-not-sending kind, for reporting
    s = params.sending_prob
    Y_mu0 = np.einsum("n,sn->s", Pa, Y[:, :, 0])
    Y_0mu = np.einsum("m,sm->s", Pb, Y[:, 0, :])
    p_zz = s * s * z_gain + s * (1 - s) * (Y_mu0 + Y_0mu) + (1 - s) ** 2 * Y[:, 0, 0]

    bracket = 1 - params.f_ec * binary_entropy(e_xx) - binary_entropy(e_zz)
    rate = np.maximum(2 * p_xx * bracket, 0.0)
    return {"rate": rate, "e_x": e_xx, "e_z": e_zz, "gain": 2 * p_xx, "p_xx": p_xx, "p_zz": p_zz,
            "z_gain": z_gain, "photon_cutoff": N, "tail_bound": tail}


def tf_point(mu_a: float, mu_b: float, eta_a: float, eta_b: float, det: DetectorParams,
             params: TFParams = TFParams()) -> KeyRatePoint:
    out = tf_arrays(mu_a, mu_b, eta_a, eta_b, det, params)
    r = float(out["rate"][0])
    aux = {k: (float(v[0]) if isinstance(v, np.ndarray) else v) for k, v in out.items()
           if k not in ("rate", "e_x", "e_z")}
    return KeyRatePoint(0.5 * (mu_a + mu_b), r, r * params.rep_rate, float(out["e_x"][0]),
                        float(out["e_z"][0]), aux)
