"""Asymmetric mode-pairing QKD in the infinite-decoy limit.

Each round Alice and Bob independently send a phase-randomized coherent
pulse of intensity ``mu`` or vacuum, each with probability 1/2. Charlie's
balanced beamsplitter feeds two threshold detectors and a round succeeds
when exactly one of them fires. Successful rounds are paired a posteriori
with a spacing in ``[l_min, l_max]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from ..errors import ParameterError
from .common import (F_EC, REP_RATE_HZ, DetectorParams, KeyRatePoint, binary_entropy,
                     check_compensation)

E0 = 0.5  # error rate of vacuum-triggered pairs
_ED_CHUNK = 1 << 16
_ED_TABLE_POINTS = 121


@dataclass(frozen=True)
class MPParams:
    mu_grid: tuple = tuple(np.round(np.linspace(0.05, 1.0, 39), 4))
    l_min: int = 100
    l_max: int = 184_206
    rep_rate: float = REP_RATE_HZ
    sigma_fs: float = 150.0  # rad/s, free-space phase drift
    sigma_nu: float = 1e3  # Hz, laser linewidth
    delta_nu: float = 100.0  # Hz, frequency offset
    f_ec: float = F_EC
    compensation: str = "NonCompensated"
    e_misalign_z: float = 1e-3  # residual distinguishability in the Z basis

    def __post_init__(self):
        mu = np.asarray(self.mu_grid, dtype=float)
        if mu.size == 0 or np.any(mu <= 0) or np.any(np.diff(mu) <= 0):
            raise ParameterError("mu_grid must be positive and ascending")
        if not 1 <= self.l_min < self.l_max:
            raise ParameterError("need 1 <= l_min < l_max")
        if not self.rep_rate > 0:
            raise ParameterError("rep_rate must be > 0")
        if min(self.sigma_fs, self.sigma_nu) < 0:
            raise ParameterError("phase-noise parameters must be >= 0")
        if self.f_ec < 1:
            raise ParameterError("f_ec must be >= 1")
        if not 0 <= self.e_misalign_z <= 0.5:
            raise ParameterError("e_misalign_z must lie in [0, 0.5]")
        check_compensation(self.compensation)

    @property
    def sigma_tot2(self) -> float:
        return self.sigma_fs**2 + 8 * math.pi**2 * self.sigma_nu**2


# ---------------------------------------------------------------------------
# detection

def mp_round_click_probs(mu, eta_a, eta_b, pd: float) -> dict:
    """Success probability for each intensity pattern ``z = (z_a, z_b)``.

    ``eta_*`` include the detector efficiency. For ``11`` the relative phase
    is uniform, so the two detectors see ``gbar +- sqrt(ga gb) cos(theta)``.
    """
    ga = mu * np.asarray(eta_a, dtype=float)
    gb = mu * np.asarray(eta_b, dtype=float)
    q = 1.0 - pd
    gbar = 0.5 * (ga + gb)
    # differences of near-one terms are written with expm1 to keep tiny signals accurate
    i0m1 = special.i0(np.sqrt(ga * gb)) - 1.0
    p11 = 2 * q * np.exp(-gbar) * (i0m1 - np.expm1(-gbar) + pd * np.exp(-gbar))
    p10 = 2 * q * np.exp(-ga / 2) * (-np.expm1(-ga / 2) + pd * np.exp(-ga / 2))
    p01 = 2 * q * np.exp(-gb / 2) * (-np.expm1(-gb / 2) + pd * np.exp(-gb / 2))
    p00 = np.full_like(ga, 2 * pd * q)
    return {"00": p00, "10": p10, "01": p01, "11": np.clip(p11, 0.0, 1.0)}


def mp_click_prob(mu, eta_a, eta_b, det: DetectorParams):
    """Per-round success probability ``p`` (``eta_*`` exclude the detector efficiency)."""
    pr = mp_round_click_probs(mu, np.asarray(eta_a) * det.efficiency, np.asarray(eta_b) * det.efficiency,
                              det.dark_prob)
    return 0.25 * (pr["00"] + pr["10"] + pr["01"] + pr["11"])


def _fock_click_probs(eta_a, eta_b, pd: float) -> dict:
    """Success probability for photon numbers ``n = (n_a, n_b)`` in {0, 1}.

    Two arriving photons bunch at the beamsplitter, so they fire one detector.
    """
    q = 1.0 - pd
    ea, eb = np.asarray(eta_a, dtype=float), np.asarray(eta_b, dtype=float)
    dark = 2 * pd * q
    return {"00": np.full_like(ea, dark),
            "10": q * (ea + dark * (1 - ea)),
            "01": q * (eb + dark * (1 - eb)),
            "11": q * (ea + eb - ea * eb) + dark * (1 - ea) * (1 - eb)}


_Z_PAIRS = (("00", "11"), ("11", "00"), ("10", "01"), ("01", "10"))


def pairing_sums(pr: dict) -> np.ndarray:
    return sum(pr[a] * pr[b] for a, b in _Z_PAIRS)


def mp_pairing_rate(p, l_min: int, l_max: int):
    """Pairs formed per round when successes are matched within ``[l_min, l_max]``."""
    if not 1 <= l_min < l_max:
        raise ParameterError("need 1 <= l_min < l_max")
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ParameterError("p must lie in [0, 1]")

    def surv(k):
        # (1-p)^k, accurate for tiny p and exact at p = 1
        with np.errstate(divide="ignore"):
            return np.where(p < 1, np.exp(k * np.log1p(-np.where(p < 1, p, 0.0))), 0.0 ** k)

    window = surv(l_min - 1) - surv(l_max)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = 1.0 / (1.0 / (p * window) + 1.0 / p)
    r = np.where((p > 0) & (window > 0), r, 0.0)
    return float(r) if r.ndim == 0 else r


# ---------------------------------------------------------------------------
# phase drift

def e_ph(L, params: MPParams):
    """X-basis phase error of one pair spaced ``L`` rounds apart."""
    dt = np.asarray(L, dtype=float) / params.rep_rate
    return 0.5 - 0.5 * np.exp(-params.sigma_tot2 * dt**2 / 2) * np.cos(2 * math.pi * params.delta_nu * dt)


def phase_misalignment_curve(p_values, params: MPParams, l_max_values) -> np.ndarray:
    """``e_d`` for each (p, l_max): mean of ``e_ph`` over the pair-spacing law on ``[l_min, l_max]``.

    The geometric weights ``p (1-p)^(n-1)`` are renormalized over the range,
    so ``e_d`` is a proper weighted average. Returns shape ``(len(p), len(l_max))``.
    """
    p = np.atleast_1d(np.asarray(p_values, dtype=float))
    lm = np.atleast_1d(np.asarray(l_max_values, dtype=np.int64))
    if np.any((p <= 0) | (p >= 1)):
        raise ParameterError("p must lie in (0, 1)")
    if np.any(lm <= params.l_min) or np.any(np.diff(lm) < 0):
        raise ParameterError("l_max values must exceed l_min and be ascending")
    if params.sigma_tot2 == 0 and params.delta_nu == 0:
        # no phase drift: e_ph vanishes for every spacing
        return np.zeros((p.size, lm.size))
    lq = np.log1p(-p)[:, None]
    num = np.zeros((p.size, lm.size))
    den = np.zeros((p.size, lm.size))
    acc_n = np.zeros(p.size)
    acc_d = np.zeros(p.size)
    start, col = params.l_min, 0
    top = int(lm[-1])
    while start <= top and col < lm.size:
        stop = min(start + _ED_CHUNK, int(lm[col]) + 1)
        n = np.arange(start, stop)
        # weights relative to n = l_min keep the sums finite for tiny or large p
        w = np.exp((n - params.l_min)[None, :] * lq)
        acc_n += w @ e_ph(n, params)
        acc_d += w.sum(axis=1)
        start = stop
        while col < lm.size and start > lm[col]:
            num[:, col], den[:, col] = acc_n, acc_d
            col += 1
    return np.clip(num / den, 0.0, 0.5)


def mp_phase_misalignment(p, params: MPParams):
    """Misalignment error ``e_d`` for click probability ``p`` at ``params.l_max``."""
    out = phase_misalignment_curve(p, params, [params.l_max])[:, 0]
    return float(out[0]) if np.ndim(p) == 0 else out


@dataclass(frozen=True)
class PhaseMisalignmentTable:
    """``e_d`` tabulated against ``log10 p`` for fast lookup over many channel states."""
    log_p: np.ndarray
    e_d: np.ndarray

    @classmethod
    def build(cls, params: MPParams, p_lo: float = 1e-12, p_hi: float = 0.5,
              points: int = _ED_TABLE_POINTS) -> "PhaseMisalignmentTable":
        lp = np.linspace(math.log10(p_lo), math.log10(p_hi), points)
        return cls(lp, mp_phase_misalignment(10.0**lp, params))

    @classmethod
    def build_many(cls, params: MPParams, l_max_values, p_lo: float = 1e-12, p_hi: float = 0.5,
                   points: int = _ED_TABLE_POINTS) -> list["PhaseMisalignmentTable"]:
        """One table per ``l_max`` from a single cumulative pass."""
        lp = np.linspace(math.log10(p_lo), math.log10(p_hi), points)
        curve = phase_misalignment_curve(10.0**lp, params, l_max_values)
        return [cls(lp, curve[:, k]) for k in range(curve.shape[1])]

    def __call__(self, p):
        lp = np.log10(np.clip(np.asarray(p, dtype=float), 10.0 ** self.log_p[0], 10.0 ** self.log_p[-1]))
        return np.interp(lp, self.log_p, self.e_d)


# ---------------------------------------------------------------------------
# key rate

def mp_arrays(mu: float, eta_a, eta_b, det: DetectorParams, params: MPParams,
              ed_table: PhaseMisalignmentTable | None = None) -> dict:
    """Vectorized evaluation over arrays of channel efficiencies (detector excluded)."""
    if mu <= 0:
        raise ParameterError("mu must be > 0")
    ea = np.atleast_1d(np.asarray(eta_a, dtype=float))
    eb = np.atleast_1d(np.asarray(eta_b, dtype=float))
    if np.any(ea < 0) or np.any(eb < 0) or np.any(ea > 1) or np.any(eb > 1):
        raise ParameterError("efficiencies must lie in [0, 1]")
    if params.compensation == "Compensated":
        ea = eb = np.minimum(ea, eb)
    pd = det.dark_prob
    ta, tb = ea * det.efficiency, eb * det.efficiency
    pr = mp_round_click_probs(mu, ta, tb, pd)
    p = 0.25 * (pr["00"] + pr["10"] + pr["01"] + pr["11"])
    pos = p > 0
    ps = np.where(pos, p, 1.0)
    r_p = np.where(pos, mp_pairing_rate(np.where(pos, p, 0.5), params.l_min, params.l_max), 0.0)
    zs = pairing_sums(pr)
    r_s = zs / (16 * ps**2)

    pf = _fock_click_probs(ta, tb, pd)
    p1 = mu * math.exp(-mu)
    with np.errstate(invalid="ignore", divide="ignore"):
        q11 = np.where(zs > 0, p1 * p1 * pairing_sums(pf) / zs, 0.0)

    if ed_table is not None:
        e_d = ed_table(np.where(pos, p, 1e-300))
    elif np.any(pos):
        e_d = np.full(p.shape, 0.5)
        e_d[pos] = mp_phase_misalignment(p[pos], params)
    else:
        e_d = np.full(p.shape, 0.5)
    y11 = (1 - pd) ** 2 * (ta * tb / 2 + (2 * ta + 2 * tb - 3 * ta * tb) * pd + 4 * (1 - ta) * (1 - tb) * pd**2)
    with np.errstate(invalid="ignore", divide="ignore"):
        e11 = np.where(y11 > 0, (E0 * y11 - (E0 - e_d) * (1 - pd**2) * ta * tb / 2) / y11, E0)
    e11 = np.clip(e11, 0.0, 0.5)

    # Z-basis errors: vacuum/vacuum rounds paired with both-send rounds click only through darks
    good = 2 * pr["10"] * pr["01"]
    bad = 2 * pr["00"] * pr["11"]
    with np.errstate(invalid="ignore", divide="ignore"):
        e_dark = np.where(good + bad > 0, bad / (good + bad), 0.5)
    ez = params.e_misalign_z
    e_z = np.clip(e_dark * (1 - ez) + (1 - e_dark) * ez, 0.0, 0.5)

    bracket = q11 * (1 - binary_entropy(e11)) - params.f_ec * binary_entropy(e_z)
    rate = np.maximum(r_p * r_s * bracket, 0.0)
    return {"rate": rate, "e_x": e11, "e_z": e_z, "gain": r_p * r_s, "p": p, "r_p": r_p, "r_s": r_s,
            "q11": q11, "y11": y11, "e11": e11, "e_d": e_d}


def mp_point(mu: float, eta_a: float, eta_b: float, det: DetectorParams,
             params: MPParams = MPParams()) -> KeyRatePoint:
    out = mp_arrays(mu, eta_a, eta_b, det, params)
    r = float(out["rate"][0])
    aux = {k: float(v[0]) for k, v in out.items() if k not in ("rate", "e_x", "e_z")}
    return KeyRatePoint(mu, r, r * params.rep_rate, float(out["e_x"][0]), float(out["e_z"][0]), aux)
