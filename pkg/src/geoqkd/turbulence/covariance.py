"""Kolmogorov covariances of Zernike coefficients and AO residual models.

Coefficients use unit-RMS Noll modes on a pupil of radius ``R``; the phase
power spectrum is ``W(f) = C_W r0^(-5/3) f^(-11/3)`` with ``f`` in cycles/m.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from ..errors import ModelError, NumericError, ParameterError
from .profile import FRIED_COEF, TurbulenceProfile
from .zernike import mode_table

KOLMOGOROV_PSD_COEF = (special.gamma(11 / 6) ** 2 / (2 * math.pi ** (11 / 3))
                       * (24 / 5 * special.gamma(6 / 5)) ** (5 / 6))
# prefactor of the closed-form Noll covariance in units of (D/r0)^(5/3)
NOLL_COEF = (8 * math.pi * KOLMOGOROV_PSD_COEF * math.pi ** (5 / 3)
             * special.gamma(14 / 3) * 2 ** (-14 / 3))

PSD_CLIP_TOL = 1e-6


def _noll_radial_integral(n1, n2):
    """Weber-Schafheitlin value of ``int u^(-14/3) J_{n1+1} J_{n2+1} du`` times ``2^(14/3)/Gamma(14/3)``."""
    g = special.gamma
    return (g((n1 + n2 - 5 / 3) / 2)
            / (g((n1 - n2 + 17 / 3) / 2) * g((n2 - n1 + 17 / 3) / 2) * g((n1 + n2 + 23 / 3) / 2)))


def noll_covariance(max_noll_index: int, d_over_r0: float, j_min: int = 2) -> np.ndarray:
    """Closed-form covariance of modes ``j_min..max_noll_index`` (rad^2)."""
    t = mode_table(max_noll_index, j_min)
    j, n, m = t[:, 0], t[:, 1].astype(float), t[:, 2]
    same_m = m[:, None] == m[None, :]
    parity = (m[:, None] == 0) | ((j[:, None] % 2) == (j[None, :] % 2))
    nn = n[:, None] + n[None, :]
    half = np.rint(nn - 2 * m[:, None]).astype(np.int64) // 2
    sign = np.where(half % 2 == 0, 1.0, -1.0)
    val = (NOLL_COEF * sign * np.sqrt((n[:, None] + 1) * (n[None, :] + 1))
           * _noll_radial_integral(n[:, None], n[None, :]) * d_over_r0 ** (5 / 3))
    return np.where(same_m & parity, val, 0.0)


def zernike_autocovariance(profile: TurbulenceProfile, basis) -> np.ndarray:
    from .profile import fried_parameter
    return noll_covariance(basis.max_noll_index, basis.aperture_diameter / fried_parameter(profile))


# ---------------------------------------------------------------------------
# angular covariance

U_HEAD = 1e-4


def _u_grid():
    # log Simpson on [U_HEAD, 1], uniform Simpson on [1, 150]; [0, U_HEAD] is added analytically
    def simpson(x):
        w = np.full(x.size, 2.0)
        w[1:-1:2] = 4.0
        w[0] = w[-1] = 1.0
        return w * (x[1] - x[0]) / 3.0

    s = np.linspace(math.log(U_HEAD), 0.0, 1001)
    u1 = np.exp(s)
    w1 = simpson(s) * u1
    u2 = np.linspace(1.0, 150.0, 3727)
    w2 = simpson(u2)
    return np.concatenate([u1, u2[1:]]), np.concatenate([w1[:-1], w1[-1:] + w2[:1], w2[1:]])


def _head(nmax, kmax, x):
    """Leading small-argument term of the radial integrand integrated over [0, U_HEAD]."""
    a = np.arange(1, nmax + 2, dtype=float)
    k = np.arange(kmax + 1, dtype=float)
    g = special.gamma
    p = a[:, None, None] + a[None, :, None] + k[None, None, :] - 11 / 3
    c = (0.5 ** (a[:, None, None] + a[None, :, None]) / (g(a + 1)[:, None, None] * g(a + 1)[None, :, None])
         * (0.5 * x) ** k[None, None, :] / g(k + 1)[None, None, :])
    return c * U_HEAD**p / p


def _exponent_terms(table):
    """Each unit-RMS mode's azimuthal factor as sum of ``c e^{i p phi}`` (two slots)."""
    N = table.shape[0]
    p = np.zeros((N, 2), dtype=np.int64)
    c = np.zeros((N, 2), dtype=complex)
    r2 = 1 / math.sqrt(2)
    for row, (_, n, m, kind) in enumerate(table):
        if kind == 0:
            p[row], c[row] = (0, 0), (1, 0)
        elif kind == 1:
            p[row], c[row] = (m, -m), (r2, r2)
        else:
            p[row], c[row] = (m, -m), (-1j * r2, 1j * r2)
    return p, c


def zernike_angular_covariance(profile: TurbulenceProfile, basis, separation: float,
                               max_noll_index: int | None = None) -> np.ndarray:
    """``G[i, j] = E[a_i(target) a_j(reference)]`` for a target direction offset by ``separation``.

    Each slab is treated as a thin layer at its centre distance ``z``; its
    phase screen is shifted by ``separation * z`` along x.
    """
    if separation < 0:
        raise ParameterError("separation must be >= 0")
    jmax = basis.max_noll_index if max_noll_index is None else max_noll_index
    R = basis.aperture_diameter / 2
    t = mode_table(jmax)
    n, m = t[:, 1], t[:, 2]
    P, C = _exponent_terms(t)
    nmax = int(n.max())
    kmax = 2 * int(m.max())
    u, w = _u_grid()
    jn = special.jv(np.arange(1, nmax + 2)[:, None], u[None, :])  # J_{n+1}
    base = jn[:, None, :] * jn[None, :, :] * (w * u ** (-14 / 3))  # (n1, n2, u)
    base2 = base.reshape(-1, u.size)
    weights = FRIED_COEF * profile.k0**2 * profile.path_weight  # layer r0^(-5/3)
    I = np.zeros((nmax + 1, nmax + 1, kmax + 1))
    ks = np.arange(kmax + 1)
    # slabs sharing a shift are merged, which also collapses all of them at separation 0
    shifts = separation * profile.path_distance / R
    for x in np.unique(shifts):
        wt = weights[shifts == x].sum()
        if wt == 0:
            continue
        jk = special.jv(ks[:, None], x * u[None, :])
        I += wt * ((base2 @ jk.T).reshape(I.shape) + _head(nmax, kmax, x))
    if not np.all(np.isfinite(I)):
        raise NumericError("angular covariance quadrature produced non-finite values")
    pref = KOLMOGOROV_PSD_COEF * (2 * math.pi) ** (5 / 3) * R ** (5 / 3) * 4 * 2 * math.pi
    ph = (1j) ** m * (-1.0) ** ((n - m) // 2)
    amp = np.sqrt(n + 1.0) * ph
    out = np.zeros((t.shape[0], t.shape[0]), dtype=complex)
    for a in range(2):
        for b in range(2):
            k = P[None, :, b] - P[:, None, a]
            ka = np.abs(k)
            sgn = np.where(k < 0, (-1.0) ** ka, 1.0)
            coef = np.conj(C[:, None, a]) * C[None, :, b] * (1j) ** k * sgn
            out += coef * I[n[:, None], n[None, :], ka]
    out *= pref * amp[:, None] * np.conj(amp)[None, :]
    if np.abs(out.imag).max() > 1e-9 * max(np.abs(out.real).max(), 1e-300):
        raise NumericError("angular covariance has a non-negligible imaginary part")
    return out.real


# ---------------------------------------------------------------------------
# residuals

def psd_repair(mat: np.ndarray, tol: float = PSD_CLIP_TOL) -> np.ndarray:
    """Symmetrize and clip small negative eigenvalues; large ones raise ModelError."""
    s = 0.5 * (mat + mat.T)
    if s.size == 0:
        return s
    w, v = np.linalg.eigh(s)
    top = max(w.max(), 0.0)
    if w.min() < -tol * top:
        raise ModelError(f"covariance is materially indefinite (min eig {w.min():.3e}, max {top:.3e})")
    return (v * np.clip(w, 0.0, None)) @ v.T


def residual_covariance_soa(gamma0: np.ndarray, gamma_alpha: np.ndarray) -> np.ndarray:
    if gamma0.shape != gamma_alpha.shape:
        raise ParameterError("matrices are not conformant")
    return psd_repair(2 * gamma0 - gamma_alpha - gamma_alpha.T)


@dataclass(frozen=True)
class MMSEConfig:
    regularization: float | None = None  # default 1e-8 * trace / N
    log_amplitude_channel: bool = False
    log_amplitude_variance: float = 0.0


def residual_covariance_mmse(gamma0: np.ndarray, gamma_alpha: np.ndarray,
                             config: MMSEConfig = MMSEConfig()) -> tuple[np.ndarray, np.ndarray]:
    """Reconstructor from on-axis measurements to the target phase, and the residual."""
    if gamma0.shape != gamma_alpha.shape:
        raise ParameterError("matrices are not conformant")
    N = gamma0.shape[0]
    cyy = 0.5 * (gamma0 + gamma0.T)
    cxy = gamma_alpha
    if config.log_amplitude_channel:
        # scalar amplitude measurement, uncorrelated with the phase under this model
        cyy = np.block([[cyy, np.zeros((N, 1))],
                        [np.zeros((1, N)), np.full((1, 1), config.log_amplitude_variance)]])
        cxy = np.hstack([cxy, np.zeros((N, 1))])
    if not np.any(cyy):
        # nothing to measure; cxy vanishes too by Cauchy-Schwarz
        return np.zeros_like(cxy), psd_repair(gamma0)
    lam = config.regularization
    if lam is None:
        lam = 1e-8 * np.trace(cyy) / cyy.shape[0]
    reg = cyy + lam * np.eye(cyy.shape[0])
    try:
        cho = np.linalg.cholesky(reg)
    except np.linalg.LinAlgError as exc:
        raise NumericError("measurement covariance is singular after regularization") from exc
    tmp = np.linalg.solve(cho, cxy.T)
    recon = np.linalg.solve(cho.T, tmp).T
    resid = gamma0 - recon @ cxy.T
    return recon, psd_repair(resid)


@dataclass(frozen=True)
class ResidualPhaseModel:
    corrected_block: np.ndarray  # modes 2..N_AO
    uncorrected_block: np.ndarray  # modes N_AO+1..N_max
    correction_kind: str
    super_fitting_variance: float
    misalignment_tip: float = 0.0

    def __post_init__(self):
        if self.correction_kind not in ("SoA", "MMSE"):
            raise ParameterError("correction_kind must be 'SoA' or 'MMSE'")
        for b in (self.corrected_block, self.uncorrected_block):
            if b.size and not np.allclose(b, b.T, atol=1e-12 * max(np.abs(b).max(), 1e-300)):
                raise ParameterError("covariance blocks must be symmetric")

    @property
    def n_corrected(self) -> int:
        return self.corrected_block.shape[0]

    @property
    def fitting_variance(self) -> float:
        return float(np.trace(self.uncorrected_block))

    @property
    def corrected_variance(self) -> float:
        return float(np.trace(self.corrected_block))
