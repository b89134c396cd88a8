"""Monte Carlo samples of the turbulence coupling efficiency ``eta_turb = rho_phi * rho_chi``.

Samples are drawn in fixed blocks; block ``b`` of stream ``s`` uses the
generator seeded by ``SeedSequence([seed, s, b])``, so results do not depend
on how blocks are scheduled across threads.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..channel import DiscreteDistribution
from ..errors import NumericError, ParameterError
from ..geometry import LinkGeometry
from .covariance import (MMSEConfig, ResidualPhaseModel, noll_covariance, psd_repair,
                         residual_covariance_mmse, residual_covariance_soa,
                         zernike_angular_covariance)
from .profile import TurbulenceProfile, aperture_averaged_variance, fried_parameter, log_amplitude_variance
from .zernike import ZernikeBasis, modes_through_order, representation_order, super_fitting_variance

BLOCK = 1000
STREAM_PHASE = 1
STREAM_CHI = 2
DEFAULT_WAIST_RATIO = 1 / 2.2

# corrected modes (piston included in the count) per aperture diameter in cm
AO_MODES = {20: 45, 40: 91, 60: 136, 80: 190, 100: 231}


def default_ao_modes(diameter: float) -> int:
    key = int(round(diameter * 100))
    if key not in AO_MODES:
        raise ParameterError(f"no default AO mode count for D={diameter} m; pass ao_modes")
    return AO_MODES[key]


def misalignment_tip(geometry: LinkGeometry) -> float:
    """Zernike tip coefficient (rad) of a static pointing offset."""
    return math.pi * geometry.ogs_aperture_diameter * geometry.ogs_misalignment / (2 * geometry.wavelength)


def _block_rng(seed: int, stream: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, stream, block]))


def _run_blocks(fn, n: int, threads: int = 1) -> np.ndarray:
    sizes = [min(BLOCK, n - s) for s in range(0, n, BLOCK)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(fn, range(len(sizes)), sizes))
    else:
        parts = [fn(b, k) for b, k in enumerate(sizes)]
    return np.concatenate(parts)


# ---------------------------------------------------------------------------

def sample_rho_chi(sigma_chi2: float, sigma_chi_ap2: float, n: int, seed: int,
                   threads: int = 1) -> np.ndarray:
    """``rho_chi = exp(-sigma_chi2) exp(-2 chi)``, ``chi ~ N(-sigma_chi_ap2, sigma_chi_ap2)``."""
    if sigma_chi2 < 0 or sigma_chi_ap2 < 0:
        raise ParameterError("variances must be >= 0")
    if n < 1:
        raise ParameterError("n must be >= 1")
    sd = math.sqrt(sigma_chi_ap2)

    def block(b, k):
        chi = -sigma_chi_ap2 + sd * _block_rng(seed, STREAM_CHI, b).standard_normal(k)
        return np.exp(-sigma_chi2 - 2 * chi)

    return _run_blocks(block, n, threads)


@dataclass(frozen=True)
class PhaseCovariances:
    """Turbulent-phase covariances shared by both correction schemes."""
    gamma0: np.ndarray  # modes 2..N_max
    gamma_alpha: np.ndarray  # modes 2..N_AO, at the point-ahead angle
    basis: ZernikeBasis
    d_over_r0: float


def phase_covariances(profile: TurbulenceProfile, geometry: LinkGeometry, ao_modes: int,
                      max_noll_index: int | None = None) -> PhaseCovariances:
    """``ao_modes`` counts Noll modes 1..N_AO; modes above it stay uncorrected up to
    ``max_noll_index`` (chosen from the super-fitting threshold when omitted)."""
    D = geometry.ogs_aperture_diameter
    d_r0 = D / fried_parameter(profile)
    if max_noll_index is None:
        max_noll_index = modes_through_order(representation_order(d_r0))
    if not 2 <= ao_modes <= max_noll_index:
        raise ParameterError("need 2 <= ao_modes <= max_noll_index")
    basis = ZernikeBasis(max_noll_index, D)
    g0 = noll_covariance(max_noll_index, d_r0)
    ga = zernike_angular_covariance(profile, basis, geometry.point_ahead_angle, max_noll_index=ao_modes)
    return PhaseCovariances(g0, ga, basis, d_r0)


def build_residual_model(profile: TurbulenceProfile, geometry: LinkGeometry, ao_modes: int,
                         correction: str = "MMSE", max_noll_index: int | None = None,
                         mmse: MMSEConfig = MMSEConfig(),
                         covariances: PhaseCovariances | None = None
                         ) -> tuple[ResidualPhaseModel, ZernikeBasis]:
    """Residual phase statistics after AO correction at the point-ahead angle."""
    cv = covariances or phase_covariances(profile, geometry, ao_modes, max_noll_index)
    g0, ga, basis, d_r0 = cv.gamma0, cv.gamma_alpha, cv.basis, cv.d_over_r0
    max_noll_index = basis.max_noll_index
    k = ao_modes - 1  # rows for modes 2..N_AO
    if ga.shape[0] != k:
        raise ParameterError("covariances were built for a different ao_modes")
    g0c = g0[:k, :k]
    if correction == "SoA":
        res = residual_covariance_soa(g0c, ga)
    elif correction == "MMSE":
        _, res = residual_covariance_mmse(g0c, ga, mmse)
    else:
        raise ParameterError("correction must be 'SoA' or 'MMSE'")
    n_max = int(math.isqrt(8 * max_noll_index - 7) - 1) // 2
    model = ResidualPhaseModel(res, psd_repair(g0[k:, k:]), correction,
                               super_fitting_variance(n_max, d_r0), misalignment_tip(geometry))
    return model, basis


def sample_coupling(model: ResidualPhaseModel, basis: ZernikeBasis, waist_ratio: float = DEFAULT_WAIST_RATIO,
                    n: int = 10_000, seed: int = 0, threads: int = 1) -> np.ndarray:
    """Samples of the single-mode coupling ``rho_phi`` relative to a flat wavefront."""
    if not waist_ratio > 0:
        raise ParameterError("waist_ratio must be > 0")
    nc = model.n_corrected
    nu = model.uncorrected_block.shape[0]
    if nc + nu != basis.n_modes:
        raise ParameterError("model and basis disagree on the number of modes")
    cov = np.zeros((basis.n_modes, basis.n_modes))
    cov[:nc, :nc] = model.corrected_block
    cov[nc:, nc:] = model.uncorrected_block
    w, v = np.linalg.eigh(cov)
    if w.min() < -1e-10 * max(w.max(), 1e-300):
        raise NumericError("residual covariance is not positive semi-definite")
    keep = w > 1e-14 * max(w.max(), 1e-300)
    sqrt_t = (v[:, keep] * np.sqrt(w[keep])).T.astype(np.float32)  # (rank, modes)
    r, _ = basis.pupil
    # gaussian mode amplitude, truncated by the aperture mask
    pupil_w = np.exp(-(r * basis.aperture_diameter / 2) ** 2 / (waist_ratio * basis.aperture_diameter) ** 2)
    norm = pupil_w.sum() ** 2
    pw = pupil_w.astype(np.float32)
    Z = basis.modes(np.float32)
    tip = model.misalignment_tip * Z[0]
    atten = math.exp(-model.super_fitting_variance)
    rank = sqrt_t.shape[0]

    def block(b, k):
        xi = _block_rng(seed, STREAM_PHASE, b).standard_normal((k, rank), dtype=np.float32)
        phase = (xi @ sqrt_t) @ Z + tip
        re = np.cos(phase) @ pw
        im = np.sin(phase) @ pw
        rho = (re.astype(np.float64) ** 2 + im.astype(np.float64) ** 2) / norm
        return atten * np.clip(rho, 0.0, 1.0)

    return _run_blocks(block, n, threads)


@dataclass(frozen=True)
class CouplingSampleSet:
    rho_phi: np.ndarray
    rho_chi: np.ndarray
    seed: int
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.rho_phi.shape != self.rho_chi.shape:
            raise ParameterError("rho_phi and rho_chi must have the same length")

    @property
    def eta_turb(self) -> np.ndarray:
        return self.rho_phi * self.rho_chi

    @property
    def sample_count(self) -> int:
        return self.rho_phi.size

    def summary(self) -> dict:
        e = self.eta_turb
        return {"mean": float(e.mean()), "std": float(e.std(ddof=1)) if e.size > 1 else 0.0,
                "mean_rho_phi": float(self.rho_phi.mean()), "mean_rho_chi": float(self.rho_chi.mean())}

    def to_csv(self, path, header_lines=()):
        with open(path, "w", newline="") as f:
            for line in header_lines:
                f.write(f"# {line}\n")
            w = csv.writer(f)
            w.writerow(["sample_index", "rho_phi", "rho_chi", "eta_turb"])
            for i, (a, b, c) in enumerate(zip(self.rho_phi, self.rho_chi, self.eta_turb)):
                w.writerow([i, f"{a:.9e}", f"{b:.9e}", f"{c:.9e}"])


def turbulence_distribution(profile: TurbulenceProfile, geometry: LinkGeometry, ao_modes: int | None = None,
                            correction: str = "MMSE", n: int = 10_000, seed: int = 0,
                            waist_ratio: float = DEFAULT_WAIST_RATIO, max_noll_index: int | None = None,
                            mmse: MMSEConfig = MMSEConfig(), threads: int = 1,
                            covariances: PhaseCovariances | None = None) -> tuple[CouplingSampleSet, DiscreteDistribution]:
    D = geometry.ogs_aperture_diameter
    if ao_modes is None:
        ao_modes = default_ao_modes(D)
    sigma_chi2 = log_amplitude_variance(profile)
    sigma_ap = aperture_averaged_variance(profile, D / 2)
    if mmse.log_amplitude_channel and mmse.log_amplitude_variance == 0.0:
        mmse = MMSEConfig(mmse.regularization, True, sigma_ap)
    model, basis = build_residual_model(profile, geometry, ao_modes, correction, max_noll_index, mmse,
                                        covariances)
    rho_phi = sample_coupling(model, basis, waist_ratio, n, seed, threads)
    rho_chi = sample_rho_chi(sigma_chi2, sigma_ap, n, seed, threads)
    meta = {"component": "turbulence", "correction": correction, "ao_modes": ao_modes,
            "max_noll_index": basis.max_noll_index, "fitting_variance": model.fitting_variance,
            "corrected_variance": model.corrected_variance,
            "super_fitting_variance": model.super_fitting_variance,
            "sigma_chi2": sigma_chi2, "sigma_chi_ap2": sigma_ap}
    samples = CouplingSampleSet(rho_phi, rho_chi, seed, meta)
    return samples, DiscreteDistribution.from_eta_samples(samples.eta_turb, meta=meta)
