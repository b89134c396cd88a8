"""End-to-end channel assembly: turbulence and jitter fading plus the fixed budget."""
from __future__ import annotations

from dataclasses import dataclass, field

from .channel import DiscreteDistribution, product_convolve, shift_fixed, stats
from .geometry import LinkGeometry, fixed_loss_budget
from .jitter import jitter_distribution, jitter_model
from .turbulence.coupling import (DEFAULT_WAIST_RATIO, CouplingSampleSet, PhaseCovariances, default_ao_modes,
                                 turbulence_distribution)
from .turbulence.covariance import MMSEConfig
from .turbulence.profile import TurbulenceProfile, synthetic_profile


@dataclass(frozen=True)
class ChannelResult:
    pdte: DiscreteDistribution
    turbulence: DiscreteDistribution
    jitter: DiscreteDistribution
    fixed_db: float
    samples: CouplingSampleSet | None = None
    info: dict = field(default_factory=dict, compare=False)


def build_channel(geometry: LinkGeometry = LinkGeometry(), profile: TurbulenceProfile | None = None,
                  correction: str = "MMSE", ao_modes: int | None = None, n: int = 10_000, seed: int = 0,
                  system_loss_db: float = 2.8, absorption_loss_db: float = 0.5,
                  jitter_map: str = "NumericOverlap", waist_ratio: float = DEFAULT_WAIST_RATIO,
                  max_noll_index: int | None = None, mmse: MMSEConfig = MMSEConfig(), threads: int = 1,
                  covariances: PhaseCovariances | None = None, turbulence: bool = True,
                  jitter_n: int | None = None) -> ChannelResult:
    """PDTE of one OGS-to-satellite channel.

    With ``turbulence=False`` the AO coupling is taken as ideal (0 dB), which
    together with a zero jitter angle leaves a point mass at the fixed budget.
    """
    budget = fixed_loss_budget(geometry, system_loss_db, absorption_loss_db)
    info = {"fixed_db": budget.total_db}
    if turbulence:
        if ao_modes is None:
            ao_modes = default_ao_modes(geometry.ogs_aperture_diameter)
        samples, turb = turbulence_distribution(profile or synthetic_profile(), geometry, ao_modes, correction,
                                                n, seed, waist_ratio, max_noll_index, mmse, threads, covariances)
        info.update(samples.summary())
        info.update({k: v for k, v in samples.meta.items() if k != "component"})
    else:
        samples = None
        turb = DiscreteDistribution.point_mass(0.0, meta={"component": "turbulence"})
    jit = jitter_distribution(jitter_model(geometry, jitter_map, waist_ratio), jitter_n or n, seed)
    pdte = shift_fixed(product_convolve(turb, jit), budget)
    info.update({f"pdte_{k}": v for k, v in stats(pdte).items()})
    return ChannelResult(pdte, turb, jit, budget.total_db, samples, info)
