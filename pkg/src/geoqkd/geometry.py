"""Link geometry and fixed-loss budget for the ground-station to GEO uplink."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .errors import NearFieldWarning, ParameterError

EARTH_RADIUS_M = 6371e3
GEO_ALTITUDE_M = 35786e3


def db_to_eff(db: float) -> float:
    """Attenuation in dB to linear efficiency."""
    return 10.0 ** (-db / 10.0)


def eff_to_db(eff: float) -> float:
    """Linear efficiency to attenuation in dB (positive for losses)."""
    if eff <= 0:
        raise ParameterError(f"efficiency must be > 0, got {eff}")
    return -10.0 * math.log10(eff)


@dataclass(frozen=True)
class LinkGeometry:
    """Static OGS to satellite link. All angles in radians, lengths in metres."""

    ogs_aperture_diameter: float = 1.0
    sat_aperture_diameter: float = 0.5
    wavelength: float = 1550e-9
    elevation: float = math.radians(30.0)
    sat_altitude: float = GEO_ALTITUDE_M
    earth_radius: float = EARTH_RADIUS_M
    point_ahead_angle: float = 18.5e-6
    ogs_misalignment: float = 0.2e-6
    jitter_angle: float = 0.07e-6

    def __post_init__(self):
        for name in ("ogs_aperture_diameter", "sat_aperture_diameter", "wavelength",
                     "sat_altitude", "earth_radius"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be > 0, got {getattr(self, name)}")
        if not 0 < self.elevation <= math.pi / 2 + 1e-15:
            raise ParameterError(f"elevation must lie in (0, pi/2], got {self.elevation}")
        for name in ("point_ahead_angle", "ogs_misalignment", "jitter_angle"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be >= 0")

    @property
    def slant_range(self) -> float:
        return slant_range(self)

    def with_diameter(self, d: float) -> "LinkGeometry":
        from dataclasses import replace

        return replace(self, ogs_aperture_diameter=d)


def slant_range(geometry: LinkGeometry) -> float:
    """Line-of-sight distance from the ground station to the satellite (spherical Earth)."""
    re, h, el = geometry.earth_radius, geometry.sat_altitude, geometry.elevation
    return math.sqrt((re + h) ** 2 - (re * math.cos(el)) ** 2) - re * math.sin(el)


def geometric_loss(geometry: LinkGeometry) -> float:
    """Far-field beam-divergence efficiency ``(pi D_ogs D_sat / (4 lambda L))**2``.

    Values above one mean the far-field approximation is being misused; the
    result is clamped to 1 and a :class:`NearFieldWarning` is emitted.
    """
    L = slant_range(geometry)
    eff = (math.pi * geometry.ogs_aperture_diameter * geometry.sat_aperture_diameter
           / (4.0 * geometry.wavelength * L)) ** 2
    if eff > 1.0:
        warnings.warn(f"geometric efficiency {eff:.3g} > 1 (near field); clamped to 1",
                      NearFieldWarning, stacklevel=2)
        eff = 1.0
    return eff


@dataclass(frozen=True)
class FixedLossBudget:
    geometric: float
    system: float
    absorption: float

    def __post_init__(self):
        for name in ("geometric", "system", "absorption"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ParameterError(f"{name} efficiency must lie in (0, 1], got {v}")

    @property
    def efficiency(self) -> float:
        return self.geometric * self.system * self.absorption

    @property
    def total_db(self) -> float:
        return eff_to_db(self.geometric) + eff_to_db(self.system) + eff_to_db(self.absorption)


def fixed_loss_budget(geometry: LinkGeometry, system_loss_db: float = 2.8,
                      absorption_loss_db: float = 0.5) -> FixedLossBudget:
    if system_loss_db < 0 or absorption_loss_db < 0:
        raise ParameterError("loss values in dB must be >= 0")
    return FixedLossBudget(geometric=geometric_loss(geometry),
                           system=db_to_eff(system_loss_db),
                           absorption=db_to_eff(absorption_loss_db))
