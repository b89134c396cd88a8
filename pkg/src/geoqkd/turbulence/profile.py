"""Layered Cn2 profiles and their integrated turbulence parameters.

Layers are slabs in altitude above the ground station. Every path integral
maps altitude ``h`` to distance along the slanted line of sight,
``z = h / sin(elevation)``, and treats Cn2 as constant inside each slab.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import optimize, special

from ..errors import NumericError, ParameterError

# Kolmogorov constants (plane wave)
FRIED_COEF = 0.423
ISOPLANATIC_COEF = 2.914
LOG_AMPLITUDE_COEF = 0.5631
APERTURE_AVG_COEF = 5.20

_SLAB_POINTS = 4097
_SLAB_GL_NODES = 8


@dataclass(frozen=True)
class TurbulenceProfile:
    altitude: np.ndarray  # slab centres above ground (m)
    cn2: np.ndarray  # m^(-2/3)
    thickness: np.ndarray  # slab extent in altitude (m)
    wavelength: float = 1550e-9
    elevation: float = math.radians(30.0)

    def __post_init__(self):
        h = np.atleast_1d(np.asarray(self.altitude, dtype=float))
        c = np.atleast_1d(np.asarray(self.cn2, dtype=float))
        t = np.atleast_1d(np.asarray(self.thickness, dtype=float))
        if h.size == 0:
            raise ParameterError("profile needs at least one layer")
        if not (h.shape == c.shape == t.shape):
            raise ParameterError("altitude, cn2 and thickness must have equal length")
        if np.any(np.diff(h) <= 0):
            raise ParameterError("layer altitudes must be strictly increasing")
        if np.any(c < 0) or np.any(t <= 0) or np.any(h < 0):
            raise ParameterError("need cn2 >= 0, thickness > 0, altitude >= 0")
        if not 0 < self.elevation <= math.pi / 2 + 1e-15:
            raise ParameterError("elevation must lie in (0, pi/2]")
        if not self.wavelength > 0:
            raise ParameterError("wavelength must be > 0")
        for name, v in (("altitude", h), ("cn2", c), ("thickness", t)):
            object.__setattr__(self, name, v)

    @property
    def k0(self) -> float:
        return 2 * math.pi / self.wavelength

    @property
    def airmass(self) -> float:
        return 1.0 / math.sin(self.elevation)

    @property
    def path_distance(self) -> np.ndarray:
        """Slab-centre distances along the line of sight (m)."""
        return self.altitude * self.airmass

    @property
    def path_weight(self) -> np.ndarray:
        """``Cn2 * dz`` per slab along the path (m^(1/3))."""
        return self.cn2 * self.thickness * self.airmass

    def slab_edges(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.maximum(self.altitude - self.thickness / 2, 0.0) * self.airmass
        hi = (self.altitude + self.thickness / 2) * self.airmass
        return lo, hi

    def scaled(self, factor: float) -> "TurbulenceProfile":
        return replace(self, cn2=self.cn2 * factor)

    def layer_r0(self) -> np.ndarray:
        """Fried parameter of each slab taken alone (inf for empty slabs)."""
        w = FRIED_COEF * self.k0**2 * self.path_weight
        with np.errstate(divide="ignore"):
            return np.where(w > 0, w ** (-3 / 5), np.inf)

    # CSV ---------------------------------------------------------------------
    def to_csv(self, path, header_lines=()):
        with open(path, "w", newline="") as f:
            for line in header_lines:
                f.write(f"# {line}\n")
            w = csv.writer(f)
            w.writerow(["z_m", "cn2", "thickness_m"])
            for row in zip(self.altitude, self.cn2, self.thickness):
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path, wavelength=1550e-9, elevation=math.radians(30.0)):
        path = Path(path)
        rows = [ln for ln in path.read_text().splitlines() if ln.strip() and not ln.startswith("#")]
        reader = csv.DictReader(rows)
        if reader.fieldnames is None or set(reader.fieldnames) != {"z_m", "cn2", "thickness_m"}:
            raise ParameterError(f"{path}: expected header z_m,cn2,thickness_m")
        data = [(float(r["z_m"]), float(r["cn2"]), float(r["thickness_m"])) for r in reader]
        if not data:
            raise ParameterError(f"{path}: no layers")
        h, c, t = map(np.array, zip(*data))
        return cls(h, c, t, wavelength, elevation)


def path_integral(profile: TurbulenceProfile, fn, points: int = _SLAB_POINTS) -> float:
    """Trapezoid-rule value of ``int Cn2(z) fn(z) dz`` along the slanted path."""
    lo, hi = profile.slab_edges()
    s = np.linspace(0.0, 1.0, points)
    z = lo[:, None] + (hi - lo)[:, None] * s[None, :]
    # cn2 is per unit altitude-thickness; clipping at the ground keeps the slab's path length
    vals = np.trapezoid(fn(z), z, axis=1)
    return float(np.dot(profile.cn2, vals))


def fried_parameter(profile: TurbulenceProfile) -> float:
    integral = path_integral(profile, np.ones_like)
    if integral <= 0:
        return math.inf
    return (FRIED_COEF * profile.k0**2 * integral) ** (-3 / 5)


def isoplanatic_angle(profile: TurbulenceProfile) -> float:
    integral = path_integral(profile, lambda z: z ** (5 / 3))
    if integral <= 0:
        return math.inf
    return (ISOPLANATIC_COEF * profile.k0**2 * integral) ** (-3 / 5)


def log_amplitude_variance(profile: TurbulenceProfile) -> float:
    """Point log-amplitude (Rytov) variance of the downlink plane wave at the station."""
    return LOG_AMPLITUDE_COEF * profile.k0 ** (7 / 6) * path_integral(profile, lambda z: z ** (5 / 6))


def _bessel_kernel_grid(kmax=120.0, n=24001):
    # log-spaced Simpson nodes in k; the integrand is ~k^(4/3) near 0 and ~k^(-17/3) in the tail
    u = np.linspace(math.log(1e-4), math.log(kmax), n)
    k = np.exp(u)
    w = np.full(n, 2.0)
    w[1:-1:2] = 4.0
    w[0] = w[-1] = 1.0
    w *= (u[1] - u[0]) / 3.0 * k  # dk = k du
    return k, w * k ** (-14 / 3) * special.j1(k) ** 2


def aperture_averaged_variance(profile: TurbulenceProfile, aperture_radius: float) -> float:
    """Variance of the aperture-averaged log-amplitude for a telescope of radius ``R``.

    Inner wavenumber integral on a fixed log-spaced Simpson grid, slab integral
    with Gauss-Legendre nodes.
    """
    if not aperture_radius > 0:
        raise ParameterError("aperture_radius must be > 0")
    if not np.any(profile.cn2 > 0):
        return 0.0
    R = aperture_radius
    k0 = profile.k0
    k, wk = _bessel_kernel_grid()
    xg, wg = np.polynomial.legendre.leggauss(_SLAB_GL_NODES)
    lo, hi = profile.slab_edges()
    total = 0.0
    for c, a, b in zip(profile.cn2, lo, hi):
        if c == 0:
            continue
        z = 0.5 * (a + b) + 0.5 * (b - a) * xg
        arg = z[:, None] * k[None, :] ** 2 / (2 * k0 * R**2)
        inner = np.sin(arg) ** 2 @ wk
        total += c * 0.5 * (b - a) * float(np.dot(wg, inner))
    value = APERTURE_AVG_COEF * R ** (5 / 3) * k0**2 * total
    if not np.isfinite(value):
        raise NumericError("aperture-averaged variance did not evaluate to a finite number")
    return value


def summary(profile: TurbulenceProfile) -> dict:
    return {"r0_m": fried_parameter(profile), "theta0_rad": isoplanatic_angle(profile),
            "sigma_chi2": log_amplitude_variance(profile)}


# ---------------------------------------------------------------------------
# Synthetic default profile

def _default_edges(top=25e3):
    fine = np.arange(0.0, 100.0 + 1e-9, 10.0)
    mid = np.geomspace(150.0, 8000.0, 12)
    upper = np.arange(9000.0, top + 1e-9, 1000.0)
    return np.concatenate([fine, mid, upper])


def synthetic_profile(r0: float = 0.25, theta0: float = 8.51e-6, sigma_chi2: float = 0.03,
                      wavelength: float = 1550e-9, elevation: float = math.radians(30.0),
                      ground_scale: float = 25.0, high_width: float = 1500.0,
                      edges=None) -> TurbulenceProfile:
    """Two-component layered profile matched to ``(r0, theta0, sigma_chi2)``.

    A surface layer ``exp(-h/ground_scale)`` and a Gaussian high-altitude layer of
    width ``high_width``. Their two strengths and the high-layer altitude are
    solved so the three integrated parameters are reproduced exactly on the
    slab discretization.
    """
    edges = _default_edges() if edges is None else np.asarray(edges, dtype=float)
    centre = 0.5 * (edges[1:] + edges[:-1])
    thick = np.diff(edges)
    k0 = 2 * math.pi / wavelength

    def build(weights, alt):
        g, c = weights
        prof = g * np.exp(-centre / ground_scale) + c * np.exp(-0.5 * ((centre - alt) / high_width) ** 2)
        return TurbulenceProfile(centre, prof, thick, wavelength, elevation)

    t0 = FRIED_COEF * k0**2
    targets = np.array([r0 ** (-5 / 3) / t0,
                        theta0 ** (-5 / 3) / (ISOPLANATIC_COEF * k0**2),
                        sigma_chi2 / (LOG_AMPLITUDE_COEF * k0 ** (7 / 6))])
    moments = (np.ones_like, lambda z: z ** (5 / 3), lambda z: z ** (5 / 6))

    def solve_weights(alt):
        cols = []
        for w in ((1.0, 0.0), (0.0, 1.0)):
            p = build(w, alt)
            cols.append([path_integral(p, m) for m in moments])
        A = np.array(cols).T
        sol = np.linalg.solve(A[:2], targets[:2])
        return sol, A[2] @ sol - targets[2]

    def resid(alt):
        return solve_weights(alt)[1] / targets[2]

    lo_alt, hi_alt = 3000.0, edges[-1] - 2 * high_width
    try:
        alt = optimize.brentq(resid, lo_alt, hi_alt, xtol=1e-3)
    except ValueError as exc:
        raise ParameterError("no two-layer profile matches the requested parameters") from exc
    weights, _ = solve_weights(alt)
    if np.any(weights < 0):
        raise ParameterError(f"calibration needs a negative layer strength: {weights}")
    return build(weights, alt)
