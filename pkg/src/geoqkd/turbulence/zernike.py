"""Noll-ordered Zernike modes on a sampled circular pupil."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import special

from ..errors import ParameterError

SUPER_FITTING_COEF = 0.458


def noll_to_nm(j: int) -> tuple[int, int]:
    """Radial order and azimuthal frequency of Noll index ``j`` (piston is ``j = 1``)."""
    if j < 1:
        raise ParameterError("Noll indices start at 1")
    n = int((math.isqrt(8 * j - 7) - 1) // 2)
    p = j - n * (n + 1) // 2
    if n % 2 == 0:
        m = 2 * (p // 2)
    else:
        m = 2 * ((p - 1) // 2) + 1
    return n, m


def mode_table(j_max: int, j_min: int = 2) -> np.ndarray:
    """Rows of ``(j, n, m, kind)`` with kind 0 for m=0, 1 for cos (even j), -1 for sin (odd j)."""
    rows = []
    for j in range(j_min, j_max + 1):
        n, m = noll_to_nm(j)
        kind = 0 if m == 0 else (1 if j % 2 == 0 else -1)
        rows.append((j, n, m, kind))
    return np.array(rows, dtype=np.int64).reshape(-1, 4)


def modes_through_order(n: int) -> int:
    """Highest Noll index of radial order ``n``."""
    return (n + 1) * (n + 2) // 2


def super_fitting_variance(n_max: int, d_over_r0: float) -> float:
    """Phase variance left beyond radial order ``n_max``."""
    return SUPER_FITTING_COEF * (n_max + 1) ** (-5 / 3) * d_over_r0 ** (5 / 3)


def representation_order(d_over_r0: float, threshold: float = 0.005) -> int:
    """Smallest radial order whose super-fitting variance drops below ``threshold`` rad^2."""
    n = 1
    while super_fitting_variance(n, d_over_r0) >= threshold:
        n += 1
    return n


def radial(n: int, m: int, r: np.ndarray) -> np.ndarray:
    k = (n - m) // 2
    return (-1) ** k * r**m * special.eval_jacobi(k, m, 0, 1 - 2 * r**2)


def zernike(j: int, r: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Unit-RMS Zernike mode on the unit disk (no masking)."""
    n, m = noll_to_nm(j)
    if m == 0:
        return math.sqrt(n + 1) * radial(n, 0, r)
    ang = np.cos(m * theta) if j % 2 == 0 else np.sin(m * theta)
    return math.sqrt(2 * (n + 1)) * radial(n, m, r) * ang


@dataclass(frozen=True)
class ZernikeBasis:
    max_noll_index: int
    aperture_diameter: float
    grid_resolution: int = 128
    orthonormalize: bool = False

    def __post_init__(self):
        if self.max_noll_index < 2:
            raise ParameterError("max_noll_index must be >= 2 (piston is excluded)")
        if self.grid_resolution < 64:
            raise ParameterError("grid_resolution must be >= 64")
        if not self.aperture_diameter > 0:
            raise ParameterError("aperture_diameter must be > 0")

    @property
    def n_modes(self) -> int:
        return self.max_noll_index - 1

    @cached_property
    def table(self) -> np.ndarray:
        return mode_table(self.max_noll_index)

    @cached_property
    def pupil(self) -> tuple[np.ndarray, np.ndarray]:
        """Polar coordinates (unit radius) of pixel centres inside the pupil."""
        n = self.grid_resolution
        c = (np.arange(n) + 0.5 - n / 2) / (n / 2)
        x, y = np.meshgrid(c, c, indexing="xy")
        r = np.hypot(x, y)
        inside = r <= 1.0
        return r[inside], np.arctan2(y[inside], x[inside])

    @property
    def n_pixels(self) -> int:
        return self.pupil[0].size

    def modes(self, dtype=np.float64) -> np.ndarray:
        """Sampled modes 2..max_noll_index, shape ``(n_modes, n_pixels)``."""
        return self._modes.astype(dtype, copy=False)

    @cached_property
    def _modes(self) -> np.ndarray:
        r, th = self.pupil
        out = np.empty((self.n_modes, r.size))
        for row, j in enumerate(range(2, self.max_noll_index + 1)):
            out[row] = zernike(j, r, th)
        if self.orthonormalize:
            # symmetric orthonormalization: the discrete modes closest to the analytic ones
            w, v = np.linalg.eigh(out @ out.T / r.size)
            if w.min() <= 1e-8:
                raise ParameterError("grid too coarse for the requested number of modes")
            out = (v * w ** -0.5) @ v.T @ out
        return out

    def gram(self) -> np.ndarray:
        z = self._modes
        return z @ z.T / z.shape[1]
