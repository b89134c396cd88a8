"""Independent reference calculations shared by the unit and acceptance tests."""
import math
import warnings

import numpy as np
from scipy import integrate, special

from geoqkd.turbulence.covariance import KOLMOGOROV_PSD_COEF
from geoqkd.turbulence.profile import APERTURE_AVG_COEF, FRIED_COEF
from geoqkd.turbulence.zernike import noll_to_nm


def renewal_rate(p, l_min, l_max, clicks, rng):
    """Pair clicks one by one: an open click pairs with the next one if the gap fits, else is replaced."""
    gaps = rng.geometric(p, clicks)
    pairs, open_click = 0, False
    for g in gaps:
        if open_click and l_min <= g <= l_max:
            pairs += 1
            open_click = False
        else:
            open_click = True
    return pairs / gaps.sum()


def phase_monte_carlo(dt, params, n, rng):
    """Random free-space drift rate plus two independent laser detunings, then the fixed offset."""
    w_fs = rng.normal(0, params.sigma_fs, n)
    dnu = rng.normal(0, params.sigma_nu, n) - rng.normal(0, params.sigma_nu, n)
    phase = (w_fs + 2 * math.pi * (dnu + params.delta_nu)) * dt
    return np.sin(phase / 2) ** 2


def aperture_oracle(profile, R):
    """Slab integrals done in closed form, then adaptive quadrature in wavenumber."""
    k0 = profile.k0
    lo, hi = profile.slab_edges()

    def f(k):
        beta = k * k / (2 * k0 * R**2)
        series = beta**2 * (hi**3 - lo**3) / 3 - beta**4 * (hi**5 - lo**5) / 15
        exact = 0.5 * (hi - lo) - np.cos(beta * (hi + lo)) * np.sin(beta * (hi - lo)) / (2 * beta)
        s = np.where(beta * hi < 1e-2, series, exact)
        return k ** (-14 / 3) * special.j1(k) ** 2 * float(np.dot(profile.cn2, s))

    pts = [0, 1e-3, 0.03, 0.3, 1, 3, 10, 30, 100, 300, 3000]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        tot = sum(integrate.quad(f, a, b, limit=500, epsrel=1e-10, epsabs=1e-30)[0] for a, b in zip(pts, pts[1:]))
    return APERTURE_AVG_COEF * R ** (5 / 3) * k0**2 * tot


def piston_removed_integral():
    # Kolmogorov phase spectrum minus the piston filter, integrated over the plane (D = r0 = 1)
    def f(x):
        return KOLMOGOROV_PSD_COEF * x ** (-8 / 3) * 2 * math.pi * (
            1 - (2 * special.j1(math.pi * x) / (math.pi * x)) ** 2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return sum(integrate.quad(f, a, b, limit=500)[0] for a, b in [(0, 1), (1, 10), (10, 100), (100, np.inf)])


def fourier_oracle(profile, D, sep, j):
    """Diagonal entry from a direct 2-D integral over spatial frequency, layer by layer."""
    R = D / 2
    n, m = noll_to_nm(j)
    xg, wg = np.polynomial.legendre.leggauss(96)
    phi = math.pi * (xg + 1)
    if m == 0:
        ang = np.ones_like(phi)
    else:
        ang = math.sqrt(2) * (np.cos(m * phi) if j % 2 == 0 else np.sin(m * phi))
    wts = FRIED_COEF * profile.k0**2 * profile.path_weight
    shifts = sep * profile.path_distance

    def f_int(f):
        q2 = (n + 1) * (special.jv(n + 1, 2 * math.pi * f * R) / (math.pi * f * R)) ** 2
        c = np.cos(2 * math.pi * f * shifts[:, None] * np.cos(phi)[None, :]) @ (math.pi * wg * ang**2)
        return KOLMOGOROV_PSD_COEF * f ** (-8 / 3) * q2 * float(np.dot(wts, c))

    pts = [0, 0.01, 0.1, 0.3, 1, 3, 10, 30, 100]
    return sum(integrate.quad(f_int, a, b, limit=400, epsrel=1e-9)[0] for a, b in zip(pts, pts[1:]))
