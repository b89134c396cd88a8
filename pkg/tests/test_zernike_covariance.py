import math

import numpy as np
import pytest

from geoqkd.errors import ModelError
from geoqkd.turbulence.covariance import (noll_covariance, psd_repair,
                                          residual_covariance_mmse, residual_covariance_soa,
                                          zernike_angular_covariance, zernike_autocovariance)
from geoqkd.turbulence.profile import TurbulenceProfile, synthetic_profile
from geoqkd.turbulence.zernike import (ZernikeBasis, modes_through_order, noll_to_nm,
                                       super_fitting_variance)

from oracles import piston_removed_integral, fourier_oracle


@pytest.fixture(scope="module")
def profile():
    return synthetic_profile()


def test_noll_indices():
    assert [noll_to_nm(j) for j in range(1, 12)] == [
        (0, 0), (1, 1), (1, 1), (2, 0), (2, 2), (2, 2), (3, 1), (3, 1), (3, 3), (3, 3), (4, 0)]


def test_gram_identity():
    g = ZernikeBasis(21, 1.0, 128).gram()
    assert np.abs(g - np.eye(20)).max() < 1e-2
    g = ZernikeBasis(45, 1.0, 128, orthonormalize=True).gram()
    assert np.abs(g - np.eye(44)).max() < 1e-12


def test_noll_sum():
    n = 100
    total = np.trace(noll_covariance(modes_through_order(n), 1.0)) + super_fitting_variance(n, 1.0)
    assert abs(total / piston_removed_integral() - 1) < 1e-4
    assert abs(total / 1.0299 - 1) < 3e-3


def test_tilt_variance():
    c = noll_covariance(3, 1.0)
    assert abs(c[0, 0] - 0.449) < 1e-3
    assert c[0, 1] == 0


def test_noll_scaling():
    assert np.allclose(noll_covariance(21, 2.0), 2 ** (5 / 3) * noll_covariance(21, 1.0), rtol=1e-13)


def test_autocovariance_scaling(profile):
    b = ZernikeBasis(21, 1.0)
    # r0 halves when Cn2 grows by 2^(5/3)
    a = zernike_autocovariance(profile.scaled(2 ** (5 / 3)), b)
    assert np.allclose(a, 2 ** (5 / 3) * zernike_autocovariance(profile, b), rtol=1e-10)


def test_angular_zero_separation(profile):
    b = ZernikeBasis(21, 1.0)
    a0 = zernike_autocovariance(profile, b)
    assert np.abs(zernike_angular_covariance(profile, b, 0.0) - a0).max() < 1e-6 * np.abs(a0).max()


@pytest.mark.parametrize("sep", [18.5e-6, 85.1e-6])
def test_angular_matches_fourier_oracle(profile, sep):
    g = zernike_angular_covariance(profile, ZernikeBasis(11, 1.0), sep)
    for j in (2, 3, 4, 7, 11):
        assert abs(g[j - 2, j - 2] / fourier_oracle(profile, 1.0, sep, j) - 1) < 1e-4


def test_angular_decays_with_separation():
    layer = TurbulenceProfile([10e3], [1e-17], [1e3], elevation=math.pi / 2)
    b = ZernikeBasis(21, 1.0)
    norms = [np.linalg.norm(zernike_angular_covariance(layer, b, s / 10e3)) for s in (0, 1, 5, 20, 100)]
    assert np.all(np.diff(norms) < 0)
    assert norms[-1] < 0.2 * norms[0]


def test_soa_limits():
    g0 = noll_covariance(21, 3.0)
    assert np.allclose(residual_covariance_soa(g0, g0), 0, atol=1e-12)
    assert np.allclose(residual_covariance_soa(g0, np.zeros_like(g0)), 2 * g0, rtol=1e-12)


def test_mmse_limits():
    g0 = noll_covariance(21, 3.0)
    _, res = residual_covariance_mmse(g0, g0)
    assert np.abs(res).max() < 1e-6 * np.abs(g0).max()
    recon, res = residual_covariance_mmse(g0, np.zeros_like(g0))
    assert np.all(recon == 0)
    assert np.allclose(res, g0, rtol=1e-12)


def test_mmse_not_worse_than_soa(profile):
    b = ZernikeBasis(45, 1.0)
    g0 = zernike_autocovariance(profile, b)
    ga = zernike_angular_covariance(profile, b, 18.5e-6)
    _, mmse = residual_covariance_mmse(g0, ga)
    assert np.trace(mmse) <= np.trace(residual_covariance_soa(g0, ga))


def test_psd_repair_rejects_indefinite():
    with pytest.raises(ModelError):
        psd_repair(np.diag([1.0, -0.1]))
    fixed = psd_repair(np.diag([1.0, -1e-9]))
    assert np.linalg.eigvalsh(fixed).min() >= 0
