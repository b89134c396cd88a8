import math

import numpy as np
import pytest

from geoqkd.errors import ParameterError
from geoqkd.geometry import LinkGeometry
from geoqkd.turbulence.coupling import (build_residual_model, misalignment_tip, sample_coupling,
                                        sample_rho_chi, turbulence_distribution)
from geoqkd.turbulence.covariance import ResidualPhaseModel
from geoqkd.turbulence.profile import (TurbulenceProfile, aperture_averaged_variance,
                                       fried_parameter, isoplanatic_angle, log_amplitude_variance,
                                       synthetic_profile)
from geoqkd.turbulence.zernike import ZernikeBasis

from oracles import aperture_oracle


@pytest.fixture(scope="module")
def profile():
    return synthetic_profile()


def test_calibrated_profile(profile):
    assert abs(fried_parameter(profile) - 0.25) < 1e-4
    assert abs(isoplanatic_angle(profile) - 8.51e-6) < 1e-9
    assert abs(log_amplitude_variance(profile) - 0.03) < 0.005


def test_empty_turbulence():
    p = TurbulenceProfile([100.0, 1000.0], [0.0, 0.0], [10.0, 100.0])
    assert log_amplitude_variance(p) == 0
    assert aperture_averaged_variance(p, 0.5) == 0
    assert fried_parameter(p) == math.inf


def test_empty_profile_rejected():
    with pytest.raises(ParameterError):
        TurbulenceProfile([], [], [])


@pytest.mark.parametrize("R", [0.1, 0.5])
def test_aperture_average_matches_oracle(profile, R):
    assert abs(aperture_averaged_variance(profile, R) / aperture_oracle(profile, R) - 1) < 1e-4


def test_aperture_averaging_reduces_variance(profile):
    v = [aperture_averaged_variance(profile, R) for R in (0.1, 0.2, 0.5)]
    assert v[0] > v[1] > v[2] > 0


def test_profile_csv_round_trip(profile, tmp_path):
    p = tmp_path / "cn2.csv"
    profile.to_csv(p, ["synthetic"])
    q = TurbulenceProfile.from_csv(p)
    assert np.array_equal(q.cn2, profile.cn2)
    assert fried_parameter(q) == fried_parameter(profile)


def test_rho_chi_degenerate():
    assert np.allclose(sample_rho_chi(0.03, 0.0, 100, 1), math.exp(-0.03))


def test_rho_chi_lognormal_mean():
    s2, sap = 0.03, 0.01
    x = sample_rho_chi(s2, sap, 100_000, 2)
    e = math.exp(-s2) * math.exp(4 * sap)
    assert abs(x.mean() - e) < 3 * x.std() / math.sqrt(x.size)


def _flat_model(n_modes, tip=0.0):
    z = np.zeros((n_modes, n_modes))
    return ResidualPhaseModel(z.copy(), np.zeros((0, 0)), "MMSE", 0.0, tip)


def test_flat_wavefront_couples_fully():
    basis = ZernikeBasis(10, 1.0)
    rho = sample_coupling(_flat_model(basis.n_modes), basis, n=50)
    assert np.allclose(rho, 1.0, atol=1e-5)


def test_static_tip_against_finer_grid():
    a2 = misalignment_tip(LinkGeometry())
    assert abs(a2 - 0.2027) < 1e-4
    vals = []
    for res in (128, 512):
        basis = ZernikeBasis(10, 1.0, res)
        rho = sample_coupling(_flat_model(basis.n_modes, a2), basis, n=3)
        assert np.ptp(rho) < 1e-6  # float32 pupil sums
        vals.append(rho[0])
    assert vals[0] < 1
    assert abs(vals[0] / vals[1] - 1) < 1e-3


def test_zero_turbulence_leaves_only_tip():
    g = LinkGeometry(ogs_aperture_diameter=0.2)
    p = TurbulenceProfile([100.0], [0.0], [10.0])
    basis = ZernikeBasis(10, 0.2)
    tip_only = sample_coupling(_flat_model(basis.n_modes, misalignment_tip(g)), basis, n=1)[0]
    model, b = build_residual_model(p, g, 6, max_noll_index=10)
    rho = sample_coupling(model, b, n=20)
    assert np.allclose(rho, tip_only, rtol=1e-6)
    assert np.allclose(sample_rho_chi(log_amplitude_variance(p), aperture_averaged_variance(p, 0.1), 20, 0), 1.0)


@pytest.fixture(scope="module")
def small_runs(profile):
    g = LinkGeometry(ogs_aperture_diameter=0.2)
    out = {}
    for corr in ("MMSE", "SoA"):
        out[corr] = turbulence_distribution(profile, g, correction=corr, n=2000, seed=4)[0]
    return out


def test_determinism(profile, small_runs):
    g = LinkGeometry(ogs_aperture_diameter=0.2)
    again = turbulence_distribution(profile, g, correction="MMSE", n=2000, seed=4)[0]
    assert np.array_equal(again.eta_turb, small_runs["MMSE"].eta_turb)
    threaded = turbulence_distribution(profile, g, correction="MMSE", n=2000, seed=4, threads=2)[0]
    assert np.array_equal(threaded.eta_turb, small_runs["MMSE"].eta_turb)


def test_mmse_beats_soa(small_runs):
    m, s = small_runs["MMSE"], small_runs["SoA"]
    assert m.meta["corrected_variance"] <= s.meta["corrected_variance"]
    assert m.eta_turb.mean() > s.eta_turb.mean()


def test_efficiencies_are_physical(small_runs):
    e = small_runs["SoA"].rho_phi
    assert np.all((e >= 0) & (e <= 1))
