import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geoqkd.channel import DiscreteDistribution, product_convolve, shift_db, shift_fixed, stats
from geoqkd.errors import ParameterError
from geoqkd.geometry import LinkGeometry, fixed_loss_budget

PM = DiscreteDistribution.point_mass


def _random_dist(seed, lo_db=0.0, hi_db=20.0):
    rng = np.random.default_rng(seed)
    return DiscreteDistribution.from_db_samples(rng.uniform(lo_db, hi_db, 5000) ** 1.2)


@given(a=st.integers(0, 700), b=st.integers(0, 700))
def test_point_masses_add(a, b):
    d = product_convolve(PM(a / 10), PM(b / 10))
    k = np.flatnonzero(d.mass)
    assert k.size == 1
    assert abs(d.grid[k[0]] - (a + b) / 10) < 1e-9


def test_point_mass_at_zero_is_identity():
    a = _random_dist(3)
    d = product_convolve(a, PM(0.0))
    assert np.allclose(d.mass, a.mass, atol=1e-15)
    assert d.lost == a.lost


def test_grid_mismatch_raises():
    with pytest.raises(ParameterError):
        product_convolve(PM(1.0), PM(1.0, step=0.2))


def test_product_convolve_matches_monte_carlo_product():
    a, b = _random_dist(1), _random_dist(2, 5.0, 30.0)
    rng = np.random.default_rng(7)
    n = 200_000
    prod = a.sample(n, rng) * b.sample(n, rng)
    mc = -10 * np.log10(prod)
    d = product_convolve(a, b)
    # compare CDFs on the grid; the sampled product lives exactly on grid sums
    cdf_mc = np.searchsorted(np.sort(mc), d.grid + 1e-6, side="right") / n
    assert np.max(np.abs(cdf_mc - d.cdf())) < 0.01


def test_shift_zero_identity():
    a = _random_dist(4)
    s = shift_db(a, 0.0)
    assert np.array_equal(s.mass, a.mass)


@given(st.floats(0.0, 80.0))
@settings(max_examples=30)
def test_shift_translates_mean(shift):
    a = _random_dist(5)
    assert abs(stats(shift_db(a, shift))["mean_db"] - stats(a)["mean_db"] - shift) < 1e-9


def test_shift_fixed_reference_budget():
    budget = fixed_loss_budget(LinkGeometry(), 2.8, 0.0)
    a = _random_dist(6)
    assert abs(stats(shift_fixed(a, budget))["mean_db"] - stats(a)["mean_db"] - budget.total_db) < 1e-9


def test_stats_point_mass():
    s = stats(PM(50.0))
    assert abs(s["mean_db"] - 50) < 1e-9
    assert s["p5_db"] == s["p50_db"] == s["p95_db"] == pytest.approx(50.0)


def test_stats_two_masses():
    m = PM(40.0).mass * 0.5 + PM(60.0).mass * 0.5
    d = DiscreteDistribution(m)
    assert abs(stats(d)["mean_eta"] - (1e-4 + 1e-6) / 2) < 1e-18


def test_stats_uniform_band_analytic():
    # each node carries its cell [x - h/2, x + h/2]; the end nodes carry half cells
    d0 = PM(0.0)
    m = np.zeros_like(d0.mass)
    inside = (d0.grid > 49.99) & (d0.grid < 60.01)
    m[inside] = 1.0
    m[np.flatnonzero(inside)[[0, -1]]] = 0.5
    d = DiscreteDistribution(m / m.sum())
    k = np.log(10) / 10
    exact = (np.exp(-50 * k) - np.exp(-60 * k)) / (10 * k)
    assert abs(stats(d)["mean_eta"] / exact - 1) < 1e-4


def test_lost_mass_past_grid_top():
    d = PM(200.0)
    assert d.lost == 1.0
    assert stats(d)["mean_eta"] == 0.0


def test_csv_round_trip(tmp_path):
    a = _random_dist(8)
    p = tmp_path / "d.csv"
    a.to_csv(p, {"config_hash": "abc", "seed": 1})
    b, head = DiscreteDistribution.from_csv(p)
    assert head["config_hash"] == "abc"
    assert b.lo == a.lo and b.step == a.step
    assert np.array_equal(b.mass, a.mass)


def test_unnormalized_file_rejected(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("attenuation_db,probability\n0.0000,0.3\n0.1000,0.3\ninf,0\n")
    with pytest.raises(ParameterError):
        DiscreteDistribution.from_csv(p)

