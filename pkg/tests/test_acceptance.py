"""End-to-end acceptance checks at the published tolerances.

Each test prints one PASS/FAIL line (repeated in the terminal summary) and
then asserts. The channels are built once per session at 10^4 samples.
"""
import math
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy import stats

from geoqkd.channel import DiscreteDistribution, product_convolve
from geoqkd.config import RunConfig
from geoqkd.geometry import LinkGeometry
from geoqkd.jitter import jitter_model, sample_deflection
from geoqkd.optimize import DEFAULT_MU_GRID, mp_evaluator, scan_mu, tf_evaluator
from geoqkd.protocols.common import DetectorParams
from geoqkd.protocols.mp import MPParams, e_ph, mp_pairing_rate
from geoqkd.turbulence.covariance import noll_covariance
from geoqkd.turbulence.profile import aperture_averaged_variance, synthetic_profile
from geoqkd.turbulence.zernike import ZernikeBasis, modes_through_order, super_fitting_variance
from geoqkd.workflow import channel_from_config, keyrate_from_pdte

from oracles import aperture_oracle, phase_monte_carlo, renewal_rate

DIAMETERS_CM = (20, 40, 60, 80, 100)
ETA_TURB_REF = {  # (mean, std) of eta_turb
    "MMSE": {20: (0.73, 0.10), 40: (0.66, 0.12), 60: (0.61, 0.11), 80: (0.58, 0.11), 100: (0.56, 0.10)},
    "SoA": {20: (0.72, 0.18), 40: (0.62, 0.14), 60: (0.53, 0.15), 80: (0.45, 0.15), 100: (0.40, 0.15)},
}
BASE = RunConfig.default()


def _cfg(D_cm=100, correction="MMSE", protocol="tf", preset="optimistic"):
    c = BASE.replace("geometry", ogs_diameter_m=D_cm / 100).replace("turbulence", correction=correction)
    return c.replace("protocol", name=protocol).replace("detector", preset=preset)


@pytest.fixture(scope="module")
def channels():
    out, timing = {}, {}
    for corr in ("MMSE", "SoA"):
        for D in DIAMETERS_CM:
            t = time.perf_counter()
            out[corr, D] = channel_from_config(_cfg(D, corr))
            timing[corr, D] = time.perf_counter() - t
    return out, timing


def _within_factor(x, target, f):
    return target / f <= x <= target * f


def test_criterion_1_eta_turb_statistics(channels, verdict):
    res, timing = channels
    bad, worst = [], 0.0
    for (corr, D), r in res.items():
        s = r.samples.summary()
        m, sd = ETA_TURB_REF[corr][D]
        dm, ds = abs(s["mean"] - m), abs(s["std"] - sd)
        worst = max(worst, dm)
        if dm > 0.08 or ds > 0.06:
            bad.append(f"{corr} {D}cm {s['mean']:.2f}+-{s['std']:.2f} (want {m}+-{sd})")
    slow = max(timing.values())
    ok = not bad and slow < 300
    detail = f"{10 - len(bad)}/10 within (0.08, 0.06), worst mean offset {worst:.2f}, slowest {slow:.0f}s"
    verdict(1, "eta_turb statistics", ok, detail + ("; off: " + "; ".join(bad) if bad else ""))
    assert ok


def test_criterion_2_mmse_dominance(channels, verdict):
    res, _ = channels
    traces_ok = all(res["MMSE", D].samples.meta["corrected_variance"]
                    <= res["SoA", D].samples.meta["corrected_variance"] for D in DIAMETERS_CM)
    gaps = [res["MMSE", D].samples.eta_turb.mean() - res["SoA", D].samples.eta_turb.mean() for D in DIAMETERS_CM]
    grows = bool(np.all(np.diff(gaps) > 0))
    ok = traces_ok and grows
    verdict(2, "MMSE dominance", ok, f"trace MMSE <= SoA at all D: {traces_ok}; mean-eta gaps "
            + " ".join(f"{g:.3f}" for g in gaps))
    assert ok


def test_criterion_3_pdte_sanity(channels, verdict):
    res, _ = channels
    r = res["MMSE", 100]
    mean_db = r.info["pdte_mean_db"]
    # Monte Carlo product oracle: independent draws from both factors, multiplied
    rng = np.random.default_rng(2024)
    n = 100_000
    prod = r.turbulence.sample(n, rng) * r.jitter.sample(n, rng)
    with np.errstate(divide="ignore"):
        mc_db = np.sort(-10 * np.log10(prod))
    conv = product_convolve(r.turbulence, r.jitter)
    cdf_mc = np.searchsorted(mc_db, conv.grid + 1e-6, side="right") / n
    ks = float(np.max(np.abs(cdf_mc - conv.cdf())))
    ok = 50 <= mean_db <= 65 and ks < 0.01
    verdict(3, "PDTE sanity", ok, f"100 cm MMSE mean attenuation {mean_db:.2f} dB, KS {ks:.4f}")
    assert ok


@pytest.fixture(scope="module")
def headline(channels):
    res, _ = channels
    pdte = res["MMSE", 100].pdte
    out = {}
    for proto in ("tf", "mp"):
        t = time.perf_counter()
        out[proto] = keyrate_from_pdte(_cfg(100, "MMSE", proto), pdte, pdte)
        out[proto + "_s"] = time.perf_counter() - t
    return out


def test_criterion_4_tf_headline(headline, verdict):
    k = headline["tf"].mu_scan.optimum
    secs = headline["tf_s"]
    ok_r = _within_factor(k.rate_per_pulse, 1.05e-7, 2)
    ok_mu = 0.02 <= k.mu <= 0.08
    ok_e = abs(k.e_x - 0.014) <= 0.005
    ok = ok_r and ok_mu and ok_e and secs < 600
    verdict(4, "TF headline", ok, f"R {k.rate_per_pulse:.3g} (want 1.05e-7 x/2: {ok_r}), mu* {k.mu:.3g} ({ok_mu}), "
            f"e_X {100 * k.e_x:.2f}% (want 1.4+-0.5: {ok_e}), {secs:.0f}s")
    assert ok


def test_criterion_5_mp_headline(headline, verdict):
    k = headline["mp"].mu_scan.optimum
    L = headline["mp"].lmax_scan.optimum_value
    ok_r = _within_factor(k.rate_per_pulse, 7.2e-8, 2)
    ok_mu = 0.3 <= k.mu <= 1.0
    ok_e = abs(k.e_z - 0.0055) <= 0.003
    ok_l = _within_factor(L, 184206, 3)
    ok = ok_r and ok_mu and ok_e and ok_l
    verdict(5, "MP headline", ok, f"R {k.rate_per_pulse:.3g} (want 7.2e-8 x/2: {ok_r}), mu* {k.mu:.3g} ({ok_mu}), "
            f"e_Z {100 * k.e_z:.2f}% (want 0.55+-0.3: {ok_e}), L_max* {L} ({ok_l})")
    assert ok


def test_criterion_6_detector_scenarios(channels, verdict):
    res, _ = channels
    best = {}
    for preset, sizes in (("pessimistic", DIAMETERS_CM), ("idealized", (20, 100))):
        for proto in ("tf", "mp"):
            for D in sizes:
                pdte = res["MMSE", D].pdte
                best[preset, proto, D] = keyrate_from_pdte(_cfg(D, "MMSE", proto, preset), pdte, pdte).mu_scan.optimum
    pess_tf_zero = all(best["pessimistic", "tf", D].rate_per_pulse == 0 for D in DIAMETERS_CM)
    pess_mp_small_zero = all(best["pessimistic", "mp", D].rate_per_pulse == 0 for D in DIAMETERS_CM[:-1])
    pess_mp = best["pessimistic", "mp", 100].rate_bps
    ideal_20 = best["idealized", "tf", 20].rate_per_pulse > 0 and best["idealized", "mp", 20].rate_per_pulse > 0
    tf_1m, mp_1m = best["idealized", "tf", 100].rate_bps, best["idealized", "mp", 100].rate_bps
    checks = {"pessimistic TF zero everywhere": pess_tf_zero,
              "pessimistic MP zero below 100 cm": pess_mp_small_zero,
              f"pessimistic MP 100 cm {pess_mp:.3g} bit/s (want 17 x/2)": _within_factor(pess_mp, 17, 2),
              "idealized positive at 20 cm for both": ideal_20,
              f"idealized 1 m TF {tf_1m:.0f} bit/s (want 822 x/2)": _within_factor(tf_1m, 822, 2),
              f"idealized 1 m MP {mp_1m:.0f} bit/s (want 280 x/2)": _within_factor(mp_1m, 280, 2)}
    ok = all(checks.values())
    verdict(6, "detector scenarios", ok, "; ".join(f"{k}: {v}" for k, v in checks.items()))
    assert ok


def test_criterion_7_sqrt_eta(verdict):
    det = DetectorParams(0.0, 0.7)
    total_db = np.arange(100.0, 131.0, 5.0)
    # phase drift off: with it, the pairing spacing ~1/p leaves the coherence time at these losses
    quiet = MPParams(sigma_fs=0.0, sigma_nu=0.0, delta_nu=0.0, l_max=10**12)
    slopes = {}
    for proto in ("tf", "mp"):
        rates = []
        for L in total_db:
            d = DiscreteDistribution.point_mass(L / 2)
            ev = tf_evaluator(d, d, det) if proto == "tf" else mp_evaluator(d, d, det, quiet)
            rates.append(scan_mu(ev, DEFAULT_MU_GRID).optimum.rate_per_pulse)
        slopes[proto] = float(np.polyfit(-total_db / 10, np.log10(rates), 1)[0])
    ok = all(abs(s - 0.5) <= 0.03 for s in slopes.values())
    verdict(7, "sqrt-eta scaling", ok, f"slope TF {slopes['tf']:.4f}, MP {slopes['mp']:.4f} (want 0.5+-0.03)")
    assert ok


def test_criterion_8_closed_form_oracles(verdict):
    rng = np.random.default_rng(8)
    params = MPParams()
    L = params.l_max
    e_mc = phase_monte_carlo(L / params.rep_rate, params, 1_000_000, rng).mean()
    d_eph = abs(float(e_ph(L, params)) - e_mc)
    sim = renewal_rate(1e-5, 100, 184206, 400_000, rng)
    d_rp = abs(mp_pairing_rate(1e-5, 100, 184206) / sim - 1)
    sigma_r = jitter_model(LinkGeometry()).sigma_r
    ks = stats.kstest(sample_deflection(sigma_r, 10_000, 3),
                      stats.weibull_min(2.0, scale=math.sqrt(2) * sigma_r).cdf).statistic
    prof = synthetic_profile()
    d_bessel = max(abs(aperture_averaged_variance(prof, R) / aperture_oracle(prof, R) - 1) for R in (0.1, 0.5))
    gram = float(np.abs(ZernikeBasis(21, 1.0, 128).gram() - np.eye(20)).max())
    n = 100
    noll = float(np.trace(noll_covariance(modes_through_order(n), 1.0)) + super_fitting_variance(n, 1.0))
    checks = {f"e_ph vs phase MC {d_eph:.1e}": d_eph < 1e-3,
              f"r_p vs renewal {100 * d_rp:.2f}%": d_rp < 0.01,
              f"Weibull KS {ks:.4f}": ks < 0.02,
              f"Bessel quadrature {d_bessel:.1e}": d_bessel < 1e-4,
              f"Gram max|G-I| {gram:.4f}": gram < 1e-2,
              f"Noll sum {noll:.4f} vs 1.0299": abs(noll / 1.0299 - 1) < 3e-3}
    ok = all(checks.values())
    verdict(8, "closed-form oracles", ok, "; ".join(checks))
    assert ok


def _cli(args, cwd):
    return subprocess.run([sys.executable, "-m", "geoqkd", *args], cwd=cwd, capture_output=True, text=True)


def test_criterion_9_determinism(tmp_path, verdict):
    cfg = tmp_path / "run.ini"
    cfg.write_text(_cfg(60).to_text())
    runs = []
    for name, threads in (("a", "1"), ("b", "1"), ("c", "2")):
        out = tmp_path / name
        r1 = _cli(["channel", "--config", str(cfg), "--out", str(out), "--threads", threads], tmp_path)
        r2 = _cli(["keyrate", "--config", str(cfg), "--pdte", str(out / "pdte.csv"), "--out", str(out),
                   "--threads", threads, "--format", "svg"], tmp_path)
        assert r1.returncode == 0 and r2.returncode == 0, r1.stderr + r2.stderr
        runs.append(out)
    files = sorted(p.name for p in runs[0].iterdir())
    same = [f for f in files if all((r / f).read_bytes() == (runs[0] / f).read_bytes() for r in runs[1:])]
    ok = len(same) == len(files) and len(files) >= 6
    verdict(9, "determinism", ok, f"{len(same)}/{len(files)} files byte-identical across 2 runs and --threads 1/2")
    assert ok
