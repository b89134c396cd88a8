"""Named recipes regenerating the data (CSV) and a plot (SVG) of each published figure."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .config import RunConfig
from .protocols.common import DETECTORS
from .protocols.mp import MPParams, phase_misalignment_curve
from .workflow import (aperture_sweep, channel_from_config, keyrate_from_pdte, mp_lmax_scan, stamp,
                       write_rows)

DIAMETERS_CM = (20, 40, 60, 80, 100)
CORRECTIONS = ("MMSE", "SoA")
MP_MU_POINTS = 31


def _cfg(base: RunConfig, D_cm=100, correction="MMSE", protocol="tf", compensation="", preset="optimistic",
         mu_points=None) -> RunConfig:
    c = base.replace("geometry", ogs_diameter_m=D_cm / 100)
    c = c.replace("turbulence", correction=correction)
    c = c.replace("protocol", name=protocol, compensation=compensation)
    c = c.replace("detector", preset=preset)
    if mu_points is not None:
        c = c.replace("scan", mu_points=mu_points)
    return c


def _plot(path, series, xlabel, ylabel, **kw):
    from .plots import line_plot
    line_plot(path, series, xlabel, ylabel, **kw)


def fig3(base, out, threads):
    """PDF of eta_turb for every diameter and both corrections."""
    edges = np.linspace(0.0, 1.5, 151)
    centres = 0.5 * (edges[1:] + edges[:-1])
    rows, series = [], []
    for corr in CORRECTIONS:
        for D in DIAMETERS_CM:
            res = channel_from_config(_cfg(base, D, corr), threads)
            dens, _ = np.histogram(res.samples.eta_turb, edges, density=True)
            rows += [[corr, D, float(x), float(y)] for x, y in zip(centres, dens)]
            series.append((f"{corr} {D} cm", centres, dens))
    write_rows(out / "fig3.csv", stamp(base, figure="fig3"), ["correction", "diameter_cm", "eta_turb", "pdf"], rows)
    _plot(out / "fig3.svg", series, "eta_turb", "probability density")


def fig6(base, out, threads):
    """PDTE curves for every diameter and both corrections."""
    rows, series = [], []
    for corr in CORRECTIONS:
        for D in DIAMETERS_CM:
            d = channel_from_config(_cfg(base, D, corr), threads).pdte
            keep = d.mass > 0
            rows += [[corr, D, float(x), float(m)] for x, m in zip(d.grid[keep], d.mass[keep])]
            series.append((f"{corr} {D} cm", d.grid[keep], d.mass[keep] / d.step))
    write_rows(out / "fig6.csv", stamp(base, figure="fig6"), ["correction", "diameter_cm", "attenuation_db",
                                                              "probability"], rows)
    _plot(out / "fig6.svg", series, "attenuation (dB)", "probability density (1/dB)")


def _mu_figure(name, protocol, base, out, threads):
    rows, series = [], []
    comps = ("Compensated", "NonCompensated")
    for corr in CORRECTIONS:
        for comp in comps:
            c = _cfg(base, 100, corr, protocol, comp, mu_points=MP_MU_POINTS if protocol == "mp" else None)
            pdte = channel_from_config(c, threads).pdte
            rep = keyrate_from_pdte(c, pdte, pdte, threads).mu_scan
            rows += [[corr, comp, p.mu, p.rate_per_pulse, p.e_x, p.e_z] for p in rep.points]
            r = rep.rates
            series.append((f"{corr} {comp}", rep.values, np.where(r > 0, r, np.nan)))
    write_rows(out / f"{name}.csv", stamp(base, figure=name, protocol=protocol),
               ["correction", "compensation", "axis_value", "rate_per_pulse", "e_x", "e_z"], rows)
    _plot(out / f"{name}.svg", series, "mu (photon/pulse)", "key rate (bit/pulse)", logx=True, logy=True)


def fig7(base, out, threads):
    """TF-QKD rate against mu at 100 cm."""
    _mu_figure("fig7", "tf", base, out, threads)


def fig8(base, out, threads):
    """MP-QKD rate against mu at 100 cm (best L_max per mu)."""
    _mu_figure("fig8", "mp", base, out, threads)


def _aperture_rows(base, protocol, cases, threads):
    rows, series = [], []
    for label, corr, comp, preset in cases:
        c = _cfg(base, 100, corr, protocol, comp, preset, MP_MU_POINTS if protocol == "mp" else None)
        rep = aperture_sweep(c, threads, [d / 100 for d in DIAMETERS_CM])
        rows += [[label, protocol, round(D * 100), p.rate_per_pulse, p.rate_bps, p.mu, p.e_x, p.e_z]
                 for D, p in zip(rep.values, rep.points)]
        r = rep.rates
        series.append((f"{protocol} {label}", [D * 100 for D in rep.values], np.where(r > 0, r, np.nan)))
    return rows, series


_COLS = ["case", "protocol", "axis_value", "rate_per_pulse", "rate_bps", "mu", "e_x", "e_z"]


def fig9(base, out, threads):
    """Best rate against OGS diameter for both protocols, corrections and compensations."""
    rows, series = [], []
    for proto in ("tf", "mp"):
        cases = [(f"{corr} {comp}", corr, comp, "optimistic") for corr in CORRECTIONS
                 for comp in ("Compensated", "NonCompensated")]
        r, s = _aperture_rows(base, proto, cases, threads)
        rows += r
        series += s
    write_rows(out / "fig9.csv", stamp(base, figure="fig9"), _COLS, rows)
    _plot(out / "fig9.svg", series, "OGS diameter (cm)", "max key rate (bit/pulse)", logy=True)


def fig11(base, out, threads):
    """Best rate against OGS diameter for the three detector scenarios (MMSE)."""
    rows, series = [], []
    for proto, comp in (("tf", "Compensated"), ("mp", "NonCompensated")):
        cases = [(name, "MMSE", comp, name) for name in DETECTORS]
        r, s = _aperture_rows(base, proto, cases, threads)
        rows += r
        series += s
    write_rows(out / "fig11.csv", stamp(base, figure="fig11"), _COLS, rows)
    _plot(out / "fig11.svg", series, "OGS diameter (cm)", "max key rate (bit/pulse)", logy=True)


def fig12(base, out, threads, p: float = 1e-5):
    """MP misalignment error e_d against L_max for several frequency offsets."""
    lmax = np.unique(np.round(np.logspace(3, 6, 61)).astype(np.int64))
    rows, series = [], []
    for dnu in (0.0, 100.0, 1e3, 5e3, 1e4):
        params = MPParams(delta_nu=dnu)
        e = phase_misalignment_curve([p], params, lmax)[0]
        rows += [[dnu, int(L), float(v)] for L, v in zip(lmax, e)]
        series.append((f"dnu = {dnu:g} Hz", lmax, e))
    write_rows(out / "fig12.csv", stamp(base, figure="fig12", click_probability=p),
               ["delta_nu_hz", "axis_value", "e_d"], rows)
    _plot(out / "fig12.svg", series, "L_max", "e_d", logx=True)


def fig13(base, out, threads, mu: float = 0.6):
    """MP-QKD rate against L_max at 100 cm, mu = 0.6."""
    c = _cfg(base, 100, "MMSE", "mp")
    pdte = channel_from_config(c, threads).pdte
    rep = mp_lmax_scan(c, pdte, pdte, mu, threads)
    write_rows(out / "fig13.csv", stamp(base, figure="fig13", mu=mu), ["axis_value", "rate_per_pulse", "e_x", "e_z"],
               [[v, p.rate_per_pulse, p.e_x, p.e_z] for v, p in zip(rep.values, rep.points)])
    r = rep.rates
    _plot(out / "fig13.svg", [("MP", rep.values, np.where(r > 0, r, np.nan))], "L_max",
          "key rate (bit/pulse)", logx=True)


RECIPES = {"fig3": fig3, "fig6": fig6, "fig7": fig7, "fig8": fig8, "fig9": fig9, "fig11": fig11,
           "fig12": fig12, "fig13": fig13}


def run_reproduce(figure: str, base: RunConfig, out, threads: int = 1) -> list[Path]:
    if figure not in RECIPES:
        raise KeyError(figure)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    RECIPES[figure](base, out, threads)
    return sorted(out.glob(f"{figure}.*"))
