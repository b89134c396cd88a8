"""Stage orchestration shared by the CLI, the figure recipes and the demos.

Every data file written here starts with ``# config_hash`` and ``# seed``
comment lines; no timestamps are written, so reruns are byte-identical.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channel import DiscreteDistribution
from .config import RunConfig
from .errors import ParameterError
from .optimize import ScanReport, optimize_mp, scan_lmax, scan_mu, sweep_apertures, tf_evaluator
from .pipeline import ChannelResult, build_channel
from .protocols.mp import PhaseMisalignmentTable, mp_arrays
from .protocols.average import average_over_pdte
from .turbulence.coupling import phase_covariances, default_ao_modes
from .turbulence.covariance import MMSEConfig
from .turbulence.profile import TurbulenceProfile, synthetic_profile

_PROFILE_CACHE: dict = {}
_COV_CACHE: dict = {}


# ---------------------------------------------------------------------------
# file helpers

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def write_json(path, obj):
    Path(path).write_text(json.dumps(_jsonable(obj), sort_keys=True, indent=1) + "\n")


def write_rows(path, header: dict, columns, rows):
    with open(path, "w", newline="") as f:
        for k, v in header.items():
            f.write(f"# {k}: {json.dumps(_jsonable(v), sort_keys=True)}\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def stamp(cfg: RunConfig, **extra) -> dict:
    return {"config_hash": cfg.hash(), "seed": cfg["run"]["seed"], **extra}


# ---------------------------------------------------------------------------
# channel stage

def profile_from_config(cfg: RunConfig) -> TurbulenceProfile:
    t, g = cfg["turbulence"], cfg.geometry()
    key = (t["profile"], t["r0_m"], t["theta0_urad"], t["sigma_chi2"], g.wavelength, g.elevation)
    if key not in _PROFILE_CACHE:
        if t["profile"]:
            if not Path(t["profile"]).is_file():
                raise OSError(f"profile file not found: {t['profile']}")
            _PROFILE_CACHE[key] = TurbulenceProfile.from_csv(t["profile"], g.wavelength, g.elevation)
        else:
            _PROFILE_CACHE[key] = synthetic_profile(t["r0_m"], t["theta0_urad"] * 1e-6, t["sigma_chi2"],
                                                    g.wavelength, g.elevation)
    return _PROFILE_CACHE[key]


def _ao_modes(cfg: RunConfig, geometry) -> int:
    n = cfg["turbulence"]["ao_modes"]
    return default_ao_modes(geometry.ogs_aperture_diameter) if n is None else n


def channel_from_config(cfg: RunConfig, threads: int = 1) -> ChannelResult:
    t, l, j = cfg["turbulence"], cfg["losses"], cfg["jitter"]
    geometry = cfg.geometry()
    if not t["enabled"]:
        return build_channel(geometry, None, t["correction"], None, t["samples"], cfg["run"]["seed"],
                             l["system_db"], l["absorption_db"], j["map_kind"], t["waist_ratio"],
                             threads=threads, turbulence=False, jitter_n=j["samples"])
    profile = profile_from_config(cfg)
    ao = _ao_modes(cfg, geometry)
    ckey = (id(profile), geometry, ao, t["max_noll_index"])
    if ckey not in _COV_CACHE:
        _COV_CACHE[ckey] = phase_covariances(profile, geometry, ao, t["max_noll_index"])
    mmse = MMSEConfig(log_amplitude_channel=t["amplitude_channel"])
    return build_channel(geometry, profile, t["correction"], ao, t["samples"], cfg["run"]["seed"],
                         l["system_db"], l["absorption_db"], j["map_kind"], t["waist_ratio"],
                         t["max_noll_index"], mmse, threads, _COV_CACHE[ckey], True, j["samples"])


def write_channel(cfg: RunConfig, res: ChannelResult, out, fmt: str = "csv") -> list[Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    head = stamp(cfg, channel_hash=cfg.channel_hash,
                 ogs_diameter_m=cfg["geometry"]["ogs_diameter_m"],
                 correction=cfg["turbulence"]["correction"])
    paths = [out / "pdte.csv", out / "channel.json"]
    res.pdte.to_csv(paths[0], head)
    write_json(paths[1], {**head, "fixed_db": res.fixed_db, "stats": res.info})
    if res.samples is not None:
        p = out / "turbulence_samples.csv"
        res.samples.to_csv(p, [f"{k}: {json.dumps(v)}" for k, v in head.items()])
        paths.append(p)
    if fmt == "svg":
        from .plots import line_plot
        keep = res.pdte.mass > 0
        lo, hi = np.flatnonzero(keep)[[0, -1]] if keep.any() else (0, 1)
        sl = slice(max(lo - 5, 0), hi + 6)
        p = out / "pdte.svg"
        line_plot(p, [("PDTE", res.pdte.grid[sl], res.pdte.mass[sl] / res.pdte.step)],
                  "attenuation (dB)", "probability density (1/dB)")
        paths.append(p)
    return paths


def load_pdte(path, cfg: RunConfig | None = None) -> DiscreteDistribution:
    """Read a PDTE file; with ``cfg``, refuse files produced under a different channel config."""
    if not Path(path).is_file():
        raise OSError(f"PDTE file not found: {path}")
    d, header = DiscreteDistribution.from_csv(path)
    if cfg is not None and header.get("channel_hash") not in (None, cfg.channel_hash):
        raise ParameterError(f"{path} was produced by channel config {header.get('channel_hash')}, "
                             f"but the current config hashes to {cfg.channel_hash}; rerun 'channel' first")
    return d


# ---------------------------------------------------------------------------
# key-rate stage

@dataclass(frozen=True)
class KeyrateResult:
    protocol: str
    mu_scan: ScanReport
    lmax_scan: ScanReport | None = None

    def summary_line(self, diameter: float) -> str:
        o = self.mu_scan.optimum
        line = f"{self.protocol} {diameter:.2f} {o.rate_per_pulse:.4g} {o.mu:.4g}"
        if self.lmax_scan is not None:
            line += f" {self.lmax_scan.optimum_value}"
        return line


def keyrate_from_pdte(cfg: RunConfig, pdte_a: DiscreteDistribution, pdte_b: DiscreteDistribution,
                      threads: int = 1) -> KeyrateResult:
    det = cfg.detector()
    h = cfg.hash()
    if cfg["protocol"]["name"] == "tf":
        rep = scan_mu(tf_evaluator(pdte_a, pdte_b, det, cfg.tf_params()), cfg.mu_grid(), h, threads)
        return KeyrateResult("tf", rep)
    params = cfg.mp_params()
    if cfg["scan"]["optimize_lmax"]:
        mu_rep, l_rep = optimize_mp(pdte_a, pdte_b, det, params, cfg.mu_grid(), cfg.lmax_grid(), h, threads)
        return KeyrateResult("mp", mu_rep, l_rep)
    from .optimize import mp_evaluator
    rep = scan_mu(mp_evaluator(pdte_a, pdte_b, det, params), cfg.mu_grid(), h, threads)
    return KeyrateResult("mp", rep)


def mp_lmax_scan(cfg: RunConfig, pdte_a, pdte_b, mu: float, threads: int = 1) -> ScanReport:
    """Rate against L_max at a fixed intensity."""
    det, params, grid = cfg.detector(), cfg.mp_params(), cfg.lmax_grid()
    tables = dict(zip(grid, PhaseMisalignmentTable.build_many(params, grid)))

    def ev(L):
        p = dataclasses.replace(params, l_max=L)
        k = average_over_pdte(lambda a, b: mp_arrays(mu, a, b, det, p, tables[L]), pdte_a, pdte_b,
                              p.compensation, mu, p.rep_rate)
        return dataclasses.replace(k, aux={**k.aux, "l_max": L})
    return scan_lmax(ev, grid, cfg.hash(), threads)


def _point_row(p):
    return [p.mu, p.rate_per_pulse, p.rate_bps, p.e_x, p.e_z]


def report_json(cfg: RunConfig, protocol: str, rep: ScanReport) -> dict:
    def pt(p):
        return {**p.as_row(), "aux": p.aux}
    return {"protocol": protocol, **stamp(cfg), "axis": rep.axis, "values": list(rep.values),
            "points": [pt(p) for p in rep.points], "optimum": {"axis_value": rep.optimum_value, **pt(rep.optimum)}}


def write_scan(cfg: RunConfig, protocol: str, rep: ScanReport, stem, fmt: str = "csv",
               xlabel: str = "", logx: bool = True) -> list[Path]:
    """Axis CSV (``axis_value,rate_per_pulse,e_x,e_z``), JSON report, optional SVG."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    paths = []
    if fmt in ("csv", "svg"):
        p = stem.with_suffix(".csv")
        write_rows(p, stamp(cfg, protocol=protocol, axis=rep.axis), ["axis_value", "rate_per_pulse", "e_x", "e_z"],
                   [[v, pt.rate_per_pulse, pt.e_x, pt.e_z] for v, pt in zip(rep.values, rep.points)])
        paths.append(p)
    p = stem.with_suffix(".json")
    write_json(p, report_json(cfg, protocol, rep))
    paths.append(p)
    if fmt == "svg":
        from .plots import line_plot
        p = stem.with_suffix(".svg")
        r = rep.rates
        line_plot(p, [(protocol, rep.values, np.where(r > 0, r, np.nan))], xlabel or rep.axis,
                  "key rate (bit/pulse)", logx=logx, logy=bool((r > 0).any()))
        paths.append(p)
    return paths


def write_keyrate(cfg: RunConfig, res: KeyrateResult, out, fmt: str = "csv") -> list[Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    name = f"keyrate_{res.protocol}"
    paths = [out / f"{name}.csv"]
    write_rows(paths[0], stamp(cfg, protocol=res.protocol), ["mu", "rate_per_pulse", "rate_bps", "e_x", "e_z"],
               [_point_row(p) for p in res.mu_scan.points])
    paths += write_scan(cfg, res.protocol, res.mu_scan, out / f"{name}_mu", fmt, "mu (photon/pulse)")
    if res.lmax_scan is not None:
        paths += write_scan(cfg, res.protocol, res.lmax_scan, out / f"{name}_lmax", fmt, "L_max")
    return paths


# ---------------------------------------------------------------------------
# aperture sweep

def aperture_sweep(cfg: RunConfig, threads: int = 1, diameters=None) -> ScanReport:
    def report_for(D):
        c = cfg.replace("geometry", ogs_diameter_m=float(D))
        pdte = channel_from_config(c, threads).pdte
        return keyrate_from_pdte(c, pdte, pdte, threads).mu_scan
    return sweep_apertures(diameters or cfg.diameters(), report_for, cfg.hash())
