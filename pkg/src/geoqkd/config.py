"""Run configuration: an INI key-value tree with typed schema, canonical form and hash.

Every key has a default, so an empty file is a valid config (the reference
GEO downlink at D_OGS = 1 m). Blank values mean "derive" where noted.
"""
from __future__ import annotations

import configparser
import hashlib
import io
import math
from dataclasses import dataclass

from .errors import ParameterError
from .geometry import LinkGeometry

_BOOL = {"true": True, "false": False, "yes": True, "no": False, "1": True, "0": False}


def _opt(kind):
    """Optional variant: blank string maps to None."""
    def conv(s):
        s = s.strip()
        return None if s == "" else kind(s)
    conv.__name__ = f"optional_{kind.__name__}"
    return conv


def _bool(s):
    try:
        return _BOOL[s.strip().lower()]
    except KeyError:
        raise ValueError(f"not a boolean: {s!r}") from None


def _str(s):
    return s.strip()


# section -> key -> (parser, default text)
SCHEMA = {
    "run": {"seed": (int, "1")},
    "geometry": {"ogs_diameter_m": (float, "1.0"), "sat_diameter_m": (float, "0.5"),
                 "wavelength_nm": (float, "1550.0"), "elevation_deg": (float, "30.0"),
                 "sat_altitude_km": (float, "35786.0"), "point_ahead_urad": (float, "18.5"),
                 "misalignment_urad": (float, "0.2")},
    "losses": {"system_db": (float, "2.8"), "absorption_db": (float, "0.5")},
    "turbulence": {"enabled": (_bool, "true"), "profile": (_str, ""),
                   "r0_m": (float, "0.25"), "theta0_urad": (float, "8.51"), "sigma_chi2": (float, "0.03"),
                   "correction": (_str, "MMSE"), "ao_modes": (_opt(int), ""), "samples": (int, "10000"),
                   "waist_ratio": (float, repr(1 / 2.2)), "max_noll_index": (_opt(int), ""),
                   "amplitude_channel": (_bool, "false")},
    "jitter": {"theta_urad": (float, "0.07"), "map_kind": (_str, "NumericOverlap"), "samples": (int, "10000")},
    "detector": {"preset": (_str, "optimistic"), "dark_rate_hz": (_opt(float), ""),
                 "efficiency": (_opt(float), ""), "window_ps": (float, "400.0"),
                 "dead_time_rounds": (int, "100")},
    "protocol": {"name": (_str, "tf"), "compensation": (_str, ""), "f_ec": (float, "1.1"),
                 "rep_rate_ghz": (float, "2.5"), "phase_error_bound": (_str, "parity"),
                 "sending_prob": (float, "0.5"), "photon_cutoff": (int, "10"),
                 "misalignment_error": (float, "0.001"), "l_max": (int, "184206"),
                 "sigma_fs": (float, "150.0"), "sigma_nu_hz": (float, "1000.0"),
                 "delta_nu_hz": (float, "100.0"), "e_misalign_z": (float, "0.001")},
    "scan": {"mu_min": (float, "0.001"), "mu_max": (float, "1.0"), "mu_points": (int, "61"),
             "lmax_min": (float, "1000.0"), "lmax_max": (float, "1000000.0"), "lmax_points": (int, "16"),
             "optimize_lmax": (_bool, "true"), "diameters_cm": (_str, "20,40,60,80,100")},
}

# sections that determine the channel (PDTE) stage
CHANNEL_SECTIONS = ("run", "geometry", "losses", "turbulence", "jitter")


def _canonical(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class RunConfig:
    values: dict  # section -> key -> typed value

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    # serialization -----------------------------------------------------------
    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        try:
            cp.read_string(text, source)
        except configparser.Error as exc:
            raise ParameterError(f"{source}: {exc}") from None
        values = {}
        for sec, keys in SCHEMA.items():
            values[sec] = {}
            for key, (parse, default) in keys.items():
                raw = cp.get(sec, key, fallback=default)
                try:
                    values[sec][key] = parse(raw)
                except ValueError as exc:
                    raise ParameterError(f"{source}: [{sec}] {key}: {exc}") from None
        for sec in cp.sections():
            if sec not in SCHEMA:
                raise ParameterError(f"{source}: unknown section [{sec}]")
            for key in cp[sec]:
                if key not in SCHEMA[sec]:
                    raise ParameterError(f"{source}: unknown key [{sec}] {key}")
        cfg = cls(values)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            with open(path) as f:
                text = f.read()
        except OSError as exc:
            raise OSError(f"cannot read config {path}: {exc.strerror}") from exc
        return cls.from_text(text, str(path))

    @classmethod
    def default(cls) -> "RunConfig":
        return cls.from_text("")

    def to_text(self, sections=None) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        for sec in sections or SCHEMA:
            cp[sec] = {k: _canonical(v) for k, v in self.values[sec].items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def hash(self, sections=None) -> str:
        return hashlib.sha256(self.to_text(sections).encode()).hexdigest()[:16]

    @property
    def channel_hash(self) -> str:
        return self.hash(CHANNEL_SECTIONS)

    def replace(self, section: str, **kw) -> "RunConfig":
        vals = {s: dict(v) for s, v in self.values.items()}
        for k, v in kw.items():
            if k not in SCHEMA[section]:
                raise ParameterError(f"unknown key [{section}] {k}")
            vals[section][k] = v
        cfg = RunConfig(vals)
        cfg.validate()
        return cfg

    # validation and builders ------------------------------------------------------
    def validate(self):
        t, p = self["turbulence"], self["protocol"]
        if t["correction"] not in ("MMSE", "SoA"):
            raise ParameterError("[turbulence] correction must be MMSE or SoA")
        if self["jitter"]["map_kind"] not in ("NumericOverlap", "ShapeScaleFit"):
            raise ParameterError("[jitter] map_kind must be NumericOverlap or ShapeScaleFit")
        if p["name"] not in ("tf", "mp"):
            raise ParameterError("[protocol] name must be tf or mp")
        if p["compensation"] not in ("", "Compensated", "NonCompensated"):
            raise ParameterError("[protocol] compensation must be Compensated or NonCompensated")
        if t["samples"] < 1 or self["jitter"]["samples"] < 1:
            raise ParameterError("sample counts must be >= 1")
        s = self["scan"]
        if not 0 < s["mu_min"] < s["mu_max"] or s["mu_points"] < 2:
            raise ParameterError("[scan] needs 0 < mu_min < mu_max and mu_points >= 2")
        if not 0 < s["lmax_min"] < s["lmax_max"] or s["lmax_points"] < 2:
            raise ParameterError("[scan] needs 0 < lmax_min < lmax_max and lmax_points >= 2")
        self.diameters()
        self.geometry()
        self.detector()

    def geometry(self) -> LinkGeometry:
        g = self["geometry"]
        return LinkGeometry(g["ogs_diameter_m"], g["sat_diameter_m"], g["wavelength_nm"] * 1e-9,
                            math.radians(g["elevation_deg"]), g["sat_altitude_km"] * 1e3,
                            point_ahead_angle=g["point_ahead_urad"] * 1e-6,
                            ogs_misalignment=g["misalignment_urad"] * 1e-6,
                            jitter_angle=self["jitter"]["theta_urad"] * 1e-6)

    def detector(self):
        from .protocols.common import DetectorParams, detector
        d = self["detector"]
        base = detector(d["preset"])
        rate = base.dark_rate if d["dark_rate_hz"] is None else d["dark_rate_hz"]
        eff = base.efficiency if d["efficiency"] is None else d["efficiency"]
        return DetectorParams(rate, eff, d["window_ps"] * 1e-12, d["dead_time_rounds"], base.name
                              if d["dark_rate_hz"] is None and d["efficiency"] is None else "custom")

    def compensation(self) -> str:
        c = self["protocol"]["compensation"]
        if c:
            return c
        return "Compensated" if self["protocol"]["name"] == "tf" else "NonCompensated"

    def mu_grid(self) -> tuple:
        import numpy as np
        s = self["scan"]
        return tuple(float(x) for x in np.logspace(math.log10(s["mu_min"]), math.log10(s["mu_max"]),
                                                   s["mu_points"]))

    def lmax_grid(self) -> tuple:
        import numpy as np
        s = self["scan"]
        g = np.logspace(math.log10(s["lmax_min"]), math.log10(s["lmax_max"]), s["lmax_points"])
        return tuple(sorted({int(round(x)) for x in g}))

    def diameters(self) -> tuple:
        try:
            ds = tuple(float(x) / 100 for x in self["scan"]["diameters_cm"].split(",") if x.strip())
        except ValueError:
            raise ParameterError("[scan] diameters_cm must be a comma-separated list") from None
        if not ds or min(ds) <= 0:
            raise ParameterError("[scan] diameters_cm must be positive")
        return ds

    def tf_params(self):
        from .protocols.common import misalignment_angle
        from .protocols.tf import TFParams
        p = self["protocol"]
        ang = misalignment_angle(p["misalignment_error"])
        return TFParams(self.mu_grid(), ang, ang, p["f_ec"], p["photon_cutoff"], self.compensation(),
                        p["phase_error_bound"], p["sending_prob"], p["rep_rate_ghz"] * 1e9)

    def mp_params(self):
        from .protocols.mp import MPParams
        p = self["protocol"]
        return MPParams(self.mu_grid(), self["detector"]["dead_time_rounds"], p["l_max"],
                        p["rep_rate_ghz"] * 1e9, p["sigma_fs"], p["sigma_nu_hz"], p["delta_nu_hz"],
                        p["f_ec"], self.compensation(), p["e_misalign_z"])
