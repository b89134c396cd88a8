"""Fading-channel distributions on a uniform attenuation (dB) grid.

A product of independent efficiencies is a sum of their attenuations, so the
product integral used to combine turbulence and jitter fading becomes an
ordinary discrete convolution of the bin masses.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .geometry import FixedLossBudget

GRID_LO_DB = -10.0
GRID_HI_DB = 160.0
GRID_STEP_DB = 0.1


@dataclass(frozen=True)
class DiscreteDistribution:
    """Probability mass on ``lo + k*step`` dB, plus a ``lost`` mass at zero transmittance.

    ``lost`` collects everything attenuated beyond the top of the grid (or with
    exactly zero efficiency). ``mass.sum() + lost == 1``.
    """

    mass: np.ndarray
    lo: float = GRID_LO_DB
    step: float = GRID_STEP_DB
    lost: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        m = np.asarray(self.mass, dtype=float)
        object.__setattr__(self, "mass", m)
        if m.ndim != 1 or m.size < 1:
            raise ParameterError("mass must be a non-empty 1-D array")
        if np.any(m < 0) or self.lost < 0:
            raise ParameterError("probability mass must be non-negative")
        if not self.step > 0:
            raise ParameterError("grid step must be > 0")
        off = self.lo / self.step
        if abs(off - round(off)) > 1e-9:
            raise ParameterError("grid origin must be an integer multiple of the step")

    # grid ------------------------------------------------------------------
    @property
    def grid(self) -> np.ndarray:
        return self.lo + self.step * np.arange(self.mass.size)

    @property
    def hi(self) -> float:
        return self.lo + self.step * (self.mass.size - 1)

    @property
    def eta(self) -> np.ndarray:
        """Linear transmittance at each grid point."""
        return 10.0 ** (-self.grid / 10.0)

    @property
    def total(self) -> float:
        return float(self.mass.sum() + self.lost)

    def same_grid(self, other: "DiscreteDistribution") -> bool:
        return (self.mass.size == other.mass.size and abs(self.lo - other.lo) < 1e-12
                and abs(self.step - other.step) < 1e-12)

    def check_normalized(self, tol: float = 1e-9):
        if abs(self.total - 1.0) > tol:
            raise ParameterError(f"distribution is not normalized (total={self.total!r})")

    def support(self) -> tuple[np.ndarray, np.ndarray]:
        """Transmittances and masses of the non-empty bins, ``lost`` included as eta=0."""
        nz = np.nonzero(self.mass)[0]
        eta, m = self.eta[nz], self.mass[nz]
        if self.lost > 0:
            eta, m = np.append(eta, 0.0), np.append(m, self.lost)
        return eta, m

    # constructors ------------------------------------------------------------
    @classmethod
    def empty_grid(cls, lo=GRID_LO_DB, hi=GRID_HI_DB, step=GRID_STEP_DB) -> int:
        return int(round((hi - lo) / step)) + 1

    @classmethod
    def point_mass(cls, db: float, lo=GRID_LO_DB, hi=GRID_HI_DB, step=GRID_STEP_DB,
                   meta=None) -> "DiscreteDistribution":
        n = cls.empty_grid(lo, hi, step)
        mass = np.zeros(n)
        lost = 0.0
        k = int(round((db - lo) / step))
        if k >= n:
            lost = 1.0
        else:
            mass[max(k, 0)] = 1.0
        return cls(mass, lo, step, lost, dict(meta or {}))

    @classmethod
    def from_db_samples(cls, db, lo=GRID_LO_DB, hi=GRID_HI_DB, step=GRID_STEP_DB,
                        meta=None) -> "DiscreteDistribution":
        """Histogram attenuation samples onto the grid (nearest bin; +inf means lost)."""
        db = np.asarray(db, dtype=float).ravel()
        if db.size == 0:
            raise ParameterError("need at least one sample")
        n = cls.empty_grid(lo, hi, step)
        finite = np.isfinite(db)
        k = np.rint((db[finite] - lo) / step).astype(np.int64)
        over = k >= n
        k = np.clip(k[~over], 0, n - 1)
        mass = np.bincount(k, minlength=n).astype(float) / db.size
        lost = (np.count_nonzero(~finite) + np.count_nonzero(over)) / db.size
        return cls(mass, lo, step, lost, dict(meta or {}))

    @classmethod
    def from_eta_samples(cls, eta, **kw) -> "DiscreteDistribution":
        eta = np.asarray(eta, dtype=float)
        if np.any(eta < 0):
            raise ParameterError("efficiency samples must be >= 0")
        with np.errstate(divide="ignore"):
            db = np.where(eta > 0, -10.0 * np.log10(np.where(eta > 0, eta, 1.0)), np.inf)
        return cls.from_db_samples(db, **kw)

    # files ---------------------------------------------------------------------
    def to_csv(self, path, header: dict | None = None):
        """Write ``attenuation_db,probability`` rows; the lost mass is the final ``inf`` row.

        ``header`` entries become ``# key: value`` comment lines (values as JSON).
        """
        with open(path, "w", newline="") as f:
            for k, v in (header or {}).items():
                f.write(f"# {k}: {json.dumps(v, sort_keys=True, default=float)}\n")
            f.write(f"# meta: {json.dumps(self.meta, sort_keys=True, default=float)}\n")
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["attenuation_db", "probability"])
            for db, m in zip(self.grid, self.mass):
                w.writerow([f"{db:.4f}", f"{m:.17g}"])
            w.writerow(["inf", f"{self.lost:.17g}"])

    @classmethod
    def from_csv(cls, path) -> tuple["DiscreteDistribution", dict]:
        """Read a file written by :meth:`to_csv`; returns the distribution and its header."""
        header, rows = {}, []
        with open(path, newline="") as f:
            for line in f:
                if line.startswith("#"):
                    key, _, val = line[1:].strip().partition(":")
                    header[key.strip()] = json.loads(val) if val.strip() else None
                elif line.strip():
                    rows.append(line.strip().split(","))
        if not rows or rows[0] != ["attenuation_db", "probability"]:
            raise ParameterError(f"{path}: missing 'attenuation_db,probability' header")
        body = rows[1:]
        lost = 0.0
        if body and body[-1][0] == "inf":
            lost = float(body.pop()[1])
        if len(body) < 2:
            raise ParameterError(f"{path}: need at least two grid rows")
        db = np.array([float(r[0]) for r in body])
        mass = np.array([float(r[1]) for r in body])
        step = round(float(db[1] - db[0]), 9)
        if not np.allclose(np.diff(db), step, atol=1e-6):
            raise ParameterError(f"{path}: grid is not uniform")
        meta = header.pop("meta", None) or {}
        d = cls(mass, round(float(db[0]), 9), step, lost, meta)
        d.check_normalized(1e-6)
        return d, header

    # derived quantities --------------------------------------------------------
    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw transmittances (0 for the lost bin)."""
        eta, m = self.support()
        return rng.choice(eta, size=n, p=m / m.sum())

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.mass)


def product_convolve(a: DiscreteDistribution, b: DiscreteDistribution,
                     meta=None) -> DiscreteDistribution:
    """Law of the product of two independent efficiencies."""
    if not a.same_grid(b):
        raise ParameterError("distributions live on different grids")
    a.check_normalized(1e-6)
    b.check_normalized(1e-6)
    n = a.mass.size
    off = int(round(a.lo / a.step))
    full = np.convolve(a.mass, b.mass)
    # full[k] sits at dB = 2*lo + k*step = lo + (k + off)*step
    idx = np.arange(full.size) + off
    out = np.zeros(n)
    inside = (idx >= 0) & (idx < n)
    out[idx[inside]] = full[inside]
    out[0] += full[idx < 0].sum()
    overflow = full[idx >= n].sum()
    lost = 1.0 - (1.0 - a.lost) * (1.0 - b.lost) + overflow
    tot = out.sum() + lost
    merged = {**a.meta, **b.meta, **(meta or {})}
    return DiscreteDistribution(out / tot, a.lo, a.step, lost / tot, merged)


def shift_db(d: DiscreteDistribution, shift: float, meta=None) -> DiscreteDistribution:
    """Translate by ``shift`` dB, splitting mass linearly between neighbouring bins.

    The linear split keeps the mean attenuation exactly translated even when the
    shift is not a whole number of grid steps.
    """
    n = d.mass.size
    s = shift / d.step
    k0 = int(np.floor(s))
    frac = s - k0
    out = np.zeros(n)
    lost = d.lost
    for k, w in ((k0, 1.0 - frac), (k0 + 1, frac)):
        if w == 0.0:
            continue
        idx = np.arange(n) + k
        ok = (idx >= 0) & (idx < n)
        np.add.at(out, idx[ok], w * d.mass[ok])
        out[0] += w * d.mass[idx < 0].sum()
        lost += w * d.mass[idx >= n].sum()
    return DiscreteDistribution(out, d.lo, d.step, lost, {**d.meta, **(meta or {})})


def shift_fixed(d: DiscreteDistribution, budget: FixedLossBudget) -> DiscreteDistribution:
    total = budget.total_db
    if not np.isfinite(total):
        raise ParameterError("fixed-loss budget must be finite")
    return shift_db(d, total, {"fixed_loss_db": total})


def stats(d: DiscreteDistribution) -> dict:
    """Mean efficiency (linear), mean attenuation over the finite part, and percentiles.

    Percentiles are read off the dB grid; the lost bin sits at +inf.
    """
    d.check_normalized(1e-6)
    finite = d.mass.sum()
    mean_eta = float(np.dot(d.mass, d.eta))
    mean_db = float(np.dot(d.mass, d.grid) / finite) if finite > 0 else float("inf")
    cdf = d.cdf()
    out = {"mean_eta": mean_eta, "mean_db": mean_db, "lost": float(d.lost)}
    for q in (5, 50, 95):
        k = int(np.searchsorted(cdf, q / 100.0 - 1e-12))
        out[f"p{q}_db"] = float(d.grid[k]) if k < d.mass.size else float("inf")
    if mean_eta > 0:
        out["db_of_mean_eta"] = float(-10 * np.log10(mean_eta))
    return out
