"""Grid scans over intensity, maximal pairing length and OGS aperture."""
from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import DiscreteDistribution
from .errors import ParameterError
from .protocols.average import average_over_pdte
from .protocols.common import DetectorParams, KeyRatePoint
from .protocols.mp import MPParams, PhaseMisalignmentTable, mp_arrays
from .protocols.tf import TFParams, tf_arrays

DEFAULT_MU_GRID = tuple(float(x) for x in np.logspace(-3, 0, 61))
DEFAULT_LMAX_GRID = tuple(int(round(x)) for x in np.logspace(3, 6, 16))
PLATEAU_TOL = 0.01


@dataclass(frozen=True)
class ScanReport:
    axis: str  # "Mu", "LMax" or "Aperture"
    values: tuple
    points: tuple
    optimum_index: int
    config_hash: str = ""
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.axis not in ("Mu", "LMax", "Aperture"):
            raise ParameterError("axis must be Mu, LMax or Aperture")
        if len(self.values) != len(self.points) or not self.points:
            raise ParameterError("need one point per axis value")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ParameterError("axis values must be ascending")

    @property
    def optimum(self) -> KeyRatePoint:
        return self.points[self.optimum_index]

    @property
    def optimum_value(self):
        return self.values[self.optimum_index]

    @property
    def rates(self) -> np.ndarray:
        return np.array([p.rate_per_pulse for p in self.points])

    def rows(self) -> list[dict]:
        return [{"axis_value": v, **p.as_row()} for v, p in zip(self.values, self.points)]


def _argmax_first(rates) -> int:
    """Index of the maximum; ties go to the smallest axis value."""
    r = np.asarray(rates)
    return int(np.flatnonzero(r == r.max())[0])


def _map(fn, values, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(fn, values))
    return [fn(v) for v in values]


def scan_mu(evaluator, mu_grid=DEFAULT_MU_GRID, config_hash: str = "", threads: int = 1) -> ScanReport:
    """Evaluate ``evaluator(mu) -> KeyRatePoint`` on the grid and locate the best rate."""
    mu = tuple(float(m) for m in mu_grid)
    if not mu or min(mu) <= 0:
        raise ParameterError("mu_grid must be positive")
    pts = tuple(_map(evaluator, mu, threads))
    return ScanReport("Mu", mu, pts, _argmax_first([p.rate_per_pulse for p in pts]), config_hash)


def plateau_index(rates, tol: float = PLATEAU_TOL) -> int:
    """Argmax, except that when the best three rates agree within ``tol`` the smallest axis value among them wins."""
    r = np.asarray(rates, dtype=float)
    best = _argmax_first(r)
    if r.size < 3 or r[best] <= 0:
        return best
    top = np.argsort(-r, kind="stable")[:3]
    if (r[top].max() - r[top].min()) < tol * r[top].max():
        return int(top.min())
    return best


def scan_lmax(evaluator, lmax_grid=DEFAULT_LMAX_GRID, config_hash: str = "", threads: int = 1) -> ScanReport:
    """Evaluate ``evaluator(l_max) -> KeyRatePoint`` and apply the plateau rule."""
    grid = tuple(int(v) for v in lmax_grid)
    pts = tuple(_map(evaluator, grid, threads))
    return ScanReport("LMax", grid, pts, plateau_index([p.rate_per_pulse for p in pts]), config_hash)


# ---------------------------------------------------------------------------
# protocol evaluators on a pair of PDTEs

def tf_evaluator(pdte_a: DiscreteDistribution, pdte_b: DiscreteDistribution, det: DetectorParams,
                 params: TFParams = TFParams()):
    def ev(mu: float) -> KeyRatePoint:
        return average_over_pdte(lambda a, b: tf_arrays(mu, mu, a, b, det, params), pdte_a, pdte_b,
                                 params.compensation, mu, params.rep_rate)
    return ev


def mp_evaluator(pdte_a: DiscreteDistribution, pdte_b: DiscreteDistribution, det: DetectorParams,
                 params: MPParams = MPParams(), table: PhaseMisalignmentTable | None = None):
    table = table or PhaseMisalignmentTable.build(params)

    def ev(mu: float) -> KeyRatePoint:
        k = average_over_pdte(lambda a, b: mp_arrays(mu, a, b, det, params, table), pdte_a, pdte_b,
                              params.compensation, mu, params.rep_rate)
        return dataclasses.replace(k, aux={**k.aux, "l_max": params.l_max})
    return ev


def optimize_mp(pdte_a: DiscreteDistribution, pdte_b: DiscreteDistribution, det: DetectorParams,
                params: MPParams = MPParams(), mu_grid=DEFAULT_MU_GRID, lmax_grid=DEFAULT_LMAX_GRID,
                config_hash: str = "", threads: int = 1) -> tuple[ScanReport, ScanReport]:
    """Nested search: for each ``mu`` the best ``l_max``; returns the mu scan and the l_max scan at mu*."""
    grid = tuple(int(v) for v in lmax_grid)
    tables = dict(zip(grid, PhaseMisalignmentTable.build_many(params, grid)))
    per_l = {L: dataclasses.replace(params, l_max=L) for L in grid}

    def inner(mu: float) -> ScanReport:
        return scan_lmax(lambda L: mp_evaluator(pdte_a, pdte_b, det, per_l[L], tables[L])(mu), grid, config_hash)

    reports = _map(inner, tuple(float(m) for m in mu_grid), threads)
    pts = tuple(dataclasses.replace(r.optimum, aux={**r.optimum.aux, "l_max": r.optimum_value})
                for r in reports)
    mu_rep = ScanReport("Mu", tuple(float(m) for m in mu_grid), pts,
                        _argmax_first([p.rate_per_pulse for p in pts]), config_hash)
    return mu_rep, reports[mu_rep.optimum_index]


def sweep_apertures(diameters, report_for, config_hash: str = "") -> ScanReport:
    """One optimized point per diameter; ``report_for(D) -> ScanReport`` runs the full pipeline."""
    ds = tuple(sorted(float(d) for d in diameters))
    reps = [report_for(d) for d in ds]
    pts = tuple(dataclasses.replace(r.optimum, aux={**r.optimum.aux, "mu_opt": r.optimum.mu}) for r in reps)
    return ScanReport("Aperture", ds, pts, _argmax_first([p.rate_per_pulse for p in pts]), config_hash,
                      {"reports": reps})
