"""Cavity-detuning scans, triplet peak detection and drive-geometry fits.

The emission spectrum is represented exactly as it is measured: the
cavity acts as the scanning filter, so a "lineshape" is the steady-state
photon count rate versus cavity detuning delta_c.  Scan points are
independent solves and may run in parallel without changing the result.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import scipy.optimize as sopt

from .errors import IonCavityError, ModelError
from .ion_model import DriveGeometry
from .steadystate import SystemParams, SystemSolver

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LineshapeTable:
    """Ordered scan records: detuning (rad/s) -> photon numbers and rate."""

    delta_c: np.ndarray
    n_h: np.ndarray
    n_v: np.ndarray
    count_rate: np.ndarray

    def __post_init__(self):
        arrays = {}
        for name in ("delta_c", "n_h", "n_v", "count_rate"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            arrays[name] = arr
            object.__setattr__(self, name, arr)
        n = len(arrays["delta_c"])
        if any(len(a) != n for a in arrays.values()):
            raise ModelError("lineshape columns must have equal length")
        if n == 0:
            raise ModelError("lineshape table must not be empty")
        if np.any(np.diff(arrays["delta_c"]) <= 0):
            raise ModelError("delta_c column must be strictly increasing")
        if np.any(arrays["count_rate"] < 0):
            raise ModelError("count rates must be >= 0")

    def __len__(self) -> int:
        return len(self.delta_c)


@dataclass(frozen=True)
class Peak:
    delta_c: float
    height: float


@dataclass(frozen=True)
class PeakSet:
    """Interior local maxima of a scan, sorted by detuning."""

    peaks: tuple[Peak, ...]

    def __len__(self) -> int:
        return len(self.peaks)

    def __iter__(self):
        return iter(self.peaks)

    def positions(self) -> np.ndarray:
        return np.array([p.delta_c for p in self.peaks])


def _solve_points(params: SystemParams, deltas: np.ndarray):
    solver = SystemSolver(params)
    rows = []
    for dc in deltas:
        try:
            res = solver.solve(float(dc))
        except IonCavityError as exc:
            raise type(exc)(
                f"solve failed at delta_c = {dc / (2 * math.pi):.6g} Hz: {exc}"
            ) from exc
        rows.append((res.n_h, res.n_v, res.count_rate))
    return rows


def _scan_chunk(args):
    params, deltas = args
    return _solve_points(params, np.asarray(deltas))


def scan(params: SystemParams, grid, parallel: int = 1) -> LineshapeTable:
    """Steady-state solve at every detuning of a strictly increasing grid.

    parallel > 1 splits the grid over that many worker processes; the
    per-point arithmetic is identical, so the output does not depend on
    the split.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ModelError("scan grid must not be empty")
    if np.any(np.diff(grid) <= 0):
        raise ModelError("scan grid must be strictly increasing")

    if parallel <= 1 or grid.size == 1:
        rows = _solve_points(params, grid)
    else:
        workers = min(int(parallel), grid.size)
        chunks = np.array_split(grid, workers)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_scan_chunk, [(params, c) for c in chunks]))
        rows = [row for part in parts for row in part]

    n_h, n_v, rate = (np.array(col) for col in zip(*rows))
    return LineshapeTable(delta_c=grid.copy(), n_h=n_h, n_v=n_v, count_rate=rate)


def find_peaks(table: LineshapeTable, smooth_width: int = 0) -> PeakSet:
    """Interior local maxima by the 3-point test; endpoints never qualify.

    smooth_width > 1 applies a boxcar of that many samples first
    (default off).
    """
    if len(table) < 3:
        raise ModelError("peak finding needs at least 3 rows")
    y = table.count_rate
    if smooth_width and smooth_width > 1:
        kernel = np.ones(int(smooth_width)) / float(smooth_width)
        y = np.convolve(y, kernel, mode="same")
    peaks = [
        Peak(float(table.delta_c[i]), float(y[i]))
        for i in range(1, len(y) - 1)
        if y[i] > y[i - 1] and y[i] > y[i + 1]
    ]
    return PeakSet(peaks=tuple(peaks))


def sideband_prominence(table: LineshapeTable, smooth_width: int = 0) -> float:
    """Mean height of the outer peaks above the dip separating them from
    the tallest peak; 0 when fewer than three peaks are resolved."""
    peaks = find_peaks(table, smooth_width=smooth_width)
    if len(peaks) < 3:
        return 0.0
    heights = [p.height for p in peaks]
    center = int(np.argmax(heights))
    positions = peaks.positions()
    idx = np.searchsorted(table.delta_c, positions)
    proms = []
    for side in (0, len(peaks) - 1):
        if side == center:
            continue
        lo, hi = sorted((idx[side], idx[center]))
        dip = float(table.count_rate[lo : hi + 1].min())
        proms.append(heights[side] - dip)
    return float(np.mean(proms)) if proms else 0.0


def bloch_two_level(omega: float, delta: float, gamma: float) -> float:
    """Steady-state excited population of a driven, damped two-level atom:
    P_e = (Omega^2/4) / (delta^2 + gamma^2/4 + Omega^2/2)."""
    if gamma <= 0:
        raise ModelError("gamma must be > 0 for the two-level steady state")
    return (omega**2 / 4.0) / (delta**2 + gamma**2 / 4.0 + omega**2 / 2.0)


@dataclass(frozen=True)
class LorentzianFit:
    amplitude: float
    center: float
    hwhm: float
    offset: float
    r_squared: float


def fit_lorentzian(x, y) -> LorentzianFit:
    """Least-squares Lorentzian a w^2 / ((x-x0)^2 + w^2) + b."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)

    def model(xx, a, x0, w, b):
        return a * w**2 / ((xx - x0) ** 2 + w**2) + b

    span = x[-1] - x[0]
    p0 = [float(y.max() - y.min()), float(x[np.argmax(y)]), span / 6.0, float(y.min())]
    popt, _ = sopt.curve_fit(model, x, y, p0=p0, maxfev=20000)
    resid = y - model(x, *popt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 0.0
    return LorentzianFit(
        amplitude=float(popt[0]),
        center=float(popt[1]),
        hwhm=float(abs(popt[2])),
        offset=float(popt[3]),
        r_squared=r2,
    )


@dataclass(frozen=True)
class GeometryFitBounds:
    """Box constraints for the drive-parameter fit (lo, hi) per knob."""

    i_rel: tuple[float, float]
    theta_k: tuple[float, float]
    psi_pol: tuple[float, float]
    scale: tuple[float, float] = (0.0, np.inf)

    def __post_init__(self):
        for name in ("i_rel", "theta_k", "psi_pol", "scale"):
            lo, hi = getattr(self, name)
            if not (np.isfinite(lo) and lo <= hi):
                raise ModelError(f"bounds for {name} must satisfy lo <= hi, got ({lo}, {hi})")
        if self.i_rel[0] < 0:
            raise ModelError("intensity bounds must be >= 0")
        if not (0 <= self.theta_k[0] and self.theta_k[1] <= math.pi):
            raise ModelError("theta_k bounds must lie in [0, pi]")
        if not (0 <= self.psi_pol[0] and self.psi_pol[1] < math.pi):
            raise ModelError("psi_pol bounds must lie in [0, pi)")


@dataclass(frozen=True)
class GeometryFit:
    i_rel: float
    theta_k: float
    psi_pol: float
    scale: float
    sse: float
    evaluations: int


def _with_drive(base: SystemParams, i_rel: float, theta_k: float, psi_pol: float) -> SystemParams:
    return replace(base, i_rel=i_rel, geometry=DriveGeometry(theta_k, psi_pol))


def fit_geometry(
    data: LineshapeTable,
    bounds: GeometryFitBounds,
    base: SystemParams,
    grid_points: tuple[int, int, int] = (4, 4, 4),
    parallel: int = 1,
    max_iter: int = 200,
    rel_tol: float = 1e-6,
) -> GeometryFit:
    """Recover drive intensity, beam angle and polarization angle from a
    measured lineshape.

    The residuals compare the polarization-resolved photon-number columns
    (n_h, n_v) under a single shared amplitude scale; the summed count
    rate alone is nearly angle-independent once the drive saturates the
    atom, so the H/V split is what actually carries the geometry
    information.  A coarse grid over the bounds is scanned first; the
    best probe seeds a Nelder-Mead refinement (in coordinates normalized
    to the bounds, so the simplex is well scaled).  The amplitude is
    solved analytically at every probe: the least-squares scale between
    simulation and data, clipped to its bounds.  A solver failure at a
    probe scores +inf and is logged, never fatal.
    """
    if len(data) == 0:
        raise ModelError("cannot fit an empty lineshape")
    y = np.concatenate([data.n_h, data.n_v])
    eval_count = 0

    def objective(i_rel: float, theta: float, psi: float) -> tuple[float, float]:
        nonlocal eval_count
        eval_count += 1
        try:
            table = scan(_with_drive(base, i_rel, theta, psi), data.delta_c, parallel=parallel)
        except IonCavityError as exc:
            logger.warning(
                "fit probe failed (i_rel=%.4g theta=%.4g psi=%.4g): %s",
                i_rel, theta, psi, exc,
            )
            return math.inf, math.nan
        sim = np.concatenate([table.n_h, table.n_v])
        denom = float(np.dot(sim, sim))
        s = float(np.dot(sim, y)) / denom if denom > 0 else 0.0
        s = min(max(s, bounds.scale[0]), bounds.scale[1])
        return float(np.sum((y - s * sim) ** 2)), s

    axes = []
    for (lo, hi), n in zip((bounds.i_rel, bounds.theta_k, bounds.psi_pol), grid_points):
        axes.append(np.linspace(lo, hi, max(int(n), 1)) if hi > lo else np.array([lo]))

    best = None
    for probe in itertools.product(*axes):
        sse, s = objective(*probe)
        if best is None or sse < best[0]:
            best = (sse, s, probe)
    sse0, scale0, probe0 = best
    if not math.isfinite(sse0):
        raise ModelError("every grid probe failed; cannot start refinement")

    los = np.array([bounds.i_rel[0], bounds.theta_k[0], bounds.psi_pol[0]])
    his = np.array([bounds.i_rel[1], bounds.theta_k[1], bounds.psi_pol[1]])
    free = his > los
    spans = np.where(free, his - los, 1.0)

    def to_params(u: np.ndarray) -> np.ndarray:
        full = los.copy()
        full[free] = los[free] + np.clip(u, 0.0, 1.0) * spans[free]
        return full

    result = {"sse": sse0, "scale": scale0, "params": np.asarray(probe0, dtype=float)}

    if free.any():
        u0 = (np.asarray(probe0, dtype=float) - los)[free] / spans[free]

        def nm_objective(u: np.ndarray) -> float:
            p = to_params(u)
            sse, s = objective(*p)
            if sse < result["sse"]:
                result.update(sse=sse, scale=s, params=p)
            return sse

        sopt.minimize(
            nm_objective,
            u0,
            method="Nelder-Mead",
            options={
                "maxiter": max_iter,
                "fatol": rel_tol * max(sse0, 1e-300),
                "xatol": 1e-3,
            },
        )

    i_rel, theta, psi = result["params"]
    return GeometryFit(
        i_rel=float(i_rel),
        theta_k=float(theta),
        psi_pol=float(psi),
        scale=float(result["scale"]),
        sse=float(result["sse"]),
        evaluations=eval_count,
    )
