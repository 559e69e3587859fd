"""RF-trap electrical model: pseudopotential secular frequencies and
extraction of the voltage efficiency factor from measured frequencies.

The trap potential is characterized by a traceless quadrupole moment
(Q_x, Q_y, Q_z); along the electrode axis Q_x = eta / x0^2 where 2 x0 is
the electrode separation and eta is the voltage efficiency relative to
ideal hyperbolic electrodes.  To lowest order the secular frequency in
direction i under DC bias U0 and RF amplitude V0 at frequency Omega is

    omega_i = sqrt( e U0 Q_i / m + (e V0 Q_i / (m Omega))^2 / 2 ).

V0 is interpreted as the RF amplitude (not peak-to-peak).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.optimize as sopt
from scipy.constants import elementary_charge as _E_CHARGE

from .errors import ModelError, TrapInstabilityError, UnderdeterminedFitError

AXES = ("x", "y", "z")


@dataclass(frozen=True)
class TrapGeometry:
    """Electrical parameters of one trap configuration."""

    x0_m: float
    eta: float
    omega_rf: float
    v0_volts: float
    u0_volts: float
    mass_kg: float

    def __post_init__(self):
        if self.x0_m <= 0 or self.omega_rf <= 0 or self.mass_kg <= 0:
            raise ModelError("x0, omega_rf and mass must be > 0")
        if not 0.0 < self.eta <= 1.0:
            raise ModelError(f"voltage efficiency must lie in (0, 1], got {self.eta}")

    def secular_frequencies(self, anisotropy: float) -> tuple[float, float, float]:
        """(omega_x, omega_y, omega_z) in rad/s for a given transverse split."""
        q = quadrupole_from_eta(self.eta, self.x0_m, anisotropy)
        return tuple(
            secular_frequency(self.u0_volts, self.v0_volts, self.omega_rf, q_i, self.mass_kg)
            for q_i in (q.q_x, q.q_y, q.q_z)
        )


@dataclass(frozen=True)
class QuadrupoleMoments:
    """Traceless quadrupole components (m^-2); q_x + q_y + q_z == 0 by
    construction."""

    q_x: float
    q_y: float
    q_z: float


def quadrupole_from_eta(eta: float, x0_m: float, anisotropy: float) -> QuadrupoleMoments:
    """Quadrupole moments from the efficiency factor.

    q_x = eta / x0^2; the transverse deficit is split as
    q_y = -r q_x, q_z = -(1-r) q_x with the shape parameter r in [0, 1].
    """
    if x0_m <= 0:
        raise ModelError("x0 must be > 0")
    if not 0.0 < eta <= 1.0:
        raise ModelError(f"voltage efficiency must lie in (0, 1], got {eta}")
    if not 0.0 <= anisotropy <= 1.0:
        raise ModelError(f"anisotropy fraction must lie in [0, 1], got {anisotropy}")
    q_x = eta / x0_m**2
    q_y = -anisotropy * q_x
    # z takes the exact traceless completion, equal to -(1-r) q_x
    return QuadrupoleMoments(q_x=q_x, q_y=q_y, q_z=-(q_x + q_y))


def secular_radicand(u0: float, v0: float, omega_rf: float, q_i: float, mass_kg: float) -> float:
    """Argument of the square root in the secular-frequency formula."""
    if omega_rf <= 0 or mass_kg <= 0:
        raise ModelError("omega_rf and mass must be > 0")
    dc = _E_CHARGE * u0 * q_i / mass_kg
    rf = _E_CHARGE * v0 * q_i / (mass_kg * omega_rf)
    return dc + 0.5 * rf**2


def secular_frequency(u0: float, v0: float, omega_rf: float, q_i: float, mass_kg: float) -> float:
    """Secular frequency (rad/s) in the direction with quadrupole q_i."""
    rad = secular_radicand(u0, v0, omega_rf, q_i, mass_kg)
    if rad < 0:
        raise TrapInstabilityError(
            f"anti-trapping bias: radicand {rad:.6g} (rad/s)^2 is negative",
            radicand=rad,
        )
    return math.sqrt(rad)


@dataclass(frozen=True)
class TrapMeasurement:
    """One observed secular frequency (angular, rad/s)."""

    u0_volts: float
    separation_m: float  # full electrode separation 2 x0
    axis: str
    omega: float

    def __post_init__(self):
        if self.axis not in AXES:
            raise ModelError(f"axis must be one of {AXES}, got {self.axis!r}")
        if self.separation_m <= 0:
            raise ModelError("separation must be > 0")
        if self.omega < 0:
            raise ModelError("measured frequency must be >= 0")


@dataclass(frozen=True)
class SeparationFit:
    separation_m: float
    eta: float
    anisotropy: float
    sse: float
    n_points: int


def _axis_moment(axis: str, eta: float, r: float, x0_m: float) -> float:
    moments = quadrupole_from_eta(eta, x0_m, r)
    return {"x": moments.q_x, "y": moments.q_y, "z": moments.q_z}[axis]


def fit_eta(
    measurements: Iterable[TrapMeasurement],
    *,
    v0_volts: float,
    omega_rf: float,
    mass_kg: float,
    weights: Sequence[float] | None = None,
) -> list[SeparationFit]:
    """Weighted least squares for (eta, anisotropy) per electrode separation.

    Minimizes sum w (omega_model - omega_meas)^2 over eta in (0, 1] and
    the transverse split r in [0, 1].  Requires each separation group to
    span at least two distinct bias voltages or two axes; otherwise the
    design cannot constrain the parameters.  Deterministic: fixed starting
    point (0.5, 0.5) and a trust-region bounded solver.
    """
    measurements = list(measurements)
    if weights is None:
        weights = [1.0] * len(measurements)
    weights = [float(w) for w in weights]
    if len(weights) != len(measurements):
        raise ModelError("weights must pair with measurements")
    if any(w < 0 for w in weights):
        raise ModelError("weights must be >= 0")

    groups: dict[float, list[tuple[TrapMeasurement, float]]] = {}
    for m, w in zip(measurements, weights):
        groups.setdefault(m.separation_m, []).append((m, w))

    fits = []
    for separation in sorted(groups):
        rows = groups[separation]
        if len(rows) < 2:
            raise UnderdeterminedFitError(
                f"separation {separation}: need at least 2 measurements, got {len(rows)}"
            )
        u0s = {m.u0_volts for m, _ in rows}
        axes = {m.axis for m, _ in rows}
        if len(u0s) < 2 and len(axes) < 2:
            raise UnderdeterminedFitError(
                f"separation {separation}: all bias voltages equal and a single "
                "axis measured; (eta, anisotropy) are underdetermined"
            )
        x0_m = separation / 2.0
        sqrt_w = np.sqrt([w for _, w in rows])
        omega_meas = np.array([m.omega for m, _ in rows])

        def residuals(p, _rows=rows, _x0=x0_m, _sw=sqrt_w, _om=omega_meas):
            eta, r = p
            model = np.empty(len(_rows))
            for k, (m, _) in enumerate(_rows):
                q_i = _axis_moment(m.axis, eta, r, _x0)
                rad = secular_radicand(m.u0_volts, v0_volts, omega_rf, q_i, mass_kg)
                model[k] = math.sqrt(max(rad, 0.0))  # clip: stay finite mid-fit
            return _sw * (model - _om)

        sol = sopt.least_squares(
            residuals,
            x0=np.array([0.5, 0.5]),
            bounds=(np.array([1e-9, 0.0]), np.array([1.0, 1.0])),
        )
        fits.append(
            SeparationFit(
                separation_m=separation,
                eta=float(sol.x[0]),
                anisotropy=float(sol.x[1]),
                sse=float(np.sum(sol.fun**2)),
                n_points=len(rows),
            )
        )
    return fits
