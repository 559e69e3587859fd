"""Dual-wavelength resonance bookkeeping for a symmetric near-planar cavity.

The stabilization light (infrared) and the science light (ultraviolet,
its second harmonic) see slightly different effective cavity lengths and
mirror curvatures because of the coating.  The Gouy phase and the length
difference shift the ultraviolet resonance away from the exact harmonic;
this module evaluates that offset and inverts it to a length difference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.constants import c as _C

from .errors import ModelError


@dataclass(frozen=True)
class MirrorGeometry:
    """Effective lengths and curvatures per band, plus the infrared
    reference frequency."""

    length_ir_m: float
    length_uv_m: float
    roc_ir_m: float
    roc_uv_m: float
    nu_ir_hz: float

    def __post_init__(self):
        for label, length, roc in (
            ("ir", self.length_ir_m, self.roc_ir_m),
            ("uv", self.length_uv_m, self.roc_uv_m),
        ):
            if not 0.0 < length < 2.0 * roc:
                raise ModelError(
                    f"{label} geometry outside the stable near-planar branch: "
                    f"need 0 < L < 2R, got L={length}, R={roc}"
                )
        if self.nu_ir_hz <= 0:
            raise ModelError("infrared reference frequency must be > 0")


def gouy_phase(length_m: float, roc_m: float) -> float:
    """Round-trip Gouy phase arccos(1 - L/R) of the fundamental mode."""
    if roc_m <= 0:
        raise ModelError("radius of curvature must be > 0")
    if not 0.0 <= length_m <= 2.0 * roc_m:
        raise ModelError(
            f"length {length_m} outside the stability range [0, 2R] for R = {roc_m}"
        )
    return math.acos(1.0 - length_m / roc_m)


def resonance_frequency(q: int, length_m: float, roc_m: float) -> float:
    """Frequency of the q-th longitudinal mode, (c/2L)(q + phi/pi)."""
    if int(q) != q or q < 1:
        raise ModelError(f"mode index q must be a positive integer, got {q}")
    phi = gouy_phase(length_m, roc_m)
    return (_C / (2.0 * length_m)) * (q + phi / math.pi)


def dual_band_offset(geom: MirrorGeometry) -> float:
    """Offset of the uv resonance from the infrared harmonic (Hz):

    df = nu_ir (L_uv - L_ir)/L_uv + c/(2 pi L_uv) [phi_ir - phi_uv/2].
    """
    phi_ir = gouy_phase(geom.length_ir_m, geom.roc_ir_m)
    phi_uv = gouy_phase(geom.length_uv_m, geom.roc_uv_m)
    stretched = geom.nu_ir_hz * (geom.length_uv_m - geom.length_ir_m) / geom.length_uv_m
    gouy = _C / (2.0 * math.pi * geom.length_uv_m) * (phi_ir - 0.5 * phi_uv)
    return stretched + gouy


def length_diff_from_offset(
    offset_hz: float,
    length_m: float,
    roc_ir_m: float,
    roc_uv_m: float,
    nu_ir_hz: float,
) -> float:
    """Invert the offset for L_uv - L_ir, holding the shared length fixed
    in the denominators and Gouy phases (first order in dL/L)."""
    phi_ir = gouy_phase(length_m, roc_ir_m)
    phi_uv = gouy_phase(length_m, roc_uv_m)
    gouy = _C / (2.0 * math.pi * length_m) * (phi_ir - 0.5 * phi_uv)
    return (offset_hz - gouy) * length_m / nu_ir_hz
