"""Classical photon-budget arithmetic for the ion-cavity system.

Pure functions: cavity figure-of-merit conversions, the three-factor
collection probability, solid-angle and scatter-rate estimates, and the
detection-chain ladder.  Linear frequencies (Hz) appear only at the
boundaries marked _hz; everything named kappa/gamma is angular (rad/s).
"""

from __future__ import annotations

from dataclasses import dataclass

import math

from scipy.constants import c as _C
from scipy.constants import hbar as _HBAR

from .errors import ModelError

# Relative mismatch tolerated when both cavity length and FSR are supplied.
OVERSPEC_TOL = 0.01


@dataclass(frozen=True)
class CavityMetrics:
    length_m: float
    fsr_hz: float
    fwhm_hz: float
    finesse: float
    kappa: float  # field half-linewidth, rad/s
    t_out_ppm: float
    t_in_ppm: float
    scatter_loss_ppm: float
    round_trip_loss_ppm: float
    outcoupling_efficiency: float


def cavity_metrics(
    *,
    fwhm_hz: float,
    t_out_ppm: float,
    length_m: float | None = None,
    fsr_hz: float | None = None,
    t_in_ppm: float = 0.0,
    scatter_loss_ppm: float = 0.0,
) -> CavityMetrics:
    """Fill in every derivable cavity figure of merit.

    Accepts either the geometric length or the measured FSR (or both, if
    consistent to 1%).  The round-trip loss is inferred from the finesse,
    2 pi / F, which is what the outcoupling efficiency T_out / loss refers
    to; the individual mirror numbers are carried through for reporting.
    """
    if fwhm_hz <= 0 or t_out_ppm <= 0:
        raise ModelError("fwhm_hz and t_out_ppm must be > 0")
    if t_in_ppm < 0 or scatter_loss_ppm < 0:
        raise ModelError("loss terms must be >= 0")
    if length_m is None and fsr_hz is None:
        raise ModelError("need cavity length or free spectral range")
    if length_m is not None and length_m <= 0:
        raise ModelError("cavity length must be > 0")
    if fsr_hz is not None and fsr_hz <= 0:
        raise ModelError("free spectral range must be > 0")

    if fsr_hz is None:
        fsr_hz = _C / (2.0 * length_m)
    elif length_m is None:
        length_m = _C / (2.0 * fsr_hz)
    else:
        implied = _C / (2.0 * length_m)
        if abs(implied - fsr_hz) > OVERSPEC_TOL * fsr_hz:
            raise ModelError(
                f"inconsistent over-specification: length {length_m} m implies "
                f"FSR {implied:.6g} Hz but {fsr_hz:.6g} Hz was given"
            )

    finesse = fsr_hz / fwhm_hz
    loss_ppm = 2.0 * math.pi / finesse * 1e6
    return CavityMetrics(
        length_m=length_m,
        fsr_hz=fsr_hz,
        fwhm_hz=fwhm_hz,
        finesse=finesse,
        kappa=math.pi * fwhm_hz,
        t_out_ppm=t_out_ppm,
        t_in_ppm=t_in_ppm,
        scatter_loss_ppm=scatter_loss_ppm,
        round_trip_loss_ppm=loss_ppm,
        outcoupling_efficiency=t_out_ppm / loss_ppm,
    )


def cooperativity(g: float, kappa: float, gamma: float) -> float:
    """Single-atom cooperativity C = g^2 / (kappa gamma)."""
    if kappa <= 0 or gamma <= 0:
        raise ModelError("kappa and gamma must be > 0")
    return g**2 / (kappa * gamma)


def collection_probability(t_out_over_loss: float, kappa: float, gamma: float, c_eff: float) -> float:
    """p_coll = (T_out/loss) * 2k/(2k+gamma) * 2C_eff/(1+2C_eff)."""
    if not 0.0 <= t_out_over_loss <= 1.0:
        raise ModelError("t_out_over_loss must lie in [0, 1]")
    if kappa < 0 or gamma < 0 or c_eff < 0:
        raise ModelError("rates and cooperativity must be >= 0")
    escape = 2.0 * kappa / (2.0 * kappa + gamma) if (kappa + gamma) > 0 else 0.0
    purcell = 2.0 * c_eff / (1.0 + 2.0 * c_eff)
    return t_out_over_loss * escape * purcell


def cavity_solid_angle(wavelength_m: float, waist_m: float) -> float:
    """Solid angle subtended by the cavity mode, 2 lambda^2 / (pi w0^2).

    This is twice the solid angle of the mode in the outcoupling
    direction (both ends of the standing wave count).
    """
    if wavelength_m <= 0 or waist_m <= 0:
        raise ModelError("wavelength and waist must be > 0")
    return 2.0 * wavelength_m**2 / (math.pi * waist_m**2)


def scatter_rate(i_rel: float, delta: float, gamma: float) -> float:
    """Two-level photon scatter rate (gamma/2) s / (1 + s + (2 delta/gamma)^2)
    with the saturation parameter s = I/I_sat."""
    if i_rel < 0:
        raise ModelError("relative intensity must be >= 0")
    if gamma <= 0:
        raise ModelError("gamma must be > 0")
    s = i_rel
    return (gamma / 2.0) * s / (1.0 + s + (2.0 * delta / gamma) ** 2)


def isotropic_rate(scatter_per_s: float, solid_angle_sr: float) -> float:
    """Isotropic scattering into the outcoupling half of a full mode angle:
    Gamma_sc * (solid_angle/2) / 4 pi."""
    if scatter_per_s < 0 or solid_angle_sr <= 0:
        raise ModelError("scatter rate must be >= 0 and solid angle > 0")
    return scatter_per_s * (solid_angle_sr / 2.0) / (4.0 * math.pi)


@dataclass(frozen=True)
class ChainStage:
    label: str
    efficiency: float
    rate_per_s: float  # photon rate entering this stage


@dataclass(frozen=True)
class EfficiencyChain:
    detected_per_s: float
    stages: tuple[ChainStage, ...]


def efficiency_chain(detected_per_s: float, efficiencies, labels=None) -> EfficiencyChain:
    """Back-propagate a detected rate up a ladder of efficiencies.

    Stage k reports detected / prod(eff_1..eff_k): the rate present
    before that stage's loss was applied.
    """
    if detected_per_s <= 0:
        raise ModelError("detected rate must be > 0")
    efficiencies = list(efficiencies)
    if labels is None:
        labels = [f"stage_{k+1}" for k in range(len(efficiencies))]
    if len(labels) != len(efficiencies):
        raise ModelError("labels and efficiencies must pair up")
    stages = []
    rate = detected_per_s
    for label, eff in zip(labels, efficiencies):
        if not 0.0 < eff <= 1.0:
            raise ModelError(f"efficiency for {label!r} must lie in (0, 1], got {eff}")
        rate = rate / eff
        stages.append(ChainStage(label=str(label), efficiency=float(eff), rate_per_s=rate))
    return EfficiencyChain(detected_per_s=detected_per_s, stages=tuple(stages))


def enhancement_factor(cavity_output_per_s: float, isotropic_per_s: float) -> float:
    """Photons emerging from the cavity relative to free-space scattering
    into the same solid angle."""
    if isotropic_per_s <= 0:
        raise ModelError("isotropic rate must be > 0")
    if cavity_output_per_s < 0:
        raise ModelError("cavity output rate must be >= 0")
    return cavity_output_per_s / isotropic_per_s


def saturation_intensity(wavelength_m: float, gamma: float) -> float:
    """I_sat = hbar omega0^3 gamma / (12 pi c^2) in W/m^2, omega0 = 2 pi c / lambda."""
    if wavelength_m <= 0 or gamma <= 0:
        raise ModelError("wavelength and gamma must be > 0")
    omega0 = 2.0 * math.pi * _C / wavelength_m
    return _HBAR * omega0**3 * gamma / (12.0 * math.pi * _C**2)
