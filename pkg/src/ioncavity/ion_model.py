"""Four-level Zeeman structure of a single 174Yb+ ion.

The S_1/2 and P_1/2 manifolds each hold two magnetic sublevels.  The
fixed basis order is

    0 = |S,->   1 = |S,+>   2 = |P,->   3 = |P,+>

with the quantization axis z along the magnetic field and x along the
cavity axis (y completes the right-handed lab frame).

Dipole transitions are organized by the spherical component q = -1, 0, +1
(sigma-, pi, sigma+).  The lowering operators A_q carry the 1/2 <-> 1/2
Clebsch-Gordan weights in the Condon-Shortley convention with the photon
angular momentum coupled first, <1,q; 1/2,m_s | 1/2,m_p>; this order
fixes the (unobservable) signs reproducibly and satisfies the decay sum
rule sum_q A_q^dag A_q = (projector onto P manifold), so each excited
sublevel decays at the full rate gamma.

All frequencies in this module are angular (rad/s, hbar = 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import ModelError
from .qspace import Operator, SpaceLayout

ATOM_DIM = 4
ATOM_LAYOUT = SpaceLayout((ATOM_DIM,))

#: Spherical unit vectors e_q in Cartesian (x, y, z), Condon-Shortley phases.
SPHERICAL_BASIS = {
    +1: np.array([-1.0, -1.0j, 0.0]) / math.sqrt(2),
    0: np.array([0.0, 0.0, 1.0], dtype=complex),
    -1: np.array([1.0, -1.0j, 0.0]) / math.sqrt(2),
}

_SQRT13 = math.sqrt(1.0 / 3.0)
_SQRT23 = math.sqrt(2.0 / 3.0)

# <1,q; 1/2,m_s | 1/2,m_p> for the four allowed (m_s, q) combinations.
_CG_TABLE = {
    (-0.5, +1): +_SQRT23,
    (+0.5, -1): -_SQRT23,
    (-0.5, 0): +_SQRT13,
    (+0.5, 0): -_SQRT13,
}


class AtomLevel(IntEnum):
    """Basis indices of the four Zeeman sublevels."""

    S_MINUS = 0
    S_PLUS = 1
    P_MINUS = 2
    P_PLUS = 3


@dataclass(frozen=True)
class ZeemanParams:
    """Half-splittings of the ground and excited manifolds (rad/s).

    The sublevels sit at -/+ delta_s (ground) and -/+ delta_p (excited)
    around their manifold centers.
    """

    delta_s: float
    delta_p: float

    def __post_init__(self):
        if self.delta_s < 0 or self.delta_p < 0:
            raise ModelError("Zeeman half-splittings must be >= 0")


@dataclass(frozen=True)
class DriveGeometry:
    """Orientation of the classical pump beam.

    theta_k is the angle between the propagation direction and the
    magnetic field (z), with the beam confined to the x-z plane.
    psi_pol rotates the linear polarization within the plane transverse
    to propagation, measured from the normalized projection of the
    cavity axis x onto that plane (falling back to y when the
    projection vanishes, i.e. the beam travels along x).
    """

    theta_k: float
    psi_pol: float

    def __post_init__(self):
        if not 0.0 <= self.theta_k <= math.pi:
            raise ModelError(f"theta_k must lie in [0, pi], got {self.theta_k}")
        if not 0.0 <= self.psi_pol < math.pi:
            raise ModelError(f"psi_pol must lie in [0, pi), got {self.psi_pol}")


def _check_half(value: float, name: str) -> float:
    if not math.isclose(abs(float(value)), 0.5, rel_tol=0.0, abs_tol=1e-12):
        raise ModelError(f"{name} must be +1/2 or -1/2, got {value}")
    return 0.5 if value > 0 else -0.5


def cg_coeff(m_s: float, q: int, m_p: float) -> float:
    """Clebsch-Gordan weight of the |S,m_s> <- |P,m_p> transition via q.

    Zero unless the selection rule m_p = m_s + q holds.
    """
    m_s = _check_half(m_s, "m_s")
    m_p = _check_half(m_p, "m_p")
    if q not in (-1, 0, 1):
        raise ModelError(f"q must be -1, 0 or +1, got {q}")
    if not math.isclose(m_p, m_s + q, abs_tol=1e-12):
        return 0.0
    return _CG_TABLE[(m_s, q)]


def lowering_operators() -> dict[int, Operator]:
    """The three 4x4 lowering operators {q: A_q} on the atomic subsystem.

    A_q = sum_m cg(m, q, m+q) |S,m><P,m+q|.
    """
    ops = {}
    ms_index = {-0.5: AtomLevel.S_MINUS, +0.5: AtomLevel.S_PLUS}
    mp_index = {-0.5: AtomLevel.P_MINUS, +0.5: AtomLevel.P_PLUS}
    for q in (-1, 0, 1):
        m = np.zeros((ATOM_DIM, ATOM_DIM), dtype=complex)
        for m_s in (-0.5, +0.5):
            m_p = m_s + q
            if m_p in mp_index:
                m[ms_index[m_s], mp_index[m_p]] = cg_coeff(m_s, q, m_p)
        ops[q] = Operator(ATOM_LAYOUT, m)
    return ops


def excited_projector() -> Operator:
    """Projector onto the P manifold, diag(0, 0, 1, 1)."""
    return Operator(ATOM_LAYOUT, np.diag([0.0, 0.0, 1.0, 1.0]).astype(complex))


def spherical_components(v: np.ndarray) -> tuple[complex, complex, complex]:
    """Decompose a unit polarization vector onto the spherical basis.

    Returns (v_-1, v_0, v_+1) with v_q = e_q* . v, so a z-polarized
    vector is purely q=0 and sum_q |v_q|^2 = 1.
    """
    v = np.asarray(v, dtype=complex)
    if v.shape != (3,):
        raise ModelError(f"polarization vector must have 3 components, got {v.shape}")
    norm2 = float(np.sum(np.abs(v) ** 2))
    if abs(norm2 - 1.0) > 1e-12:
        raise ModelError(f"polarization vector not unit norm: |v|^2 = {norm2}")
    return tuple(complex(np.vdot(SPHERICAL_BASIS[q], v)) for q in (-1, 0, 1))


def drive_polarization(geom: DriveGeometry) -> np.ndarray:
    """Real unit polarization vector of the pump beam.

    Constructed orthogonal to the propagation direction
    k(theta_k) = (sin theta_k, 0, cos theta_k) and rotated by psi_pol
    from the in-plane reference (projection of the cavity axis x, or y
    when that projection vanishes).
    """
    k = np.array([math.sin(geom.theta_k), 0.0, math.cos(geom.theta_k)])
    ref = np.array([1.0, 0.0, 0.0]) - k[0] * k
    norm = np.linalg.norm(ref)
    if norm < 1e-12:
        ref = np.array([0.0, 1.0, 0.0])
    else:
        ref = ref / norm
    perp = np.cross(k, ref)
    eps = math.cos(geom.psi_pol) * ref + math.sin(geom.psi_pol) * perp
    return eps / np.linalg.norm(eps)


def weighted_lowering(eps: np.ndarray) -> Operator:
    """Polarization-weighted lowering operator A.eps = sum_q A_q eps_q*."""
    v_m1, v_0, v_p1 = spherical_components(eps)
    ops = lowering_operators()
    m = (
        ops[-1].matrix * np.conj(v_m1)
        + ops[0].matrix * np.conj(v_0)
        + ops[+1].matrix * np.conj(v_p1)
    )
    return Operator(ATOM_LAYOUT, m)


def build_h_atom(delta_0: float, zeeman: ZeemanParams) -> Operator:
    """Atomic Hamiltonian in the frame rotating at the drive frequency.

    Diagonal (-delta_s, +delta_s, delta_0 - delta_p, delta_0 + delta_p)
    where delta_0 = omega_atom - omega_laser.
    """
    diag = np.array(
        [
            -zeeman.delta_s,
            +zeeman.delta_s,
            delta_0 - zeeman.delta_p,
            delta_0 + zeeman.delta_p,
        ],
        dtype=complex,
    )
    return Operator(ATOM_LAYOUT, np.diag(diag))


def build_h_drive(omega_rabi: float, eps: np.ndarray) -> Operator:
    """Coupling to the classical pump: -(Omega/2) [A.eps + (A.eps)^dag].

    Hermitian by construction for any complex polarization; for the real
    (linear) polarizations used in practice this coincides with writing
    A.eps + A^dag.eps directly.
    """
    w = weighted_lowering(eps)
    return Operator(ATOM_LAYOUT, -(omega_rabi / 2.0) * (w.matrix + w.matrix.conj().T))


def rabi_from_intensity(i_rel: float, gamma: float) -> float:
    """Rabi frequency from drive intensity: Omega = gamma sqrt(I / 2 I_sat)."""
    if i_rel < 0:
        raise ModelError(f"relative intensity must be >= 0, got {i_rel}")
    return gamma * math.sqrt(i_rel / 2.0)
