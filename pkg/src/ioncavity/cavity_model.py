"""Two degenerate polarization modes of the cavity and their coupling
to the four-level ion.

Mode V is polarized along the magnetic field (z) and talks to the pi
transitions; mode H is polarized along y and talks to the sigma+ and
sigma- transitions with equal weight.  Both are transverse to the cavity
axis x.  The composite layout is always (atom, mode H, mode V).

Angular frequencies (rad/s) throughout; kappa is the field half-linewidth
so the photon flux leaving the cavity is 2 kappa <n>.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ModelError
from .ion_model import ATOM_DIM, lowering_operators, weighted_lowering
from .qspace import Operator, SpaceLayout, annihilation, embed

ATOM_SLOT = 0
MODE_H_SLOT = 1
MODE_V_SLOT = 2

MIN_FOCK, MAX_FOCK = 1, 3


@dataclass(frozen=True)
class CavityParams:
    """Cavity-side knobs: coupling g, field half-linewidth kappa, laser
    detuning delta_c = omega_c - omega_L, and Fock truncation per mode."""

    g: float
    kappa: float
    delta_c: float
    n_max: int = 2

    def __post_init__(self):
        if self.g < 0 or self.kappa < 0:
            raise ModelError("g and kappa must be >= 0")
        if not MIN_FOCK <= int(self.n_max) <= MAX_FOCK:
            raise ModelError(
                f"Fock truncation must lie in [{MIN_FOCK}, {MAX_FOCK}], "
                f"got {self.n_max}"
            )
        object.__setattr__(self, "n_max", int(self.n_max))


def cavity_layout(n_max: int) -> SpaceLayout:
    """Composite layout (atom, mode H, mode V) for a given truncation."""
    return SpaceLayout((ATOM_DIM, n_max + 1, n_max + 1))


def _check_layout(p: CavityParams, layout: SpaceLayout) -> None:
    expected = (ATOM_DIM, p.n_max + 1, p.n_max + 1)
    if layout.dims != expected:
        raise ModelError(f"layout {layout.dims} does not match expected {expected}")


def mode_basis() -> tuple[np.ndarray, np.ndarray]:
    """Polarization unit vectors (e_H, e_V) = (y, z) of the two modes."""
    return np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0])


def mode_annihilators(p: CavityParams, layout: SpaceLayout) -> tuple[Operator, Operator]:
    """Annihilation operators of both modes embedded on the full space."""
    _check_layout(p, layout)
    a = annihilation(p.n_max)
    return embed(a, MODE_H_SLOT, layout), embed(a, MODE_V_SLOT, layout)


def build_h_cav(p: CavityParams, layout: SpaceLayout) -> Operator:
    """Free cavity Hamiltonian delta_c (n_H + n_V) on the full space."""
    a_h, a_v = mode_annihilators(p, layout)
    return p.delta_c * (a_h.dag() @ a_h + a_v.dag() @ a_v)


def build_h_jc(p: CavityParams, layout: SpaceLayout) -> Operator:
    """Jaynes-Cummings coupling of the three transition types to both modes.

    i g sum_p [a_p^dag (A.e_p*) - (A.e_p*)^dag a_p], Hermitian by
    construction and excitation-number conserving (no counter-rotating
    terms).
    """
    _check_layout(p, layout)
    a_h, a_v = mode_annihilators(p, layout)
    e_h, e_v = mode_basis()
    h = np.zeros((layout.total_dim,) * 2, dtype=complex)
    for a_p, e_p in ((a_h, e_h), (a_v, e_v)):
        coupling = embed(weighted_lowering(np.conj(e_p)), ATOM_SLOT, layout)
        term = a_p.dag().matrix @ coupling.matrix
        h += 1j * p.g * (term - term.conj().T)
    return Operator(layout, h)


def collapse_operators(gamma: float, p: CavityParams, layout: SpaceLayout) -> list[Operator]:
    """Dissipation channels with rates folded into the operators.

    Returns [sqrt(gamma) A_q for q = -1, 0, +1] followed by
    [sqrt(2 kappa) a_H, sqrt(2 kappa) a_V], all on the full space.
    """
    if gamma < 0 or p.kappa < 0:
        raise ModelError("decay rates must be >= 0")
    _check_layout(p, layout)
    ops = []
    for q in (-1, 0, 1):
        a_q = lowering_operators()[q]
        ops.append(np.sqrt(gamma) * embed(a_q, ATOM_SLOT, layout))
    a_h, a_v = mode_annihilators(p, layout)
    ops.append(np.sqrt(2.0 * p.kappa) * a_h)
    ops.append(np.sqrt(2.0 * p.kappa) * a_v)
    return ops
