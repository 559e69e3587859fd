"""Trapped-ion cavity QED toolkit.

Simulates a coherently driven four-level Yb+ ion coupled to the two
polarization modes of an optical cavity (steady-state emission
lineshapes and the strongly driven triplet), plus the classical
engineering companions: photon-collection budgets, dual-wavelength
resonator offsets, and RF-trap secular-frequency characterization.
"""

from .cavity_model import CavityParams, build_h_cav, build_h_jc, collapse_operators, mode_basis
from .errors import (
    ConfigError,
    IonCavityError,
    ModelError,
    NonUniqueSteadyStateError,
    NumericalError,
    TrapInstabilityError,
    UnderdeterminedFitError,
)
from .ion_model import (
    AtomLevel,
    DriveGeometry,
    ZeemanParams,
    build_h_atom,
    build_h_drive,
    cg_coeff,
    drive_polarization,
    lowering_operators,
    rabi_from_intensity,
    spherical_components,
)
from .lineshape import (
    GeometryFitBounds,
    LineshapeTable,
    PeakSet,
    bloch_two_level,
    find_peaks,
    fit_geometry,
    fit_lorentzian,
    scan,
    sideband_prominence,
)
from .photometrics import (
    CavityMetrics,
    EfficiencyChain,
    cavity_metrics,
    cavity_solid_angle,
    collection_probability,
    cooperativity,
    efficiency_chain,
    enhancement_factor,
    isotropic_rate,
    saturation_intensity,
    scatter_rate,
)
from .qspace import Operator, SpaceLayout, annihilation, embed, expectation
from .resonator import MirrorGeometry, dual_band_offset, gouy_phase, length_diff_from_offset, resonance_frequency
from .steadystate import (
    SteadyStateResult,
    SystemParams,
    SystemSolver,
    build_liouvillian,
    converge_truncation,
    observables,
    solve_steady,
    solve_system,
)
from .trapchar import (
    QuadrupoleMoments,
    TrapGeometry,
    TrapMeasurement,
    fit_eta,
    quadrupole_from_eta,
    secular_frequency,
)

__version__ = "0.1.0"
