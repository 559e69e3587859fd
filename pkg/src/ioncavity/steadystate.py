"""Liouvillian assembly and steady-state solution of the driven
ion-cavity master equation

    drho/dt = -i[H, rho] + gamma sum_q D[A_q] rho + 2 kappa sum_p D[a_p] rho

with D[C] rho = C rho C^dag - (C^dag C rho + rho C^dag C)/2.

The superoperator uses column-stacking vectorization, vec(A X B) =
(B^T kron A) vec(X), and the steady state is found by a direct dense
solve with one row of L replaced by the vectorized trace constraint.
Trace preservation makes exactly one diagonal row of L redundant, so
replacing row 0 loses no information.  The system is scaled to O(1)
before factorization so the LAPACK reciprocal-condition estimate is
meaningful; an estimate below 1/1e12 means the kernel is degenerate
(e.g. an undriven ground Zeeman manifold) and a NonUniqueSteadyStateError
is raised rather than returning an arbitrary member of the kernel.

All rates and detunings are angular frequencies (rad/s).
"""

from __future__ import annotations

import contextlib
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.linalg import LinAlgWarning, lapack

try:
    from threadpoolctl import ThreadpoolController

    _BLAS_CONTROLLER = ThreadpoolController()

    def _single_threaded_blas():
        # multi-threaded BLAS loses badly on these small dense factorizations
        # and makes results depend on the ambient thread count
        return _BLAS_CONTROLLER.limit(limits=1, user_api="blas")

except ImportError:  # degraded but functional

    def _single_threaded_blas():
        return contextlib.nullcontext()

from .cavity_model import (
    ATOM_SLOT,
    CavityParams,
    build_h_cav,
    build_h_jc,
    cavity_layout,
    collapse_operators,
    mode_annihilators,
)
from .errors import ModelError, NonUniqueSteadyStateError, NumericalError
from .ion_model import (
    DriveGeometry,
    ZeemanParams,
    build_h_atom,
    build_h_drive,
    drive_polarization,
    excited_projector,
    rabi_from_intensity,
)
from .qspace import Operator, SpaceLayout, embed

TRACE_TOL = 1e-9
POSITIVITY_FLOOR = -1e-10
RESIDUAL_REL_TOL = 1e-8
RCOND_MIN = 1e-12
TRUNCATION_TOL = 1e-3
# Photon totals below this are treated as numerically zero when judging
# truncation convergence (a decoupled cavity solves to ~1e-16, not 0.0).
PHOTON_FLOOR = 1e-12


@dataclass(frozen=True)
class SystemParams:
    """Complete physical description of one operating point."""

    gamma: float
    delta_0: float
    zeeman: ZeemanParams
    cavity: CavityParams
    i_rel: float
    geometry: DriveGeometry

    def __post_init__(self):
        if self.gamma < 0:
            raise ModelError("gamma must be >= 0")
        if self.i_rel < 0:
            raise ModelError("relative intensity must be >= 0")

    @property
    def omega_rabi(self) -> float:
        return rabi_from_intensity(self.i_rel, self.gamma)

    @property
    def layout(self) -> SpaceLayout:
        return cavity_layout(self.cavity.n_max)


@dataclass(frozen=True)
class SteadyStateResult:
    """Steady-state density matrix and the derived observables."""

    rho: Operator
    n_h: float
    n_v: float
    count_rate: float
    p_excited: float
    residual: float


@dataclass(frozen=True)
class TruncationReport:
    """Outcome of re-solving with one extra Fock level per mode."""

    n_max_low: int
    n_max_high: int
    photons_low: float
    photons_high: float
    relative_change: float
    converged: bool


def build_hamiltonian(params: SystemParams, delta_c: float | None = None) -> Operator:
    """Full Hamiltonian (atom + drive + cavity + Jaynes-Cummings)."""
    layout = params.layout
    cav = params.cavity
    if delta_c is not None:
        cav = CavityParams(cav.g, cav.kappa, delta_c, cav.n_max)
    eps = drive_polarization(params.geometry)
    h_atomic = build_h_atom(params.delta_0, params.zeeman) + build_h_drive(
        params.omega_rabi, eps
    )
    h = embed(h_atomic, ATOM_SLOT, layout)
    h = h + build_h_cav(cav, layout) + build_h_jc(cav, layout)
    return h


def build_collapse(params: SystemParams) -> list[Operator]:
    return collapse_operators(params.gamma, params.cavity, params.layout)


def build_liouvillian(h: Operator, collapse: list[Operator]) -> np.ndarray:
    """Column-stacking superoperator of the master equation (d^2 x d^2).

    Assembled through sparse Kronecker products for speed, returned dense
    for the direct solve.
    """
    h.require_hermitian(1e-12, what="Hamiltonian")
    d = h.layout.total_dim
    for c in collapse:
        if c.layout != h.layout:
            raise ModelError("collapse operator layout does not match Hamiltonian")
    eye = sp.identity(d, dtype=complex, format="csr")
    hs = sp.csr_matrix(h.matrix)
    liouv = -1j * (sp.kron(eye, hs, format="csr") - sp.kron(hs.T, eye, format="csr"))
    for c in collapse:
        cs = sp.csr_matrix(c.matrix)
        cdc = (cs.conj().T @ cs).tocsr()
        liouv = liouv + sp.kron(cs.conj(), cs, format="csr")
        liouv = liouv - 0.5 * (
            sp.kron(eye, cdc, format="csr") + sp.kron(cdc.T, eye, format="csr")
        )
    return liouv.toarray()


@dataclass(frozen=True)
class SteadySolution:
    """Raw output of the linear solve, before observables are attached."""

    rho: np.ndarray
    residual: float
    rcond: float


def _solve_constrained(liouv: np.ndarray, diag_shift: np.ndarray | None = None) -> SteadySolution:
    """Solve L rho = 0 with trace(rho) = 1 via row replacement.

    diag_shift, when given, is added to the diagonal of L first (used by
    the detuning-scan fast path).
    """
    d2 = liouv.shape[0]
    d = math.isqrt(d2)
    if d * d != d2 or liouv.shape != (d2, d2):
        raise ModelError(f"superoperator must be square d^2 x d^2, got {liouv.shape}")

    a = liouv.copy()
    if diag_shift is not None:
        a.flat[:: d2 + 1] += diag_shift

    diag = a.flat[:: d2 + 1].copy()
    off_max = float(np.max(np.abs(a))) if d2 else 0.0
    scale = max(off_max, float(np.max(np.abs(diag))) if d2 else 0.0, 1e-300)
    a /= scale

    trace_row = np.zeros(d2, dtype=complex)
    trace_row[:: d + 1] = 1.0
    a[0, :] = trace_row
    b = np.zeros(d2, dtype=complex)
    b[0] = 1.0

    anorm = float(np.abs(a).sum(axis=0).max())
    with _single_threaded_blas():
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LinAlgWarning)
            lu, piv = sla.lu_factor(a, overwrite_a=True, check_finite=False)
        rcond, info = lapack.zgecon(lu, anorm)
        if info != 0:
            raise NumericalError(f"condition estimate failed (LAPACK info={info})")
        if not np.isfinite(rcond) or rcond < RCOND_MIN:
            raise NonUniqueSteadyStateError(
                "steady state is not unique: constrained system has reciprocal "
                f"condition {rcond:.3e} (degenerate Liouvillian kernel, e.g. an "
                "undriven dark ground manifold)"
            )
        x = sla.lu_solve((lu, piv), b, check_finite=False)

        rho = x.reshape((d, d), order="F")
        rho = 0.5 * (rho + rho.conj().T)

        x_h = rho.flatten(order="F")
        resid_vec = liouv @ x_h
        if diag_shift is not None:
            resid_vec += diag_shift * x_h
        residual = float(np.linalg.norm(resid_vec))
    return SteadySolution(rho=rho, residual=residual, rcond=float(rcond))


def solve_steady(liouv: np.ndarray) -> SteadySolution:
    """Steady state of a superoperator with a one-dimensional kernel."""
    return _solve_constrained(liouv)


def _clip_positivity(rho: np.ndarray) -> np.ndarray:
    """Zero out eigenvalues in [POSITIVITY_FLOOR, 0); larger negativity
    is an error, not noise."""
    vals, vecs = np.linalg.eigh(rho)
    low = float(vals.min())
    if low < POSITIVITY_FLOOR:
        raise NumericalError(
            f"steady-state density matrix has eigenvalue {low:.3e} below "
            f"the tolerated numerical floor {POSITIVITY_FLOOR:.0e}"
        )
    vals = np.clip(vals, 0.0, None)
    rho = (vecs * vals) @ vecs.conj().T
    return rho / np.trace(rho).real


class _ObservableOps:
    """Cached expectation matrices on one layout."""

    def __init__(self, params: SystemParams):
        layout = params.layout
        a_h, a_v = mode_annihilators(params.cavity, layout)
        self.n_h = (a_h.dag() @ a_h).matrix
        self.n_v = (a_v.dag() @ a_v).matrix
        self.p_exc = embed(excited_projector(), ATOM_SLOT, layout).matrix
        self.layout = layout


def _assemble_result(
    rho: np.ndarray, params: SystemParams, ops: _ObservableOps, residual: float
) -> SteadyStateResult:
    tr = float(np.trace(rho).real)
    if abs(tr - 1.0) > TRACE_TOL:
        raise NumericalError(f"steady-state trace {tr} deviates beyond {TRACE_TOL}")
    rho = _clip_positivity(rho)
    n_h = float(np.einsum("ij,ji->", rho, ops.n_h).real)
    n_v = float(np.einsum("ij,ji->", rho, ops.n_v).real)
    p_exc = float(np.einsum("ij,ji->", rho, ops.p_exc).real)
    return SteadyStateResult(
        rho=Operator(ops.layout, rho),
        n_h=n_h,
        n_v=n_v,
        count_rate=2.0 * params.cavity.kappa * (n_h + n_v),
        p_excited=p_exc,
        residual=residual,
    )


def observables(rho: Operator | np.ndarray, params: SystemParams, residual: float = 0.0) -> SteadyStateResult:
    """Derive photon numbers, count rate and excited population from rho."""
    ops = _ObservableOps(params)
    matrix = rho.matrix if isinstance(rho, Operator) else np.asarray(rho, dtype=complex)
    if matrix.shape != (ops.layout.total_dim,) * 2:
        raise ModelError(
            f"density matrix shape {matrix.shape} does not match layout "
            f"{ops.layout.dims}"
        )
    return _assemble_result(matrix, params, ops, residual)


class SystemSolver:
    """Repeated steady-state solves of one system versus cavity detuning.

    The Liouvillian is affine in delta_c (the detuning only multiplies the
    photon-number superoperator, which is diagonal in the vectorized
    basis), so the base Liouvillian is assembled once and each scan point
    costs a single dense factorization.  Instances hold only immutable
    precomputed arrays; solves are independent, deterministic and safe to
    run in parallel workers.
    """

    def __init__(self, params: SystemParams):
        self.params = params
        self.ops = _ObservableOps(params)
        h_static = build_hamiltonian(params, delta_c=0.0)
        self.collapse = build_collapse(params)
        self.liouv_base = build_liouvillian(h_static, self.collapse)
        d = params.layout.total_dim
        n_diag = np.real(np.diag(self.ops.n_h + self.ops.n_v))
        idx = np.arange(d * d)
        # column stacking: element k of vec(rho) is rho[k % d, k // d]
        self.detuning_diag = -1j * (n_diag[idx % d] - n_diag[idx // d])
        base_diag = self.liouv_base.flat[:: d * d + 1].copy()
        self._base_diag = base_diag
        self._fro2_offdiag = float(
            np.sum(np.abs(self.liouv_base) ** 2) - np.sum(np.abs(base_diag) ** 2)
        )

    def _liouv_norm(self, delta_c: float) -> float:
        diag = self._base_diag + delta_c * self.detuning_diag
        return math.sqrt(self._fro2_offdiag + float(np.sum(np.abs(diag) ** 2)))

    def solve(self, delta_c: float) -> SteadyStateResult:
        sol = _solve_constrained(self.liouv_base, delta_c * self.detuning_diag)
        norm = self._liouv_norm(delta_c)
        if sol.residual > RESIDUAL_REL_TOL * max(norm, 1e-300):
            raise NumericalError(
                f"steady-state residual {sol.residual:.3e} exceeds "
                f"{RESIDUAL_REL_TOL:.0e} * |L| = {RESIDUAL_REL_TOL * norm:.3e}"
            )
        return _assemble_result(sol.rho, self.params, self.ops, sol.residual)


def solve_system(params: SystemParams) -> SteadyStateResult:
    """One-shot steady state at the detuning stored in params.cavity."""
    return SystemSolver(params).solve(params.cavity.delta_c)


def converge_truncation(params: SystemParams) -> TruncationReport:
    """Compare total photon number at n_max and n_max + 1.

    Photon totals below PHOTON_FLOOR on both sides count as converged with
    zero relative change (a decoupled cavity is vacuum at any truncation).
    """
    n_low = params.cavity.n_max
    if n_low > 2:
        raise ModelError("truncation check requires n_max <= 2 so n_max + 1 is valid")
    cav = params.cavity
    params_hi = SystemParams(
        gamma=params.gamma,
        delta_0=params.delta_0,
        zeeman=params.zeeman,
        cavity=CavityParams(cav.g, cav.kappa, cav.delta_c, n_low + 1),
        i_rel=params.i_rel,
        geometry=params.geometry,
    )
    low = solve_system(params)
    high = solve_system(params_hi)
    t_low = low.n_h + low.n_v
    t_high = high.n_h + high.n_v
    biggest = max(abs(t_low), abs(t_high))
    if biggest < PHOTON_FLOOR:
        rel = 0.0
    else:
        rel = abs(t_high - t_low) / biggest
    return TruncationReport(
        n_max_low=n_low,
        n_max_high=n_low + 1,
        photons_low=t_low,
        photons_high=t_high,
        relative_change=rel,
        converged=rel <= TRUNCATION_TOL,
    )
