"""Shared helpers for the test suite: physical constants, a parameter
factory at the headline operating point, and independent oracles
(general Racah Clebsch-Gordan formula, two-level Bloch steady state)
kept deliberately separate from the package implementation.
"""

import math

from ioncavity import CavityParams, DriveGeometry, SystemParams, ZeemanParams

TWO_PI = 2.0 * math.pi
MHZ = TWO_PI * 1e6

GAMMA = 19.6 * MHZ
KAPPA = 23.7 * MHZ
G_BARE = 3.92 * MHZ
G_EFF = G_BARE / math.sqrt(2.0)  # standing-wave averaged coupling
DELTA0 = 10.0 * MHZ
ZEEMAN_S = 1.0 * MHZ
THETA_K = math.radians(45.0)
PSI_POL = math.radians(35.0)


def make_params(
    i_rel: float = 600.0,
    n_max: int = 2,
    delta_c: float = 0.0,
    gamma: float = GAMMA,
    kappa: float = KAPPA,
    g: float = G_EFF,
    delta_0: float = DELTA0,
    zeeman_s: float = ZEEMAN_S,
    zeeman_p: float | None = None,
    theta_k: float = THETA_K,
    psi_pol: float = PSI_POL,
) -> SystemParams:
    """System parameters at the headline operating point, with overrides."""
    if zeeman_p is None:
        zeeman_p = zeeman_s / 3.0
    return SystemParams(
        gamma=gamma,
        delta_0=delta_0,
        zeeman=ZeemanParams(delta_s=zeeman_s, delta_p=zeeman_p),
        cavity=CavityParams(g=g, kappa=kappa, delta_c=delta_c, n_max=n_max),
        i_rel=i_rel,
        geometry=DriveGeometry(theta_k=theta_k, psi_pol=psi_pol),
    )


def _fact(x: float) -> int:
    ix = round(x)
    if abs(x - ix) > 1e-9 or ix < 0:
        raise ValueError(f"factorial argument {x} is not a non-negative integer")
    return math.factorial(ix)


def racah_cg(j1, m1, j2, m2, J, M) -> float:
    """General Clebsch-Gordan coefficient <j1 m1; j2 m2 | J M> via the
    Racah closed form, Condon-Shortley convention.

    Independent oracle: shares no code with the package implementation.
    """
    if abs(m1) > j1 or abs(m2) > j2 or abs(M) > J:
        return 0.0
    if abs(m1 + m2 - M) > 1e-9:
        return 0.0
    if J < abs(j1 - j2) or J > j1 + j2:
        return 0.0
    pre = (
        (2 * J + 1)
        * _fact(j1 + j2 - J)
        * _fact(j1 - j2 + J)
        * _fact(-j1 + j2 + J)
        / _fact(j1 + j2 + J + 1)
    )
    pre *= (
        _fact(J + M)
        * _fact(J - M)
        * _fact(j1 - m1)
        * _fact(j1 + m1)
        * _fact(j2 - m2)
        * _fact(j2 + m2)
    )
    k_min = max(0, round(j2 - J - m1), round(j1 + m2 - J))
    k_max = min(round(j1 + j2 - J), round(j1 - m1), round(j2 + m2))
    total = 0.0
    for k in range(k_min, k_max + 1):
        denom = (
            _fact(k)
            * _fact(j1 + j2 - J - k)
            * _fact(j1 - m1 - k)
            * _fact(j2 + m2 - k)
            * _fact(J - j2 + m1 + k)
            * _fact(J - j1 - m2 + k)
        )
        total += (-1) ** k / denom
    return math.sqrt(pre) * total


def bloch_pe_oracle(omega: float, delta: float, gamma: float) -> float:
    """Two-level optical Bloch steady-state excited population."""
    return (omega**2 / 4.0) / (delta**2 + gamma**2 / 4.0 + omega**2 / 2.0)
