"""Command-line interface: config loading, subcommand dispatch, and
bit-exact tabular output.

Subcommands: scan, budget, trap-fit, resonator, selftest.  Configuration
is JSON; every frequency key carries an explicit _hz suffix and holds a
linear frequency (nu = omega / 2 pi) -- conversion to angular happens
exactly once, here.  Numbers are printed as fixed 9-significant-digit
decimals (never scientific notation), so identical configs produce
byte-identical output regardless of --parallel.

Exit codes: 0 success, 1 config error, 2 model error, 3 numerical error.
Every error path prints a single line ``ERROR(<category>): message`` to
stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.constants import atomic_mass

from . import lineshape, photometrics, resonator, trapchar
from .cavity_model import MAX_FOCK, MIN_FOCK, CavityParams
from .errors import ConfigError, IonCavityError
from .ion_model import DriveGeometry, ZeemanParams
from .steadystate import SystemParams

TWO_PI = 2.0 * math.pi

_REQUIRED = object()


# --------------------------------------------------------------------------
# number / document formatting
# --------------------------------------------------------------------------

def format_number(x) -> str:
    """Fixed 9-significant-digit decimal rendering, never scientific."""
    if isinstance(x, bool):
        raise ValueError("booleans are not numbers")
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot format non-finite number {x}")
    if x == 0.0:
        return "0"
    mant, exp_text = f"{x:.8e}".split("e")
    exp = int(exp_text)
    neg = mant.startswith("-")
    digits = mant.lstrip("-").replace(".", "")
    if exp >= 8:
        out = digits + "0" * (exp - 8)
    elif exp >= 0:
        out = digits[: exp + 1] + "." + digits[exp + 1 :]
    else:
        out = "0." + "0" * (-exp - 1) + digits
    return "-" + out if neg else out


def render_json(obj, indent: int = 0) -> str:
    """Deterministic JSON with insertion-ordered keys and decimal numbers."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        rows = [f"{inner}{json.dumps(str(k))}: {render_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(rows) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        rows = [f"{inner}{render_json(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(rows) + f"\n{pad}]"
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, str):
        return json.dumps(obj)
    return format_number(obj)


# --------------------------------------------------------------------------
# configuration schema
# --------------------------------------------------------------------------

def _positive(v, path):
    if v <= 0:
        raise ConfigError(f"{path}: must be > 0, got {v}")


def _non_negative(v, path):
    if v < 0:
        raise ConfigError(f"{path}: must be >= 0, got {v}")


def _fock_range(v, path):
    if not MIN_FOCK <= v <= MAX_FOCK:
        raise ConfigError(f"{path}: supported range {MIN_FOCK}-{MAX_FOCK}, got {v}")


def _points_range(v, path):
    if v < 3:
        raise ConfigError(f"{path}: need at least 3 scan points, got {v}")


def _angle_deg(v, path):
    if not 0.0 <= v <= 180.0:
        raise ConfigError(f"{path}: must lie in [0, 180] degrees, got {v}")


def _pol_angle_deg(v, path):
    if not 0.0 <= v < 180.0:
        raise ConfigError(f"{path}: must lie in [0, 180) degrees, got {v}")


def _fraction_01(v, path):
    if not 0.0 <= v <= 1.0:
        raise ConfigError(f"{path}: must lie in [0, 1], got {v}")


@dataclass(frozen=True)
class _Field:
    kind: str  # "float" | "int" | "float_list" | "str_list"
    default: object = _REQUIRED
    check: object = None


_SCHEMA: dict[str, dict[str, _Field]] = {
    "atom": {
        "gamma_hz": _Field("float", check=_positive),
        "delta0_hz": _Field("float", default=10.0e6),
        "zeeman_s_hz": _Field("float", default=1.0e6, check=_non_negative),
        # absent -> zeeman_s_hz / 3 (Lande g-factors 2 and 2/3)
        "zeeman_p_hz": _Field("float", default=None, check=_non_negative),
    },
    "cavity": {
        "g_hz": _Field("float", check=_non_negative),
        "kappa_hz": _Field("float", check=_non_negative),
        # standing-wave averaging of the coupling; 1/sqrt(2) is the RMS
        "g_averaging_factor": _Field("float", default=1.0 / math.sqrt(2.0), check=_positive),
        "fock_cutoff": _Field("int", default=2, check=_fock_range),
    },
    "drive": {
        "intensity_sat": _Field("float", default=600.0, check=_non_negative),
        "theta_k_deg": _Field("float", default=45.0, check=_angle_deg),
        "psi_pol_deg": _Field("float", default=35.0, check=_pol_angle_deg),
    },
    "scan": {
        "delta_c_start_hz": _Field("float", default=-450.0e6),
        "delta_c_stop_hz": _Field("float", default=450.0e6),
        "points": _Field("int", default=181, check=_points_range),
    },
    "budget": {
        "wavelength_m": _Field("float", default=369.5e-9, check=_positive),
        "waist_m": _Field("float", default=25.0e-6, check=_positive),
        "fsr_hz": _Field("float", default=70.5e9, check=_positive),
        "fwhm_hz": _Field("float", default=47.4e6, check=_positive),
        "t_out_ppm": _Field("float", default=1000.0, check=_positive),
        "t_in_ppm": _Field("float", default=200.0, check=_non_negative),
        "scatter_loss_ppm": _Field("float", default=400.0, check=_non_negative),
        "detected_rate_per_s": _Field("float", default=8000.0, check=_positive),
        "chain_efficiencies": _Field("float_list", default=(0.19, 0.235, 0.9, 0.24)),
        "chain_labels": _Field(
            "str_list",
            default=("pmt_quantum_efficiency", "prism_transmission", "vacuum_window", "outcoupling"),
        ),
    },
    "trap": {
        "v0_volts": _Field("float", default=300.0, check=_positive),
        "omega_rf_hz": _Field("float", default=21.6e6, check=_positive),
        "mass_amu": _Field("float", default=173.9388664, check=_positive),
        "anisotropy": _Field("float", default=0.5, check=_fraction_01),
    },
    "resonator": {
        "length_m": _Field("float", default=2.126e-3, check=_positive),
        "roc_ir_m": _Field("float", default=25.0e-3, check=_positive),
        "roc_uv_m": _Field("float", default=25.0e-3, check=_positive),
        "wavelength_ir_m": _Field("float", default=739.0e-9, check=_positive),
        "offset_hz": _Field("float", default=2.3e9),
    },
}


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration with defaults applied; sections are plain
    key -> value dicts mirroring the JSON layout."""

    atom: dict
    cavity: dict
    drive: dict
    scan: dict
    budget: dict
    trap: dict
    resonator: dict

    def system_params(self, delta_c: float = 0.0) -> SystemParams:
        """Quantum-model parameters (angular units) for the scan pipeline."""
        atom, cav, drive = self.atom, self.cavity, self.drive
        zeeman = ZeemanParams(
            delta_s=TWO_PI * atom["zeeman_s_hz"], delta_p=TWO_PI * atom["zeeman_p_hz"]
        )
        cavity = CavityParams(
            g=TWO_PI * cav["g_hz"] * cav["g_averaging_factor"],
            kappa=TWO_PI * cav["kappa_hz"],
            delta_c=delta_c,
            n_max=cav["fock_cutoff"],
        )
        geometry = DriveGeometry(
            theta_k=math.radians(drive["theta_k_deg"]),
            psi_pol=math.radians(drive["psi_pol_deg"]),
        )
        return SystemParams(
            gamma=TWO_PI * atom["gamma_hz"],
            delta_0=TWO_PI * atom["delta0_hz"],
            zeeman=zeeman,
            cavity=cavity,
            i_rel=drive["intensity_sat"],
            geometry=geometry,
        )


def _coerce(value, field: _Field, path: str):
    if field.kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        value = float(value)
    elif field.kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
    elif field.kind == "float_list":
        if not isinstance(value, list) or not value:
            raise ConfigError(f"{path}: expected a non-empty list of numbers")
        out = []
        for i, v in enumerate(value):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{path}[{i}]: expected a number, got {v!r}")
            out.append(float(v))
        value = tuple(out)
    elif field.kind == "str_list":
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise ConfigError(f"{path}: expected a list of strings")
        value = tuple(value)
    if field.check is not None and field.kind in ("float", "int"):
        field.check(value, path)
    return value


def _parse_config_obj(raw: object, source: str) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    for section in raw:
        if section not in _SCHEMA:
            raise ConfigError(f"unknown key: {section}")
        if not isinstance(raw[section], dict):
            raise ConfigError(f"{section}: must be an object")
        for key in raw[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key: {section}.{key}")

    sections = {}
    for section, fields in _SCHEMA.items():
        got = raw.get(section, {})
        parsed = {}
        for key, field in fields.items():
            path = f"{section}.{key}"
            if key in got:
                parsed[key] = _coerce(got[key], field, path)
            elif field.default is _REQUIRED:
                raise ConfigError(f"missing key: {path}")
            else:
                parsed[key] = field.default
        sections[section] = parsed

    if sections["atom"]["zeeman_p_hz"] is None:
        sections["atom"]["zeeman_p_hz"] = sections["atom"]["zeeman_s_hz"] / 3.0
    if sections["scan"]["delta_c_stop_hz"] <= sections["scan"]["delta_c_start_hz"]:
        raise ConfigError("scan.delta_c_stop_hz: must exceed scan.delta_c_start_hz")
    budget = sections["budget"]
    if len(budget["chain_labels"]) != len(budget["chain_efficiencies"]):
        raise ConfigError("budget.chain_labels: must pair with budget.chain_efficiencies")
    return RunConfig(**sections)


def parse_config(path: str | Path) -> RunConfig:
    """Load and validate a JSON config file; unknown keys are rejected."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    return _parse_config_obj(raw, str(path))


def bundled_defaults() -> RunConfig:
    """The configuration shipped with the package (headline operating point)."""
    text = resources.files("ioncavity").joinpath("data/paper_defaults.json").read_text()
    return _parse_config_obj(json.loads(text), "paper_defaults.json")


def _load_config(arg: str | None) -> RunConfig:
    return parse_config(arg) if arg else bundled_defaults()


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def run_scan(cfg: RunConfig, points: int | None = None, intensity: float | None = None,
             parallel: int = 1, out: str | None = None) -> int:
    """Cavity-detuning scan as CSV (header delta_c_hz,n_h,n_v,count_rate_per_s)."""
    scan_cfg = dict(cfg.scan)
    if points is not None:
        _points_range(points, "--points")
        scan_cfg["points"] = points
    params = cfg.system_params()
    if intensity is not None:
        _non_negative(intensity, "--intensity")
        params = replace(params, i_rel=float(intensity))
    grid_hz = np.linspace(
        scan_cfg["delta_c_start_hz"], scan_cfg["delta_c_stop_hz"], scan_cfg["points"]
    )
    table = lineshape.scan(params, TWO_PI * grid_hz, parallel=parallel)

    buf = io.StringIO()
    buf.write("delta_c_hz,n_h,n_v,count_rate_per_s\n")
    for hz, n_h, n_v, rate in zip(grid_hz, table.n_h, table.n_v, table.count_rate):
        buf.write(
            f"{format_number(float(hz))},{format_number(n_h)},"
            f"{format_number(n_v)},{format_number(rate)}\n"
        )
    _emit(buf.getvalue(), out)
    return 0


def run_budget(cfg: RunConfig, out: str | None = None) -> int:
    """Photon-budget report as JSON."""
    b = cfg.budget
    gamma = TWO_PI * cfg.atom["gamma_hz"]
    metrics = photometrics.cavity_metrics(
        fsr_hz=b["fsr_hz"],
        fwhm_hz=b["fwhm_hz"],
        t_out_ppm=b["t_out_ppm"],
        t_in_ppm=b["t_in_ppm"],
        scatter_loss_ppm=b["scatter_loss_ppm"],
    )
    g_bare = TWO_PI * cfg.cavity["g_hz"]
    g_eff = g_bare * cfg.cavity["g_averaging_factor"]
    coop = photometrics.cooperativity(g_bare, metrics.kappa, gamma)
    c_eff = photometrics.cooperativity(g_eff, metrics.kappa, gamma)
    p_coll = photometrics.collection_probability(
        metrics.outcoupling_efficiency, metrics.kappa, gamma, c_eff
    )
    omega_full = photometrics.cavity_solid_angle(b["wavelength_m"], b["waist_m"])
    gamma_sc = photometrics.scatter_rate(
        cfg.drive["intensity_sat"], TWO_PI * cfg.atom["delta0_hz"], gamma
    )
    iso = photometrics.isotropic_rate(gamma_sc, omega_full)
    chain = photometrics.efficiency_chain(
        b["detected_rate_per_s"], b["chain_efficiencies"], b["chain_labels"]
    )
    # rate entering the final (outcoupling) stage = photons emerging from the cavity
    cavity_output = chain.stages[-2].rate_per_s if len(chain.stages) >= 2 else chain.detected_per_s
    doc = {
        "cavity": {
            "length_m": metrics.length_m,
            "fsr_hz": metrics.fsr_hz,
            "fwhm_hz": metrics.fwhm_hz,
            "finesse": metrics.finesse,
            "kappa_rad_per_s": metrics.kappa,
            "round_trip_loss_ppm": metrics.round_trip_loss_ppm,
            "outcoupling_efficiency": metrics.outcoupling_efficiency,
        },
        "mode": {
            "wavelength_m": b["wavelength_m"],
            "waist_m": b["waist_m"],
            "solid_angle_sr": omega_full,
            "outcoupling_solid_angle_sr": omega_full / 2.0,
        },
        "scatter": {
            "intensity_sat": cfg.drive["intensity_sat"],
            "delta0_hz": cfg.atom["delta0_hz"],
            "scatter_rate_per_s": gamma_sc,
            "isotropic_rate_per_s": iso,
        },
        "collection": {
            "cooperativity": coop,
            "effective_cooperativity": c_eff,
            "collection_probability": p_coll,
            "predicted_output_rate_per_s": p_coll * gamma_sc,
        },
        "chain": {
            "detected_rate_per_s": chain.detected_per_s,
            "stages": [
                {"label": s.label, "efficiency": s.efficiency, "rate_before_per_s": s.rate_per_s}
                for s in chain.stages
            ],
        },
        "enhancement": {
            "cavity_output_per_s": cavity_output,
            "isotropic_rate_per_s": iso,
            "factor": photometrics.enhancement_factor(cavity_output, iso),
        },
    }
    _emit(render_json(doc) + "\n", out)
    return 0


def _read_trap_csv(path: str | Path) -> list[trapchar.TrapMeasurement]:
    expected = ["u0_volts", "separation_um", "axis", "omega_hz"]
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read measurements {path}: {exc}") from exc
    reader = csv.reader(io.StringIO(text))
    rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    if not rows or [c.strip() for c in rows[0]] != expected:
        raise ConfigError(f"{path}: expected header {','.join(expected)}")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 4:
            raise ConfigError(f"{path}:{lineno}: expected 4 columns")
        try:
            u0, sep_um, omega_hz = float(row[0]), float(row[1]), float(row[3])
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from exc
        out.append(
            trapchar.TrapMeasurement(
                u0_volts=u0,
                separation_m=sep_um * 1e-6,
                axis=row[2].strip(),
                omega=TWO_PI * omega_hz,
            )
        )
    return out


def run_trap_fit(cfg: RunConfig, csv_path: str | Path, out: str | None = None) -> int:
    """Voltage-efficiency fit from a secular-frequency CSV, as JSON."""
    t = cfg.trap
    measurements = _read_trap_csv(csv_path)
    fits = trapchar.fit_eta(
        measurements,
        v0_volts=t["v0_volts"],
        omega_rf=TWO_PI * t["omega_rf_hz"],
        mass_kg=t["mass_amu"] * atomic_mass,
    )
    doc = {
        "fixed": {
            "v0_volts": t["v0_volts"],
            "omega_rf_hz": t["omega_rf_hz"],
            "mass_amu": t["mass_amu"],
        },
        "separations": [
            {
                "separation_um": fit.separation_m * 1e6,
                "eta": fit.eta,
                "anisotropy": fit.anisotropy,
                "sse": fit.sse,
                "rms_error_hz": math.sqrt(fit.sse / fit.n_points) / TWO_PI,
                "n_points": fit.n_points,
            }
            for fit in fits
        ],
    }
    _emit(render_json(doc) + "\n", out)
    return 0


def run_resonator(cfg: RunConfig, out: str | None = None) -> int:
    """Dual-band offset report: Gouy phases and inverted length difference."""
    r = cfg.resonator
    from scipy.constants import c as c_light

    nu_ir = c_light / r["wavelength_ir_m"]
    phi_ir = resonator.gouy_phase(r["length_m"], r["roc_ir_m"])
    phi_uv = resonator.gouy_phase(r["length_m"], r["roc_uv_m"])
    gouy_term = c_light / (TWO_PI * r["length_m"]) * (phi_ir - 0.5 * phi_uv)
    dl = resonator.length_diff_from_offset(
        r["offset_hz"], r["length_m"], r["roc_ir_m"], r["roc_uv_m"], nu_ir
    )
    doc = {
        "geometry": {
            "length_m": r["length_m"],
            "roc_ir_m": r["roc_ir_m"],
            "roc_uv_m": r["roc_uv_m"],
            "wavelength_ir_m": r["wavelength_ir_m"],
            "nu_ir_hz": nu_ir,
        },
        "fsr_hz": c_light / (2.0 * r["length_m"]),
        "gouy_phase_ir_rad": phi_ir,
        "gouy_phase_uv_rad": phi_uv,
        "gouy_term_hz": gouy_term,
        "offset_hz": r["offset_hz"],
        "length_diff_m": dl,
        "length_diff_magnitude_nm": abs(dl) * 1e9,
    }
    _emit(render_json(doc) + "\n", out)
    return 0


# --------------------------------------------------------------------------
# selftest
# --------------------------------------------------------------------------

def _selftest_checks():
    """(name, callable) pairs; each callable returns (ok, detail)."""
    from . import ion_model, qspace, steadystate

    def cg_sum_rules():
        ops = ion_model.lowering_operators()
        total = sum((ops[q].dag() @ ops[q]).matrix for q in (-1, 0, 1))
        ok = np.allclose(total, np.diag([0, 0, 1, 1]), atol=1e-14)
        sel = all(
            ion_model.cg_coeff(m, q, p) == 0.0
            for m in (-0.5, 0.5)
            for q in (-1, 0, 1)
            for p in (-0.5, 0.5)
            if abs(p - (m + q)) > 1e-9
        )
        return ok and sel, "sum rule + selection rules"

    def commutator_truncation():
        a = qspace.annihilation(3)
        comm = (a @ a.dag() - a.dag() @ a).matrix
        ok = np.allclose(comm[:3, :3], np.eye(3), atol=1e-14) and np.isclose(
            comm[3, 3], -3.0
        )
        return ok, "[a, a^dag] = 1 below the truncation edge"

    def two_level_oracle():
        gamma = TWO_PI * 19.6e6
        worst = 0.0
        for omega in (0.3 * gamma, gamma, 3.0 * gamma):
            for delta in (0.0, 0.7 * gamma, -1.3 * gamma):
                layout = qspace.SpaceLayout((2,))
                h = qspace.Operator(
                    layout,
                    np.array([[0, -omega / 2], [-omega / 2, delta]], dtype=complex),
                )
                sm = qspace.Operator(layout, np.array([[0, 1], [0, 0]], dtype=complex))
                liouv = steadystate.build_liouvillian(h, [math.sqrt(gamma) * sm])
                sol = steadystate.solve_steady(liouv)
                p_e = sol.rho[1, 1].real
                worst = max(worst, abs(p_e - lineshape.bloch_two_level(omega, delta, gamma)))
        return worst < 1e-8, f"max |P_e - analytic| = {worst:.2e}"

    def liouvillian_trace_row():
        params = bundled_defaults().system_params()
        solver = steadystate.SystemSolver(params)
        d = params.layout.total_dim
        tr = np.zeros(d * d, dtype=complex)
        tr[:: d + 1] = 1.0
        dev = float(np.max(np.abs(tr @ solver.liouv_base)))
        return dev < 1e-6, f"|vec(I)^T L| = {dev:.2e}"

    def steady_invariants():
        cfg = bundled_defaults()
        params = cfg.system_params()
        params = SystemParams(
            gamma=params.gamma, delta_0=params.delta_0, zeeman=params.zeeman,
            cavity=CavityParams(params.cavity.g, params.cavity.kappa, 0.0, 1),
            i_rel=params.i_rel, geometry=params.geometry,
        )
        res = steadystate.solve_system(params)
        tr_ok = abs(res.rho.trace().real - 1.0) < 1e-9
        eig_ok = float(np.linalg.eigvalsh(res.rho.matrix).min()) > -1e-10
        return tr_ok and eig_ok, f"n_h+n_v = {res.n_h + res.n_v:.3e}"

    def detuning_symmetry():
        cfg = bundled_defaults()
        base = cfg.system_params()
        params = SystemParams(
            gamma=base.gamma, delta_0=0.0, zeeman=ZeemanParams(0.0, 0.0),
            cavity=CavityParams(base.cavity.g, base.cavity.kappa, 0.0, 1),
            i_rel=50.0, geometry=base.geometry,
        )
        solver = steadystate.SystemSolver(params)
        worst = 0.0
        for dc in (TWO_PI * 30e6, TWO_PI * 90e6):
            up = solver.solve(dc).count_rate
            dn = solver.solve(-dc).count_rate
            worst = max(worst, abs(up - dn) / max(up, 1e-300))
        return worst < 1e-6, f"max asymmetry = {worst:.2e}"

    def photometric_regressions():
        m = photometrics.cavity_metrics(fsr_hz=70.5e9, fwhm_hz=18.6e6, t_out_ppm=1000.0)
        ok = abs(m.finesse - 3790.0) / 3790.0 < 0.01
        isat = photometrics.saturation_intensity(369.5e-9, TWO_PI * 19.6e6)
        ok = ok and abs(isat - 507.0) / 507.0 < 0.01
        chain = photometrics.efficiency_chain(8000.0, (0.19, 0.235, 0.9, 0.24))
        ok = ok and abs(chain.stages[-1].rate_per_s - 800000.0) / 800000.0 < 0.05
        return ok, "finesse / I_sat / ladder"

    def resonator_round_trip():
        geom = resonator.MirrorGeometry(
            length_ir_m=2.126e-3, length_uv_m=2.126e-3 - 12e-9,
            roc_ir_m=25e-3, roc_uv_m=25e-3, nu_ir_hz=405.6e12,
        )
        df = resonator.dual_band_offset(geom)
        dl = resonator.length_diff_from_offset(df, geom.length_uv_m, 25e-3, 25e-3, geom.nu_ir_hz)
        rel = abs(dl - (-12e-9)) / 12e-9
        return rel < 1e-3, f"round-trip error {rel:.2e}"

    def trap_round_trip():
        q = trapchar.quadrupole_from_eta(0.45, 90e-6, 0.5)
        mass = 173.9388664 * atomic_mass
        meas = []
        for u0 in (-2.0, 0.0, 2.0, 4.0):
            for axis, q_i in (("x", q.q_x), ("y", q.q_y)):
                w = trapchar.secular_frequency(u0, 300.0, TWO_PI * 21.6e6, q_i, mass)
                meas.append(trapchar.TrapMeasurement(u0, 180e-6, axis, w))
        fit = trapchar.fit_eta(meas, v0_volts=300.0, omega_rf=TWO_PI * 21.6e6, mass_kg=mass)[0]
        return abs(fit.eta - 0.45) < 1e-6, f"eta = {fit.eta:.6f}"

    return [
        ("cg-coefficients", cg_sum_rules),
        ("fock-commutator", commutator_truncation),
        ("two-level-bloch-oracle", two_level_oracle),
        ("liouvillian-trace-preservation", liouvillian_trace_row),
        ("steady-state-invariants", steady_invariants),
        ("detuning-symmetry", detuning_symmetry),
        ("photometric-regressions", photometric_regressions),
        ("resonator-round-trip", resonator_round_trip),
        ("trap-fit-round-trip", trap_round_trip),
    ]


def run_selftest() -> int:
    """Run the oracle and invariant battery, print a pass/fail table."""
    failures = 0
    for name, check in _selftest_checks():
        try:
            ok, detail = check()
        except Exception as exc:  # a crashed check is a failure, not an abort
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        status = "PASS" if ok else "FAIL"
        if not ok:
            failures += 1
        print(f"{status}  {name:<32} {detail}")
    print(f"{'OK' if failures == 0 else 'FAILED'}: {failures} of "
          f"{len(_selftest_checks())} checks failed")
    return 0 if failures == 0 else 3


# --------------------------------------------------------------------------
# argument parsing / dispatch
# --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="ioncavity", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config path (default: bundled defaults)")
    common.add_argument("--out", help="output file (default: stdout)")

    p_scan = sub.add_parser("scan", parents=[common], help="cavity-detuning scan (CSV)")
    p_scan.add_argument("--points", type=int, help="override scan.points")
    p_scan.add_argument("--intensity", type=float, help="override drive.intensity_sat")
    p_scan.add_argument("--parallel", type=int, default=1, help="worker processes")

    sub.add_parser("budget", parents=[common], help="photon-budget report (JSON)")

    p_trap = sub.add_parser("trap-fit", parents=[common], help="fit voltage efficiency (JSON)")
    p_trap.add_argument("measurements", help="CSV with header u0_volts,separation_um,axis,omega_hz")

    sub.add_parser("resonator", parents=[common], help="dual-band offset report (JSON)")
    sub.add_parser("selftest", help="run the oracle/invariant battery")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "selftest":
            return run_selftest()
        cfg = _load_config(args.config)
        if args.command == "scan":
            return run_scan(cfg, points=args.points, intensity=args.intensity,
                            parallel=args.parallel, out=args.out)
        if args.command == "budget":
            return run_budget(cfg, out=args.out)
        if args.command == "trap-fit":
            return run_trap_fit(cfg, args.measurements, out=args.out)
        if args.command == "resonator":
            return run_resonator(cfg, out=args.out)
        raise ConfigError(f"unknown command {args.command!r}")
    except IonCavityError as exc:
        message = " ".join(str(exc).split())
        print(f"ERROR({exc.category}): {message}", file=sys.stderr)
        return {"config": 1, "model": 2, "numerical": 3}.get(exc.category, 1)


if __name__ == "__main__":
    sys.exit(main())
