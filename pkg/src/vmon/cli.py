"""Command-line front end: spectra, sweeps, fits and pulse simulations.

Every command reads a JSON config, validates it against a strict schema
(unknown keys are rejected, defaults are materialized), echoes the effective
config next to its outputs for reproducibility, and writes JSON/CSV results.
Exit codes: 0 success, 1 computational failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .analysis import ClassificationError, classify_levels, flux_sweep, transition_table
from .circuit import (
    CircuitParams,
    derived_energies,
    gzz_perturbative,
    harmonic_mode_frequencies,
    reduced_from_lines,
)
from .constants import PHI0
from .dynamics import (
    DissipationParams,
    IntegrationError,
    conditional_spectroscopy,
    rabi_trace,
)
from .eigensolver import EigensolverError, converged_spectrum
from .fitting import FitError, fit, load_line_data
from .grid import GridConfigurationError, GridSpec, default_grid


class ConfigError(ValueError):
    pass


class Field:
    def __init__(self, kind, default=None, required=False, check=None, doc=""):
        self.kind = kind
        self.default = default
        self.required = required
        self.check = check
        self.doc = doc


def _positive(x):
    return x > 0


def _nonneg(x):
    return x >= 0


SCHEMA = {
    "circuit": {
        "ic_a": Field(float, required=True, check=_positive, doc="junction critical current, A"),
        "c_f": Field(float, required=True, check=_positive, doc="shunt capacitance, F"),
        "l_h": Field(float, check=_positive, doc="loop inductance, H"),
        "l_over_lj": Field(float, check=_positive, doc="loop inductance as a fraction of L_J"),
        "d": Field(float, default=0.0, check=lambda x: abs(x) < 1, doc="junction asymmetry"),
        "phi_b": Field(float, default=0.0, doc="flux bias, Phi0 units"),
    },
    "grid": {
        "n_plus": Field(int, default=64, check=lambda x: x >= 8 and x % 2 == 0),
        "n_minus": Field(int, default=256, check=lambda x: x >= 8),
        "lambda_minus": Field(float, check=_positive, doc="override box half-width, rad"),
    },
    "solver": {
        "k": Field(int, default=10, check=lambda x: 1 <= x <= 32),
        "target_ghz": Field(float, default=1e-3, check=lambda x: x >= 1e-4),
        "tol_ghz": Field(float, default=1e-6, check=_positive),
        "seed": Field(int, default=0),
        "max_doublings": Field(int, default=3, check=lambda x: 1 <= x <= 4),
    },
    "sweep": {
        "flux_min": Field(float, default=-0.5, check=lambda x: -1 <= x <= 1),
        "flux_max": Field(float, default=0.5, check=lambda x: -1 <= x <= 1),
        "points": Field(int, default=51, check=_positive),
        "k": Field(int, default=12, check=lambda x: 6 <= x <= 32),
        "refine": Field(bool, default=True),
    },
    "fit": {
        "free": Field(list, default=["ic", "c", "l"]),
        "k": Field(int, default=10, check=lambda x: 2 <= x <= 32),
        "n_plus": Field(int, default=48, check=lambda x: x >= 8 and x % 2 == 0),
        "n_minus": Field(int, default=160, check=lambda x: x >= 8),
        "maxfev": Field(int, default=500, check=_positive),
        "verify_final": Field(bool, default=True),
    },
    "dissipation": {
        "t1_qubit_us": Field(float, default=0.6, check=_positive),
        "t1_ancilla_us": Field(float, check=_positive),
        "tphi_qubit_us": Field(float, check=_positive),
        "tphi_ancilla_us": Field(float, check=_positive),
        "t2_rabi_us": Field(float, default=0.5, check=_positive),
    },
    "pulse": {
        "model": Field(str, default="exact", check=lambda x: x in ("exact", "given")),
        "f_qb_ghz": Field(float, check=_positive),
        "f_a_ghz": Field(float, check=_positive),
        "g_ghz": Field(float, check=_positive),
        "conditioning_amps_ghz": Field(list, default=[0.0, 0.0125, 0.025, 0.05]),
        "spectroscopy_amp_ghz": Field(float, default=0.006, check=_positive),
        "fs_min_ghz": Field(float, check=_positive),
        "fs_max_ghz": Field(float, check=_positive),
        "fs_points": Field(int, default=71, check=lambda x: x >= 5),
        "dt_ns": Field(float, check=_positive),
    },
    "rabi": {
        "amp_ghz": Field(float, default=0.01, check=_positive),
        "max_ns": Field(float, default=1500.0, check=_positive),
        "step_ns": Field(float, default=4.0, check=_positive),
    },
}


def validate_config(raw: dict) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    out = {}
    for section, fields in SCHEMA.items():
        given = raw.get(section, {})
        if not isinstance(given, dict):
            raise ConfigError(f"section {section!r} must be an object")
        unknown = set(given) - set(fields)
        if unknown:
            raise ConfigError(f"unknown keys in {section!r}: {sorted(unknown)}")
        sec = {}
        for name, f in fields.items():
            if name in given and given[name] is not None:
                val = given[name]
                if f.kind in (int, float) and isinstance(val, bool):
                    raise ConfigError(f"{section}.{name}: expected {f.kind.__name__}")
                if f.kind is float and isinstance(val, int):
                    val = float(val)
                if not isinstance(val, f.kind):
                    raise ConfigError(f"{section}.{name}: expected {f.kind.__name__}")
                if f.check is not None and not f.check(val):
                    raise ConfigError(f"{section}.{name}: invalid value {val!r}")
                sec[name] = val
            elif f.required:
                raise ConfigError(f"missing required key {section}.{name}")
            else:
                sec[name] = f.default
        out[section] = sec
    extra = set(raw) - set(SCHEMA)
    if extra:
        raise ConfigError(f"unknown config sections: {sorted(extra)}")
    return out


def circuit_from_config(cfg: dict) -> CircuitParams:
    c = cfg["circuit"]
    if (c["l_h"] is None) == (c["l_over_lj"] is None):
        raise ConfigError("circuit needs exactly one of l_h or l_over_lj")
    if c["l_h"] is not None:
        l = c["l_h"]
    else:
        l = c["l_over_lj"] * PHI0 / (2.0 * math.pi * c["ic_a"])
    try:
        return CircuitParams(ic=c["ic_a"], c=c["c_f"], l=l, d=c["d"], phi_b=c["phi_b"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def grid_from_config(cfg: dict, p: CircuitParams) -> GridSpec:
    g = cfg["grid"]
    base = default_grid(p, n_plus=g["n_plus"], n_minus=g["n_minus"])
    if g["lambda_minus"] is not None:
        base = GridSpec(base.n_plus, base.n_minus, g["lambda_minus"])
    return base


def dissipation_from_config(cfg: dict) -> DissipationParams:
    d = cfg["dissipation"]
    t1q = d["t1_qubit_us"] * 1e-6
    t1a = (d["t1_ancilla_us"] or d["t1_qubit_us"]) * 1e-6
    if d["tphi_qubit_us"] is not None:
        tphi_q = d["tphi_qubit_us"] * 1e-6
    else:
        tphi_q = DissipationParams.from_coherence(t1q, d["t2_rabi_us"] * 1e-6).tphi_qubit
    tphi_a = d["tphi_ancilla_us"] * 1e-6 if d["tphi_ancilla_us"] is not None else tphi_q
    return DissipationParams(
        t1_qubit=t1q, t1_ancilla=t1a, tphi_qubit=tphi_q, tphi_ancilla=tphi_a
    )


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def write_json(payload: dict, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def echo_config(cfg: dict, args, out_dir: str):
    effective = {
        "config": cfg,
        "command": args.command,
        "out": out_dir,
        "jobs": args.jobs,
        "quadratic": bool(args.quadratic),
        "version": __version__,
    }
    write_json(effective, os.path.join(out_dir, "effective_config.json"))
    print(json.dumps(effective, indent=2, sort_keys=True, default=_json_default))


def _reduced_model(cfg, p, quadratic, seed):
    pl = cfg["pulse"]
    if pl["model"] == "given":
        for key in ("f_qb_ghz", "f_a_ghz", "g_ghz"):
            if pl[key] is None:
                raise ConfigError(f"pulse.model=given requires pulse.{key}")
        return reduced_from_lines(
            pl["f_qb_ghz"] + pl["g_ghz"], pl["f_a_ghz"] + pl["g_ghz"], pl["g_ghz"]
        )
    sol = cfg["solver"]
    spec = converged_spectrum(
        p,
        max(sol["k"], 10),
        target=sol["target_ghz"],
        mode="quadratic" if quadratic else "full",
        grid=grid_from_config(cfg, p),
        tol=sol["tol_ghz"],
        seed=seed,
        max_doublings=sol["max_doublings"],
    )
    spec.metadata["mode"] = "quadratic" if quadratic else "full"
    trans = transition_table(classify_levels(spec, p))
    return reduced_from_lines(trans.f_qubit_line, trans.f_ancilla_line, -trans.chi / 2.0)


def cmd_energies(cfg, args, out_dir):
    p = circuit_from_config(cfg)
    s = derived_energies(p)
    payload = {
        "e_j_ghz": s.e_j,
        "e_c_ghz": s.e_c,
        "e_l_ghz": s.e_l,
        "l_j_h": s.l_j,
        "l_h": p.l,
        "gzz_over_pi_mhz": None,
        "g_ghz": None,
        "f_qb_harmonic_ghz": None,
        "f_a_harmonic_ghz": None,
    }
    if p.phi_b == 0.0:
        f_qb, f_a = harmonic_mode_frequencies(p)
        g = gzz_perturbative(p)
        payload.update(
            {
                "f_qb_harmonic_ghz": f_qb,
                "f_a_harmonic_ghz": f_a,
                "g_ghz": g,
                "gzz_over_pi_mhz": 2.0e3 * g,
            }
        )
    write_json(payload, os.path.join(out_dir, "energies.json"))
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def cmd_spectrum(cfg, args, out_dir):
    p = circuit_from_config(cfg)
    sol = cfg["solver"]
    if sol["k"] < 6:
        raise ConfigError("spectrum requires solver.k >= 6 (classification needs 6 levels)")
    mode = "quadratic" if args.quadratic else "full"
    spec = converged_spectrum(
        p,
        sol["k"],
        target=sol["target_ghz"],
        mode=mode,
        grid=grid_from_config(cfg, p),
        tol=sol["tol_ghz"],
        seed=args.seed if args.seed is not None else sol["seed"],
        max_doublings=sol["max_doublings"],
    )
    spec.metadata["mode"] = mode
    table = classify_levels(spec, p)
    payload = {
        "mode": mode,
        "grid": spec.grid.as_dict(),
        "certificate_ghz": spec.metadata.get("certificate"),
        "levels": [
            {
                "index": lev.index,
                "label": lev.name,
                "energy_ghz": lev.energy,
                "excitation_ghz": lev.excitation,
                "parity": lev.parity,
                "overlap": lev.overlap,
                "provenance": lev.provenance,
                "flagged": lev.flagged,
            }
            for lev in table
        ],
        "refinement": [
            {
                "grid": step.grid.as_dict(),
                "raw_change_ghz": None if math.isinf(step.raw_change) else step.raw_change,
                "extrapolated_change_ghz": None
                if math.isinf(step.extrapolated_change)
                else step.extrapolated_change,
            }
            for step in spec.history
        ],
    }
    try:
        trans = transition_table(table)
        payload["transitions"] = {
            "f_qubit_line_ghz": trans.f_qubit_line,
            "f_ancilla_line_ghz": trans.f_ancilla_line,
            "f_qubit_12_ghz": trans.f_qubit_12,
            "chi_ghz": trans.chi,
            "alpha_ghz": trans.alpha,
        }
    except ValueError as exc:
        payload["transitions"] = None
        payload["transitions_error"] = str(exc)
    write_json(payload, os.path.join(out_dir, "spectrum.json"))
    print(json.dumps(payload, indent=2, sort_keys=True, default=_json_default))
    return 0


def cmd_sweep(cfg, args, out_dir):
    p = circuit_from_config(cfg)
    sw = cfg["sweep"]
    if sw["points"] < 1:
        raise ConfigError("sweep.points must be positive")
    fluxes = np.linspace(sw["flux_min"], sw["flux_max"], sw["points"])
    result = flux_sweep(
        p,
        fluxes,
        k=sw["k"],
        seed=args.seed if args.seed is not None else cfg["solver"]["seed"],
        refine=sw["refine"],
        jobs=args.jobs,
    )
    result.write_csv(os.path.join(out_dir, "sweep.csv"))
    flagged = [pt.flux for pt in result.points if pt.flags]
    print(f"sweep: {len(result.points)} flux points -> sweep.csv"
          + (f" ({len(flagged)} flagged)" if flagged else ""))
    return 0


def cmd_fit(cfg, args, out_dir):
    if not args.data:
        raise ConfigError("fit requires --data PATH")
    if not os.path.exists(args.data):
        raise ConfigError(f"data file not found: {args.data}")
    data = load_line_data(args.data)
    init = circuit_from_config(cfg)
    f = cfg["fit"]
    result = fit(
        data,
        init,
        free=tuple(f["free"]),
        n_plus=f["n_plus"],
        n_minus=f["n_minus"],
        k=f["k"],
        seed=args.seed if args.seed is not None else cfg["solver"]["seed"],
        maxfev=f["maxfev"],
        jobs=args.jobs,
    )
    if f["verify_final"]:
        from .fitting import model_lines

        verification = {}
        for flux in data.fluxes():
            coarse = model_lines(result.params, flux, f["n_plus"], f["n_minus"], f["k"])
            fine = model_lines(
                result.params, flux, 2 * f["n_plus"], 2 * f["n_minus"] - 1, f["k"]
            )
            verification[repr(flux)] = {
                "qubit_shift_ghz": fine["qubit"] - coarse["qubit"],
                "ancilla_shift_ghz": fine["ancilla"] - coarse["ancilla"],
            }
        result.verification = verification
    result.write_json(os.path.join(out_dir, "fit.json"))
    print(json.dumps(result.as_dict(), indent=2, sort_keys=True, default=_json_default))
    return 0


def cmd_pulse(cfg, args, out_dir):
    p = circuit_from_config(cfg)
    seed = args.seed if args.seed is not None else cfg["solver"]["seed"]
    m = _reduced_model(cfg, p, args.quadratic, seed)
    pl = cfg["pulse"]
    fs_lo = pl["fs_min_ghz"] or m.conditional_qubit_line - 0.06
    fs_hi = pl["fs_max_ghz"] or m.qubit_line + 0.06
    if fs_hi <= fs_lo:
        raise ConfigError("pulse fs window is empty")
    fs = np.linspace(fs_lo, fs_hi, pl["fs_points"])
    traces = conditional_spectroscopy(
        m,
        dissipation_from_config(cfg),
        fs,
        pl["conditioning_amps_ghz"],
        spectroscopy_amp=pl["spectroscopy_amp_ghz"],
        dt=pl["dt_ns"],
    )
    traces.write_csv(os.path.join(out_dir, "pulse_trace.csv"))
    dips = traces.dips_json()
    dips["model"] = {"f_qb_ghz": m.f_qb, "f_a_ghz": m.f_a, "g_ghz": m.g}
    write_json(dips, os.path.join(out_dir, "pulse_dips.json"))
    print(json.dumps(dips, indent=2, sort_keys=True, default=_json_default))
    return 0


def cmd_rabi(cfg, args, out_dir):
    p = circuit_from_config(cfg)
    seed = args.seed if args.seed is not None else cfg["solver"]["seed"]
    m = _reduced_model(cfg, p, args.quadratic, seed)
    rb = cfg["rabi"]
    durations = np.arange(0.0, rb["max_ns"] + 1e-9, rb["step_ns"])
    result = rabi_trace(
        m, dissipation_from_config(cfg), amp=rb["amp_ghz"], durations=durations,
        dt=cfg["pulse"]["dt_ns"],
    )
    with open(os.path.join(out_dir, "rabi_trace.csv"), "w", encoding="utf-8") as fh:
        fh.write("duration_ns,p_excited\n")
        for t, pe in zip(result.durations, result.p_excited):
            fh.write(f"{t!r},{pe!r}\n")
    payload = {
        "amplitude_ghz": result.amplitude,
        "frequency_ghz": result.frequency,
        "decay_time_ns": result.decay_time,
        "flags": result.flags,
    }
    write_json(payload, os.path.join(out_dir, "rabi_fit.json"))
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


COMMANDS = {
    "energies": cmd_energies,
    "spectrum": cmd_spectrum,
    "sweep": cmd_sweep,
    "fit": cmd_fit,
    "pulse": cmd_pulse,
    "rabi": cmd_rabi,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vmon",
        description="Two inductively coupled transmons as a V-shape artificial atom: "
        "spectra, flux sweeps, spectroscopy fits and pulsed dynamics.",
    )
    parser.add_argument("command", choices=sorted(COMMANDS), help="what to compute")
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--data", default=None, help="measured line CSV (fit)")
    parser.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                        help="parallel solves where applicable")
    parser.add_argument("--seed", type=int, default=None, help="override solver seed")
    parser.add_argument("--quadratic", action="store_true",
                        help="use the harmonic-oracle Hamiltonian")
    parser.add_argument("--version", action="version", version=f"vmon {__version__}")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if not os.path.exists(args.config):
            raise ConfigError(f"config file not found: {args.config}")
        with open(args.config, encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from exc
        cfg = validate_config(raw)
        os.makedirs(args.out, exist_ok=True)
        echo_config(cfg, args, args.out)
        return COMMANDS[args.command](cfg, args, args.out)
    except (ConfigError, GridConfigurationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        # bad numeric input reaching a library precondition (dt, k, ranges)
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (EigensolverError, ClassificationError, FitError, IntegrationError) as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
