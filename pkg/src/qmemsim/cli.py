"""Scenario runner: declarative TOML configs in, CSV/JSON artifacts out.

Usage:
    qmemsim run CONFIG [--out DIR] [--validate-only] [--grid-scale F]
                       [--strict]
    qmemsim list

CONFIG is a path or the name of a bundled scenario (see ``qmemsim list``).
Artifacts: ``traces.csv`` (t plus re/im/intensity per labeled field),
``report.json`` (efficiencies/criteria plus convergence metadata) and
``sweep.csv`` for parameter sweeps.  Exit codes: 0 success, 2 validation
error, 3 convergence failure, 4 numeric-regime warning under --strict.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__, certify, echoprotocols, numcore, slowlight
from .numcore import (ComplexEnvelope, PulseShape, TimeGrid, TransferFunction,
                      apply_transfer, render_pulse, shaded_area_efficiency)
from .twolevel import ConvergenceNotMet, PropagationConfig, StepTooCoarse

SCENARIO_DIR = Path(__file__).parent / "scenarios"

# every key a config may contain, per section; unknown keys are rejected
_SCHEMA = {
    "": {"schema_version", "kind", "description", "figure"},
    "echo": {"protocol", "d", "signal_width", "signal_area_over_pi", "tau",
             "pulse_ratio", "t2", "t3", "chs", "chs_sweep_halfwidth",
             "direction", "nz", "convergence"},
    "slowlight": {"protocol", "d", "gamma0", "gamma", "rabi", "detuning",
                  "storage_event", "retrieval_event", "nz", "convergence"},
    "transfer": {"kind", "d", "gamma0", "gamma", "rabi", "signal_width",
                 "cut", "t_max"},
    "certify": {"task", "d_values", "n_atoms", "p_values", "eta_values",
                "p_dc_values", "d_grid", "n_max"},
    "sweep": {"quantity", "d_values", "pulse_ratios", "d_min", "d_max",
              "points", "signal_width", "tau", "nz"},
    "output": {"traces"},
}
_KINDS = ("echo", "slowlight", "transfer", "certify", "sweep")


class ValidationError(ValueError):
    pass


def _fmt(x) -> str:
    return "%.17g" % x


def _write_csv(path: Path, header, columns) -> None:
    lines = [",".join(header)]
    rows = len(columns[0])
    for i in range(rows):
        lines.append(",".join(_fmt(col[i]) for col in columns))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_traces(path: Path, times, fields: dict) -> None:
    header = ["t"]
    columns = [np.asarray(times)]
    for label, samples in fields.items():
        samples = np.asarray(samples)
        header += [f"{label}_re", f"{label}_im", f"{label}_intensity"]
        columns += [samples.real, samples.imag, np.abs(samples) ** 2]
    _write_csv(path, header, columns)


def _write_report(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def validate_config(cfg: dict) -> None:
    """Strictly validate a parsed scenario against the schema."""
    if not isinstance(cfg, dict):
        raise ValidationError("config must be a table")
    top = {k: v for k, v in cfg.items() if not isinstance(v, dict)}
    unknown = set(top) - _SCHEMA[""]
    if unknown:
        raise ValidationError(f"unknown top-level keys: {sorted(unknown)}")
    if cfg.get("schema_version") != 1:
        raise ValidationError("schema_version must be 1")
    kind = cfg.get("kind")
    if kind not in _KINDS:
        raise ValidationError(f"kind must be one of {_KINDS}")
    if kind not in cfg or not isinstance(cfg[kind], dict):
        raise ValidationError(f"missing [{kind}] section")
    for section, body in cfg.items():
        if not isinstance(body, dict):
            continue
        if section not in _SCHEMA:
            raise ValidationError(f"unknown section [{section}]")
        if section != kind and section not in ("output",):
            raise ValidationError(
                f"section [{section}] does not match kind '{kind}'")
        unknown = set(body) - _SCHEMA[section]
        if unknown:
            raise ValidationError(
                f"unknown keys in [{section}]: {sorted(unknown)}")
    sec = cfg[kind]
    for key, val in sec.items():
        if key in ("protocol", "task", "quantity", "kind", "direction") \
                and not isinstance(val, str):
            raise ValidationError(f"{key} must be a string")
    # physical parameter gates mirrored from the module preconditions
    if kind == "echo":
        if sec.get("d", 1.0) < 0:
            raise ValidationError("optical depth must be non-negative")
        if sec.get("signal_area_over_pi", 0.05) > 0.1:
            raise ValidationError("signal area above the perturbative gate")
    if kind == "slowlight" and sec.get("protocol") == "raman":
        if sec.get("detuning", 1000.0) < 10.0 * sec.get("gamma", 10.0):
            raise ValidationError("raman scenario needs detuning >= 10*gamma")


# ---------------------------------------------------------------------------
# Scenario runners
# ---------------------------------------------------------------------------

def _run_echo(sec: dict, out: Path, grid_scale: float, write_traces: bool):
    protocol = sec.get("protocol", "2pe")
    d = float(sec.get("d", 2.0))
    width = float(sec.get("signal_width", 1.0))
    area = float(sec.get("signal_area_over_pi", 0.05)) * np.pi
    nz = int(sec.get("nz", 48))
    convergence = bool(sec.get("convergence", False))
    signal = PulseShape("gaussian", 0.0, width, area)
    cfg = PropagationConfig(d=d, nz=nz)

    if protocol == "2pe":
        ratio = float(sec.get("pulse_ratio", 2.0))
        tau = float(sec.get("tau", 8.0 * width))
        pi_pulse = PulseShape("gaussian", 0.0, width / ratio, np.pi)
        rep = echoprotocols.run_2pe(cfg, signal, pi_pulse, tau,
                                    grid_scale=grid_scale,
                                    convergence=convergence)
    elif protocol in ("crib_fwd", "crib_bwd"):
        tau = float(sec.get("tau", 6.0 * width))
        direction = "forward" if protocol == "crib_fwd" else "backward"
        rep = echoprotocols.run_crib(cfg, signal, tau, direction,
                                     grid_scale=grid_scale,
                                     convergence=convergence)
    elif protocol == "rose":
        t2 = float(sec.get("t2", 10.0 * width))
        t3 = float(sec.get("t3", 25.0 * width))
        if sec.get("chs", False):
            w = width / 10.0
            sweep_half = float(sec.get("chs_sweep_halfwidth", 4.0 / width))
            chirp = sweep_half / w
            amp = np.sqrt(5.0 * chirp) * 1.2
            shape = PulseShape("sech-chirped", 0.0, w, amp * np.pi * w,
                               chirp=chirp)
        else:
            shape = PulseShape("gaussian", 0.0, width / 10.0, np.pi)
        rep = echoprotocols.run_rose(cfg, signal, (t2, t3, shape),
                                     grid_scale=grid_scale,
                                     convergence=convergence)
    else:
        raise ValidationError(f"unknown echo protocol {protocol!r}")

    res = rep.result
    if write_traces:
        echo = res.output.samples.copy()
        _write_traces(out / "traces.csv", res.input.grid.times, {
            "input": res.drive.samples, "output": res.output.samples})
    report = {
        "protocol": protocol, "d": d,
        "numeric_efficiency": rep.numeric,
        "intensity_ratio": rep.intensity_ratio,
        "analytic_efficiency": rep.analytic,
        "echo_time": rep.echo_time, "window": list(rep.window),
        "pulse_ratio": rep.pulse_ratio,
        "mean_excited_population":
            rep.diagnostics.get("mean_excited_population"),
        "convergence": rep.convergence,
        "grid": {"n": res.input.grid.n, "dt": res.input.grid.dt,
                 "nz": res.cfg.nz, "nclasses": int(res.nodes.size),
                 "substeps_total": int(res.substeps_total),
                 "norm_drift": res.norm_drift},
    }
    return report


def _run_slowlight(sec: dict, out: Path, grid_scale: float,
                   write_traces: bool):
    protocol = sec.get("protocol", "shome")
    kwargs = {}
    for key in ("d", "gamma0", "gamma", "rabi", "detuning",
                "storage_event", "retrieval_event"):
        if key in sec:
            kwargs[key] = float(sec[key])
    builder = getattr(slowlight.SlowLightScenario, protocol)
    allowed = {"shome": ("d", "gamma0", "storage_event", "retrieval_event"),
               "fid": ("d", "gamma", "storage_event", "retrieval_event"),
               "eit": ("d", "gamma", "rabi", "storage_event",
                       "retrieval_event"),
               "raman": ("d", "gamma", "rabi", "detuning", "storage_event",
                         "retrieval_event")}[protocol]
    bad = set(kwargs) - set(allowed)
    if bad:
        raise ValidationError(f"{protocol} does not accept {sorted(bad)}")
    scen = builder(**kwargs)
    rep = slowlight.run_slowlight(scen, nz=int(sec.get("nz", 64)),
                                  grid_scale=grid_scale,
                                  convergence=bool(sec.get("convergence",
                                                           False)))
    if write_traces:
        _write_traces(out / "traces.csv", rep.times, {
            "input": rep.input.samples, "output": rep.output.samples,
            "reference": rep.reference.samples, "control": rep.control})
    report = {
        "protocol": protocol,
        "efficiency": rep.efficiency, "window": list(rep.window),
        "replica_energy_fraction": rep.replica_energy_fraction,
        "leak_energy_fraction": rep.leak_energy_fraction,
        "scenario": {"d": scen.d, "gamma0": scen.gamma0, "gamma": scen.gamma,
                     "rabi": scen.rabi, "detuning": scen.detuning,
                     "signal_width": scen.signal.width,
                     "storage_event": scen.storage_event,
                     "retrieval_event": scen.retrieval_event},
        "convergence": rep.convergence,
        "grid": {"n": rep.input.grid.n, "dt": rep.input.grid.dt,
                 "nz": rep.result.cfg.nz,
                 "nclasses": int(rep.result.nodes.size)},
    }
    return report


def _run_transfer(sec: dict, out: Path, grid_scale: float,
                  write_traces: bool):
    kind = sec.get("kind", "inverted-lorentzian")
    d = float(sec.get("d", 20.0))
    width = float(sec.get("signal_width", 10.0))
    t_max = max(float(sec.get("t_max", 8.0 * width)), 6.3 * width)
    grid = TimeGrid.spanning(-6.2 * width, t_max,
                             width / (12.0 * grid_scale))
    signal = render_pulse(PulseShape("gaussian", 0.0, width, np.pi / 20),
                          grid)
    tf = TransferFunction(kind, d=d, gamma0=float(sec.get("gamma0", 1.0)),
                          gamma=float(sec.get("gamma", 1.0)),
                          rabi=float(sec.get("rabi", 0.0)))
    output = apply_transfer(signal, tf)
    report = {
        "kind": kind, "d": d,
        "input_energy": signal.energy, "output_energy": output.energy,
        "group_delay": output.centroid() - signal.centroid(),
        "grid": {"n": grid.n, "dt": grid.dt},
    }
    if "cut" in sec:
        cut = float(sec["cut"])
        report["cut"] = cut
        report["shaded_area_efficiency"] = shaded_area_efficiency(
            signal, output, cut)
    if write_traces:
        _write_traces(out / "traces.csv", grid.times, {
            "input": signal.samples, "output": output.samples})
    return report


def _run_certify(sec: dict, out: Path, grid_scale: float,
                 write_traces: bool):
    task = sec.get("task", "counting")
    if task == "tv":
        d_grid = sec.get("d_grid", [0.1, 10.0, 100])
        d = np.linspace(float(d_grid[0]), float(d_grid[1]), int(d_grid[2]))
        cols = {"d": d}
        for proto in ("crib", "2pe"):
            T = np.empty(d.size)
            V = np.empty(d.size)
            for i, di in enumerate(d):
                rep = certify.tv_criterion(proto, d=di)
                T[i], V[i] = rep.value["T"], rep.value["V"]
            cols[f"T_{proto}"] = T
            cols[f"V_{proto}"] = V
        _write_csv(out / "sweep.csv", list(cols), list(cols.values()))
        crib_q = [bool(t > 1 and v < 1)
                  for t, v in zip(cols["T_crib"], cols["V_crib"])]
        pe_q = [bool(t > 1 and v < 1)
                for t, v in zip(cols["T_2pe"], cols["V_2pe"])]
        return {"task": task,
                "crib_quantum_anywhere": any(crib_q),
                "crib_threshold_depth": float(-np.log(1.0 - 2.0 ** -0.5)),
                "2pe_quantum_anywhere": any(pe_q),
                "crib_large_d": certify.tv_criterion("crib", d=50.0).value}
    if task == "counting":
        p_values = [float(x) for x in sec.get("p_values", [0.05, 0.2, 0.5])]
        eta_values = [float(x) for x in sec.get("eta_values",
                                                [0.3, 0.6, 0.9])]
        pdc_values = [float(x) for x in sec.get("p_dc_values",
                                                [0.0, 0.01, 0.05])]
        rows = {"p": [], "eta": [], "p_dc": [], "g2": [], "g2_oracle": [],
                "R": [], "R_oracle": [], "V": [], "V_oracle": []}
        for p in p_values:
            for eta in eta_values:
                for pdc in pdc_values:
                    det = certify.DetectorModel(eta_d=eta, p_dc=pdc)
                    rows["p"].append(p)
                    rows["eta"].append(eta)
                    rows["p_dc"].append(pdc)
                    rows["g2"].append(certify.g2_memory(det).value)
                    rows["g2_oracle"].append(certify.g2_memory_oracle(det))
                    rows["R"].append(certify.cauchy_schwarz(det, det, p).value)
                    rows["R_oracle"].append(
                        certify.cauchy_schwarz_oracle(det, det, p))
                    rows["V"].append(certify.bell_visibility(det, det, p).value)
                    rows["V_oracle"].append(
                        certify.bell_visibility_oracle(det, det, p))
        _write_csv(out / "sweep.csv", list(rows),
                   [np.asarray(v) for v in rows.values()])
        dev = max(max(abs(a - b) for a, b in zip(rows[k], rows[k + "_oracle"]))
                  for k in ("g2", "R", "V"))
        return {"task": task, "grid_points": len(rows["p"]),
                "max_oracle_deviation": dev,
                "g2_2pe_small_depth": certify.g2_2pe(1e-3),
                "g2_2pe_d1": certify.g2_2pe(1.0, 1.0),
                "g2_2pe_d1_oracle": certify.g2_2pe_oracle(1.0, 1.0)}
    if task == "chain":
        n_atoms = [int(n) for n in sec.get("n_atoms", [10, 50, 200])]
        d_values = [float(x) for x in sec.get("d_values", [0.5, 2.0])]
        n_max = int(sec.get("n_max", 96))
        rows = {"n_atoms": [], "d": [], "absorbed": [], "absorbed_limit": [],
                "forward": [], "forward_limit": [], "backward": [],
                "backward_limit": [], "emission": [], "emission_limit": []}
        for n in n_atoms:
            for dv in d_values:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", UserWarning)
                    model = certify.ChainModel(n, dv)
                    fwd = certify.chain_efficiency(model, "forward")
                    bwd = certify.chain_efficiency(model, "backward")
                    inv = certify.inverted_emission(model, n_max=n_max)
                rows["n_atoms"].append(n)
                rows["d"].append(dv)
                rows["absorbed"].append(fwd.absorbed_probability)
                rows["absorbed_limit"].append(fwd.absorbed_limit)
                rows["forward"].append(fwd.exact)
                rows["forward_limit"].append(fwd.analytic_limit)
                rows["backward"].append(bwd.exact)
                rows["backward_limit"].append(bwd.analytic_limit)
                rows["emission"].append(inv.finite_n)
                rows["emission_limit"].append(inv.value)
        _write_csv(out / "sweep.csv", list(rows),
                   [np.asarray(v, dtype=float) for v in rows.values()])
        return {"task": task, "n_atoms": n_atoms, "d_values": d_values}
    raise ValidationError(f"unknown certify task {task!r}")


def _run_sweep(sec: dict, out: Path, grid_scale: float, write_traces: bool):
    quantity = sec.get("quantity", "analytic_efficiency")
    if quantity == "analytic_efficiency":
        d = np.linspace(float(sec.get("d_min", 0.0)),
                        float(sec.get("d_max", 6.0)),
                        int(sec.get("points", 121)))
        cols = {
            "d": d,
            "eff_2pe": np.array([echoprotocols.analytic_efficiency("2pe", x)
                                 for x in d]),
            "eff_crib_fwd": np.array(
                [echoprotocols.analytic_efficiency("crib_fwd", x) for x in d]),
            "eff_crib_bwd": np.array(
                [echoprotocols.analytic_efficiency("crib_bwd", x) for x in d]),
        }
        _write_csv(out / "sweep.csv", list(cols), list(cols.values()))
        return {"quantity": quantity, "points": int(d.size),
                "crib_fwd_max_at_d2": echoprotocols.analytic_efficiency(
                    "crib_fwd", 2.0)}
    if quantity == "efficiency_2pe":
        d_values = [float(x) for x in sec.get("d_values", [0.5, 2.0])]
        ratios = [float(x) for x in sec.get("pulse_ratios", [1.0, 2.0, 10.0])]
        width = float(sec.get("signal_width", 1.0))
        tau = float(sec.get("tau", 8.0 * width))
        nz = int(sec.get("nz", 48))
        signal = PulseShape("gaussian", 0.0, width, np.pi / 20)
        rows = {"d": [], "pulse_ratio": [], "numeric": [], "analytic": []}
        for dv in d_values:
            for ratio in ratios:
                pi_pulse = PulseShape("gaussian", 0.0, width / ratio, np.pi)
                rep = echoprotocols.run_2pe(
                    PropagationConfig(d=dv, nz=nz), signal, pi_pulse, tau,
                    grid_scale=grid_scale)
                rows["d"].append(dv)
                rows["pulse_ratio"].append(ratio)
                rows["numeric"].append(rep.numeric)
                rows["analytic"].append(rep.analytic)
        _write_csv(out / "sweep.csv", list(rows),
                   [np.asarray(v) for v in rows.values()])
        return {"quantity": quantity, "d_values": d_values, "ratios": ratios}
    raise ValidationError(f"unknown sweep quantity {quantity!r}")


_RUNNERS = {"echo": _run_echo, "slowlight": _run_slowlight,
            "transfer": _run_transfer, "certify": _run_certify,
            "sweep": _run_sweep}


# ---------------------------------------------------------------------------
# Catalog and entry point
# ---------------------------------------------------------------------------

def list_scenarios():
    """Catalog of bundled scenarios: (name, figure, kind, description)."""
    catalog = []
    for path in sorted(SCENARIO_DIR.glob("*.toml")):
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
        catalog.append({"name": path.stem,
                        "figure": cfg.get("figure", ""),
                        "kind": cfg.get("kind", ""),
                        "description": cfg.get("description", "")})
    return catalog


def _resolve_config(name: str) -> Path:
    p = Path(name)
    if p.exists():
        return p
    candidate = SCENARIO_DIR / (name if name.endswith(".toml")
                                else name + ".toml")
    if candidate.exists():
        return candidate
    raise ValidationError(f"no such config or bundled scenario: {name}")


def _error(code: int, message: str) -> int:
    sys.stderr.write(json.dumps(
        {"error": {"code": code, "message": message}}) + "\n")
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="qmemsim",
        description="optical-memory protocol simulations and certifications")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command")
    run_p = sub.add_parser("run", help="run a scenario config")
    run_p.add_argument("config")
    run_p.add_argument("--out", default=None,
                       help="output directory (default: scenario name)")
    run_p.add_argument("--validate-only", action="store_true",
                       help="validate the config and exit")
    run_p.add_argument("--grid-scale", type=float, default=1.0,
                       help="multiply all grid densities (convergence "
                            "studies)")
    run_p.add_argument("--strict", action="store_true",
                       help="escalate numeric-regime warnings to exit 4")
    sub.add_parser("list", help="list bundled scenarios")
    args = parser.parse_args(argv)

    if args.command == "list":
        for entry in list_scenarios():
            fig = f" [fig {entry['figure']}]" if entry["figure"] else ""
            print(f"{entry['name']:28s}{fig:10s} {entry['description']}")
        return 0
    if args.command != "run":
        parser.print_help()
        return 0

    try:
        path = _resolve_config(args.config)
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
        validate_config(cfg)
    except (ValidationError, tomllib.TOMLDecodeError, OSError) as exc:
        return _error(2, str(exc))
    if args.validate_only:
        return 0

    out = Path(args.out) if args.out else Path(path.stem)
    out.mkdir(parents=True, exist_ok=True)
    kind = cfg["kind"]
    write_traces = cfg.get("output", {}).get("traces", True)

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            results = _RUNNERS[kind](cfg[kind], out, args.grid_scale,
                                     write_traces)
        except (ConvergenceNotMet, StepTooCoarse) as exc:
            return _error(3, str(exc))
        except (ValidationError, ValueError) as exc:
            return _error(2, str(exc))

    report = {
        "schema_version": 1,
        "package_version": __version__,
        "scenario": {"name": path.stem, "kind": kind,
                     "description": cfg.get("description", ""),
                     "grid_scale": args.grid_scale},
        "results": results,
        "warnings": sorted({str(w.message) for w in caught}),
    }
    _write_report(out / "report.json", report)
    if args.strict and caught:
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
