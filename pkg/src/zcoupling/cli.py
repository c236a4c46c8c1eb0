"""``zcoupling`` command-line front end.

Every subcommand takes its parameters from flags, from a YAML ``--config``
file, or both (flags win). Physical inputs always carry a unit suffix, e.g.
``c1: 57.24 fF`` or ``--q1 "4.75 GHz"``. Energies such as E_C are given as
frequencies E/h.

Exit codes: 0 success, 1 computation failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from contextlib import nullcontext
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .errors import CSVFormatError, NetlistError, TouchstoneError, ZCouplingError
from .quantities import GHZ, MHZ, PLANCK, TWO_PI, parse_quantity

log = logging.getLogger("zcoupling")
log.addHandler(logging.NullHandler())

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
FF = 1e-15

SPECTRUM_SCHEMA = {
    "type": "object",
    "required": ["ec_MHz", "ej_GHz", "ej_over_ec", "offset_charge", "cutoff", "converged",
                 "q01_GHz", "alpha_MHz", "levels_GHz", "charge_matrix"],
    "properties": {
        "ec_MHz": {"type": "number", "exclusiveMinimum": 0},
        "ej_GHz": {"type": "number", "minimum": 0},
        "ej_over_ec": {"type": "number", "minimum": 0},
        "offset_charge": {"type": "number"},
        "cutoff": {"type": "integer", "minimum": 5},
        "converged": {"type": "boolean"},
        "q01_GHz": {"type": "number"},
        "alpha_MHz": {"type": "number"},
        "levels_GHz": {"type": "array", "items": {"type": "number"}, "minItems": 2},
        "charge_matrix": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
    },
    "additionalProperties": False,
}


class UsageError(Exception):
    """Bad or missing configuration; exit code 2."""


# --------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class Param:
    name: str
    kind: str  # a parse_quantity dimension, or int, float, str, path, choice
    required: bool = False
    default: object = None
    help: str = ""
    choices: tuple = ()


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _convert(p: Param, raw):
    if raw is None:
        return None
    try:
        if p.kind == "int":
            return int(raw)
        if p.kind == "float":
            return float(raw)
        if p.kind == "str":
            return str(raw)
        if p.kind == "choice":
            if str(raw) not in p.choices:
                raise ValueError(f"must be one of {', '.join(p.choices)}")
            return str(raw)
        if p.kind == "path":
            path = Path(str(raw))
            if not path.is_file():
                raise UsageError(f"{p.name}: file not found: {path}")
            return path
        return parse_quantity(raw, p.kind)
    except ValueError as exc:
        raise UsageError(f"{p.name}: {exc}") from None


def resolve(params, args, config: dict) -> dict:
    """Merge flags over config values; convert and check every parameter.

    File parameters are checked for readability before anything runs.
    """
    known = {p.name for p in params}
    unknown = sorted(set(config) - known - {"out", "jobs", "gnuplot", "json"})
    if unknown:
        raise UsageError(f"unknown configuration keys: {', '.join(unknown)}")
    out = {}
    for p in params:
        raw = getattr(args, p.name, None)
        if raw is None:
            raw = config.get(p.name)
        if raw is None:
            raw = p.default
        if raw is None and p.required:
            raise UsageError(f"missing required parameter {p.name!r} ({_flag(p.name)} or config key)")
        out[p.name] = _convert(p, raw)
    return out


def load_config(path) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {p}")
    try:
        data = yaml.safe_load(p.read_text()) or {}
    except yaml.YAMLError as exc:
        raise UsageError(f"config file {p} is not valid YAML: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("config file must hold a mapping of keys to values")
    return {str(k).replace("-", "_"): v for k, v in data.items()}


# --------------------------------------------------------------------------
# helpers


def _fmt(x, digits: int = 9) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return f"{x:.{digits}e}"


def _write(outdir: Path, name: str, text: str) -> Path:
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / name
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return path


def _executor(jobs: int):
    return ProcessPoolExecutor(max_workers=jobs) if jobs and jobs > 1 else nullcontext(None)


def _charging_energy(p: dict, k: str = "") -> float:
    from .transmon import charging_energy_from_capacitance

    ec, c = p.get(f"ec{k}"), p.get(f"c{k}")
    if (ec is None) == (c is None):
        raise UsageError(f"give exactly one of ec{k} (E_C/h) or c{k} (total capacitance)")
    return ec * PLANCK if ec is not None else charging_energy_from_capacitance(c)


def _gnuplot(datafile: str, xcol: int, ycol: int, xlabel: str, ylabel: str) -> str:
    return (
        "set datafile separator ','\n"
        f"set xlabel '{xlabel}'\nset ylabel '{ylabel}'\nset key off\nset grid\n"
        f"plot '{datafile}' every ::1 using {xcol}:{ycol} with linespoints\n"
    )


def _load_table(path: Path):
    from .network_io import read_impedance_csv, read_touchstone

    if path.suffix.lower() == ".csv":
        return read_impedance_csv(path)
    return read_touchstone(path).to_impedance_table()


# --------------------------------------------------------------------------
# commands

P_OUT = [Param("out", "str", default=".")]

SPECTRUM_PARAMS = [
    Param("ec", "frequency", help="E_C/h, e.g. '250 MHz'"),
    Param("c", "capacitance", help="total capacitance instead of E_C"),
    Param("ej", "frequency", help="E_J/h"),
    Param("q01", "frequency", help="calibrate E_J to this 0-1 frequency instead of giving E_J"),
    Param("ng", "float", default=0.0, help="offset charge"),
    Param("levels", "int", default=6),
    Param("cutoff", "int", default=30),
]


def _spectrum_report(p: dict) -> dict:
    from .transmon import TransmonSpec, calibrate_ej, solve_spectrum

    ec = _charging_energy(p)
    if (p["ej"] is None) == (p["q01"] is None):
        raise UsageError("give exactly one of ej or q01")
    ej = p["ej"] * PLANCK if p["ej"] is not None else calibrate_ej(TWO_PI * p["q01"], ec, p["ng"], p["cutoff"])
    sp = solve_spectrum(TransmonSpec(ec, ej, p["ng"], p["cutoff"]), p["levels"])
    return {
        "ec_MHz": ec / PLANCK / MHZ,
        "ej_GHz": ej / PLANCK / GHZ,
        "ej_over_ec": ej / ec,
        "offset_charge": float(p["ng"]),
        "cutoff": int(sp.cutoff),
        "converged": bool(sp.converged),
        "q01_GHz": sp.q01 / TWO_PI / GHZ,
        "alpha_MHz": sp.anharmonicity / TWO_PI / MHZ,
        "levels_GHz": [float(x) for x in sp.level_energies / TWO_PI / GHZ],
        "charge_matrix": [[float(v) for v in row] for row in sp.charge_matrix],
    }


def cmd_spectrum(p: dict, args) -> int:
    rep = _spectrum_report(p)
    outdir = Path(p["out"])
    lines = ["level,energy_GHz"] + [f"{k},{_fmt(e)}" for k, e in enumerate(rep["levels_GHz"])]
    _write(outdir, "spectrum.csv", "\n".join(lines) + "\n")
    n = rep["charge_matrix"]
    lines = ["i," + ",".join(f"n_{j}" for j in range(len(n)))]
    lines += [f"{i}," + ",".join(_fmt(v) for v in row) for i, row in enumerate(n)]
    _write(outdir, "charge_matrix.csv", "\n".join(lines) + "\n")
    if args.json:
        print(json.dumps(rep, indent=2, sort_keys=True))
        return EXIT_OK
    print(f"E_C/h        {rep['ec_MHz']:.6f} MHz")
    print(f"E_J/h        {rep['ej_GHz']:.6f} GHz   (E_J/E_C = {rep['ej_over_ec']:.4f})")
    print(f"q01_GHz      {rep['q01_GHz']:.6f}")
    print(f"alpha_MHz    {rep['alpha_MHz']:.6f}")
    print(f"cutoff       {rep['cutoff']} (converged: {rep['converged']})")
    print("charge matrix |n_ij|:")
    for row in n:
        print("  " + " ".join(f"{abs(v):10.6f}" for v in row))
    return EXIT_OK


CALIBRATE_PARAMS = [
    Param("ec", "frequency"),
    Param("c", "capacitance"),
    Param("q01", "frequency", required=True),
    Param("ng", "float", default=0.0),
    Param("cutoff", "int", default=30),
]


def cmd_calibrate(p: dict, args) -> int:
    from .transmon import calibrate_ej

    ec = _charging_energy(p)
    ej = calibrate_ej(TWO_PI * p["q01"], ec, p["ng"], p["cutoff"])
    rep = {"ec_MHz": ec / PLANCK / MHZ, "ej_GHz": ej / PLANCK / GHZ, "ej_over_ec": ej / ec}
    if args.json:
        print(json.dumps(rep, indent=2, sort_keys=True))
    else:
        print(f"E_C/h = {rep['ec_MHz']:.6f} MHz")
        print(f"E_J/h = {rep['ej_GHz']:.9f} GHz  (E_J/E_C = {rep['ej_over_ec']:.6f})")
    return EXIT_OK


JRATE_PARAMS = [
    Param("z", "path", required=True, help="Touchstone (.sNp) or impedance CSV"),
    Param("ec1", "frequency"), Param("c1", "capacitance"),
    Param("ec2", "frequency"), Param("c2", "capacitance"),
    Param("mode", "choice", default="equal", choices=("equal", "fixed")),
    Param("start", "frequency", required=True),
    Param("stop", "frequency", required=True),
    Param("points", "int", default=101),
    Param("fixed", "frequency", help="qubit-1 frequency in fixed mode"),
    Param("port1", "int", default=1),
    Param("port2", "int", default=2),
]


def cmd_jrate(p: dict, args) -> int:
    from .exchange import sweep_j

    ec1, ec2 = _charging_energy(p, "1"), _charging_energy(p, "2")
    if p["points"] < 1:
        raise UsageError("points must be positive")
    table = _load_table(p["z"])
    sweep = np.linspace(p["start"], p["stop"], p["points"]) * TWO_PI
    if p["mode"] == "equal":
        q1 = q2 = sweep
    else:
        if p["fixed"] is None:
            raise UsageError("fixed mode needs the 'fixed' qubit-1 frequency")
        q1, q2 = np.full_like(sweep, TWO_PI * p["fixed"]), sweep
    ports = (p["port1"] - 1, p["port2"] - 1)
    if not all(0 <= k < table.port_count for k in ports):
        raise UsageError(f"ports must lie in 1..{table.port_count}")
    with warnings.catch_warnings(), _executor(args.jobs) as ex:
        warnings.simplefilter("ignore")
        results = sweep_j(table, ec1, ec2, q1, q2, ports, executor=ex)
    lines = ["q1_GHz,q2_GHz,J_MHz,term1_MHz,term2_MHz,reliable,warnings"]
    for a, b, r in zip(q1, q2, results):
        t1, t2 = r.terms_over_h
        note = " | ".join(r.warnings).replace(",", ";")
        lines.append(f"{a / TWO_PI / GHZ:.9f},{b / TWO_PI / GHZ:.9f},{_fmt(r.J_over_h)},{_fmt(t1)},{_fmt(t2)},"
                     f"{int(r.reliable)},{note}")
    outdir = Path(p["out"])
    path = _write(outdir, "jrate.csv", "\n".join(lines) + "\n")
    if args.gnuplot:
        _write(outdir, "jrate.gp", _gnuplot("jrate.csv", 2, 3, "q2 (GHz)", "J/h (MHz)"))
    flagged = sum(not r.reliable for r in results)
    print(f"{len(results)} points written to {path}; {flagged} marked unreliable (pole proximity)")
    return EXIT_OK


JCAP_PARAMS = [
    Param("c1", "capacitance", required=True), Param("c2", "capacitance", required=True),
    Param("cc", "capacitance", required=True),
    Param("q1", "frequency", required=True), Param("q2", "frequency"),
]


def cmd_jcap(p: dict, args) -> int:
    from .exchange import j_capacitive

    q2 = p["q2"] if p["q2"] is not None else p["q1"]
    r = j_capacitive(p["c1"], p["c2"], p["cc"], TWO_PI * p["q1"], TWO_PI * q2)
    if args.json:
        print(json.dumps({"J_MHz": r.J_over_h}, sort_keys=True))
    else:
        print(f"J_MHz {r.J_over_h:.6f}")
    return EXIT_OK


FITCC_PARAMS = [
    Param("j", "frequency", required=True, help="target J/h"),
    Param("c1", "capacitance", required=True), Param("c2", "capacitance", required=True),
    Param("q1", "frequency", required=True), Param("q2", "frequency"),
]


def cmd_fitcc(p: dict, args) -> int:
    from .exchange import fit_cc

    q2 = p["q2"] if p["q2"] is not None else p["q1"]
    try:
        cc = fit_cc(abs(p["j"]) * PLANCK, p["c1"], p["c2"], TWO_PI * p["q1"], TWO_PI * q2)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.json:
        print(json.dumps({"cc_fF": cc / FF}, sort_keys=True))
    else:
        print(f"cc_fF {cc / FF:.6f}")
    return EXIT_OK


ZZ_PARAMS = [
    Param("q1", "frequency", required=True), Param("q2", "frequency", required=True),
    Param("alpha1", "frequency", required=True), Param("alpha2", "frequency", required=True),
    Param("alpha_c", "frequency", required=True),
    Param("j12", "frequency", required=True, help="J12/h (signed)"),
    Param("jcurve", "path", required=True, help="CSV q_c_GHz, J1c_MHz, J2c_MHz"),
    Param("truncation", "int", default=5),
]


def cmd_zz(p: dict, args) -> int:
    from .zz import DuffingSystem, format_crossings_csv, format_zz_csv, read_jcurve_csv, sweep_coupler

    qc, j1c, j2c = read_jcurve_csv(p["jcurve"])
    try:
        tmpl = DuffingSystem(
            (TWO_PI * p["q1"], TWO_PI * p["q2"], qc[0]),
            (TWO_PI * p["alpha1"], TWO_PI * p["alpha2"], TWO_PI * p["alpha_c"]),
            p["j12"] * PLANCK, truncation=p["truncation"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    with _executor(args.jobs) as ex:
        curve = sweep_coupler(tmpl, qc, j1c, j2c, executor=ex)
    outdir = Path(p["out"])
    _write(outdir, "zz.csv", format_zz_csv(curve))
    _write(outdir, "zz_crossings.csv", format_crossings_csv(curve))
    if args.gnuplot:
        _write(outdir, "zz.gp", _gnuplot("zz.csv", 1, 2, "q_c (GHz)", "ZZ (kHz)"))
    bad = int(np.sum(~curve.valid))
    print(f"{curve.coupler_frequencies.size} coupler points, {bad} unlabelled, "
          f"{len(curve.crossings)} zero crossings")
    for r in curve.crossings:
        print(f"  crossing at q_c = {r / TWO_PI / GHZ:.6f} GHz")
    return EXIT_OK


NETLIST_PARAMS = [
    Param("netlist", "path", required=True),
    Param("start", "frequency", required=True),
    Param("stop", "frequency", required=True),
    Param("points", "int", default=1001),
    Param("format", "choice", default="touchstone", choices=("touchstone", "csv")),
    Param("loss_q", "float", help="add series loss for this quality factor"),
]


def cmd_netlist_z(p: dict, args) -> int:
    from .netlist import add_series_loss, evaluate_z, parse_netlist
    from .network_io import write_impedance_csv, write_touchstone

    net = parse_netlist(p["netlist"].read_text())
    if p["loss_q"] is not None:
        net = add_series_loss(net, p["loss_q"])
    w = TWO_PI * np.linspace(p["start"], p["stop"], p["points"])
    table = evaluate_z(net, w)
    outdir = Path(p["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    if p["format"] == "csv":
        path = outdir / "z.csv"
        write_impedance_csv(path, table)
    else:
        path = outdir / f"z.s{table.port_count}p"
        write_touchstone(path, table)
    print(f"{table.frequencies.size} points written to {path}; {len(table.skipped)} singular points skipped")
    return EXIT_OK


PV_PARAMS = [
    Param("z", "path", required=True),
    Param("q", "frequency", required=True),
    Param("port1", "int", default=1), Param("port2", "int", default=2),
]


def cmd_pv_check(p: dict, args) -> int:
    from .exchange import pv_integral_check

    table = _load_table(p["z"])
    r = pv_integral_check(table, TWO_PI * p["q"], (p["port1"] - 1, p["port2"] - 1))
    rep = {"pv_value": r.pv_value, "reference": r.reference, "relative_gap": r.relative_gap,
           "applicable": r.applicable, "note": r.note}
    if args.json:
        print(json.dumps(rep, indent=2, sort_keys=True))
    else:
        for k, v in rep.items():
            print(f"{k:14s} {v}")
    return EXIT_OK


ORACLE_PARAMS: list = []


def cmd_oracle(p: dict, args) -> int:
    from .oracles import run_checks

    try:
        results = run_checks(args.selector)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None
    if args.json:
        print(json.dumps([{"name": r.name, "passed": r.passed, "details": r.details} for r in results],
                         indent=2, sort_keys=True))
    else:
        for r in results:
            print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


COMMANDS = {
    "spectrum": (cmd_spectrum, SPECTRUM_PARAMS, "transmon levels, anharmonicity and charge matrix"),
    "calibrate": (cmd_calibrate, CALIBRATE_PARAMS, "E_J for a target 0-1 frequency"),
    "jrate": (cmd_jrate, JRATE_PARAMS, "impedance-route J sweep from a Z file"),
    "jcap": (cmd_jcap, JCAP_PARAMS, "direct-capacitance J estimate"),
    "fitcc": (cmd_fitcc, FITCC_PARAMS, "coupling capacitance reproducing a J value"),
    "zz": (cmd_zz, ZZ_PARAMS, "ZZ rate over a coupler sweep"),
    "netlist-z": (cmd_netlist_z, NETLIST_PARAMS, "tabulate the port impedance of a netlist"),
    "pv-check": (cmd_pv_check, PV_PARAMS, "principal-value check on a lossy Z table"),
    "oracle": (cmd_oracle, ORACLE_PARAMS, "run the built-in cross-validation checks"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zcoupling", description="Transmon exchange coupling from impedance data.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, params, helptext) in COMMANDS.items():
        sp = sub.add_parser(name, help=helptext, description=helptext)
        sp.add_argument("--config", help="YAML file with parameters (flags override)")
        sp.add_argument("--out", help="output directory (default: current)")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
        sp.add_argument("--json", action="store_true", help="machine-readable output")
        sp.add_argument("--gnuplot", action="store_true", help="also write a gnuplot script")
        sp.add_argument("--log", help="sidecar log file (timestamps live only here)")
        for prm in params:
            sp.add_argument(_flag(prm.name), dest=prm.name, default=None, help=prm.help or None)
        if name == "oracle":
            sp.add_argument("selector", nargs="?", default="all",
                            help="all, capacitive, pv, splitting or foster")
    return parser


def _setup_log(path):
    if not path:
        return
    handler = logging.FileHandler(path)
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_log(args.log)
    func, params, _ = COMMANDS[args.command]
    try:
        config = load_config(args.config)
        if args.out is None:
            args.out = config.get("out")
        if args.jobs == 1 and "jobs" in config:
            args.jobs = int(config["jobs"])
        p = resolve(params + P_OUT, args, config)
        log.info("start %s %s (%s)", args.command, p, datetime.now(timezone.utc).isoformat())
        code = func(p, args)
        log.info("done %s exit %d", args.command, code)
        return code
    except (UsageError, TouchstoneError, CSVFormatError, NetlistError) as exc:
        print(f"zcoupling {args.command}: error: {exc}", file=sys.stderr)
        log.error("usage: %s", exc)
        return EXIT_USAGE
    except (ZCouplingError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"zcoupling {args.command}: computation failed: {exc}", file=sys.stderr)
        log.error("failure: %s", exc)
        return EXIT_FAIL
    except (ValueError, OSError) as exc:
        # malformed input files surface here (parse errors name their line)
        print(f"zcoupling {args.command}: error: {exc}", file=sys.stderr)
        log.error("input: %s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
