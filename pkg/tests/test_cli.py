import json

import jsonschema
import numpy as np
import pytest

from zcoupling.cli import SPECTRUM_SCHEMA, main
from zcoupling.netlist import evaluate_z, format_netlist
from zcoupling.network_io import write_touchstone
from zcoupling.oracles import pi_capacitive, pi_closed_form_z12, series_lc
from zcoupling.quantities import ELEMENTARY_CHARGE, GHZ, MHZ, PLANCK, TWO_PI
from zcoupling.transmon import spectrum_at
from zcoupling.zz import format_jcurve_csv

FF = 1e-15


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def pi_file(tmp_path):
    path = tmp_path / "pi.s2p"
    write_touchstone(path, evaluate_z(pi_capacitive(), TWO_PI * GHZ * np.linspace(1, 20, 381)))
    return path


@pytest.fixture
def lc_file(tmp_path):
    path = tmp_path / "lc.s2p"
    write_touchstone(path, evaluate_z(series_lc(), TWO_PI * GHZ * np.linspace(1, 15, 1401)))
    return path


def read_csv(path):
    lines = path.read_text().splitlines()
    head = lines[0].split(",")
    return [dict(zip(head, ln.split(","))) for ln in lines[1:]]


# -- spectrum -----------------------------------------------------------------

def test_spectrum_report(capsys, tmp_path):
    code, out, _ = run(capsys, "spectrum", "--ec", "250 MHz", "--ej", "12.5 GHz", "--out", tmp_path)
    assert code == 0
    line = next(ln for ln in out.splitlines() if ln.startswith("q01_GHz"))
    assert line.split()[1].startswith("4.7")
    assert (tmp_path / "spectrum.csv").exists() and (tmp_path / "charge_matrix.csv").exists()


def test_spectrum_json_schema(capsys, tmp_path):
    code, out, _ = run(capsys, "spectrum", "--ec", "250 MHz", "--ej", "12.5 GHz", "--json", "--out", tmp_path)
    assert code == 0
    rep = json.loads(out)
    jsonschema.validate(rep, SPECTRUM_SCHEMA)
    assert rep["ej_over_ec"] == pytest.approx(50.0)


def test_spectrum_missing_field(capsys, tmp_path):
    code, _, err = run(capsys, "spectrum", "--ec", "250 MHz", "--out", tmp_path)
    assert code == 2
    assert "error" in err


def test_spectrum_bare_number_rejected(capsys, tmp_path):
    code, _, err = run(capsys, "spectrum", "--ec", "250", "--ej", "12.5 GHz", "--out", tmp_path)
    assert code == 2 and "unit" in err


def test_config_file_and_override(capsys, tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("c: 81.94 fF\nq01: 4.52 GHz\n")
    code, out, _ = run(capsys, "spectrum", "--config", cfg, "--json", "--out", tmp_path)
    assert code == 0
    assert json.loads(out)["q01_GHz"] == pytest.approx(4.52, rel=1e-6)
    code, out, _ = run(capsys, "spectrum", "--config", cfg, "--q01", "5 GHz", "--json", "--out", tmp_path)
    assert json.loads(out)["q01_GHz"] == pytest.approx(5.0, rel=1e-6)


def test_unknown_config_key(capsys, tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("ec: 250 MHz\nej: 12.5 GHz\nfrobnicate: 3\n")
    assert run(capsys, "spectrum", "--config", cfg, "--out", tmp_path)[0] == 2


def test_calibrate(capsys):
    code, out, _ = run(capsys, "calibrate", "--ec", "250 MHz", "--q01", "4.75 GHz", "--json")
    assert code == 0
    assert json.loads(out)["ej_GHz"] == pytest.approx(12.5, rel=0.05)
    code, _, _ = run(capsys, "calibrate", "--ec", "250 MHz", "--q01", "100 MHz")
    assert code == 1


# -- J routes ----------------------------------------------------------------------

def test_jcap_and_fitcc(capsys):
    code, out, _ = run(capsys, "jcap", "--c1", "81.94 fF", "--c2", "81.93 fF", "--cc", "0.216 fF", "--q1", "4.52 GHz")
    assert code == 0 and out.strip() == "J_MHz 5.957893"
    code, out, _ = run(capsys, "fitcc", "--j", "5.77 MHz", "--c1", "81.94 fF", "--c2", "81.93 fF",
                       "--q1", "4.52 GHz", "--json")
    assert json.loads(out)["cc_fF"] == pytest.approx(0.209, abs=0.002)


def test_jrate_equal_sweep_matches_closed_form(capsys, tmp_path, pi_file):
    code, _, _ = run(capsys, "jrate", "--z", pi_file, "--ec1", "250 MHz", "--ec2", "250 MHz",
                     "--start", "4 GHz", "--stop", "6 GHz", "--points", 9, "--out", tmp_path, "--gnuplot")
    assert code == 0
    rows = read_csv(tmp_path / "jrate.csv")
    assert len(rows) == 9 and (tmp_path / "jrate.gp").exists()
    for r in rows:
        q = TWO_PI * GHZ * float(r["q1_GHz"])
        sp = spectrum_at(250 * MHZ * PLANCK, q)
        exact = 4 * ELEMENTARY_CHARGE**2 * sp.n(0, 1) ** 2 * q * pi_closed_form_z12(q) / PLANCK / MHZ
        assert float(r["J_MHz"]) == pytest.approx(exact, rel=1e-4)
        assert r["reliable"] == "1"


def test_jrate_fixed_mode_sign_change(capsys, tmp_path, lc_file):
    code, _, _ = run(capsys, "jrate", "--z", lc_file, "--ec1", "250 MHz", "--ec2", "250 MHz", "--mode", "fixed",
                     "--fixed", "5.82 GHz", "--start", "6.5 GHz", "--stop", "8.5 GHz", "--points", 21,
                     "--out", tmp_path, "--jobs", 2)
    assert code == 0
    rows = read_csv(tmp_path / "jrate.csv")
    j = np.array([float(r["J_MHz"]) for r in rows])
    q2 = np.array([float(r["q2_GHz"]) for r in rows])
    assert np.all(np.array([r["q1_GHz"] for r in rows]) == "5.820000000")
    assert np.all(np.sign(j[q2 < 7.55]) == -np.sign(j[q2 > 7.55][0]))
    assert np.sum(np.diff(np.sign(j)) != 0) == 1


def test_jrate_file_not_found(capsys, tmp_path):
    code, _, err = run(capsys, "jrate", "--z", tmp_path / "nope.s2p", "--ec1", "250 MHz", "--ec2", "250 MHz",
                       "--start", "4 GHz", "--stop", "6 GHz")
    assert code == 2 and "not found" in err


def test_jrate_malformed_touchstone(capsys, tmp_path):
    bad = tmp_path / "bad.s2p"
    bad.write_text("5.0 0 0 0 0 0 0 0 0\n")
    code, _, _ = run(capsys, "jrate", "--z", bad, "--ec1", "250 MHz", "--ec2", "250 MHz",
                     "--start", "4 GHz", "--stop", "6 GHz")
    assert code == 2


def test_jrate_outside_band_is_failure(capsys, tmp_path, pi_file):
    code, _, _ = run(capsys, "jrate", "--z", pi_file, "--ec1", "250 MHz", "--ec2", "250 MHz",
                     "--start", "19 GHz", "--stop", "25 GHz", "--points", 3, "--out", tmp_path)
    assert code == 1


# -- netlist and pv --------------------------------------------------------------

def test_netlist_z_and_pv_check(capsys, tmp_path):
    from zcoupling.oracles import lc_filter

    net = tmp_path / "filter.net"
    net.write_text(format_netlist(lc_filter()))
    code, out, _ = run(capsys, "netlist-z", "--netlist", net, "--start", "0.24 GHz", "--stop", "100 GHz",
                       "--points", 40001, "--loss-q", 1e3, "--format", "csv", "--out", tmp_path)
    assert code == 0 and (tmp_path / "z.csv").exists()
    code, out, _ = run(capsys, "pv-check", "--z", tmp_path / "z.csv", "--q", "4.8 GHz", "--json")
    assert code == 0
    rep = json.loads(out)
    assert rep["applicable"] and rep["relative_gap"] < 1e-2


def test_netlist_z_touchstone(capsys, tmp_path):
    net = tmp_path / "pi.net"
    net.write_text(format_netlist(pi_capacitive()))
    assert run(capsys, "netlist-z", "--netlist", net, "--start", "1 GHz", "--stop", "2 GHz",
               "--points", 5, "--out", tmp_path)[0] == 0
    assert (tmp_path / "z.s2p").read_text().startswith("# GHz Z RI R 50")


# -- zz --------------------------------------------------------------------------

ZZ_ARGS = ["--q1", "4.9729 GHz", "--q2", "5.1629 GHz", "--alpha1", "0.3 GHz", "--alpha2", "0.3 GHz",
           "--alpha-c", "0.3 GHz", "--j12", "-8.82 MHz"]


def write_jcurve(path, qc_ghz, a_mhz_ghz):
    qc = TWO_PI * GHZ * np.asarray(qc_ghz)
    q1, q2 = TWO_PI * 4.9729 * GHZ, TWO_PI * 5.1629 * GHZ
    a = a_mhz_ghz * MHZ * PLANCK * TWO_PI * GHZ
    path.write_text(format_jcurve_csv(qc, a / (q1 - qc), a / (q2 - qc)))


def test_zz_all_zero(capsys, tmp_path):
    jc = tmp_path / "j.csv"
    write_jcurve(jc, np.linspace(2.5, 4.5, 5), 0.0)
    args = [a if a != "-8.82 MHz" else "0 MHz" for a in ZZ_ARGS]
    code, _, _ = run(capsys, "zz", *args, "--jcurve", jc, "--out", tmp_path)
    assert code == 0
    rows = read_csv(tmp_path / "zz.csv")
    assert all(float(r["zz_kHz"]) == 0.0 for r in rows)


def test_zz_cancellation_crossings_and_determinism(capsys, tmp_path):
    jc = tmp_path / "j.csv"
    write_jcurve(jc, np.linspace(2.5, 4.5, 41), 100.0)
    outs = []
    for k, jobs in enumerate((1, 2)):
        out = tmp_path / f"run{k}"
        code, _, _ = run(capsys, "zz", *ZZ_ARGS, "--jcurve", jc, "--out", out, "--jobs", jobs, "--gnuplot",
                         "--log", tmp_path / f"log{k}.txt")
        assert code == 0
        outs.append(out)
    for name in ("zz.csv", "zz_crossings.csv", "zz.gp"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    roots = [float(x) for x in (outs[0] / "zz_crossings.csv").read_text().split()[1:]]
    # designed roots of the cancellation fixture (exact model, see test_zz)
    assert roots == pytest.approx([3.928363, 4.038014], abs=1e-4)
    log = (tmp_path / "log0.txt").read_text()
    assert "start zz" in log and "done zz exit 0" in log


def test_zz_malformed_jcurve(capsys, tmp_path):
    jc = tmp_path / "j.csv"
    jc.write_text("q_c_GHz,J1c_MHz,J2c_MHz\n3.0,10,10\n3.5,ten,10\n")
    code, _, err = run(capsys, "zz", *ZZ_ARGS, "--jcurve", jc, "--out", tmp_path)
    assert code == 2 and "line 3" in err


# -- oracle --------------------------------------------------------------------

def test_oracle_all(capsys):
    code, out, _ = run(capsys, "oracle", "--json")
    assert code == 0
    names = [r["name"] for r in json.loads(out)]
    assert names == ["capacitive-equivalence", "pv-identity", "splitting-vs-modesum", "foster-monotonicity"]


def test_oracle_selector(capsys):
    code, out, _ = run(capsys, "oracle", "pv")
    assert code == 0
    assert out.startswith("PASS pv-identity") and len(out.strip().splitlines()) == 1


def test_oracle_unknown_selector(capsys):
    code, _, err = run(capsys, "oracle", "nonsense")
    assert code == 2 and "unknown" in err
