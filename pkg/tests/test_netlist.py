import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zcoupling.errors import NetlistError
from zcoupling.netlist import (
    ModeSet, add_series_loss, evaluate_z, find_poles, format_netlist, natural_frequencies,
    parse_netlist, port_impedance,
)
from zcoupling.oracles import (
    coupled_line, foster_violations, pi_capacitive, pi_closed_form_z12, series_lc, touchstone_round_trip,
)
from zcoupling.quantities import GHZ, TWO_PI

FF = 1e-15
W5 = TWO_PI * 5 * GHZ


def test_single_capacitor():
    net = parse_netlist("C 1 0 100e-15\nPORT 1 1 0\n")
    z, ok = port_impedance(net, [W5])
    assert ok[0]
    assert z[0, 0, 0].imag == pytest.approx(-318.31, abs=5e-3)
    assert z[0, 0, 0] == pytest.approx(1 / (1j * W5 * 100e-15), rel=1e-12)


def test_pi_network_transimpedance():
    z, _ = port_impedance(pi_capacitive(), [W5])
    assert z[0, 0, 1].imag == pytest.approx(-0.9898, abs=1e-4)
    assert z[0, 0, 1].imag == pytest.approx(pi_closed_form_z12(W5), rel=1e-12)


@pytest.mark.parametrize("net", [pi_capacitive(), series_lc(), coupled_line()], ids=["pi", "lc", "line"])
def test_reciprocal_and_lossless(net):
    t = evaluate_z(net, TWO_PI * GHZ * np.linspace(1, 30, 997))
    z = t.z
    assert np.max(np.abs(z[:, 0, 1] - z[:, 1, 0]) / np.abs(z[:, 0, 1])) < 1e-12
    assert np.all(np.abs(z.real) <= 1e-12 * np.abs(z))


def test_touchstone_round_trip_matches_netlist():
    t = evaluate_z(coupled_line(), TWO_PI * GHZ * np.linspace(1, 20, 500))
    back = touchstone_round_trip(t)
    assert np.max(np.abs(back.z - t.z) / np.abs(t.z)) < 1e-10


def test_exact_pole_point_skipped():
    net = series_lc()
    (w0,) = find_poles(net, (TWO_PI * 1 * GHZ, TWO_PI * 20 * GHZ))
    t = evaluate_z(net, [TWO_PI * 5 * GHZ, w0, TWO_PI * 9 * GHZ])
    assert t.frequencies.size in (2, 3)
    assert len(t.skipped) + t.frequencies.size == 3


def test_text_round_trip():
    net = coupled_line()
    again = parse_netlist(format_netlist(net))
    assert again == net


@pytest.mark.parametrize(
    "text",
    [
        "C 1 0 1e-15\n",  # no port
        "C 1 0 -1e-15\nPORT 1 1 0\n",
        "X 1 0 1\nPORT 1 1 0\n",
        "C 1 0 1e-15\nC 2 3 1e-15\nPORT 1 1 0\n",  # island
        "C 1 0 1e-15\nPORT 1 7 0\n",
        "T 1 0 50\nPORT 1 1 0\n",
    ],
)
def test_netlist_errors(text):
    with pytest.raises(NetlistError):
        parse_netlist(text)


def test_error_names_line():
    with pytest.raises(NetlistError, match="line 2"):
        parse_netlist("C 1 0 1e-15\nL 1 0 abc\nPORT 1 1 0\n")


# -- loss -----------------------------------------------------------------------

def test_infinite_q_identity():
    net = series_lc()
    assert add_series_loss(net, math.inf) is net


def test_parallel_rlc_peak():
    c, ind = 100 * FF, 5e-9
    net = parse_netlist(f"C 1 0 {c!r}\nL 1 0 {ind!r}\nPORT 1 1 0\n")
    quality = 1e4
    lossy = add_series_loss(net, quality)
    w0 = 1 / math.sqrt(ind * c)
    z, _ = port_impedance(lossy, [w0])
    assert z[0, 0, 0].real == pytest.approx(quality * math.sqrt(ind / c), rel=0.2)


def test_loss_needs_resonator():
    with pytest.raises(NetlistError):
        add_series_loss(pi_capacitive(), 1e4)


# -- poles ----------------------------------------------------------------------

BAND = (TWO_PI * 0.5 * GHZ, TWO_PI * 30 * GHZ)


def test_no_poles_capacitive():
    assert find_poles(pi_capacitive(), BAND) == []


def test_series_lc_pole():
    (w0,) = find_poles(series_lc(), BAND)
    assert w0 / TWO_PI == pytest.approx(7.55 * GHZ, rel=1e-6)


def test_two_resonators():
    # two series L-C branches to ground at port 2, pulled through C_c from port 1
    f1, f2, c = 6 * GHZ, 9 * GHZ, 50 * FF
    l1, l2 = (1 / ((TWO_PI * f) ** 2 * c) for f in (f1, f2))
    net = parse_netlist(
        f"C 1 0 {80 * FF!r}\nC 2 0 {80 * FF!r}\nC 1 2 {1 * FF!r}\n"
        f"L 2 a {l1!r}\nC a 0 {c!r}\nL 2 b {l2!r}\nC b 0 {c!r}\nPORT 1 1 0\nPORT 2 2 0\n"
    )
    poles = find_poles(net, BAND)
    assert len(poles) == 2
    assert poles[0] < poles[1]
    # the shunt series-LC branches add capacitance; poles sit between their own zeros
    assert all(np.isclose(sorted(natural_frequencies(net, BAND)), poles, rtol=1e-9))


def test_coupled_line_poles():
    poles = np.array(find_poles(coupled_line(), BAND)) / TWO_PI / GHZ
    assert poles.size >= 4
    assert np.allclose(poles[:4], [6.29, 12.59, 18.88, 25.17], atol=0.01)


def test_table_poles_match_netlist():
    net = series_lc()
    t = evaluate_z(net, TWO_PI * GHZ * np.linspace(1, 15, 1401))
    (exact,) = find_poles(net, BAND)
    (approx,) = find_poles(t, BAND)
    assert approx == pytest.approx(exact, rel=1e-4)


@pytest.mark.parametrize("net", [series_lc(), coupled_line()], ids=["lc", "line"])
def test_foster_monotone_between_poles(net):
    assert foster_violations(net) == 0


@settings(max_examples=25, deadline=None)
@given(st.floats(10, 400), st.floats(0.05, 5), st.floats(1, 20))
def test_pi_network_any_values(cq, cc, f):
    w = TWO_PI * f * GHZ
    z, _ = port_impedance(pi_capacitive(cq * FF, cq * FF, cc * FF), [w])
    assert z[0, 0, 1].imag == pytest.approx(pi_closed_form_z12(w, cq * FF, cq * FF, cc * FF)[()], rel=1e-9)


# -- ModeSet ------------------------------------------------------------------

def test_modeset_validation():
    with pytest.raises(ValueError):
        ModeSet([2.0, 1.0], np.ones((2, 2)))
    with pytest.raises(ValueError):
        ModeSet([1.0], np.ones((2, 2)))
    assert ModeSet.empty().size == 0
    assert ModeSet([1.0], [3.0, 4.0]).couplings.shape == (2, 1)
