import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zcoupling.errors import BandCoverageError, DispersiveWarning, ResonanceError
from zcoupling.exchange import (
    fit_cc, j_capacitive, j_impedance, j_mode_sum, pv_integral_check, sweep_j,
)
from zcoupling.netlist import ModeSet, add_series_loss, evaluate_z
from zcoupling.oracles import lc_filter, pi_capacitive, pv_gaps, resonance_grid, series_lc
from zcoupling.quantities import ELEMENTARY_CHARGE, GHZ, HBAR, MHZ, PLANCK, TWO_PI
from zcoupling.transmon import TransmonSpec, solve_spectrum, spectrum_at

FF = 1e-15
CQ, CC = 80 * FF, 0.2 * FF


@pytest.fixture(scope="module")
def pi_table():
    return evaluate_z(pi_capacitive(CQ, CQ, CC), TWO_PI * GHZ * np.linspace(1, 20, 381))


@pytest.fixture(scope="module")
def lc_table():
    return evaluate_z(series_lc(), TWO_PI * GHZ * np.linspace(1, 15, 1401))


def closed_form(n1, n2):
    delta = (CQ + CC) ** 2 - CC**2
    return -4 * ELEMENTARY_CHARGE**2 * n1 * n2 * CC / delta


# -- impedance route ----------------------------------------------------------

@pytest.mark.parametrize("f", [4.0, 5.0, 6.5])
def test_pi_network_closed_form(pi_table, ec250, f):
    sp = spectrum_at(ec250, TWO_PI * f * GHZ)
    r = j_impedance(sp, sp, pi_table)
    assert r.route == "impedance"
    assert r.term1 == pytest.approx(r.term2, rel=1e-12)
    assert r.J == pytest.approx(closed_form(sp.n(0, 1), sp.n(0, 1)), rel=1e-6)
    assert r.reliable and r.warnings == ()
    assert r.J_over_h == r.J / (PLANCK * 1e6)


def test_zero_coupling_capacitance(ec250, ej12p5):
    t = evaluate_z(pi_capacitive(CQ, CQ, 0.0), TWO_PI * GHZ * np.linspace(1, 20, 50))
    sp = solve_spectrum(TransmonSpec(ec250, ej12p5))
    assert abs(j_impedance(sp, sp, t).J) < 1e-15


@pytest.mark.parametrize("ratio", [50.0, 75.0, 100.0])
def test_transmon_limit_matches_capacitive(pi_table, ratio):
    from zcoupling.transmon import charging_energy_from_capacitance

    ec = charging_energy_from_capacitance(CQ + CC)
    sp = solve_spectrum(TransmonSpec(ec, ratio * ec))
    cap = j_capacitive(CQ + CC, CQ + CC, CC, sp.q01, sp.q01).J
    assert abs(j_impedance(sp, sp, pi_table).J) == pytest.approx(cap, rel=0.05)


def test_label_swap_invariance(lc_table, ec250):
    s1 = spectrum_at(ec250, TWO_PI * 5.8 * GHZ)
    s2 = spectrum_at(1.2 * ec250, TWO_PI * 6.3 * GHZ)
    a = j_impedance(s1, s2, lc_table)
    b = j_impedance(s2, s1, lc_table, ports=(1, 0))
    assert a.J == pytest.approx(b.J, rel=1e-12)


def test_outside_grid(pi_table, ec250):
    from zcoupling.errors import OutOfGridError

    sp = spectrum_at(ec250, TWO_PI * 25 * GHZ)
    with pytest.raises(OutOfGridError):
        j_impedance(sp, sp, pi_table)


def test_pole_adjacent_point_flagged(lc_table, ec250):
    sp = spectrum_at(ec250, TWO_PI * 7.54 * GHZ)
    r = j_impedance(sp, sp, lc_table)
    assert not r.reliable
    assert any("unreliable" in w for w in r.warnings)
    assert np.isfinite(r.J)


def test_discarded_loss_recorded(ec250):
    t = evaluate_z(add_series_loss(series_lc(), 100), TWO_PI * GHZ * np.linspace(1, 15, 701))
    sp = spectrum_at(ec250, TWO_PI * 7.0 * GHZ)
    r = j_impedance(sp, sp, t)
    assert r.discarded_loss > 1e-6
    assert isinstance(r.J, float)


def test_sign_change_and_decay_across_pole(lc_table, ec250):
    q = TWO_PI * GHZ * np.linspace(5, 10, 51)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        j = np.array([r.J for r in sweep_j(lc_table, ec250, ec250, q, q)])
    below, above = j[q < TWO_PI * 7.55 * GHZ], j[q > TWO_PI * 7.55 * GHZ]
    assert np.all(below < 0) and np.all(above > 0)
    assert np.all(np.diff(np.abs(below)) > 0)  # grows towards the pole
    assert np.all(np.diff(np.abs(above)) < 0)  # decays away from it


def test_sweep_parallel_ordering(pi_table, ec250):
    from concurrent.futures import ThreadPoolExecutor

    q = TWO_PI * GHZ * np.linspace(4, 6, 7)
    serial = sweep_j(pi_table, ec250, ec250, q, q[::-1])
    with ThreadPoolExecutor(3) as ex:
        par = sweep_j(pi_table, ec250, ec250, q, q[::-1], executor=ex)
    assert [r.J for r in serial] == [r.J for r in par]


# -- mode sum --------------------------------------------------------------

def test_single_mode_textbook():
    g = TWO_PI * 100 * MHZ
    q, w = TWO_PI * 5 * GHZ, TWO_PI * 6 * GHZ
    r = j_mode_sum(None, None, q, q, ModeSet([w], [[g], [g]]))
    assert r.route == "mode_sum"
    assert r.J / PLANCK / MHZ == pytest.approx(-10.0, rel=1e-12)


def test_empty_modeset():
    assert j_mode_sum(None, None, 1e10, 2e10, ModeSet.empty()).J == 0.0


def test_symmetric_cancellation():
    q, d, g = TWO_PI * 5 * GHZ, TWO_PI * 1 * GHZ, TWO_PI * 50 * MHZ
    r = j_mode_sum(None, None, q, q, ModeSet([q - d, q + d], [[g, g], [g, g]]))
    assert abs(r.J) <= 1e-12 * HBAR * g**2 / d


def test_odd_in_detuning():
    q, d, g = TWO_PI * 5 * GHZ, TWO_PI * 1 * GHZ, TWO_PI * 50 * MHZ
    a = j_mode_sum(None, None, q, q, ModeSet([q + d], [[g], [g]])).J
    b = j_mode_sum(None, None, q, q, ModeSet([q - d], [[g], [g]])).J
    assert a == pytest.approx(-b, rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.floats(-200, 200), st.floats(-200, 200), st.floats(0.1, 5))
def test_linear_in_coupling_product(g1, g2, scale):
    q1, q2, w = TWO_PI * 5 * GHZ, TWO_PI * 5.3 * GHZ, TWO_PI * 7 * GHZ
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DispersiveWarning)
        a = j_mode_sum(None, None, q1, q2, ModeSet([w], [[g1 * MHZ], [g2 * MHZ]])).J
        b = j_mode_sum(None, None, q1, q2, ModeSet([w], [[scale * g1 * MHZ], [g2 * MHZ]])).J
    assert b == pytest.approx(scale * a, rel=1e-12, abs=1e-40)


def test_higher_level_scaling(ec250, ej12p5):
    sp = solve_spectrum(TransmonSpec(ec250, ej12p5))
    g, w = TWO_PI * 50 * MHZ, TWO_PI * 7 * GHZ
    ms = ModeSet([w], [[g], [g]])
    r0 = j_mode_sum(sp.charge_matrix, sp.charge_matrix, sp.q01, sp.q01, ms).J
    q12 = sp.transitions[1]
    r1 = j_mode_sum(sp.charge_matrix, sp.charge_matrix, q12, sp.q01, ms, i=1).J
    ratio = sp.n(1, 2) / sp.n(0, 1)
    expected = HBAR * g**2 * ratio * 0.5 * (1 / (q12 - w) + 1 / (sp.q01 - w))
    assert r1 == pytest.approx(expected, rel=1e-12)
    assert abs(r1) > abs(r0)


def test_mode_sum_resonance_error():
    with pytest.raises(ResonanceError):
        j_mode_sum(None, None, 1e10, 2e10, ModeSet([1e10], [[1e8], [1e8]]))


def test_mode_sum_dispersive_warning():
    with pytest.warns(DispersiveWarning):
        r = j_mode_sum(None, None, 1e10, 1e10, ModeSet([1.1e10], [[2e8], [2e8]]))
    assert r.warnings


# -- capacitive formula ---------------------------------------------------------

def test_capacitive_anchor():
    q = TWO_PI * 4.52 * GHZ
    r = j_capacitive(81.94 * FF, 81.93 * FF, 0.216 * FF, q, q)
    assert r.route == "capacitive"
    assert r.J_over_h == pytest.approx(5.96, abs=0.05)
    assert r.J_over_h == pytest.approx(5.957893, abs=1e-6)


def test_capacitive_linear_and_zero():
    q1, q2 = TWO_PI * 4.5 * GHZ, TWO_PI * 5.1 * GHZ
    a = j_capacitive(80 * FF, 70 * FF, 0.2 * FF, q1, q2).J
    assert j_capacitive(80 * FF, 70 * FF, 0.4 * FF, q1, q2).J == 2 * a
    assert j_capacitive(80 * FF, 70 * FF, 0.0, q1, q2).J == 0.0
    with pytest.raises(ValueError):
        j_capacitive(0.0, 70 * FF, 0.2 * FF, q1, q2)


def test_fit_cc():
    q = TWO_PI * 4.52 * GHZ
    c1, c2 = 81.94 * FF, 81.93 * FF
    for cc in (0.1 * FF, 0.216 * FF, 3.3 * FF):
        assert fit_cc(j_capacitive(c1, c2, cc, q, q).J, c1, c2, q, q) == pytest.approx(cc, rel=1e-12)
    assert fit_cc(5.77 * MHZ * PLANCK, c1, c2, q, q) / FF == pytest.approx(0.209, abs=0.002)
    assert fit_cc(0.0, c1, c2, q, q) == 0.0
    with pytest.raises(ValueError):
        fit_cc(-1e-27, c1, c2, q, q)


# -- principal value ------------------------------------------------------------

def test_pv_gap_scales_with_loss():
    g1, g2 = pv_gaps()
    assert g1 < 1e-2
    assert g1 / g2 == pytest.approx(10.0, rel=0.3)
    # frozen values for the lc_filter fixture at q = 0.8 w0
    assert g1 == pytest.approx(2.2222e-4, rel=1e-3)
    assert g2 == pytest.approx(2.2222e-5, rel=1e-3)


def test_pv_lossless_guard():
    w0 = TWO_PI * 6 * GHZ
    t = evaluate_z(lc_filter(), resonance_grid(w0, 0.8 * w0, 1e4, 400, 400))
    r = pv_integral_check(t, 0.8 * w0)
    assert r.applicable is False
    assert r.pv_value == 0.0 and r.relative_gap == 1.0
    assert r.reference == pytest.approx(-0.8 * w0 * t.z[np.argmin(abs(t.frequencies - 0.8 * w0)), 0, 1].imag)
    assert "not applicable" in r.note


def test_pv_band_coverage():
    w0 = TWO_PI * 6 * GHZ
    q = 0.8 * w0
    net = add_series_loss(lc_filter(), 1e2)
    grid = np.linspace(0.7 * q, 1.1 * q, 2000)  # resonance peak cut off
    with pytest.raises(BandCoverageError):
        pv_integral_check(evaluate_z(net, grid), q)

