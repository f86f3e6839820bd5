import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from esrsim import magnetoqs, netline, presets
from esrsim.errors import SingularAccess
from esrsim.netline import RlgcModel

NM = 1e-9
UM = 1e-6
MU0 = magnetoqs.MU0

finite = dict(allow_nan=False, allow_infinity=False)


def test_lossless_50_ohm():
    z0, g = netline.characteristic(RlgcModel(0.0, 500e-9, 200e-12, 0.0, 1e9))
    assert z0 == pytest.approx(50.0, rel=1e-12)
    assert abs(z0.imag) < 1e-12 and g.real == 0 and g.imag > 0


def test_rc_limit_phase():
    z0, _ = netline.characteristic(RlgcModel(1e4, 1e-7, 1e-10, 0.0, 1.0))
    expect = np.sqrt(1e4 / (2j * math.pi * 1.0 * 1e-10))
    assert z0 == pytest.approx(expect, rel=1e-6)
    assert np.degrees(np.angle(z0)) == pytest.approx(-45.0, abs=0.01)


@given(st.floats(0, 1e6), st.floats(1e-9, 1e-5), st.floats(1e-12, 1e-9), st.floats(0, 1e-2), st.floats(1e6, 1e11))
def test_characteristic_identities(R, L, C, G, f):
    rl = RlgcModel(R, L, C, G, f)
    z0, g = netline.characteristic(rl)
    assert z0 * g == pytest.approx(rl.series(), rel=1e-12)
    assert g / z0 == pytest.approx(rl.shunt(), rel=1e-12)
    assert g.real >= 0


def test_quarter_wave_open():
    z0, f = 50.0, 10e9
    lam = 299792458.0 / f
    net = netline.lossless_network([f], z0, lam / 4)
    assert abs(net.zin[0]) > 1e6 * z0


def test_quasi_static_series_limit():
    rl = RlgcModel(2e6, 4e-7, 1e-11, 0.0, 1e9)
    z0, g = netline.characteristic(rl)
    length = 10 * UM
    assert abs(g * length) < 1e-2
    zin = netline.input_impedance_shorted(z0, g, length)
    assert zin == pytest.approx(rl.series() * length, rel=0.01)
    tiny = netline.input_impedance_shorted(z0, g, 1e-15)
    assert abs(tiny) < 1e-6 * abs(zin)
    with pytest.raises(ValueError):
        netline.input_impedance_shorted(z0, g, 0.0)


@pytest.mark.parametrize("zin, expect", [(50, 0), (0, -1), (100, 1 / 3)])
def test_s11_examples(zin, expect):
    assert netline.s11(zin, 50.0) == pytest.approx(expect, abs=1e-15)


@given(st.floats(0, 1e4), st.floats(-1e4, 1e4))
def test_passive_load_has_bounded_s11(r, x):
    assert abs(netline.s11(complex(r, x), 50.0)) <= 1 + 1e-12


def test_power_conversions():
    assert netline.dbm_to_watt(-7.0) == pytest.approx(0.19953e-3, rel=1e-4)
    ex = netline.excitation_from_power(0.0, 50.0, 50.0)
    assert ex.accepted_power == pytest.approx(1e-3, rel=1e-12)
    assert abs(ex.i_in) == pytest.approx(6.32e-3, rel=1e-3)
    assert abs(ex.i_in) == pytest.approx(math.sqrt(2 * 1e-3 / 50), rel=1e-12)
    full = netline.excitation_from_power(-7.0, 50.0, 1j * 30.0)
    assert full.accepted_power == pytest.approx(0.0, abs=1e-18)


def test_dissipated_fraction():
    # |S11| = 0.9 with a real load
    zin = 50 * 1.9 / 0.1
    ex = netline.excitation_from_power(-7.0, 50.0, zin)
    assert abs(ex.s11) == pytest.approx(0.9, rel=1e-12)
    assert netline.dissipated_power(None, ex) == pytest.approx(0.19 * ex.available_power, rel=1e-12)
    net = netline.lossless_network([1e9, 2e9], 50.0, 1e-3)
    ex = netline.excitation_from_power(-7.0, 50.0, net.zin[0])
    assert netline.dissipated_power(net, ex) == pytest.approx(0.0, abs=1e-15)


@given(st.complex_numbers(max_magnitude=1e3, **finite), st.floats(10, 200), st.floats(-20, 10))
def test_excitation_consistency(zin, zref, dbm):
    zin = complex(abs(zin.real), zin.imag)
    ex = netline.excitation_from_power(dbm, zref, zin)
    p = netline.dbm_to_watt(dbm)
    assert 0.5 * (ex.v_in * ex.i_in.conjugate()).real == pytest.approx(p * (1 - abs(ex.s11) ** 2), rel=1e-9, abs=1e-12 * p)
    if abs(zin) > 0:
        assert ex.v_in == pytest.approx(zin * ex.i_in, rel=1e-9, abs=1e-15)
    back = netline.excitation_from_current(ex.i_in, zref, zin)
    assert back.available_power == pytest.approx(p, rel=1e-9)


def _abcd(z0, g, l):
    return netline.line_abcd(z0, g, l)


@given(st.floats(10, 100), st.floats(0, 1e3), st.floats(1, 1e4), st.floats(1e-6, 1e-2))
def test_abcd_reciprocal_and_roundtrip(z0, alpha, beta, length):
    a = _abcd(complex(z0, -0.1 * z0), complex(alpha, beta), length)
    b = _abcd(complex(2 * z0, 0), complex(0.5 * alpha, 2 * beta), 0.5 * length)
    assert np.linalg.det(a) == pytest.approx(1.0, abs=1e-10 * np.max(np.abs(a)) ** 2)
    tot = netline.abcd_cascade(a, b)
    # inverting a lossy access section costs about |a|^2 machine epsilons
    tol = 1e-13 * max(1.0, np.max(np.abs(a))) ** 2 * np.max(np.abs(b))
    np.testing.assert_allclose(netline.de_embed(tot, a), b, rtol=1e-9, atol=tol)


def test_identity_access():
    m = _abcd(50, 1 + 20j, 1e-3)
    assert np.array_equal(netline.de_embed(m, np.eye(2)), m)
    with pytest.raises(SingularAccess):
        netline.de_embed(m, np.zeros((2, 2)))


def test_lossless_sweep_total_reflection():
    net = netline.lossless_network(np.linspace(1e8, 2e10, 21), 50.0, 1e-3)
    np.testing.assert_allclose(np.abs(net.s11), 1.0, rtol=1e-12)
    one = netline.lossless_network([1e9], 50.0, 1e-3)
    assert len(one) == 1


def test_frequencies_must_increase():
    dev = presets.esr_device("CPS", "M1", access=False)
    with pytest.raises(ValueError):
        netline.frequency_sweep(dev.scene, dev.line, [2e9, 1e9])


def test_two_wire_limit():
    w = 20 * NM
    for d in (2 * UM, 5 * UM):
        sec = [((0, w, 0, w), "sig", presets.default_materials()["M1"]),
               ((d, d + w, 0, w), "gnd", presets.default_materials()["M1"])]
        _, l_loop, _, _ = magnetoqs.loop_impedance_per_length(sec, 0.0, 300.0, (1, 1))
        r_eq = magnetoqs.rect_self_gmd(w, w)
        assert l_loop == pytest.approx(MU0 / math.pi * math.log(d / r_eq), rel=0.10)


def test_cryo_resistance_ratio():
    dev = presets.esr_device("CPS", "M1", access=False)
    rrr = presets.default_materials()["M1"].rrr
    cold = netline.extract_rlgc(dev.scene, dev.line, 1e9, 4.0)
    warm = netline.extract_rlgc(dev.scene, dev.line, 1e9, 300.0)
    assert cold.R / warm.R == pytest.approx(1 / rrr, rel=0.02)


def test_preset_sweep_properties(cryo_sweeps):
    f, cold, warm = cryo_sweeps
    assert np.all(np.abs(cold.s11) <= 1 + 1e-12) and np.all(np.abs(warm.s11) <= 1 + 1e-12)
    assert np.all(np.abs(cold.s11) <= np.abs(warm.s11))
    for p in cold.points[::25]:
        for s in p.sections + [p.access]:
            assert abs(np.linalg.det(s.abcd()) - 1) < 1e-10
        # round trip through the access section
        np.testing.assert_allclose(netline.de_embed(p.total_abcd(), p.access_abcd()), p.antenna_abcd(),
                                   rtol=1e-9, atol=1e-12 * np.max(np.abs(p.antenna_abcd())))


def test_antenna_resistance_flat():
    dev = presets.esr_device("CPW_TO_CPS", "M1")
    net = netline.frequency_sweep(dev.scene, dev.line, np.geomspace(0.1e9, 10e9, 5), 4.0, dev.access)
    r = net.antenna_zin.real
    assert r.max() / r.min() < 1.3


def test_line_state_boundary_values():
    dev = presets.esr_device("CPW_TO_CPS", "M1")
    pt = netline.network_point(dev.scene, dev.line, 10e9, 4.0, dev.access)
    ex = netline.excitation_from_power(-7.0, 50.0, pt.zin())
    st_ = netline.line_state(pt, ex)
    # the short sits at zero voltage; the antenna input sees its own Zin
    assert abs(st_.short_voltage) < 1e-9 * abs(st_.v_antenna)
    assert st_.v_antenna / st_.i_antenna == pytest.approx(pt.antenna_zin(), rel=1e-9)
    v = np.abs(st_.voltage(np.linspace(0, dev.line.length, 11)))
    assert v[0] > v[-1]
