import numpy as np
import pytest

from wpsn.energy import (DEFAULT_LOADS, EnergyParams, FrameTiming, ModeLoad, NodeEnergyState,
                         SupercapParams, advance, consumed_power, expected_variation,
                         frame_energies, frame_update, harvested_power, integrate_frame,
                         kappa_varphi, leakage_power)
from wpsn.errors import InvalidArgument
from wpsn.sim import mode_schedule

P = EnergyParams()


def resistive_params(r_idle=10.0, r_leak=1e6, cap=0.1):
    loads = {m: ModeLoad(r_idle, 0.0, l.duration_s) for m, l in DEFAULT_LOADS.items()}
    return EnergyParams(cap=SupercapParams(cap, r_leak, 1.0, 0.0), loads=loads)


def test_zero_energy_draws_nothing():
    for m in DEFAULT_LOADS:
        assert consumed_power(m, 0.0, P.loads, P.cap) == 0.0


def test_pure_resistive_is_ohmic():
    loads = {"x": ModeLoad(1e3, 0.0)}
    cap = SupercapParams()
    e = 0.07
    v = cap.voltage(e)
    assert consumed_power("x", e, loads, cap) == pytest.approx(v**2 / 1e3, rel=1e-14)


def test_consumed_power_worked_example():
    loads = {"x": ModeLoad(1e5, 1e-3)}
    cap = SupercapParams(capacitance_f=0.1)
    got = consumed_power("x", 0.05, loads, cap)
    assert got == pytest.approx(2 * 0.05 / 1e4 + np.sqrt(20) * 1e-3 * np.sqrt(0.05), rel=1e-14)
    v = cap.voltage(0.05)
    assert got == pytest.approx(v**2 / 1e5 + 1e-3 * v, rel=1e-14)


def test_negative_energy_rejected():
    with pytest.raises(InvalidArgument):
        consumed_power("idle", -1e-3, P.loads, P.cap)


def test_leakage_example():
    assert leakage_power(0.0, P.cap) == 0.0
    assert leakage_power(0.05, SupercapParams(0.1, 1e6)) == pytest.approx(1e-6)


def test_harvested_power():
    assert harvested_power(0.0, 0.5) == 0.0
    assert harvested_power(2e-3, 1.0) == pytest.approx(2e-3)
    assert harvested_power(2e-3, 0.5) == pytest.approx(1e-3)
    with pytest.raises(InvalidArgument):
        harvested_power(1.0, 1.5)


def test_awake_frames_cost_more():
    for e in np.linspace(0.02, 0.18, 5):
        assert frame_energies(1, e, 0, P)[1] > frame_energies(0, e, 0, P)[1]


def test_zero_receive_harvests_nothing():
    assert frame_energies(0, 0.1, 0.0, P)[0] == 0.0


def test_kappa_calibration_at_mid_range():
    kappa, _ = kappa_varphi(0.1, P)
    assert kappa == pytest.approx(2.77e-4, rel=5e-3)


def test_kappa_varphi_identity():
    for e in (0.03, 0.1, 0.17):
        kappa, varphi = kappa_varphi(e, P)
        for a in (0, 1):
            assert kappa * a + varphi == pytest.approx(frame_energies(a, e, 0, P)[1], abs=1e-12)


def test_kappa_varphi_at_empty():
    kappa, varphi = kappa_varphi(0.0, P)
    assert kappa == 0.0 and varphi == 0.0


@pytest.mark.xfail(strict=True, reason="kappa(E) = A E + B sqrt(E) varies about 25% across "
                   "[E_min, E_max] for any loads that give 2.77e-4 J at mid range")
def test_kappa_flat_over_range():
    e = np.linspace(P.cap.e_min_j, P.cap.e_max_j, 101)
    kappa, _ = kappa_varphi(e, P)
    assert (kappa.max() - kappa.min()) / kappa.mean() <= 0.05


def test_frame_update_clamps_and_balances():
    assert frame_update(P.cap.e_max_j, 10.0, 0, P) == P.cap.e_max_j
    e = 0.1
    _, dm = frame_energies(0, e, 0, P)
    r_bal = dm / (P.eta * P.timing.t_es_s)
    assert frame_update(e, r_bal, 0, P) == pytest.approx(e, abs=1e-15)
    assert frame_update(0.0, 0.0, 1, P) == 0.0


def test_expected_variation():
    _, varphi = kappa_varphi(0.1, P)
    assert expected_variation(0.0, 0.0, 0.1, P) == pytest.approx(-varphi)
    with pytest.raises(InvalidArgument):
        expected_variation(0.0, 1.5, 0.1, P)


def test_advance_death_and_revival():
    p = EnergyParams(revive_j=0.05)
    s = advance(NodeEnergyState(0.0201, True), 0.0, 1, p)
    assert not s.alive
    s2 = advance(NodeEnergyState(0.03, False), 0.0, 0, p)
    assert not s2.alive  # above E_min but below the revive threshold
    s3 = advance(NodeEnergyState(0.06, False), 0.0, 0, p)
    assert s3.alive


def test_rc_discharge_matches_closed_form():
    p = resistive_params()
    e0 = 0.5
    e, _ = integrate_frame(e0, 0.0, [("idle", p.timing.t_frame_s)], p, dt_s=1e-3)
    rate = 2 * (1 / 10.0 + 1 / 1e6) / 0.1
    assert e == pytest.approx(e0 * np.exp(-rate * p.timing.t_frame_s), rel=1e-6)


def test_balanced_harvest_holds_energy():
    e0 = 0.1
    hold = (consumed_power("idle", e0, P.loads, P.cap) + leakage_power(e0, P.cap)) / P.eta
    p = EnergyParams(timing=FrameTiming(0.05, 0.05, 1))
    e, _ = integrate_frame(e0, hold, [("idle", 0.05)], p, dt_s=1e-3)
    assert abs(e - e0) < 1e-9


def test_huge_receive_power_clamps():
    e, alive = integrate_frame(0.1, 100.0, mode_schedule(False, P.timing, P), P)
    assert e == P.cap.e_max_j and alive


def test_discrete_update_tracks_ode():
    for e0 in (0.03, 0.1, 0.17):
        for r in (0.0, 3e-4):
            for a in (0, 1):
                ode, _ = integrate_frame(e0, r, mode_schedule(bool(a), P.timing, P), P)
                assert frame_update(e0, r, a, P) == pytest.approx(ode, rel=1e-2)


def test_param_validation():
    with pytest.raises(InvalidArgument):
        SupercapParams(e_max_j=0.01, e_min_j=0.02)
    with pytest.raises(InvalidArgument):
        FrameTiming(0.5, 0.6)
    with pytest.raises(InvalidArgument):
        EnergyParams(eta=0.0)
    with pytest.raises(InvalidArgument):
        EnergyParams(loads={"idle": DEFAULT_LOADS["idle"]})
