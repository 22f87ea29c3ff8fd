from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cablequad.dynamics import (
    CableMode,
    Disturbance,
    SimulationDiverged,
    SystemParams,
    compliant_cable_tension,
    hover_state,
    hybrid_derivative,
    integrate_wrench,
    kinetic_energy,
    make_state,
    potential_energy,
    stack_params,
    trajectory_row,
    TRAJECTORY_COLUMNS,
)
from cablequad.mathcore import E3

DT = 0.002
Z = np.zeros(3)


def test_params_validation():
    with pytest.raises(ValueError):
        SystemParams(m_Q=0.0)
    with pytest.raises(ValueError):
        SystemParams(l=-1.0)
    with pytest.raises(ValueError):
        Disturbance(duration=-1.0)


def test_hover_derivative_is_zero():
    p = SystemParams()
    d = hybrid_derivative(hover_state(p), p.m_total * p.g, Z, Z, Z, p)
    for name in ("x_Q", "v_Q", "x_P", "v_P", "Omega"):
        np.testing.assert_allclose(getattr(d, name), 0.0, atol=1e-12)


def test_rejects_bad_inputs():
    p = SystemParams()
    s = hover_state(p)
    with pytest.raises(ValueError):
        hybrid_derivative(s, -1.0, Z, Z, Z, p)
    with pytest.raises(ValueError):
        hybrid_derivative(s, np.nan, Z, Z, Z, p)


def test_no_payload_hover_fixed_point():
    p = SystemParams(m_P=0.0, l=0.0)
    s = hover_state(p, x_P=(0.0, 0.0, 1.0))
    assert int(s.mode) == CableMode.NO_PAYLOAD
    for k in range(200):
        s = integrate_wrench(s, p.m_total * p.g, Z, None, p, DT)
    np.testing.assert_allclose(s.x_Q, [0.0, 0.0, 1.0], atol=1e-12)


def test_compliant_static_hang_settles_at_stretched_length():
    # force-balance oracle: d = l + m_P g / k_c once the payload is at rest
    p = SystemParams(k_c=500.0, c_c=5.0)
    x_Q = np.array([0.0, 0.0, 3.0])
    s = make_state(x_Q, Z, np.eye(3), Z, x_Q - p.l * E3, Z, p, "compliant")
    # hold the quadrotor in place by cancelling its share of the load
    for _ in range(3000):
        T = float(np.linalg.norm(compliant_cable_tension(s, p)))
        s = integrate_wrench(s, p.m_Q * p.g + T, Z, None, p, DT, cable_model="compliant")
    d = np.linalg.norm(s.x_Q - s.x_P)
    assert d == pytest.approx(p.l + p.m_P * p.g / p.k_c, abs=1e-5)


def test_taut_pendulum_conserves_energy_without_thrust_work():
    # no rotor thrust and no damping: total mechanical energy is conserved
    p = SystemParams()
    x_Q = np.array([0.0, 0.0, 3.0])
    q = np.array([np.sin(0.4), 0.0, -np.cos(0.4)])
    v_P = np.array([0.0, 0.5, 0.0])
    s = make_state(x_Q, Z, np.eye(3), Z, x_Q + p.l * q, v_P, p)
    e0 = kinetic_energy(s, p) + potential_energy(s, p)
    for _ in range(250):
        s = integrate_wrench(s, 0.0, Z, None, p, DT)
    # free fall of the whole system keeps the cable taut only if tension stays
    # positive; with zero thrust the bodies fall together and tension -> 0
    e1 = kinetic_energy(s, p) + potential_energy(s, p)
    assert abs(e1 - e0) < 1e-6 * max(1.0, abs(e0))


def test_divergence_raises():
    # without a payload the quadrotor velocity is an integrated coordinate
    p = SystemParams(m_P=0.0)
    s = replace(hover_state(p), v_Q=np.array([2e6, 0.0, 0.0]))
    with pytest.raises(SimulationDiverged):
        integrate_wrench(s, p.m_total * p.g, Z, None, p, DT)


def test_disturbance_window():
    d = Disturbance(w_F=np.array([0.5, 0.0, 0.0]), t_start=1.0, duration=0.5)
    assert np.all(d.wrench_at(0.9)[0] == 0.0)
    assert d.wrench_at(1.2)[0][0] == 0.5
    assert np.all(d.wrench_at(1.5)[0] == 0.0)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 0.2), st.floats(0.1, 1.0))
def test_batched_matches_single(m_P, l):
    single = SystemParams(m_P=m_P, l=l)
    batch = stack_params([SystemParams(), single])
    s_b = hover_state(batch, x_P=np.zeros((2, 3)))
    f = np.array([9.0, 9.5])
    s_b = integrate_wrench(s_b, f, np.zeros((2, 3)), None, batch, DT)
    s_1 = integrate_wrench(hover_state(single), 9.5, Z, None, single, DT)
    np.testing.assert_allclose(s_b.x_P[1], s_1.x_P, atol=1e-14)


def test_trajectory_row_matches_columns():
    p = SystemParams()
    row = trajectory_row(0.0, hover_state(p), 10.0, Z)
    assert len(row) == len(TRAJECTORY_COLUMNS)
