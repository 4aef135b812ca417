import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from invgrid.machine import (
    STATE_NAMES, AvrType1Params, InitializationError, MachineParams, MachineSetpoints, MachineState,
    SynchronousMachine, init_from_terminal, machine_residual, to_machine_frame, to_network_frame,
)

BUNDLE = SynchronousMachine()


@pytest.mark.parametrize("v,p,q", [(1.04, 0.7, 0.2), (1.0 * cmath.exp(0.3j), 0.3, -0.1),
                                   (0.97 * cmath.exp(-0.2j), 0.9, 0.4), (1.02, 0.0, 0.0)])
def test_initialized_machine_is_at_rest_and_delivers_dispatch(v, p, q):
    x, sp = init_from_terminal(v, p, q, BUNDLE)
    dx, i_t = machine_residual(x, v, BUNDLE, sp)
    assert np.max(np.abs(dx)) < 1e-9
    s = v * i_t.conjugate()
    assert abs(s - complex(p, q)) < 1e-12
    assert x[STATE_NAMES.index("omega")] == 1.0


@given(st.floats(-4, 4), st.floats(-2, 2), st.floats(-2, 2))
def test_frame_round_trip(delta, re, im):
    z = complex(re, im)
    back = to_network_frame(to_machine_frame(z, delta), delta)
    assert abs(back - z) <= 1e-12 * (1 + abs(z))
    assert abs(to_machine_frame(z, delta)) == pytest.approx(abs(z), abs=1e-12)


def test_machine_frame_q_axis_leads_by_delta():
    # the q axis sits at angle delta in the network frame
    assert abs(to_machine_frame(cmath.exp(0.4j), 0.4) - 1j) < 1e-15


def test_off_nominal_frame_keeps_rotor_locked():
    x, sp = init_from_terminal(1.0, 0.5, 0.1, BUNDLE)
    dx, _ = machine_residual(x, 1.0, BUNDLE, sp, omega_sys=1.01)
    # only the stator fluxes (omega psi terms) and the angle see the frame speed
    d = STATE_NAMES.index("delta")
    assert dx[d] == pytest.approx(-0.01 * 2 * math.pi * 60)


def test_state_dataclass_round_trip():
    x, _ = init_from_terminal(1.0, 0.5, 0.1, BUNDLE)
    assert np.array_equal(MachineState.from_array(x).to_array(), x)


def test_infeasible_terminal_conditions_raise():
    with pytest.raises(InitializationError):
        init_from_terminal(0.0, 0.5, 0.1, BUNDLE)
    with pytest.raises(InitializationError):
        init_from_terminal(1.0, 0.5, -8.0, BUNDLE)   # negative field voltage
    with pytest.raises(InitializationError):
        init_from_terminal(1.0, 0.5, 200.0, BUNDLE)   # field voltage far above ceiling


@pytest.mark.parametrize("kwargs", [dict(x_d=0.05), dict(h=0.0), dict(d=-1.0), dict(t_d0_p=0.0)])
def test_machine_parameter_validation(kwargs):
    with pytest.raises(ValueError):
        MachineParams(**kwargs)


def test_avr_parameter_validation():
    with pytest.raises(ValueError):
        AvrType1Params(t_a=0.0)


def test_mechanical_step_accelerates_rotor():
    x, sp = init_from_terminal(1.0, 0.5, 0.1, BUNDLE)
    dx, _ = machine_residual(x, 1.0, BUNDLE, MachineSetpoints(sp.p_m + 0.1, sp.v_ref))
    assert dx[STATE_NAMES.index("omega")] == pytest.approx(0.1 / (2 * BUNDLE.machine.h))


def test_no_load_machine_has_zero_current():
    x, sp = init_from_terminal(1.0, 0.0, 0.0, BUNDLE)
    dx, i_t = machine_residual(x, 1.0, BUNDLE, sp)
    assert i_t == 0
    s = MachineState.from_array(x)
    assert s.omega == 1.0
    # subtransient EMFs equal the machine-frame terminal voltage components
    v = to_machine_frame(1.0, s.delta)
    assert (s.eq_pp, -s.ed_pp) == pytest.approx((v.imag, v.real), abs=1e-15)


def test_rated_dispatch_example():
    v = 1.025 * cmath.exp(0.1j)
    x, sp = init_from_terminal(v, 0.8, 0.2, BUNDLE)
    dx, i_t = machine_residual(x, v, BUNDLE, sp)
    assert np.max(np.abs(dx)) < 1e-9
    assert abs(v * i_t.conjugate() - (0.8 + 0.2j)) < 1e-8


@settings(max_examples=25, deadline=None)
@given(st.floats(-3.0, 3.0))
def test_residual_depends_on_frame_difference_only(phi):
    v = 1.01 * cmath.exp(0.2j)
    x, sp = init_from_terminal(v, 0.6, 0.1, BUNDLE)
    x[9] += 0.01      # move away from rest so every term is active
    x[0] -= 0.002
    dx, i_t = machine_residual(x, v, BUNDLE, sp)
    xr = x.copy()
    xr[STATE_NAMES.index("delta")] += phi
    dxr, i_r = machine_residual(xr, v * cmath.exp(1j * phi), BUNDLE, sp)
    assert np.allclose(dxr, dx, atol=1e-12)
    assert abs(i_r - i_t * cmath.exp(1j * phi)) < 1e-12


def test_machine_on_infinite_bus_is_small_signal_stable():
    v = 1.0
    x, sp = init_from_terminal(v, 0.7, 0.15, BUNDLE)
    cols = []
    for k in range(x.size):
        h = 1e-7 * max(1.0, abs(x[k]))
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        cols.append((machine_residual(xp, v, BUNDLE, sp)[0] - machine_residual(xm, v, BUNDLE, sp)[0]) / (2 * h))
    assert np.max(np.linalg.eigvals(np.column_stack(cols)).real) < 0
