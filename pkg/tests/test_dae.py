import numpy as np
import pytest

from invgrid import (
    CASES, Bus, BranchSpec, NetworkCase, PerUnitBase, TransformerSpec, build_wscc9, hyperbolic_correction,
)
from invgrid.dae import (
    AssemblyError, admittance_matrix, assemble, find_equilibrium, fd_jacobian, solve_powerflow,
)
from invgrid.inverters import GfmGains

GAINS = GfmGains.midrange()


@pytest.fixture(scope="module")
def systems(case2_light):
    out = {}
    for model in ("statpi", "dynpi", "mssb"):
        sys_ = assemble(case2_light, model, GAINS)
        out[model] = (sys_, find_equilibrium(sys_))
    return out


def hand_ybus(case):
    """Bus admittance matrix stamped element by element, independent of the library helper."""
    idx = case.bus_index()
    y = np.zeros((len(case.buses),) * 2, dtype=complex)
    elements = []
    for br in case.branches:
        pi = hyperbolic_correction(br.z_km, br.y_km, br.length_km)
        elements.append((idx[br.from_bus], idx[br.to_bus], 1 / pi.z_pi, 0.5j * pi.c_pi))
    for tr in case.transformers:
        elements.append((idx[tr.from_bus], idx[tr.to_bus], 1 / tr.z, 0.0))
    for a, b, ys, yh in elements:
        y[a, a] += ys + yh
        y[b, b] += ys + yh
        y[a, b] -= ys
        y[b, a] -= ys
    return y


def test_flat_start_with_no_load_stays_flat():
    buses = (Bus(1, "reference", 1.0), Bus(2, "pv", 1.0), Bus(3, "pq"))
    lines = (BranchSpec(1, 2, 1e-4, 1e-3, 0.0, 50.0), BranchSpec(2, 3, 1e-4, 1e-3, 0.0, 80.0))
    pf = solve_powerflow(NetworkCase(PerUnitBase(), buses, lines))
    assert pf.iterations == 0
    assert np.array_equal(pf.voltage, np.ones(3, dtype=complex))


@pytest.mark.parametrize("case_no,scale", [(1, 0.4), (2, 1.0), (3, 0.4), (4, 1.0)])
def test_powerflow_meets_specified_injections(case_no, scale):
    case = build_wscc9(scale, CASES[case_no])
    pf = solve_powerflow(case)
    assert np.allclose(admittance_matrix(case), hand_ybus(case), rtol=0, atol=1e-12)
    s = pf.voltage * np.conj(hand_ybus(case) @ pf.voltage)
    idx = case.bus_index()
    for k, bus in enumerate(case.buses):
        gen = [d for d in case.devices if idx[d.bus] == k]
        if bus.kind.value != "reference":
            p_gen = sum(d.p_set for d in gen)
            assert s[k].real == pytest.approx(p_gen - bus.load_p, abs=1e-9)
        if bus.kind.value == "pq":
            assert s[k].imag == pytest.approx(sum(d.q_set for d in gen) - bus.load_q, abs=1e-9)
        else:
            assert abs(pf.voltage[k]) == pytest.approx(bus.voltage_setpoint, abs=1e-12)
    assert np.angle(pf.voltage[idx[case.reference_bus.id]]) == 0.0
    # slack covers load plus positive losses
    losses = float(s.real.sum())
    assert losses > 0
    assert sum(p for p, _ in pf.device_pq.values()) == pytest.approx(case.total_load_p + losses, abs=1e-9)


def test_state_counts(systems, case2_light):
    n_dev = 11 + 17 + 14     # reference machine without its angle, GFM, GFL
    assert (systems["statpi"][0].n, systems["statpi"][0].m) == (n_dev, 2 * len(case2_light.buses))
    # end-bus voltages are shared between lines, so count one series current per line plus every
    # bus a line touches
    touched = {b for br in case2_light.branches for b in (br.from_bus, br.to_bus)}
    assert systems["dynpi"][0].n == n_dev + 2 * len(case2_light.branches) + 2 * len(touched)
    for seg in (1, 3, 5):
        # N series currents and N-1 interior nodes per line
        expected = n_dev + sum(2 * seg + 2 * (seg - 1) for _ in case2_light.branches) + 2 * len(touched)
        sys_ = assemble(case2_light, "mssb", GAINS, n_segments=seg)
        assert sys_.n == expected
        assert sys_.m == 2 * (len(case2_light.buses) - len(touched))
    assert systems["dynpi"][0].state_count_by_owner()["sm1"] == 11


def test_equilibria_are_tight_and_start_where_they_end(systems):
    for model, (sys_, eq) in systems.items():
        assert eq.residual_norm < 1e-9
        assert np.max(np.abs(sys_.bus_kcl_mismatch(eq.z))) < 1e-9
        if model != "mssb":
            assert eq.iterations == 0


def test_device_power_matches_dispatch(systems, case2_light):
    pf = solve_powerflow(case2_light)
    # the segmented line shifts the operating point, so only the exact-pi models hit dispatch
    for model in ("statpi", "dynpi"):
        sys_, eq = systems[model]
        for name, (p, q) in pf.device_pq.items():
            assert abs(eq.device_power[name] - complex(p, q)) < 1e-6


def test_inverter_power_loops_track_setpoints_under_mssb(systems):
    sys_, eq = systems["mssb"]
    z = eq.z
    sp = sys_.setpoints()
    for name, p_ref in (("gfl2", sp["gfl2"].p_ref), ("gfm3", sp["gfm3"].p_ref)):
        v_o = complex(z[sys_.index_of(name, "vo_r")], z[sys_.index_of(name, "vo_i")])
        i_g = complex(z[sys_.index_of(name, "ig_r")], z[sys_.index_of(name, "ig_i")])
        assert (v_o * i_g.conjugate()).real == pytest.approx(p_ref, abs=1e-9)


def test_energy_balance(systems, case2_light):
    pf = solve_powerflow(case2_light)
    y = hand_ybus(case2_light)
    for model in ("statpi", "dynpi"):
        sys_, eq = systems[model]
        v = eq.bus_voltage
        losses = float(np.real(v @ np.conj(y @ v)))
        load = sum(b.load_p * abs(v[k]) ** 2 / abs(pf.voltage[k]) ** 2 for k, b in enumerate(case2_light.buses))
        generated = sum(s.real for s in eq.device_power.values())
        assert generated == pytest.approx(load + losses, abs=1e-8)


def test_static_and_dynamic_pi_agree_at_steady_state(systems):
    (s_sys, s_eq), (d_sys, d_eq) = systems["statpi"], systems["dynpi"]
    assert np.max(np.abs(s_eq.bus_voltage - d_eq.bus_voltage)) < 1e-8
    fs, fd = s_sys.branch_flows(s_eq.z), d_sys.branch_flows(d_eq.z)
    assert fs.keys() == fd.keys()
    for k in fs:
        assert abs(fs[k] - fd[k]) < 1e-8


def test_perturbed_start_returns_to_the_same_point(systems):
    rng = np.random.default_rng(11)
    for sys_, eq in systems.values():
        guess = eq.z + 1e-3 * rng.uniform(-1, 1, eq.z.size)
        again = find_equilibrium(sys_, guess)
        assert np.max(np.abs(again.z - eq.z)) < 1e-7


def test_registry_is_deterministic(case2_light):
    a = assemble(case2_light, "mssb", GAINS, n_segments=3)
    b = assemble(case2_light, "mssb", GAINS, n_segments=3)
    assert a.registry == b.registry
    assert len(set(a.registry)) == len(a.registry)
    assert a.index_of("sm1", "omega") < a.n


def test_colored_jacobian_matches_dense_differences(systems):
    sys_, eq = systems["dynpi"]
    z = eq.z
    dense = np.empty((z.size, z.size))
    for k in range(z.size):
        h = 1e-7 * max(1.0, abs(z[k]))
        zp, zm = z.copy(), z.copy()
        zp[k] += h
        zm[k] -= h
        dense[:, k] = (sys_.residual(zp) - sys_.residual(zm)) / (2 * h)
    assert np.allclose(fd_jacobian(sys_, z), dense, rtol=0, atol=1e-8 * np.abs(dense).max())


def test_disconnected_bus_is_rejected():
    buses = (Bus(1, "reference", 1.0), Bus(2, "pq", load_p=0.1), Bus(3, "pq", load_p=0.1))
    case = NetworkCase(PerUnitBase(), buses, (BranchSpec(1, 2, 1e-4, 1e-3, 0.0, 10.0),))
    with pytest.raises(AssemblyError, match="3"):
        assemble(case, "statpi")


def test_unknown_load_model_rejected(case2_light):
    with pytest.raises(ValueError):
        assemble(case2_light, "statpi", load_model="motor")


def test_transformer_only_network():
    buses = (Bus(1, "reference", 1.0), Bus(2, "pq", load_p=0.2, load_q=0.05))
    case = NetworkCase(PerUnitBase(), buses, (), transformers=(TransformerSpec(1, 2, 0.0, 0.1),))
    pf = solve_powerflow(case)
    v2 = pf.voltage[1]
    assert v2 * np.conj((v2 - 1.0) / 0.1j) == pytest.approx(-0.2 - 0.05j, abs=1e-9)
