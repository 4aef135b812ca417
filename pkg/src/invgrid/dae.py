"""Composition of devices, loads and lines into one semi-explicit DAE.

The system is ``dx/dt = f(x, y)``, ``0 = g(x, y)`` where ``x`` holds device
states, dynamic line currents and capacitive node voltages, and ``y`` holds
the voltages of buses without any shunt capacitance.  The network frame
rotates with the rotor of the machine at the reference bus; that machine's
rotor angle is therefore a constant and is not a state.

Network equations, per unit on the system base (currents into a node are
positive)::

    (l/w_b) di/dt = v_from - v_to - (r + j w_sys l) i        series elements
    (C/w_b) dv/dt = sum(i_in) - j w_sys C v                   capacitive nodes
    0             = sum(i_in)                                 other buses

Static elements (transformers, algebraic pi lines, loads) contribute
``-Y_s v`` to ``sum(i_in)``.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import inverters as inv
from . import machine as sm
from .core import BusKind, ConfigurationError, NetworkCase
from .cases import with_gfm_gains
from .lines import LineModel, hyperbolic_correction, segment_params

__all__ = [
    "PowerFlowError",
    "AssemblyError",
    "EquilibriumError",
    "PowerFlowResult",
    "DaeSystem",
    "Equilibrium",
    "NumericPolicy",
    "DEFAULT_POLICY",
    "solve_powerflow",
    "admittance_matrix",
    "assemble",
    "find_equilibrium",
    "fd_jacobian",
    "richardson_entry",
]


class PowerFlowError(RuntimeError):
    pass


class AssemblyError(ConfigurationError):
    pass


class EquilibriumError(RuntimeError):
    def __init__(self, message: str, residual_norm: float):
        super().__init__(message)
        self.residual_norm = residual_norm


@dataclass(frozen=True)
class NumericPolicy:
    """Steps and tolerances shared by equilibrium search and linearization."""

    fd_rel_step: float = 1e-7
    equilibrium_tol: float = 1e-9
    max_newton_iter: int = 50
    powerflow_tol: float = 1e-10
    gy_cond_limit: float = 1e12
    zero_eig_tol: float = 1e-8

    def as_dict(self) -> dict:
        return dict(vars(self))


DEFAULT_POLICY = NumericPolicy()


# --------------------------------------------------------------------------
# power flow


def admittance_matrix(case: NetworkCase, include_lines: bool = True) -> np.ndarray:
    """Nominal-frequency bus admittance matrix of lines (hyperbolic pi) and transformers."""
    idx = case.bus_index()
    n = len(case.buses)
    y = np.zeros((n, n), dtype=complex)

    def stamp(a, b, ys, yh):
        y[a, a] += ys + yh
        y[b, b] += ys + yh
        y[a, b] -= ys
        y[b, a] -= ys

    if include_lines:
        for br in case.branches:
            pi = hyperbolic_correction(br.z_km, br.y_km, br.length_km)
            stamp(idx[br.from_bus], idx[br.to_bus], 1.0 / pi.z_pi, pi.y_half)
    for tr in case.transformers:
        stamp(idx[tr.from_bus], idx[tr.to_bus], 1.0 / tr.z, 0.0)
    return y


@dataclass(frozen=True)
class PowerFlowResult:
    voltage: np.ndarray          # complex per bus, case bus order
    p_injection: np.ndarray      # net injection per bus
    q_injection: np.ndarray
    device_pq: dict              # device name -> (p, q) system base
    iterations: int
    mismatch: float

    @property
    def v_mag(self) -> np.ndarray:
        return np.abs(self.voltage)

    @property
    def v_angle(self) -> np.ndarray:
        return np.angle(self.voltage)

    def losses(self, case: NetworkCase) -> float:
        return float(self.p_injection.sum())

    def summary(self, case: NetworkCase) -> list[dict]:
        return [
            {"bus": b.id, "v": float(abs(self.voltage[k])), "theta": float(np.angle(self.voltage[k])),
             "p": float(self.p_injection[k]), "q": float(self.q_injection[k])}
            for k, b in enumerate(case.buses)
        ]


def solve_powerflow(case: NetworkCase, tol: float = 1e-10, max_iter: int = 30) -> PowerFlowResult:
    """Full Newton-Raphson power flow in polar coordinates.

    Loads are constant power here; the slack (reference) bus absorbs losses.
    """
    n = len(case.buses)
    idx = case.bus_index()
    ybus = admittance_matrix(case)
    p_spec = np.array([-b.load_p for b in case.buses])
    q_spec = np.array([-b.load_q for b in case.buses])
    for dev in case.devices:
        k = idx[dev.bus]
        p_spec[k] += dev.p_set
        q_spec[k] += dev.q_set
    kinds = [b.kind for b in case.buses]
    ref = [k for k in range(n) if kinds[k] is BusKind.REFERENCE]
    pv = [k for k in range(n) if kinds[k] is BusKind.PV]
    pq = [k for k in range(n) if kinds[k] is BusKind.PQ]
    pvpq = pv + pq

    vm = np.array([b.voltage_setpoint if b.kind is not BusKind.PQ else 1.0 for b in case.buses])
    va = np.zeros(n)

    def mismatch(v):
        s = v * np.conj(ybus @ v)
        return np.concatenate([s.real[pvpq] - p_spec[pvpq], s.imag[pq] - q_spec[pq]])

    v = vm * np.exp(1j * va)
    f = mismatch(v)
    it = 0
    while np.max(np.abs(f), initial=0.0) > tol:
        if it >= max_iter:
            raise PowerFlowError(f"power flow did not converge; max mismatch {np.max(np.abs(f)):.3e} pu")
        ibus = ybus @ v
        diag_v = np.diag(v)
        diag_i = np.diag(ibus)
        diag_vn = np.diag(v / np.abs(v))
        ds_dva = 1j * diag_v @ np.conj(diag_i - ybus @ diag_v)
        ds_dvm = diag_v @ np.conj(ybus @ diag_vn) + np.conj(diag_i) @ diag_vn
        jac = np.block([
            [ds_dva.real[np.ix_(pvpq, pvpq)], ds_dvm.real[np.ix_(pvpq, pq)]],
            [ds_dva.imag[np.ix_(pq, pvpq)], ds_dvm.imag[np.ix_(pq, pq)]],
        ])
        dx = np.linalg.solve(jac, -f)
        va[pvpq] += dx[:len(pvpq)]
        vm[pq] += dx[len(pvpq):]
        v = vm * np.exp(1j * va)
        f = mismatch(v)
        it += 1

    s = v * np.conj(ybus @ v)
    device_pq = {}
    for dev in case.devices:
        k = idx[dev.bus]
        if kinds[k] is BusKind.REFERENCE:
            p = s[k].real + case.buses[k].load_p
            q = s[k].imag + case.buses[k].load_q
        elif kinds[k] is BusKind.PV:
            p = dev.p_set
            q = s[k].imag + case.buses[k].load_q
        else:
            p, q = dev.p_set, dev.q_set
        device_pq[dev.name] = (float(p), float(q))
    return PowerFlowResult(v, s.real.copy(), s.imag.copy(), device_pq, it,
                           float(np.max(np.abs(f), initial=0.0)))


# --------------------------------------------------------------------------
# device slots


class _Slot:
    """One device inside the DAE: state slice, bus, base scaling, setpoints."""

    kind: str

    def __init__(self, spec, start, bus_node, scale, omega_b):
        self.spec = spec
        self.name = spec.name
        self.start = start
        self.bus_node = bus_node
        self.scale = scale            # device current base / system current base
        self.omega_b = omega_b


class _MachineSlot(_Slot):
    kind = "sm"

    def __init__(self, spec, start, bus_node, scale, omega_b, x0, setpoints, is_reference):
        super().__init__(spec, start, bus_node, scale, omega_b)
        self.setpoints = setpoints
        self.is_reference = is_reference
        self.delta0 = float(x0[sm.DELTA])
        self.names = tuple(n for n in sm.STATE_NAMES if not (is_reference and n == "delta"))
        self.size = len(self.names)
        self.x0 = np.array([v for n, v in zip(sm.STATE_NAMES, x0) if n in self.names])

    def evaluate(self, xs, v, omega_sys):
        p = self.spec.params
        if self.is_reference:
            full = list(xs[:6]) + [self.delta0] + list(xs[6:])
            dx, i = sm._residual(full, v, p.machine, p.avr, self.setpoints.p_m, self.setpoints.v_ref,
                                 omega_sys, self.omega_b)
            del dx[sm.DELTA]
            return dx, i
        return sm._residual(xs, v, p.machine, p.avr, self.setpoints.p_m, self.setpoints.v_ref,
                            omega_sys, self.omega_b)

    def current_states(self):
        return [self.names.index(n) for n in ("psi_d", "psi_q", "eq_pp", "ed_pp")] + (
            [] if self.is_reference else [self.names.index("delta")])


class _GfmSlot(_Slot):
    kind = "gfm"
    names = inv.GFM_STATE_NAMES
    size = len(inv.GFM_STATE_NAMES)

    def __init__(self, spec, start, bus_node, scale, omega_b, x0, setpoints):
        super().__init__(spec, start, bus_node, scale, omega_b)
        self.x0 = x0
        self.setpoints = setpoints

    def evaluate(self, xs, v, omega_sys):
        p = self.spec.params
        return inv._gfm(xs, v, p.gains, p.params, self.setpoints, omega_sys, self.omega_b)

    def current_states(self):
        return [self.names.index("ig_r"), self.names.index("ig_i")]


class _GflSlot(_Slot):
    kind = "gfl"
    names = inv.GFL_STATE_NAMES
    size = len(inv.GFL_STATE_NAMES)

    def __init__(self, spec, start, bus_node, scale, omega_b, x0, setpoints):
        super().__init__(spec, start, bus_node, scale, omega_b)
        self.x0 = x0
        self.setpoints = setpoints

    def evaluate(self, xs, v, omega_sys):
        p = self.spec.params
        return inv._gfl(xs, v, p.gains, p.params, self.setpoints, omega_sys, self.omega_b)

    def current_states(self):
        return [self.names.index("ig_r"), self.names.index("ig_i")]


# --------------------------------------------------------------------------
# assembled system


@dataclass
class DaeSystem:
    """Assembled DAE.  Treat as immutable once built."""

    case: NetworkCase
    line_model: LineModel
    n_segments: int
    n: int
    m: int
    registry: tuple                 # (owner, local name) per global slot, x first then y
    powerflow: PowerFlowResult
    z0: np.ndarray                  # initial guess from power flow and device back-solves
    omega_b: float
    load_model: str
    _slots: list = field(repr=False, default_factory=list)
    _net: dict = field(repr=False, default_factory=dict)
    _pattern: list = field(repr=False, default_factory=list)
    _colors: list = field(repr=False, default_factory=list)

    @property
    def size(self) -> int:
        return self.n + self.m

    @property
    def state_names(self) -> list[str]:
        return [f"{o}.{s}" for o, s in self.registry[: self.n]]

    @property
    def algebraic_names(self) -> list[str]:
        return [f"{o}.{s}" for o, s in self.registry[self.n:]]

    def index_of(self, owner: str, local: str) -> int:
        return self.registry.index((owner, local))

    def setpoints(self) -> dict:
        """Input vector ``u``: device setpoints fixed at assembly."""
        return {s.name: s.setpoints for s in self._slots}

    def state_count_by_owner(self) -> dict:
        out: dict = {}
        for owner, _ in self.registry[: self.n]:
            out[owner] = out.get(owner, 0) + 1
        return out

    # -- evaluation -------------------------------------------------------

    def node_voltages(self, z: np.ndarray) -> np.ndarray:
        net = self._net
        v = np.empty(net["n_nodes"], dtype=complex)
        if net["dyn_nodes"].size:
            v[net["dyn_nodes"]] = z[net["v_dyn_start"]:net["v_dyn_end"]].view(complex)
        if net["alg_nodes"].size:
            v[net["alg_nodes"]] = z[self.n:].view(complex)
        return v

    def omega_sys(self, z: np.ndarray) -> float:
        k = self._net["omega_index"]
        return 1.0 if k is None else float(z[k])

    def residual(self, z: np.ndarray) -> np.ndarray:
        """Stacked ``[f; g]`` at ``z = [x; y]``."""
        z = np.ascontiguousarray(z, dtype=float)
        net = self._net
        out = np.empty(self.n + self.m)
        w = self.omega_sys(z)
        v = self.node_voltages(z)
        inj = np.zeros(net["n_nodes"], dtype=complex)

        for slot in self._slots:
            a = slot.start
            b = a + slot.size
            dx, i = slot.evaluate(z[a:b].tolist(), v[slot.bus_node], w)
            out[a:b] = dx
            inj[slot.bus_node] += i * slot.scale

        nb = net["n_bus"]
        vb = v[:nb]
        inj[:nb] -= net["y_static"] @ vb
        if net["load_s"] is not None:
            inj[:nb] -= np.conj(net["load_s"] / vb)

        if net["n_series"]:
            s0, s1 = net["i_start"], net["i_end"]
            i_s = z[s0:s1].view(complex)
            l_s = net["l_series"]
            di = net["omega_b"] / l_s * (v[net["from_node"]] - v[net["to_node"]]
                                          - (net["r_series"] + 1j * w * l_s) * i_s)
            out[s0:s1] = di.view(float)
            inj += net["incidence"] @ i_s

        if net["dyn_nodes"].size:
            dn = net["dyn_nodes"]
            c = net["c_node"][dn]
            dv = net["omega_b"] / c * (inj[dn] - 1j * w * c * v[dn])
            out[net["v_dyn_start"]:net["v_dyn_end"]] = dv.view(float)
        if net["alg_nodes"].size:
            out[self.n:] = inj[net["alg_nodes"]].view(float)
        return out

    def split(self, z):
        return z[: self.n], z[self.n:]

    def device_terminal_power(self, z: np.ndarray) -> dict:
        """Complex power delivered by each device at its bus, system base."""
        v = self.node_voltages(z)
        w = self.omega_sys(z)
        out = {}
        for slot in self._slots:
            _, i = slot.evaluate(z[slot.start:slot.start + slot.size].tolist(), v[slot.bus_node], w)
            out[slot.name] = complex(v[slot.bus_node] * np.conj(i * slot.scale))
        return out

    def bus_kcl_mismatch(self, z: np.ndarray) -> np.ndarray:
        """Net current into every bus including capacitor charging; zero at equilibrium."""
        net = self._net
        v = self.node_voltages(z)
        w = self.omega_sys(z)
        inj = np.zeros(net["n_nodes"], dtype=complex)
        for slot in self._slots:
            _, i = slot.evaluate(z[slot.start:slot.start + slot.size].tolist(), v[slot.bus_node], w)
            inj[slot.bus_node] += i * slot.scale
        nb = net["n_bus"]
        inj[:nb] -= net["y_static"] @ v[:nb]
        if net["load_s"] is not None:
            inj[:nb] -= np.conj(net["load_s"] / v[:nb])
        if net["n_series"]:
            inj += net["incidence"] @ z[net["i_start"]:net["i_end"]].view(complex)
        inj -= 1j * w * net["c_node"] * v
        return inj[:nb]

    def branch_flows(self, z: np.ndarray) -> dict:
        """Sending-end complex power of every line and transformer, system base."""
        case = self.case
        idx = case.bus_index()
        v = self.node_voltages(z)
        out = {}
        for tr in case.transformers:
            a, b = idx[tr.from_bus], idx[tr.to_bus]
            out[f"tr{tr.from_bus}-{tr.to_bus}"] = complex(v[a] * np.conj((v[a] - v[b]) / tr.z))
        w = self.omega_sys(z)
        for k, br in enumerate(case.branches):
            a = idx[br.from_bus]
            if self.line_model is LineModel.STATPI:
                pi = hyperbolic_correction(br.z_km, br.y_km, br.length_km)
                i_in = (v[a] - v[idx[br.to_bus]]) / pi.z_pi + pi.y_half * v[a]
            else:
                j = self._net["line_first_series"][k]
                i_first = z[self._net["i_start"] + 2 * j] + 1j * z[self._net["i_start"] + 2 * j + 1]
                i_in = i_first + 1j * w * self._net["line_end_cap"][k] * v[a]
            out[_line_name(br, k)] = complex(v[a] * np.conj(i_in))
        return out


def _line_name(br, k) -> str:
    return br.name or f"line{br.from_bus}-{br.to_bus}#{k}"


def _check_connected(case: NetworkCase) -> None:
    adj = {b.id: set() for b in case.buses}
    for br in tuple(case.branches) + tuple(case.transformers):
        adj[br.from_bus].add(br.to_bus)
        adj[br.to_bus].add(br.from_bus)
    start = case.reference_bus.id
    seen = {start}
    todo = deque([start])
    while todo:
        k = todo.popleft()
        for j in adj[k] - seen:
            seen.add(j)
            todo.append(j)
    missing = sorted(set(adj) - seen)
    if missing:
        raise AssemblyError(f"buses {missing} are disconnected from the reference bus")


def _ladder_steady_state(va, vb, seg):
    """Steady-state segment currents and interior voltages for given end voltages."""
    n = seg.n_segments
    z = complex(seg.r_seg, seg.l_seg)
    yc = 1j * seg.c_seg
    # unknowns: i_1..i_n, v_2..v_n
    size = n + (n - 1)
    a = np.zeros((size, size), dtype=complex)
    rhs = np.zeros(size, dtype=complex)

    def vcol(k):  # node k in 1..n+1; returns column or None for boundary
        return None if k in (1, n + 1) else n + (k - 2)

    for k in range(1, n + 1):
        row = k - 1
        a[row, k - 1] = -z
        for node, sgn in ((k, 1.0), (k + 1, -1.0)):
            col = vcol(node)
            if col is None:
                rhs[row] -= sgn * (va if node == 1 else vb)
            else:
                a[row, col] += sgn
    for k in range(2, n + 1):
        row = n + (k - 2)
        a[row, k - 2] = 1.0
        a[row, k - 1] = -1.0
        a[row, vcol(k)] = -yc
    sol = np.linalg.solve(a, rhs)
    return sol[:n], sol[n:]


def assemble(
    case: NetworkCase,
    line_model="statpi",
    gains: inv.GfmGains | None = None,
    *,
    n_segments: int = 5,
    load_model: str = "impedance",
    powerflow: PowerFlowResult | None = None,
) -> DaeSystem:
    """Build the DAE of ``case`` under one line model.

    Device setpoints are back-solved from the power flow so that the
    returned ``z0`` is an equilibrium whenever the line model reproduces the
    nominal-frequency pi exactly (statpi, dynpi).
    """
    line_model = LineModel(line_model)
    if load_model not in ("impedance", "power"):
        raise ConfigurationError(f"unknown load model {load_model!r}")
    if line_model is LineModel.MSSB and n_segments < 1:
        raise ConfigurationError("segment count must be >= 1")
    if gains is not None:
        case = with_gfm_gains(case, gains)
    _check_connected(case)
    pf = powerflow if powerflow is not None else solve_powerflow(case)
    omega_b = case.base.omega_b
    s_base = case.base.s_base
    idx = case.bus_index()
    nb = len(case.buses)
    ref_bus = idx[case.reference_bus.id]

    # ---- network topology -------------------------------------------------
    y_static = admittance_matrix(case, include_lines=line_model is LineModel.STATPI)
    c_node = [0.0] * nb
    series = []          # (from_node, to_node, r, l, owner, local prefix)
    node_owner = [(f"bus{b.id}", "") for b in case.buses]
    line_first_series = []
    line_end_cap = []
    n_nodes = nb
    for k, br in enumerate(case.branches):
        a, b = idx[br.from_bus], idx[br.to_bus]
        name = _line_name(br, k)
        if line_model is LineModel.STATPI:
            line_first_series.append(None)
            line_end_cap.append(0.0)
            continue
        if line_model is LineModel.DYNPI:
            pi = hyperbolic_correction(br.z_km, br.y_km, br.length_km)
            if pi.c_pi <= 0:
                raise AssemblyError(f"{name}: dynamic pi needs shunt capacitance")
            line_first_series.append(len(series))
            line_end_cap.append(pi.c_pi / 2.0)
            series.append((a, b, pi.r_pi, pi.l_pi, name, "i"))
            c_node[a] += pi.c_pi / 2.0
            c_node[b] += pi.c_pi / 2.0
            continue
        seg = segment_params(br.r_km, br.l_km, br.c_km, br.length_km, n_segments)
        if seg.c_seg <= 0:
            raise AssemblyError(f"{name}: segmented line needs shunt capacitance")
        nodes = [a]
        for j in range(2, n_segments + 1):
            nodes.append(n_nodes)
            node_owner.append((name, f"node{j}"))
            c_node.append(seg.c_seg)
            n_nodes += 1
        nodes.append(b)
        c_node[a] += seg.c_seg / 2.0
        c_node[b] += seg.c_seg / 2.0
        line_first_series.append(len(series))
        line_end_cap.append(seg.c_seg / 2.0)
        for j in range(n_segments):
            series.append((nodes[j], nodes[j + 1], seg.r_seg, seg.l_seg, name, f"i{j + 1}"))

    c_node = np.array(c_node)
    dyn_nodes = np.flatnonzero(c_node > 0)
    alg_nodes = np.flatnonzero(c_node == 0)

    # ---- loads ------------------------------------------------------------
    load_s = None
    s_load = np.array([complex(b.load_p, b.load_q) for b in case.buses])
    if load_model == "impedance":
        y_load = np.conj(s_load) / np.abs(pf.voltage) ** 2
        y_static = y_static + np.diag(y_load)
    else:
        load_s = s_load

    # ---- devices ----------------------------------------------------------
    registry = []
    slots = []
    pos = 0
    for dev in case.devices:
        bus_node = idx[dev.bus]
        v_t = complex(pf.voltage[bus_node])
        p_sys, q_sys = pf.device_pq[dev.name]
        scale = dev.rating_mva / s_base
        p_dev, q_dev = p_sys / scale, q_sys / scale
        if dev.kind == "sm":
            x0, sp = sm.init_from_terminal(v_t, p_dev, q_dev, dev.params)
            slot = _MachineSlot(dev, pos, bus_node, scale, omega_b, x0, sp, bus_node == ref_bus)
        elif dev.kind == "gfm":
            x0, sp = inv.gfm_init(v_t, p_dev, q_dev, dev.params.gains, dev.params.params)
            slot = _GfmSlot(dev, pos, bus_node, scale, omega_b, x0, sp)
        else:
            x0, sp = inv.gfl_init(v_t, p_dev, q_dev, dev.params.gains, dev.params.params)
            slot = _GflSlot(dev, pos, bus_node, scale, omega_b, x0, sp)
        slots.append(slot)
        registry += [(dev.name, nm) for nm in slot.names]
        pos += slot.size

    omega_index = None
    for slot in slots:
        if slot.kind == "sm" and slot.is_reference:
            omega_index = slot.start + slot.names.index("omega")

    i_start = pos
    for (_, _, _, _, owner, local) in series:
        registry += [(owner, f"{local}_r"), (owner, f"{local}_i")]
        pos += 2
    i_end = pos
    v_dyn_start = pos
    for k in dyn_nodes:
        owner, local = node_owner[k]
        registry += [(owner, f"{local}v_r" if local else "v_r"), (owner, f"{local}v_i" if local else "v_i")]
        pos += 2
    v_dyn_end = pos
    n = pos
    for k in alg_nodes:
        owner, _ = node_owner[k]
        registry += [(owner, "v_r"), (owner, "v_i")]
    m = 2 * len(alg_nodes)

    incidence = np.zeros((n_nodes, len(series)))
    for j, (a, b, *_rest) in enumerate(series):
        incidence[a, j] = -1.0
        incidence[b, j] = 1.0

    y_full = np.zeros((n_nodes, n_nodes), dtype=complex)
    y_full[:nb, :nb] = y_static
    net = {
        "n_bus": nb,
        "n_nodes": n_nodes,
        "y_static": y_static,
        "load_s": load_s,
        "c_node": c_node,
        "dyn_nodes": dyn_nodes,
        "alg_nodes": alg_nodes,
        "n_series": len(series),
        "from_node": np.array([s[0] for s in series], dtype=int),
        "to_node": np.array([s[1] for s in series], dtype=int),
        "r_series": np.array([s[2] for s in series]),
        "l_series": np.array([s[3] for s in series]),
        "incidence": incidence,
        "i_start": i_start,
        "i_end": i_end,
        "v_dyn_start": v_dyn_start,
        "v_dyn_end": v_dyn_end,
        "omega_index": omega_index,
        "omega_b": omega_b,
        "line_first_series": line_first_series,
        "line_end_cap": line_end_cap,
    }

    # ---- initial guess ----------------------------------------------------
    z0 = np.zeros(n + m)
    for slot in slots:
        z0[slot.start:slot.start + slot.size] = slot.x0
    v_nodes = np.zeros(n_nodes, dtype=complex)
    v_nodes[:nb] = pf.voltage
    i_series = np.zeros(len(series), dtype=complex)
    for k, br in enumerate(case.branches):
        if line_model is LineModel.STATPI:
            continue
        a, b = idx[br.from_bus], idx[br.to_bus]
        j0 = line_first_series[k]
        if line_model is LineModel.DYNPI:
            i_series[j0] = (pf.voltage[a] - pf.voltage[b]) / complex(series[j0][2], series[j0][3])
            continue
        seg = segment_params(br.r_km, br.l_km, br.c_km, br.length_km, n_segments)
        cur, vint = _ladder_steady_state(pf.voltage[a], pf.voltage[b], seg)
        i_series[j0:j0 + n_segments] = cur
        for j in range(1, n_segments):
            v_nodes[series[j0 + j][0]] = vint[j - 1]
    if len(series):
        z0[i_start:i_end] = i_series.view(float)
    if dyn_nodes.size:
        z0[v_dyn_start:v_dyn_end] = v_nodes[dyn_nodes].view(float)
    if alg_nodes.size:
        z0[n:] = v_nodes[alg_nodes].view(float)

    sys_ = DaeSystem(case=case, line_model=line_model, n_segments=n_segments, n=n, m=m,
                     registry=tuple(registry), powerflow=pf, z0=z0, omega_b=omega_b,
                     load_model=load_model, _slots=slots, _net=net)
    sys_._pattern = _sparsity(sys_, y_full)
    sys_._colors = _color_columns(sys_._pattern, n + m)
    return sys_


# --------------------------------------------------------------------------
# Jacobian


def _sparsity(sys_: DaeSystem, y_full: np.ndarray) -> list:
    """Column index sets that each residual row may depend on (a superset)."""
    net = sys_._net
    size = sys_.n + sys_.m
    rows: list = [set() for _ in range(size)]
    w = net["omega_index"]

    node_cols = {}
    for j, k in enumerate(net["dyn_nodes"]):
        a = net["v_dyn_start"] + 2 * j
        node_cols[int(k)] = [a, a + 1]
    for j, k in enumerate(net["alg_nodes"]):
        a = sys_.n + 2 * j
        node_cols[int(k)] = [a, a + 1]

    node_deps = {k: set(node_cols[k]) for k in range(net["n_nodes"])}
    for a in range(net["n_bus"]):
        for b in np.flatnonzero(y_full[a, : net["n_bus"]]):
            node_deps[a].update(node_cols[int(b)])
    for j in range(net["n_series"]):
        cols = {net["i_start"] + 2 * j, net["i_start"] + 2 * j + 1}
        node_deps[int(net["from_node"][j])].update(cols)
        node_deps[int(net["to_node"][j])].update(cols)
    for slot in sys_._slots:
        own = set(range(slot.start, slot.start + slot.size))
        node_deps[slot.bus_node].update(own)
        for r in own:
            rows[r].update(own)
            rows[r].update(node_cols[slot.bus_node])
            if w is not None:
                rows[r].add(w)
    for j in range(net["n_series"]):
        base = net["i_start"] + 2 * j
        deps = {base, base + 1}
        deps.update(node_cols[int(net["from_node"][j])])
        deps.update(node_cols[int(net["to_node"][j])])
        if w is not None:
            deps.add(w)
        rows[base].update(deps)
        rows[base + 1].update(deps)
    for k in range(net["n_nodes"]):
        deps = set(node_deps[k])
        if w is not None:
            deps.add(w)
        for r in node_cols[k]:
            rows[r].update(deps)
    return [sorted(r) for r in rows]


def _color_columns(pattern: list, size: int) -> list:
    """Greedy grouping of columns with disjoint row supports."""
    col_rows: list = [[] for _ in range(size)]
    for r, cols in enumerate(pattern):
        for c in cols:
            col_rows[c].append(r)
    order = sorted(range(size), key=lambda c: -len(col_rows[c]))
    groups: list = []
    used: list = []
    for c in order:
        rs = set(col_rows[c])
        for g, u in zip(groups, used):
            if not (u & rs):
                g.append(c)
                u |= rs
                break
        else:
            groups.append([c])
            used.append(set(rs))
    return [(sorted(g), {c: col_rows[c] for c in g}) for g in groups]


def fd_jacobian(sys_: DaeSystem, z: np.ndarray, rel_step: float = DEFAULT_POLICY.fd_rel_step) -> np.ndarray:
    """Central-difference Jacobian of ``[f; g]``, one residual pair per column group.

    Step per column is ``rel_step * max(1, |z_i|)``.
    """
    z = np.asarray(z, dtype=float)
    size = z.size
    jac = np.zeros((size, size))
    h = rel_step * np.maximum(1.0, np.abs(z))
    for cols, col_rows in sys_._colors:
        zp = z.copy()
        zm = z.copy()
        zp[cols] += h[cols]
        zm[cols] -= h[cols]
        # exact step actually represented in floating point
        hp = zp[cols] - z[cols]
        hm = z[cols] - zm[cols]
        fp = sys_.residual(zp)
        fm = sys_.residual(zm)
        diff = fp - fm
        for c, hc_p, hc_m in zip(cols, hp, hm):
            r = col_rows[c]
            jac[r, c] = diff[r] / (hc_p + hc_m)
    return jac


def richardson_entry(sys_: DaeSystem, z: np.ndarray, row: int, col: int, h: float) -> tuple[float, float]:
    """Central differences of one entry at steps ``h`` and ``h/2`` and their Richardson extrapolation.

    Returns ``(extrapolated, d(h))``.
    """
    def central(step):
        zp = z.copy()
        zm = z.copy()
        zp[col] += step
        zm[col] -= step
        return (sys_.residual(zp)[row] - sys_.residual(zm)[row]) / (2.0 * step)

    d1 = central(h)
    d2 = central(h / 2.0)
    return (4.0 * d2 - d1) / 3.0, d1


# --------------------------------------------------------------------------
# equilibrium


@dataclass
class Equilibrium:
    x_star: np.ndarray
    y_star: np.ndarray
    residual_norm: float
    iterations: int
    bus_voltage: np.ndarray
    device_power: dict
    omega_sys: float

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.x_star, self.y_star])

    def summary(self, sys_: DaeSystem) -> dict:
        case = sys_.case
        return {
            "line_model": sys_.line_model.value,
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
            "omega_sys": self.omega_sys,
            "buses": [{"bus": b.id, "v": float(abs(self.bus_voltage[k])),
                       "theta": float(np.angle(self.bus_voltage[k]))}
                      for k, b in enumerate(case.buses)],
            "devices": [{"name": name, "p": s.real, "q": s.imag}
                        for name, s in self.device_power.items()],
        }


def find_equilibrium(
    sys_: DaeSystem,
    z0: np.ndarray | None = None,
    policy: NumericPolicy = DEFAULT_POLICY,
) -> Equilibrium:
    """Newton iteration on ``[f; g] = 0`` with step halving."""
    z = np.array(sys_.z0 if z0 is None else z0, dtype=float)
    f = sys_.residual(z)
    norm = float(np.max(np.abs(f)))
    it = 0
    while norm >= policy.equilibrium_tol:
        if it >= policy.max_newton_iter:
            raise EquilibriumError(f"no equilibrium after {it} Newton steps", norm)
        jac = fd_jacobian(sys_, z, policy.fd_rel_step)
        try:
            dz = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError:
            raise EquilibriumError("singular Jacobian during equilibrium search", norm) from None
        alpha = 1.0
        while True:
            z_new = z + alpha * dz
            f_new = sys_.residual(z_new)
            new_norm = float(np.max(np.abs(f_new)))
            if np.isfinite(new_norm) and new_norm < norm:
                break
            alpha *= 0.5
            if alpha < 1e-6:
                raise EquilibriumError("line search failed during equilibrium search", norm)
        z, f, norm = z_new, f_new, new_norm
        it += 1
    power = {k: v for k, v in sys_.device_terminal_power(z).items()}
    vb = sys_.node_voltages(z)[: sys_._net["n_bus"]]
    return Equilibrium(z[: sys_.n].copy(), z[sys_.n:].copy(), norm, it, vb, power, sys_.omega_sys(z))
