"""Six-state Anderson-Fouad synchronous machine with swing shaft and Type I AVR.

Machine-frame convention: ``v_d + j v_q = j exp(-j delta) (V_R + j V_I)``
(q axis leading, generator sign convention).  The six electrical states are
the two stator fluxes and the transient/subtransient internal voltages;
shaft, governor and exciter add six more for a total of 12.

Electrical equations (time in seconds, quantities in pu on machine base)::

    dpsi_d/dt   = w_b (r_a i_d + w psi_q + v_d)
    dpsi_q/dt   = w_b (r_a i_q - w psi_d + v_q)
    de'_q/dt    = (-e'_q - (x_d - x'_d) i_d + v_f) / T'_d0
    de'_d/dt    = (-e'_d + (x_q - x'_q) i_q) / T'_q0
    de''_q/dt   = (-e''_q + e'_q - (x'_d - x''_d) i_d) / T''_d0
    de''_d/dt   = (-e''_d + e'_d + (x'_q - x''_q) i_q) / T''_q0
    i_d = (e''_q - psi_d) / x''_d,   i_q = (-e''_d - psi_q) / x''_q

Shaft: ``ddelta/dt = w_b (w - w_sys)``, ``2H dw/dt = p_m - tau_e - D (w - 1)``
with ``tau_e = psi_d i_q - psi_q i_d`` and fixed ``p_m``.

AVR Type I::

    dv_m/dt  = (|v_t| - v_m) / T_r
    dv_r1/dt = (K_a (v_ref - v_m - v_r2 - K_f/T_f v_f) - v_r1) / T_a
    dv_r2/dt = -(K_f/T_f v_f + v_r2) / T_f
    dv_f/dt  = (v_r1 - (K_e + A_e exp(B_e |v_f|)) v_f) / T_e
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import OMEGA_B

__all__ = [
    "STATE_NAMES",
    "MachineParams",
    "AvrType1Params",
    "SynchronousMachine",
    "MachineSetpoints",
    "MachineState",
    "InitializationError",
    "machine_residual",
    "init_from_terminal",
    "to_machine_frame",
    "to_network_frame",
]

STATE_NAMES = (
    "psi_d", "psi_q", "eq_p", "ed_p", "eq_pp", "ed_pp",
    "delta", "omega", "v_m", "v_r1", "v_r2", "v_f",
)
DELTA = STATE_NAMES.index("delta")
OMEGA = STATE_NAMES.index("omega")


class InitializationError(RuntimeError):
    """No internal state reproduces the requested terminal condition."""


@dataclass(frozen=True)
class MachineParams:
    r_a: float = 0.003
    x_d: float = 0.1460
    x_q: float = 0.0969
    x_d_p: float = 0.0608
    x_q_p: float = 0.0969
    x_d_pp: float = 0.04
    x_q_pp: float = 0.04
    t_d0_p: float = 8.96
    t_q0_p: float = 0.31
    t_d0_pp: float = 0.03
    t_q0_pp: float = 0.05
    h: float = 23.64
    d: float = 2.0

    def __post_init__(self):
        if not (self.x_d >= self.x_d_p >= self.x_d_pp > 0):
            raise ValueError("need x_d >= x'_d >= x''_d > 0")
        if not (self.x_q >= self.x_q_p >= self.x_q_pp > 0):
            raise ValueError("need x_q >= x'_q >= x''_q > 0")
        if min(self.t_d0_p, self.t_q0_p, self.t_d0_pp, self.t_q0_pp) <= 0:
            raise ValueError("machine time constants must be positive")
        if self.h <= 0 or self.d < 0 or self.r_a < 0:
            raise ValueError("need H > 0, D >= 0, r_a >= 0")


@dataclass(frozen=True)
class AvrType1Params:
    k_a: float = 20.0
    k_e: float = 1.0
    k_f: float = 0.063
    t_r: float = 0.02
    t_a: float = 0.2
    t_e: float = 0.314
    t_f: float = 0.35
    a_e: float = 0.0039
    b_e: float = 1.555

    def __post_init__(self):
        if min(self.t_r, self.t_a, self.t_e, self.t_f) <= 0:
            raise ValueError("AVR time constants must be positive")

    def saturation(self, v_f: float) -> float:
        return self.a_e * math.exp(self.b_e * abs(v_f))


@dataclass(frozen=True)
class SynchronousMachine:
    """Parameter bundle stored on a device entry."""

    machine: MachineParams = field(default_factory=MachineParams)
    avr: AvrType1Params = field(default_factory=AvrType1Params)


@dataclass(frozen=True)
class MachineSetpoints:
    p_m: float
    v_ref: float


@dataclass(frozen=True)
class MachineState:
    psi_d: float
    psi_q: float
    eq_p: float
    ed_p: float
    eq_pp: float
    ed_pp: float
    delta: float
    omega: float
    v_m: float
    v_r1: float
    v_r2: float
    v_f: float

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in STATE_NAMES])

    @classmethod
    def from_array(cls, x) -> "MachineState":
        return cls(*(float(v) for v in x))


def to_machine_frame(z: complex, delta: float) -> complex:
    return 1j * complex(math.cos(delta), -math.sin(delta)) * z


def to_network_frame(z: complex, delta: float) -> complex:
    return -1j * complex(math.cos(delta), math.sin(delta)) * z


def machine_residual(
    x,
    terminal_v: complex,
    bundle: SynchronousMachine,
    setpoints: MachineSetpoints,
    omega_sys: float = 1.0,
    omega_b: float = OMEGA_B,
) -> tuple[np.ndarray, complex]:
    """State derivatives and network-frame terminal current (machine base)."""
    dx, i_t = _residual(x, complex(terminal_v), bundle.machine, bundle.avr,
                        setpoints.p_m, setpoints.v_ref, omega_sys, omega_b)
    return np.array(dx), i_t


def _residual(x, v_t, mp, avr, p_m, v_ref, omega_sys, omega_b):
    psi_d, psi_q, eq_p, ed_p, eq_pp, ed_pp, delta, omega, v_m, v_r1, v_r2, v_f = x
    c = math.cos(delta)
    s = math.sin(delta)
    vr = v_t.real
    vi = v_t.imag
    # j e^{-j delta} (vr + j vi)
    v_d = s * vr - c * vi
    v_q = c * vr + s * vi
    i_d = (eq_pp - psi_d) / mp.x_d_pp
    i_q = (-ed_pp - psi_q) / mp.x_q_pp
    tau_e = psi_d * i_q - psi_q * i_d
    kf_tf = avr.k_f / avr.t_f
    dx = [
        omega_b * (mp.r_a * i_d + omega * psi_q + v_d),
        omega_b * (mp.r_a * i_q - omega * psi_d + v_q),
        (-eq_p - (mp.x_d - mp.x_d_p) * i_d + v_f) / mp.t_d0_p,
        (-ed_p + (mp.x_q - mp.x_q_p) * i_q) / mp.t_q0_p,
        (-eq_pp + eq_p - (mp.x_d_p - mp.x_d_pp) * i_d) / mp.t_d0_pp,
        (-ed_pp + ed_p + (mp.x_q_p - mp.x_q_pp) * i_q) / mp.t_q0_pp,
        omega_b * (omega - omega_sys),
        (p_m - tau_e - mp.d * (omega - 1.0)) / (2.0 * mp.h),
        (math.hypot(vr, vi) - v_m) / avr.t_r,
        (avr.k_a * (v_ref - v_m - v_r2 - kf_tf * v_f) - v_r1) / avr.t_a,
        -(kf_tf * v_f + v_r2) / avr.t_f,
        (v_r1 - (avr.k_e + avr.a_e * math.exp(avr.b_e * abs(v_f))) * v_f) / avr.t_e,
    ]
    # -j e^{j delta} (i_d + j i_q)
    i_t = complex(s * i_d + c * i_q, -c * i_d + s * i_q)
    return dx, i_t


def init_from_terminal(
    terminal_v: complex,
    p: float,
    q: float,
    bundle: SynchronousMachine,
) -> tuple[np.ndarray, MachineSetpoints]:
    """Equilibrium state delivering ``p + jq`` (machine base) at ``terminal_v``.

    The rotor speed is set to 1 pu; mechanical power and AVR reference are
    chosen so the governor and exciter are balanced.
    """
    v = complex(terminal_v)
    if abs(v) == 0:
        raise InitializationError("terminal voltage is zero")
    mp, avr = bundle.machine, bundle.avr
    i = (complex(p, q) / v).conjugate()
    e = v + complex(mp.r_a, mp.x_q) * i
    delta = math.atan2(e.imag, e.real)
    vl = to_machine_frame(v, delta)
    il = to_machine_frame(i, delta)
    v_d, v_q = vl.real, vl.imag
    i_d, i_q = il.real, il.imag

    psi_d = v_q + mp.r_a * i_q
    psi_q = -(v_d + mp.r_a * i_d)
    eq_pp = psi_d + mp.x_d_pp * i_d
    ed_pp = -psi_q - mp.x_q_pp * i_q
    eq_p = eq_pp + (mp.x_d_p - mp.x_d_pp) * i_d
    ed_p = (mp.x_q - mp.x_q_p) * i_q
    v_f = eq_p + (mp.x_d - mp.x_d_p) * i_d
    if not math.isfinite(v_f) or v_f <= 0 or v_f > 20.0:
        raise InitializationError(f"field voltage {v_f:.4g} pu outside the feasible range")

    tau_e = psi_d * i_q - psi_q * i_d
    v_m = abs(v)
    kf_tf = avr.k_f / avr.t_f
    v_r2 = -kf_tf * v_f
    v_r1 = (avr.k_e + avr.saturation(v_f)) * v_f
    v_ref = v_m + v_r1 / avr.k_a
    x = np.array([psi_d, psi_q, eq_p, ed_p, eq_pp, ed_pp, delta, 1.0, v_m, v_r1, v_r2, v_f])
    return x, MachineSetpoints(p_m=tau_e, v_ref=v_ref)
