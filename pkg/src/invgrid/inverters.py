"""Averaged converter models behind an LCL filter.

Two control structures share the filter and the PLL:

* grid-forming (virtual synchronous machine): virtual swing with damping
  against the PLL frequency, reactive-power droop, virtual impedance and
  cascaded voltage/current PI loops;
* grid-following: PLL-synchronised active/reactive power PI loops feeding a
  single current PI loop.

Everything is in pu on the converter rating.  Filter states are dynamic
phasors in the network frame (rotating at ``omega_sys``); controls work in
their own frames, obtained with ``x_local = x_net * exp(-j theta)``.

GFM equations (``x_d, x_q`` in the virtual-rotor frame ``theta_olc``)::

    T_a dw_olc/dt = p_ref - p - k_d (w_olc - w_pll) - k_w (w_olc - 1)
    dtheta_olc/dt = w_b (w_olc - w_sys)
    dq_oc/dt      = w_f (q - q_oc),     v_olc = v_ref + k_q (q_ref - q_oc)
    v*_d = v_olc - r_v ig_d + w_olc l_v ig_q,   v*_q = -r_v ig_q - w_olc l_v ig_d
    dxi/dt        = v* - v_o
    i*_cv         = k_pv (v* - v_o) + k_iv xi + j w_olc c_f v_o + k_ffi i_g
    dgamma/dt     = i*_cv - i_cv
    v_m           = k_pc (i*_cv - i_cv) + k_ic gamma + j w_olc l_f i_cv + k_ffv v_o

GFL equations (``x_d, x_q`` in the PLL frame)::

    dsigma_p/dt = p_ref - p,   i*_d = k_pp (p_ref - p) + k_ip sigma_p
    dsigma_q/dt = q_ref - q,   i*_q = -(k_pq (q_ref - q) + k_iq sigma_q)
    dgamma/dt   = i* - i_cv
    v_m         = k_pc (i* - i_cv) + k_ic gamma + j w_pll l_f i_cv + k_ffv v_o

The minus sign on ``i*_q`` makes a positive reactive gain a negative
feedback: with the d axis on the voltage, ``q = -v_d i_q``.

Kaura PLL on the capacitor voltage::

    dv_pll/dt   = w_lp (v_o e^{-j theta_pll} - v_pll)
    deps/dt     = atan2(v_pll_q, v_pll_d)
    w_pll       = 1 + kp_pll atan2(...) + ki_pll eps
    dtheta_pll/dt = w_b (w_pll - w_sys)

Power is measured at the filter capacitor: ``p + jq = v_o conj(i_g)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import OMEGA_B
from .machine import InitializationError

__all__ = [
    "GFM_STATE_NAMES",
    "GFL_STATE_NAMES",
    "GFM_GAIN_RANGES",
    "GfmGains",
    "GflGains",
    "LclFilterParams",
    "PllParams",
    "GfmParams",
    "GflParams",
    "GfmSetpoints",
    "GflSetpoints",
    "GridFormingInverter",
    "GridFollowingInverter",
    "gfm_residual",
    "gfl_residual",
    "gfm_init",
    "gfl_init",
    "gfm_voltage_reference",
    "gfl_current_reference",
]

GFM_STATE_NAMES = (
    "theta_olc", "omega_olc", "q_oc", "xi_d", "xi_q", "gamma_d", "gamma_q",
    "vpll_d", "vpll_q", "eps_pll", "theta_pll",
    "icv_r", "icv_i", "vo_r", "vo_i", "ig_r", "ig_i",
)
GFL_STATE_NAMES = (
    "vpll_d", "vpll_q", "eps_pll", "theta_pll", "sigma_p", "sigma_q", "gamma_d", "gamma_q",
    "icv_r", "icv_i", "vo_r", "vo_i", "ig_r", "ig_i",
)

# swept GFM gain ranges (lower, upper)
GFM_GAIN_RANGES = {
    "t_a": (0.5, 2.0),
    "k_d": (100.0, 400.0),
    "k_q": (0.05, 0.2),
    "k_pv": (0.5, 0.6),
    "k_iv": (400.0, 800.0),
    "k_pc": (0.74, 1.27),
    "k_ic": (1.19, 14.3),
}


def _require_positive(obj) -> None:
    for name, value in vars(obj).items():
        if isinstance(value, (int, float)) and not value > 0:
            raise ValueError(f"{type(obj).__name__}.{name} must be positive, got {value}")


@dataclass(frozen=True)
class GfmGains:
    t_a: float = 2.0
    k_d: float = 400.0
    k_q: float = 0.2
    k_pv: float = 0.59
    k_iv: float = 736.0
    k_pc: float = 1.27
    k_ic: float = 14.3

    def __post_init__(self):
        _require_positive(self)

    @classmethod
    def midrange(cls) -> "GfmGains":
        return cls(**{k: 0.5 * (lo + hi) for k, (lo, hi) in GFM_GAIN_RANGES.items()})

    def as_dict(self) -> dict:
        return dict(vars(self))


@dataclass(frozen=True)
class GflGains:
    k_pp: float = 0.0059
    k_ip: float = 7.36
    k_pq: float = 0.0059
    k_iq: float = 7.36
    k_pc: float = 1.27
    k_ic: float = 14.3

    def __post_init__(self):
        _require_positive(self)


@dataclass(frozen=True)
class LclFilterParams:
    l_f: float = 0.08
    r_f: float = 0.003
    c_f: float = 0.074
    l_g: float = 0.2
    r_g: float = 0.01

    def __post_init__(self):
        if min(self.l_f, self.c_f, self.l_g) <= 0 or min(self.r_f, self.r_g) < 0:
            raise ValueError("LCL filter needs positive L, C and non-negative R")


@dataclass(frozen=True)
class PllParams:
    omega_lp: float = 500.0
    kp_pll: float = 0.084
    ki_pll: float = 4.69

    def __post_init__(self):
        _require_positive(self)


@dataclass(frozen=True)
class GfmParams:
    """Fixed (non-swept) GFM parameters."""

    filter: LclFilterParams = field(default_factory=LclFilterParams)
    pll: PllParams = field(default_factory=PllParams)
    omega_f: float = 1000.0
    r_v: float = 0.0
    l_v: float = 0.2
    k_ffv: float = 0.0
    k_ffi: float = 0.0
    k_omega: float = 0.0


@dataclass(frozen=True)
class GflParams:
    filter: LclFilterParams = field(default_factory=LclFilterParams)
    pll: PllParams = field(default_factory=PllParams)
    k_ffv: float = 1.0


@dataclass(frozen=True)
class GfmSetpoints:
    p_ref: float
    q_ref: float
    v_ref: float


@dataclass(frozen=True)
class GflSetpoints:
    p_ref: float
    q_ref: float


@dataclass(frozen=True)
class GridFormingInverter:
    params: GfmParams = field(default_factory=GfmParams)
    gains: GfmGains = field(default_factory=GfmGains)


@dataclass(frozen=True)
class GridFollowingInverter:
    params: GflParams = field(default_factory=GflParams)
    gains: GflGains = field(default_factory=GflGains)


def _pll(vpd, vpq, eps, theta, vor, voi, pll, omega_sys, omega_b):
    c = math.cos(theta)
    s = math.sin(theta)
    vd = c * vor + s * voi
    vq = -s * vor + c * voi
    phi = math.atan2(vpq, vpd)
    omega_pll = 1.0 + pll.kp_pll * phi + pll.ki_pll * eps
    return (
        [pll.omega_lp * (vd - vpd), pll.omega_lp * (vq - vpq), phi,
         omega_b * (omega_pll - omega_sys)],
        omega_pll,
    )


def _lcl(icr, ici, vor, voi, igr, igi, vmr, vmi, v_t, flt, omega_sys, omega_b):
    wl_f = omega_sys * flt.l_f
    wc_f = omega_sys * flt.c_f
    wl_g = omega_sys * flt.l_g
    kf = omega_b / flt.l_f
    kc = omega_b / flt.c_f
    kg = omega_b / flt.l_g
    return [
        kf * (vmr - vor - flt.r_f * icr + wl_f * ici),
        kf * (vmi - voi - flt.r_f * ici - wl_f * icr),
        kc * (icr - igr + wc_f * voi),
        kc * (ici - igi - wc_f * vor),
        kg * (vor - v_t.real - flt.r_g * igr + wl_g * igi),
        kg * (voi - v_t.imag - flt.r_g * igi - wl_g * igr),
    ]


def gfm_voltage_reference(q_oc: float, gains: GfmGains, setpoints: GfmSetpoints) -> float:
    """Outer-loop voltage magnitude reference of the reactive droop."""
    return setpoints.v_ref + gains.k_q * (setpoints.q_ref - q_oc)


def gfm_residual(
    x,
    terminal_v: complex,
    gains: GfmGains,
    params: GfmParams,
    setpoints: GfmSetpoints,
    omega_sys: float = 1.0,
    omega_b: float = OMEGA_B,
) -> tuple[np.ndarray, complex]:
    dx, i_g = _gfm(x, complex(terminal_v), gains, params, setpoints, omega_sys, omega_b)
    return np.array(dx), i_g


def _gfm(x, v_t, g, prm, sp, omega_sys, omega_b):
    (theta, w, q_oc, xi_d, xi_q, ga_d, ga_q, vpd, vpq, eps, th_pll,
     icr, ici, vor, voi, igr, igi) = x
    flt = prm.filter
    p_e = vor * igr + voi * igi
    q_e = voi * igr - vor * igi
    dpll, w_pll = _pll(vpd, vpq, eps, th_pll, vor, voi, prm.pll, omega_sys, omega_b)

    c = math.cos(theta)
    s = math.sin(theta)
    vo_d = c * vor + s * voi
    vo_q = -s * vor + c * voi
    ig_d = c * igr + s * igi
    ig_q = -s * igr + c * igi
    ic_d = c * icr + s * ici
    ic_q = -s * icr + c * ici

    v_olc = sp.v_ref + g.k_q * (sp.q_ref - q_oc)
    vr_d = v_olc - prm.r_v * ig_d + w * prm.l_v * ig_q
    vr_q = -prm.r_v * ig_q - w * prm.l_v * ig_d
    ev_d = vr_d - vo_d
    ev_q = vr_q - vo_q
    icref_d = g.k_pv * ev_d + g.k_iv * xi_d - w * flt.c_f * vo_q + prm.k_ffi * ig_d
    icref_q = g.k_pv * ev_q + g.k_iv * xi_q + w * flt.c_f * vo_d + prm.k_ffi * ig_q
    ei_d = icref_d - ic_d
    ei_q = icref_q - ic_q
    vm_d = g.k_pc * ei_d + g.k_ic * ga_d - w * flt.l_f * ic_q + prm.k_ffv * vo_d
    vm_q = g.k_pc * ei_q + g.k_ic * ga_q + w * flt.l_f * ic_d + prm.k_ffv * vo_q
    vmr = c * vm_d - s * vm_q
    vmi = s * vm_d + c * vm_q

    dx = [
        omega_b * (w - omega_sys),
        (sp.p_ref - p_e - g.k_d * (w - w_pll) - prm.k_omega * (w - 1.0)) / g.t_a,
        prm.omega_f * (q_e - q_oc),
        ev_d, ev_q, ei_d, ei_q,
    ]
    dx += dpll
    dx += _lcl(icr, ici, vor, voi, igr, igi, vmr, vmi, v_t, flt, omega_sys, omega_b)
    return dx, complex(igr, igi)


def gfl_residual(
    x,
    terminal_v: complex,
    gains: GflGains,
    params: GflParams,
    setpoints: GflSetpoints,
    omega_sys: float = 1.0,
    omega_b: float = OMEGA_B,
) -> tuple[np.ndarray, complex]:
    dx, i_g = _gfl(x, complex(terminal_v), gains, params, setpoints, omega_sys, omega_b)
    return np.array(dx), i_g


def gfl_current_reference(x, gains: GflGains, setpoints: GflSetpoints) -> complex:
    """Current reference ``i*_d + j i*_q`` in the PLL frame."""
    vor, voi, igr, igi = x[10], x[11], x[12], x[13]
    p_e = vor * igr + voi * igi
    q_e = voi * igr - vor * igi
    i_d = gains.k_pp * (setpoints.p_ref - p_e) + gains.k_ip * x[4]
    i_q = -(gains.k_pq * (setpoints.q_ref - q_e) + gains.k_iq * x[5])
    return complex(i_d, i_q)


def _gfl(x, v_t, g, prm, sp, omega_sys, omega_b):
    (vpd, vpq, eps, th_pll, sig_p, sig_q, ga_d, ga_q,
     icr, ici, vor, voi, igr, igi) = x
    flt = prm.filter
    p_e = vor * igr + voi * igi
    q_e = voi * igr - vor * igi
    dpll, w_pll = _pll(vpd, vpq, eps, th_pll, vor, voi, prm.pll, omega_sys, omega_b)

    c = math.cos(th_pll)
    s = math.sin(th_pll)
    vo_d = c * vor + s * voi
    vo_q = -s * vor + c * voi
    ic_d = c * icr + s * ici
    ic_q = -s * icr + c * ici

    id_ref = g.k_pp * (sp.p_ref - p_e) + g.k_ip * sig_p
    iq_ref = -(g.k_pq * (sp.q_ref - q_e) + g.k_iq * sig_q)
    ei_d = id_ref - ic_d
    ei_q = iq_ref - ic_q
    vm_d = g.k_pc * ei_d + g.k_ic * ga_d - w_pll * flt.l_f * ic_q + prm.k_ffv * vo_d
    vm_q = g.k_pc * ei_q + g.k_ic * ga_q + w_pll * flt.l_f * ic_d + prm.k_ffv * vo_q
    vmr = c * vm_d - s * vm_q
    vmi = s * vm_d + c * vm_q

    dx = dpll + [sp.p_ref - p_e, sp.q_ref - q_e, ei_d, ei_q]
    dx += _lcl(icr, ici, vor, voi, igr, igi, vmr, vmi, v_t, flt, omega_sys, omega_b)
    return dx, complex(igr, igi)


def _filter_steady_state(v_t: complex, p: float, q: float, flt: LclFilterParams):
    if abs(v_t) == 0:
        raise InitializationError("terminal voltage is zero")
    i_g = (complex(p, q) / v_t).conjugate()
    v_o = v_t + complex(flt.r_g, flt.l_g) * i_g
    i_cv = i_g + 1j * flt.c_f * v_o
    v_m = v_o + complex(flt.r_f, flt.l_f) * i_cv
    return i_g, v_o, i_cv, v_m


def _rot(z: complex, theta: float) -> complex:
    return z * complex(math.cos(theta), -math.sin(theta))


def gfm_init(terminal_v: complex, p: float, q: float, gains: GfmGains, params: GfmParams):
    """Equilibrium state and setpoints for a GFM delivering ``p + jq`` at ``terminal_v``.

    Returns ``(x, GfmSetpoints)``.  Assumes nominal system frequency.
    """
    flt = params.filter
    v_t = complex(terminal_v)
    i_g, v_o, i_cv, v_m = _filter_steady_state(v_t, p, q, flt)
    if abs(v_o) < 1e-6:
        raise InitializationError("capacitor voltage collapses")
    s_o = v_o * i_g.conjugate()
    e = v_o + complex(params.r_v, params.l_v) * i_g
    theta = math.atan2(e.imag, e.real)
    v_ref = abs(e)
    vo = _rot(v_o, theta)
    ig = _rot(i_g, theta)
    ic = _rot(i_cv, theta)
    vm = _rot(v_m, theta)
    xi_d = (ic.real + flt.c_f * vo.imag - params.k_ffi * ig.real) / gains.k_iv
    xi_q = (ic.imag - flt.c_f * vo.real - params.k_ffi * ig.imag) / gains.k_iv
    ga_d = (vm.real + flt.l_f * ic.imag - params.k_ffv * vo.real) / gains.k_ic
    ga_q = (vm.imag - flt.l_f * ic.real - params.k_ffv * vo.imag) / gains.k_ic
    th_pll = math.atan2(v_o.imag, v_o.real)
    x = np.array([
        theta, 1.0, s_o.imag, xi_d, xi_q, ga_d, ga_q,
        abs(v_o), 0.0, 0.0, th_pll,
        i_cv.real, i_cv.imag, v_o.real, v_o.imag, i_g.real, i_g.imag,
    ])
    return x, GfmSetpoints(p_ref=s_o.real, q_ref=s_o.imag, v_ref=v_ref)


def gfl_init(terminal_v: complex, p: float, q: float, gains: GflGains, params: GflParams):
    """Equilibrium state and setpoints for a GFL delivering ``p + jq`` at ``terminal_v``."""
    flt = params.filter
    v_t = complex(terminal_v)
    i_g, v_o, i_cv, v_m = _filter_steady_state(v_t, p, q, flt)
    if abs(v_o) < 1e-6:
        raise InitializationError("capacitor voltage collapses")
    s_o = v_o * i_g.conjugate()
    th_pll = math.atan2(v_o.imag, v_o.real)
    vo = _rot(v_o, th_pll)
    ic = _rot(i_cv, th_pll)
    vm = _rot(v_m, th_pll)
    sig_p = ic.real / gains.k_ip
    sig_q = -ic.imag / gains.k_iq
    ga_d = (vm.real + flt.l_f * ic.imag - params.k_ffv * vo.real) / gains.k_ic
    ga_q = (vm.imag - flt.l_f * ic.real - params.k_ffv * vo.imag) / gains.k_ic
    x = np.array([
        abs(v_o), 0.0, 0.0, th_pll, sig_p, sig_q, ga_d, ga_q,
        i_cv.real, i_cv.imag, v_o.real, v_o.imag, i_g.real, i_g.imag,
    ])
    return x, GflSetpoints(p_ref=s_o.real, q_ref=s_o.imag)
