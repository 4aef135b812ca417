"""Transmission-line realizations: algebraic pi, dynamic pi and multi-segment.

All quantities are per unit on the system base.  Inductances and
capacitances are expressed as their reactance/susceptance at nominal
frequency (``omega = 1`` pu), which is the usual per-unit convention, so
``l_pi == Im(z_pi)`` and ``c_pi == Im(y_pi)`` at nominal frequency.

Dynamic quantities are dynamic phasors in a frame rotating at
``omega_sys`` (pu); time derivatives are in seconds, hence the ``omega_b``
scaling on every storage element.
"""
from __future__ import annotations

import cmath
import enum
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .core import OMEGA_B, DqPhasor

__all__ = [
    "LumpedPi",
    "SegmentParams",
    "LineModel",
    "LineRealization",
    "SingularLineError",
    "hyperbolic_correction",
    "correction_factors",
    "statpi_port_currents",
    "dynpi_residual",
    "segment_params",
    "mssb_residual",
    "exact_input_impedance",
    "input_impedance",
    "per_km_from_lumped",
    "two_port_abcd",
]

# below this |x| the hyperbolic ratios are evaluated by their Taylor series
_SERIES_CUTOFF = 1e-4


class SingularLineError(ValueError):
    """Raised when a line has zero series impedance."""


def _sinh_ratio(x: complex) -> complex:
    if abs(x) < _SERIES_CUTOFF:
        x2 = x * x
        return 1.0 + x2 / 6.0 + x2 * x2 / 120.0
    return cmath.sinh(x) / x


def _tanh_ratio(u: complex) -> complex:
    if abs(u) < _SERIES_CUTOFF:
        u2 = u * u
        return 1.0 - u2 / 3.0 + 2.0 * u2 * u2 / 15.0
    return cmath.tanh(u) / u


def correction_factors(gamma_l: complex) -> tuple[complex, complex]:
    """Series and shunt correction factors for electrical length ``gamma_l``.

    Returns ``(sinh(gl)/gl, tanh(gl/2)/(gl/2))``; both tend to exactly 1 as
    ``gl -> 0``.
    """
    gamma_l = complex(gamma_l)
    if gamma_l == 0:
        return 1.0 + 0j, 1.0 + 0j
    return _sinh_ratio(gamma_l), _tanh_ratio(gamma_l / 2.0)


@dataclass(frozen=True)
class LumpedPi:
    """Equivalent pi with total series impedance and total shunt admittance."""

    z_pi: complex
    y_pi: complex

    @property
    def r_pi(self) -> float:
        return self.z_pi.real

    @property
    def l_pi(self) -> float:
        return self.z_pi.imag

    @property
    def c_pi(self) -> float:
        return self.y_pi.imag

    @property
    def y_half(self) -> complex:
        return self.y_pi / 2.0


def hyperbolic_correction(z_km: complex, y_km: complex, length: float) -> LumpedPi:
    """Lumped pi parameters that match the distributed line at nominal frequency.

    The shunt conductance of the result is forced to zero.
    """
    if length <= 0:
        raise ValueError(f"line length must be positive, got {length}")
    z_km = complex(z_km)
    y_km = complex(y_km)
    if z_km.imag <= 0:
        raise ValueError("series reactance per km must be positive")
    gamma_l = cmath.sqrt(z_km * y_km) * length
    k_series, k_shunt = correction_factors(gamma_l)
    z_pi = z_km * length * k_series
    y_pi = y_km * length * k_shunt
    return LumpedPi(z_pi=z_pi, y_pi=complex(0.0, y_pi.imag))


def statpi_port_currents(v1, v2, pi: LumpedPi) -> tuple[DqPhasor, DqPhasor]:
    """Port currents of the algebraic pi.

    ``i_in`` flows into the line at terminal 1, ``i_out`` leaves it at
    terminal 2.  Each terminal carries half of the shunt admittance.
    """
    if pi.z_pi == 0:
        raise SingularLineError("series impedance is zero")
    v1 = complex(v1)
    v2 = complex(v2)
    ys = 1.0 / pi.z_pi
    i_in = (ys + pi.y_half) * v1 - ys * v2
    i_out = ys * v1 - (ys + pi.y_half) * v2
    return DqPhasor.from_complex(i_in), DqPhasor.from_complex(i_out)


def dynpi_residual(
    states,
    boundary,
    pi: LumpedPi,
    omega_sys: float = 1.0,
    omega_b: float = OMEGA_B,
) -> np.ndarray:
    """Time derivatives ``(di, dv1, dv2)`` of the dynamic pi line.

    ``states`` is the triple ``(i, v1, v2)`` and ``boundary`` the pair
    ``(i_in, i_out)``.  Returns a complex array of length 3.
    """
    i, v1, v2 = (complex(s) for s in states)
    i_in, i_out = (complex(b) for b in boundary)
    if pi.l_pi <= 0 or pi.c_pi <= 0:
        raise ValueError("dynamic pi needs positive inductance and capacitance")
    z_line = pi.r_pi + 1j * omega_sys * pi.l_pi
    y_half = 1j * omega_sys * pi.c_pi / 2.0
    c_half = pi.c_pi / 2.0
    di = omega_b / pi.l_pi * ((v1 - v2) - z_line * i)
    dv1 = omega_b / c_half * ((i_in - i) - y_half * v1)
    dv2 = omega_b / c_half * ((i - i_out) - y_half * v2)
    return np.array([di, dv1, dv2])


@dataclass(frozen=True)
class SegmentParams:
    """Per-segment lumped values of an N-segment line (no hyperbolic correction)."""

    r_seg: float
    l_seg: float
    c_seg: float
    n_segments: int
    seg_length: float


def segment_params(r_km: float, l_km: float, c_km: float, length: float, n_segments: int) -> SegmentParams:
    if n_segments < 1:
        raise ValueError(f"segment count must be >= 1, got {n_segments}")
    if length <= 0:
        raise ValueError(f"line length must be positive, got {length}")
    seg = length / n_segments
    return SegmentParams(r_km * seg, l_km * seg, c_km * seg, int(n_segments), seg)


def mssb_residual(
    currents,
    voltages,
    boundary,
    seg: SegmentParams,
    omega_sys: float = 1.0,
    omega_b: float = OMEGA_B,
) -> tuple[np.ndarray, np.ndarray]:
    """Time derivatives of the N segment currents and N+1 node voltages.

    Adjacent half shunts merge, so interior nodes carry ``c_seg`` and the two
    end nodes ``c_seg/2``.
    """
    n = seg.n_segments
    if n < 1:
        raise ValueError("segment count must be >= 1")
    i = np.asarray(currents, dtype=complex)
    v = np.asarray(voltages, dtype=complex)
    if i.shape != (n,) or v.shape != (n + 1,):
        raise ValueError(f"expected {n} currents and {n + 1} voltages")
    i_in, i_out = (complex(b) for b in boundary)

    z_seg = seg.r_seg + 1j * omega_sys * seg.l_seg
    di = omega_b / seg.l_seg * ((v[:-1] - v[1:]) - z_seg * i)

    c_node = np.full(n + 1, seg.c_seg)
    c_node[0] = c_node[-1] = seg.c_seg / 2.0
    net = np.empty(n + 1, dtype=complex)
    net[0] = i_in - i[0]
    net[1:-1] = i[:-1] - i[1:]
    net[-1] = i[-1] - i_out
    dv = omega_b / c_node * (net - 1j * omega_sys * c_node * v)
    return di, dv


class LineModel(str, enum.Enum):
    STATPI = "statpi"
    DYNPI = "dynpi"
    MSSB = "mssb"


@dataclass(frozen=True)
class LineRealization:
    """One line under one of the three models."""

    model: LineModel
    pi: LumpedPi | None = None
    seg: SegmentParams | None = None

    def __post_init__(self):
        if self.model is LineModel.MSSB:
            if self.seg is None:
                raise ValueError("mssb realization needs segment parameters")
        elif self.pi is None:
            raise ValueError(f"{self.model.value} realization needs lumped pi parameters")

    @classmethod
    def from_branch(cls, branch, model, n_segments: int = 5) -> "LineRealization":
        model = LineModel(model)
        if model is LineModel.MSSB:
            return cls(model, seg=segment_params(branch.r_km, branch.l_km, branch.c_km,
                                                 branch.length_km, n_segments))
        return cls(model, pi=hyperbolic_correction(branch.z_km, branch.y_km, branch.length_km))

    @property
    def state_count(self) -> int:
        if self.model is LineModel.STATPI:
            return 0
        if self.model is LineModel.DYNPI:
            return 6
        n = self.seg.n_segments
        return 2 * n + 2 * (n + 1)


def _linear_parts(fn, n_states: int):
    """Split a complex-affine map ``s -> fn(s)`` into ``(A, b)`` with ``fn(s) = A s + b``."""
    b = fn(np.zeros(n_states, dtype=complex))
    a = np.empty((n_states, n_states), dtype=complex)
    for k in range(n_states):
        e = np.zeros(n_states, dtype=complex)
        e[k] = 1.0
        a[:, k] = fn(e) - b
    return a, b


def input_impedance(realization: LineRealization, omega: float = 1.0, omega_b: float = OMEGA_B) -> complex:
    """Input impedance with the far end open, at per-unit frequency ``omega``.

    The dynamic realizations are evaluated through their residual functions:
    a sinusoid at ``omega`` is a dynamic phasor rotating at
    ``(omega - 1) * omega_b`` in the nominal frame.  The algebraic pi has no
    frequency dependence by construction.
    """
    s = 1j * (omega - 1.0) * omega_b
    if realization.model is LineModel.STATPI:
        pi = realization.pi
        # open far end: y_half in parallel with (z + 1/y_half)
        yh = pi.y_half
        if yh == 0:
            return complex("inf")
        return 1.0 / (yh + 1.0 / (pi.z_pi + 1.0 / yh))

    if realization.model is LineModel.DYNPI:
        pi = realization.pi

        def fn(x):
            return dynpi_residual(x, (1.0, 0.0), pi, 1.0, omega_b)

        n = 3
    else:
        seg = realization.seg
        nseg = seg.n_segments

        def fn(x):
            di, dv = mssb_residual(x[:nseg], x[nseg:], (1.0, 0.0), seg, 1.0, omega_b)
            return np.concatenate([di, dv])

        n = 2 * nseg + 1
    a, b = _linear_parts(fn, n)
    x = np.linalg.solve(s * np.eye(n) - a, b)
    # voltage of the input node per unit injected current
    return complex(x[1] if realization.model is LineModel.DYNPI else x[realization.seg.n_segments])


def exact_input_impedance(z_km: complex, y_km: complex, length: float) -> complex:
    """Open-circuit input impedance of the distributed line, ``z_c coth(gamma l)``."""
    gamma = cmath.sqrt(complex(z_km) * complex(y_km))
    z_c = cmath.sqrt(complex(z_km) / complex(y_km))
    return z_c / cmath.tanh(gamma * length)


def two_port_abcd(pi: LumpedPi) -> np.ndarray:
    """ABCD matrix of a pi section with half shunts at each end."""
    z, yh = pi.z_pi, pi.y_half
    return np.array([[1 + z * yh, z], [yh * (2 + z * yh), 1 + z * yh]])


def per_km_from_lumped(z_pi: complex, b_pi: float, length: float) -> tuple[float, float, float]:
    """Per-km ``(r, l, c)`` with zero conductance whose corrected pi is ``(z_pi, j b_pi)``.

    Starts from the exact lossy-line inversion and polishes the three real
    unknowns with a root solve, since dropping ``g`` breaks the closed form.
    """
    z_pi = complex(z_pi)
    y_pi = 1j * b_pi
    gl = 2.0 * cmath.asinh(cmath.sqrt(z_pi * y_pi / 4.0))
    zc = z_pi / cmath.sinh(gl)
    z_km0 = gl * zc / length
    y_km0 = gl / zc / length

    def mismatch(p):
        r, l, c = p
        pi = hyperbolic_correction(complex(r, l), 1j * c, length)
        return [pi.z_pi.real - z_pi.real, pi.z_pi.imag - z_pi.imag, pi.y_pi.imag - b_pi]

    sol = optimize.root(mismatch, [z_km0.real, z_km0.imag, y_km0.imag], method="hybr", tol=1e-14)
    if max(abs(v) for v in mismatch(sol.x)) > 1e-12:
        raise RuntimeError(f"per-km inversion failed: {sol.message}")
    r, l, c = (float(v) for v in sol.x)
    return r, l, c
