"""Per-unit bases, dq phasors and network topology records."""
from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field

__all__ = [
    "OMEGA_B",
    "ConfigurationError",
    "DqPhasor",
    "PerUnitBase",
    "BusKind",
    "Bus",
    "BranchSpec",
    "TransformerSpec",
    "OperatingCondition",
    "DeviceSpec",
    "NetworkCase",
    "rotate_frame",
    "CASES",
]

OMEGA_B = 2.0 * math.pi * 60.0


class ConfigurationError(ValueError):
    """Invalid case, condition or sweep configuration."""


@dataclass(frozen=True)
class DqPhasor:
    """Complex quantity ``d + jq`` in a rotating frame."""

    d: float
    q: float

    @classmethod
    def from_complex(cls, z: complex) -> "DqPhasor":
        z = complex(z)
        return cls(z.real, z.imag)

    def __complex__(self) -> complex:
        return complex(self.d, self.q)

    @property
    def magnitude(self) -> float:
        return math.hypot(self.d, self.q)

    @property
    def angle(self) -> float:
        return math.atan2(self.q, self.d)

    def __add__(self, other):
        return DqPhasor.from_complex(complex(self) + complex(other))

    def __sub__(self, other):
        return DqPhasor.from_complex(complex(self) - complex(other))

    def __mul__(self, other):
        return DqPhasor.from_complex(complex(self) * complex(other))

    __rmul__ = __mul__

    def conj(self) -> "DqPhasor":
        return DqPhasor(self.d, -self.q)


def rotate_frame(x, theta: float) -> DqPhasor:
    """Return ``x * exp(j theta)``."""
    return DqPhasor.from_complex(complex(x) * cmath.exp(1j * theta))


@dataclass(frozen=True)
class PerUnitBase:
    s_base: float = 100.0
    omega_b: float = OMEGA_B
    v_base: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.s_base <= 0 or self.omega_b <= 0:
            raise ConfigurationError("per-unit bases must be positive")
        if any(v <= 0 for v in self.v_base.values()):
            raise ConfigurationError("voltage bases must be positive")

    def z_base(self, bus_id: int) -> float:
        """Impedance base in ohm at the voltage level of ``bus_id``."""
        kv = self.v_base[bus_id]
        return kv * kv / self.s_base


class BusKind(str, enum.Enum):
    REFERENCE = "reference"
    PV = "pv"
    PQ = "pq"


@dataclass(frozen=True)
class Bus:
    id: int
    kind: BusKind = BusKind.PQ
    voltage_setpoint: float = 1.0
    load_p: float = 0.0
    load_q: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", BusKind(self.kind))
        if self.load_p < 0 or self.load_q < 0:
            raise ConfigurationError(f"bus {self.id}: negative load")
        if self.voltage_setpoint <= 0:
            raise ConfigurationError(f"bus {self.id}: voltage setpoint must be positive")


@dataclass(frozen=True)
class BranchSpec:
    """Transmission line described by per-km parameters (pu/km, reactances at nominal frequency)."""

    from_bus: int
    to_bus: int
    r_km: float
    l_km: float
    c_km: float
    length_km: float
    name: str = ""

    def __post_init__(self):
        if self.r_km < 0 or self.l_km <= 0 or self.c_km < 0 or self.length_km <= 0:
            raise ConfigurationError(
                f"branch {self.from_bus}-{self.to_bus}: need r>=0, l>0, c>=0, length>0")
        if self.from_bus == self.to_bus:
            raise ConfigurationError(f"branch {self.from_bus}-{self.to_bus} is a self loop")

    @property
    def z_km(self) -> complex:
        return complex(self.r_km, self.l_km)

    @property
    def y_km(self) -> complex:
        # shunt conductance is always zero
        return complex(0.0, self.c_km)


@dataclass(frozen=True)
class TransformerSpec:
    """Series-impedance transformer; always algebraic."""

    from_bus: int
    to_bus: int
    r: float
    x: float

    def __post_init__(self):
        if self.r < 0 or self.x <= 0:
            raise ConfigurationError(f"transformer {self.from_bus}-{self.to_bus}: need r>=0, x>0")

    @property
    def z(self) -> complex:
        return complex(self.r, self.x)


@dataclass(frozen=True)
class OperatingCondition:
    case_name: str
    eta_gfm: float
    eta_gfl: float
    load_scale: float = 1.0

    def __post_init__(self):
        if self.eta_gfm < 0 or self.eta_gfl < 0:
            raise ConfigurationError("generation shares must be non-negative")
        if self.eta_gfm + self.eta_gfl > 1.0 + 1e-12:
            raise ConfigurationError(
                f"combined inverter share {self.eta_gfm + self.eta_gfl:.3f} exceeds 1")
        if self.load_scale <= 0:
            raise ConfigurationError("load scale must be positive")

    @property
    def eta_ibr(self) -> float:
        return self.eta_gfm + self.eta_gfl

    def with_load_scale(self, load_scale: float) -> "OperatingCondition":
        return OperatingCondition(self.case_name, self.eta_gfm, self.eta_gfl, load_scale)


# (eta_gfm, eta_gfl) of the four studied operating conditions
CASES = {
    1: OperatingCondition("case1", 0.56, 0.14),
    2: OperatingCondition("case2", 0.28, 0.42),
    3: OperatingCondition("case3", 0.72, 0.18),
    4: OperatingCondition("case4", 0.36, 0.54),
}


@dataclass(frozen=True)
class DeviceSpec:
    """A source connected to a bus.

    ``kind`` is one of ``"sm"``, ``"gfm"``, ``"gfl"``.  ``p_set`` and
    ``q_set`` are system-base dispatch values; ``q_set`` is ignored at PV
    and reference buses where the power flow decides it.  ``params`` holds
    the model parameter bundle of the matching device module.
    """

    name: str
    kind: str
    bus: int
    params: object
    p_set: float = 0.0
    q_set: float = 0.0
    rating_mva: float = 100.0

    def __post_init__(self):
        if self.kind not in ("sm", "gfm", "gfl"):
            raise ConfigurationError(f"unknown device kind {self.kind!r}")
        if self.rating_mva <= 0:
            raise ConfigurationError(f"device {self.name}: rating must be positive")


@dataclass(frozen=True)
class NetworkCase:
    base: PerUnitBase
    buses: tuple
    branches: tuple
    transformers: tuple = ()
    devices: tuple = ()
    condition: OperatingCondition | None = None

    def __post_init__(self):
        ids = [b.id for b in self.buses]
        if len(set(ids)) != len(ids):
            raise ConfigurationError("duplicate bus ids")
        refs = [b for b in self.buses if b.kind is BusKind.REFERENCE]
        if len(refs) != 1:
            raise ConfigurationError(f"expected exactly one reference bus, found {len(refs)}")
        known = set(ids)
        for br in tuple(self.branches) + tuple(self.transformers):
            if br.from_bus not in known or br.to_bus not in known:
                raise ConfigurationError(f"element {br.from_bus}-{br.to_bus} references unknown bus")
        for dev in self.devices:
            if dev.bus not in known:
                raise ConfigurationError(f"device {dev.name} at unknown bus {dev.bus}")

    @property
    def bus_ids(self) -> list[int]:
        return [b.id for b in self.buses]

    def bus_index(self) -> dict[int, int]:
        return {b.id: k for k, b in enumerate(self.buses)}

    @property
    def reference_bus(self) -> Bus:
        return next(b for b in self.buses if b.kind is BusKind.REFERENCE)

    @property
    def total_load_p(self) -> float:
        return sum(b.load_p for b in self.buses)

    def device(self, name: str) -> DeviceSpec:
        for d in self.devices:
            if d.name == name:
                return d
        raise KeyError(name)
