"""WSCC 9-bus case construction and the NetworkCase JSON format.

JSON layout (all electrical values in pu on ``base.s_base``)::

    {
      "base": {"s_base": 100, "frequency_hz": 60, "v_base": {"<bus id>": kV}},
      "buses": [{"id", "kind": "reference|pv|pq", "voltage_setpoint", "load_p", "load_q"}],
      "branches": [{"name", "from_bus", "to_bus", "r_km", "l_km", "c_km", "length_km"}],
      "transformers": [{"from_bus", "to_bus", "r", "x"}],
      "devices": [{"name", "kind": "sm|gfm|gfl", "bus", "rating_mva", "p_set", "q_set",
                   "params": {...model parameters, "gains": {...}}}],
      "condition": {"case_name", "eta_gfm", "eta_gfl", "load_scale"}
    }

``l_km`` and ``c_km`` are reactance and susceptance per km at nominal
frequency.  ``params`` mirrors the dataclass fields of the device modules.
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, replace
from importlib import resources
from pathlib import Path

from .core import (
    Bus, BusKind, BranchSpec, CASES, ConfigurationError, DeviceSpec, NetworkCase,
    OperatingCondition, PerUnitBase, TransformerSpec,
)
from .inverters import (
    GflGains, GflParams, GfmGains, GfmParams, GridFollowingInverter, GridFormingInverter,
    LclFilterParams, PllParams,
)
from .machine import AvrType1Params, MachineParams, SynchronousMachine

__all__ = [
    "load_wscc9_data",
    "build_wscc9",
    "condition_for",
    "case_to_dict",
    "case_from_dict",
    "save_case",
    "load_case",
    "with_gfm_gains",
]


def load_wscc9_data() -> dict:
    text = resources.files("invgrid").joinpath("data/wscc9.json").read_text()
    return json.loads(text)


def condition_for(case: int, load_scale: float = 1.0) -> OperatingCondition:
    try:
        return CASES[int(case)].with_load_scale(load_scale)
    except KeyError:
        raise ConfigurationError(f"unknown case {case!r}; expected one of {sorted(CASES)}") from None


def _params_from_dict(kind: str, d: dict):
    d = dict(d)
    if kind == "sm":
        return SynchronousMachine(MachineParams(**d.get("machine", {})),
                                  AvrType1Params(**d.get("avr", {})))
    gains = d.pop("gains", {})
    flt = LclFilterParams(**d.pop("filter", {}))
    pll = PllParams(**d.pop("pll", {}))
    if kind == "gfm":
        return GridFormingInverter(GfmParams(filter=flt, pll=pll, **d), GfmGains(**gains))
    if kind == "gfl":
        return GridFollowingInverter(GflParams(filter=flt, pll=pll, **d), GflGains(**gains))
    raise ConfigurationError(f"unknown device kind {kind!r}")


def _params_to_dict(kind: str, params) -> dict:
    if kind == "sm":
        return {"machine": asdict(params.machine), "avr": asdict(params.avr)}
    out = asdict(params.params)
    out["gains"] = asdict(params.gains)
    return out


def _device_from_dict(d: dict) -> DeviceSpec:
    return DeviceSpec(
        name=d["name"], kind=d["kind"], bus=int(d["bus"]),
        params=_params_from_dict(d["kind"], d.get("params", {})),
        p_set=float(d.get("p_set", 0.0)), q_set=float(d.get("q_set", 0.0)),
        rating_mva=float(d.get("rating_mva", 100.0)),
    )


def case_from_dict(data: dict) -> NetworkCase:
    b = data["base"]
    base = PerUnitBase(
        s_base=float(b.get("s_base", 100.0)),
        omega_b=2.0 * math.pi * float(b.get("frequency_hz", 60.0)),
        v_base={int(k): float(v) for k, v in b.get("v_base", {}).items()},
    )
    buses = tuple(Bus(int(x["id"]), BusKind(x.get("kind", "pq")), float(x.get("voltage_setpoint", 1.0)),
                      float(x.get("load_p", 0.0)), float(x.get("load_q", 0.0)))
                  for x in data["buses"])
    branches = tuple(BranchSpec(int(x["from_bus"]), int(x["to_bus"]), float(x["r_km"]), float(x["l_km"]),
                                float(x["c_km"]), float(x["length_km"]), x.get("name", ""))
                     for x in data.get("branches", []))
    transformers = tuple(TransformerSpec(int(x["from_bus"]), int(x["to_bus"]), float(x.get("r", 0.0)),
                                         float(x["x"]))
                         for x in data.get("transformers", []))
    devices = tuple(_device_from_dict(x) for x in data.get("devices", []))
    cond = data.get("condition")
    condition = OperatingCondition(**cond) if cond else None
    return NetworkCase(base, buses, branches, transformers, devices, condition)


def case_to_dict(case: NetworkCase) -> dict:
    return {
        "base": {
            "s_base": case.base.s_base,
            "frequency_hz": case.base.omega_b / (2.0 * math.pi),
            "v_base": {str(k): v for k, v in case.base.v_base.items()},
        },
        "buses": [{"id": x.id, "kind": x.kind.value, "voltage_setpoint": x.voltage_setpoint,
                   "load_p": x.load_p, "load_q": x.load_q} for x in case.buses],
        "branches": [asdict(x) for x in case.branches],
        "transformers": [asdict(x) for x in case.transformers],
        "devices": [{"name": d.name, "kind": d.kind, "bus": d.bus, "rating_mva": d.rating_mva,
                     "p_set": d.p_set, "q_set": d.q_set, "params": _params_to_dict(d.kind, d.params)}
                    for d in case.devices],
        "condition": asdict(case.condition) if case.condition else None,
    }


def save_case(case: NetworkCase, path) -> None:
    Path(path).write_text(json.dumps(case_to_dict(case), indent=2))


def load_case(path) -> NetworkCase:
    return case_from_dict(json.loads(Path(path).read_text()))


def build_wscc9(
    load_scale: float,
    condition: OperatingCondition,
    *,
    data: dict | None = None,
    all_sm: bool = False,
) -> NetworkCase:
    """Modified WSCC 9-bus case for one operating condition.

    Loads are scaled by ``load_scale``; the GFM (bus 3) and GFL (bus 2)
    active setpoints are their share of the total scaled load.  The GFM
    bus is PV, the GFL bus PQ with zero reactive injection, and the
    machine at bus 1 is the slack.  With ``all_sm`` both inverters are
    replaced by synchronous machines on PV buses carrying the same shares.
    """
    if not isinstance(condition, OperatingCondition):
        raise ConfigurationError("condition must be an OperatingCondition")
    condition = condition.with_load_scale(load_scale)
    data = copy.deepcopy(data if data is not None else load_wscc9_data())
    for bus in data["buses"]:
        bus["load_p"] = float(bus.get("load_p", 0.0)) * load_scale
        bus["load_q"] = float(bus.get("load_q", 0.0)) * load_scale
    total_p = sum(b["load_p"] for b in data["buses"])

    if all_sm:
        keep = [d for d in data["devices"] if d["kind"] == "sm"]
        data["devices"] = keep + copy.deepcopy(data.get("all_sm_devices", []))
    for dev in data["devices"]:
        bus = next(b for b in data["buses"] if int(b["id"]) == int(dev["bus"]))
        if int(dev["bus"]) == 3:
            dev["p_set"] = condition.eta_gfm * total_p
            bus["kind"] = "pv"
        elif int(dev["bus"]) == 2:
            dev["p_set"] = condition.eta_gfl * total_p
            dev["q_set"] = 0.0
            bus["kind"] = "pv" if dev["kind"] == "sm" else "pq"
    data["condition"] = asdict(condition)
    return case_from_dict(data)


def with_gfm_gains(case: NetworkCase, gains: GfmGains) -> NetworkCase:
    """Copy of ``case`` with every GFM device using ``gains``."""
    devices = tuple(
        replace(d, params=replace(d.params, gains=gains)) if d.kind == "gfm" else d
        for d in case.devices
    )
    return replace(case, devices=devices)
