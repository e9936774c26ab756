"""TOML run configuration: parsing, validation and emission.

The file is a tree with sections ``[array]``, ``[nodes]``, ``[budget]``,
``[energy]`` (with ``[energy.loads.<mode>]`` subtables), ``[controller]``,
``[sim]``, ``[[events]]``, ``[run]`` and ``[sweep]``.  Every key is optional;
missing keys take the documented defaults below.  Angles are in degrees and
node indices in events are 1-based.

Parsing first normalizes the text into a plain tree with every default filled
in (``RunConfig.tree``), then builds the domain objects from that tree.  All
problems found along the way are reported together.
"""

from __future__ import annotations

import copy
import re
from dataclasses import dataclass, field

import numpy as np
import tomli
import tomli_w

from . import beamforming as bf
from .controller import ControllerConfig
from .energy import MODES, DEFAULT_LOADS, EnergyParams, FrameTiming, ModeLoad, SupercapParams
from .errors import ConfigError, WpsnError
from .geometry import AzimuthPattern, NodePlacement, RadioConstants, wavelength_for
from .sim import Event, Scenario

# key -> (default, kind); kind is one of "float", "int", "str", "floats", "opt_float"
_SCHEMA = {
    "array": {
        "kind": ("circular", "str"),
        "n_antennas": (8, "int"),
        "dimension_m": (0.21, "float"),  # element spacing (linear) or ring radius (circular)
        "frequency_hz": (920e6, "float"),
        "rx_gain": (1.0, "float"),
        "pattern_azimuth_deg": ([], "floats"),
        "pattern_gain": ([], "floats"),
    },
    "nodes": {
        "radius_m": ([2.0], "floats"),
        "azimuth_deg": ([0.0], "floats"),
    },
    "budget": {
        "p_ant_w": (0.14, "float"),
        "p_tot_w": (1.12, "float"),
    },
    "energy": {
        "capacitance_f": (0.1, "float"),
        "leak_resistance_ohm": (1e6, "float"),
        "e_max_j": (0.18, "float"),
        "e_min_j": (0.02, "float"),
        "eta": (0.5, "float"),
        "t_frame_s": (0.5, "float"),
        "t_es_s": (0.4, "float"),
        "n_training_slots": (8, "int"),
        "initial_j": (None, "opt_float"),
        "revive_j": (None, "opt_float"),
    },
    "controller": {
        "penalty_weight_j2": (5e-6, "float"),
        "utility_exponent": (0.0, "float"),
        "neutrality_margin_j": (1e-6, "float"),
        "sigma_min": (1e-4, "float"),
        "kappa_override_j": (None, "opt_float"),
    },
    "sim": {
        "frames": (20000, "int"),
        "seed": (0, "int"),
        "mode": ("bs", "str"),
        "warmup_fraction": (0.05, "float"),
        "csi_sigma": (0.0, "float"),
        "backoff_max_s": (0.0, "float"),
        "integrator": ("discrete", "str"),
        "ode_dt_s": (1e-3, "float"),
    },
    "run": {
        "samples": (10000, "int"),
        "alpha_points": (50, "int"),
        "static_alpha_points": (2000, "int"),
        "static_max_iter": (300, "int"),
        "oracle_restarts": (16, "int"),
    },
    "sweep": {
        "penalty_weight_j2": ([5e-7, 5e-6, 5e-5], "floats"),
        "utility_exponent": ([0.0, 0.25, 0.5, 0.75], "floats"),
        "azimuth_deg": ([float(a) for a in range(10, 181, 10)], "floats"),
        "p_tot_w": ([], "floats"),  # empty: use budget.p_tot_w
        "gain_layout": ("pair", "str"),  # pair: last node swept; spread: node k at (k-1)*angle
    },
}

_LOAD_SCHEMA = {
    "resistance_ohm": (None, "float"),
    "current_a": (None, "float"),
    "duration_s": (None, "float"),
}

_EVENT_SCHEMA = {
    "frame": (None, "opt_int"),
    "at_fraction": (None, "opt_float"),
    "action": (None, "str"),
    "node": (None, "opt_int"),
    "radius_m": (None, "opt_float"),
    "azimuth_deg": (None, "opt_float"),
    "p_ant_w": (None, "opt_float"),
    "p_tot_w": (None, "opt_float"),
    "penalty_weight_j2": (None, "opt_float"),
    "utility_exponent": (None, "opt_float"),
    "neutrality_margin_j": (None, "opt_float"),
    "sigma_min": (None, "opt_float"),
    "kappa_override_j": (None, "opt_float"),
}

_CONTROLLER_KEYS = ("penalty_weight_j2", "utility_exponent", "neutrality_margin_j",
                    "sigma_min", "kappa_override_j")


@dataclass
class RunConfig:
    tree: dict
    scenario: Scenario = field(repr=False)
    run: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.tree == other.tree

    @property
    def seed(self) -> int:
        return self.scenario.seed


def default_loads_tree() -> dict:
    return {m: {"resistance_ohm": float(l.resistance_ohm), "current_a": float(l.current_a),
                "duration_s": float(l.duration_s)} for m, l in DEFAULT_LOADS.items()}


def _coerce(value, kind, key, errors):
    def bad(what):
        errors.append(f"{key}: expected {what}, got {value!r}")

    if kind in ("float", "opt_float"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            return bad("a number")
        if not np.isfinite(value):
            return bad("a finite number")
        return float(value)
    if kind in ("int", "opt_int"):
        if isinstance(value, bool) or not isinstance(value, int):
            return bad("an integer")
        return int(value)
    if kind == "str":
        if not isinstance(value, str):
            return bad("a string")
        return value
    if kind == "floats":
        if not isinstance(value, list) or any(
                isinstance(v, bool) or not isinstance(v, (int, float)) for v in value):
            return bad("a list of numbers")
        if not all(np.isfinite(v) for v in value):
            return bad("finite numbers")
        return [float(v) for v in value]
    raise AssertionError(kind)


def _fill(section: dict, schema: dict, prefix: str, errors: list) -> dict:
    out = {}
    if not isinstance(section, dict):
        errors.append(f"{prefix}: expected a table")
        section = {}
    for key in section:
        if key not in schema:
            errors.append(f"{prefix}.{key}: unknown key")
    for key, (default, kind) in schema.items():
        if key in section:
            v = _coerce(section[key], kind, f"{prefix}.{key}", errors)
            out[key] = v if v is not None else copy.deepcopy(default)
        else:
            out[key] = copy.deepcopy(default)
    return out


def _normalize(raw: dict, errors: list) -> dict:
    known = set(_SCHEMA) | {"events"}
    for key in raw:
        if key not in known:
            errors.append(f"{key}: unknown section")
    tree = {}
    for name, schema in _SCHEMA.items():
        section = dict(raw.get(name, {})) if isinstance(raw.get(name, {}), dict) else raw[name]
        if name == "energy" and isinstance(section, dict):
            loads_raw = section.pop("loads", {})
            tree[name] = _fill(section, schema, name, errors)
            tree[name]["loads"] = _normalize_loads(loads_raw, errors)
        else:
            tree[name] = _fill(section, schema, name, errors)
            if name == "energy":
                tree[name]["loads"] = default_loads_tree()
    events = raw.get("events", [])
    if not isinstance(events, list):
        errors.append("events: expected an array of tables ([[events]])")
        events = []
    tree["events"] = [_fill(ev, _EVENT_SCHEMA, f"events[{i + 1}]", errors)
                      for i, ev in enumerate(events)]
    return tree


def _normalize_loads(raw, errors) -> dict:
    loads = default_loads_tree()
    if not isinstance(raw, dict):
        errors.append("energy.loads: expected a table")
        return loads
    for mode, entry in raw.items():
        prefix = f"energy.loads.{mode}"
        if mode not in MODES:
            errors.append(f"{prefix}: unknown mode (expected one of {', '.join(MODES)})")
            continue
        if not isinstance(entry, dict):
            errors.append(f"{prefix}: expected a table")
            continue
        for key in entry:
            if key not in _LOAD_SCHEMA:
                errors.append(f"{prefix}.{key}: unknown key")
            else:
                v = _coerce(entry[key], "float", f"{prefix}.{key}", errors)
                if v is not None:
                    loads[mode][key] = v
    return loads


def _check(tree: dict, errors: list) -> None:
    """Range checks that name the offending key."""

    def need(cond, key, msg):
        if not cond:
            errors.append(f"{key}: {msg}")

    a = tree["array"]
    need(a["kind"] in ("linear", "circular"), "array.kind", "must be 'linear' or 'circular'")
    need(a["n_antennas"] >= 1, "array.n_antennas", "must be >= 1")
    need(a["dimension_m"] > 0, "array.dimension_m", "must be positive")
    need(a["frequency_hz"] > 0, "array.frequency_hz", "must be positive")
    need(a["rx_gain"] > 0, "array.rx_gain", "must be positive")
    need(len(a["pattern_azimuth_deg"]) == len(a["pattern_gain"]), "array.pattern_gain",
         "must have the same length as array.pattern_azimuth_deg")
    need(all(g > 0 for g in a["pattern_gain"]), "array.pattern_gain", "gains must be positive")

    n = tree["nodes"]
    need(len(n["radius_m"]) >= 1, "nodes.radius_m", "at least one node is required")
    need(len(n["radius_m"]) == len(n["azimuth_deg"]), "nodes.azimuth_deg",
         "must have the same length as nodes.radius_m")
    need(all(r > 0 for r in n["radius_m"]), "nodes.radius_m", "radii must be positive")

    b = tree["budget"]
    need(b["p_ant_w"] > 0, "budget.p_ant_w", "must be positive")
    need(b["p_tot_w"] > 0, "budget.p_tot_w", "must be positive")

    e = tree["energy"]
    for key in ("capacitance_f", "leak_resistance_ohm", "e_max_j", "t_frame_s", "t_es_s"):
        need(e[key] > 0, f"energy.{key}", "must be positive")
    need(0 <= e["e_min_j"] < e["e_max_j"], "energy.e_min_j", "must lie in [0, energy.e_max_j)")
    need(0 < e["eta"] <= 1, "energy.eta", "must lie in (0, 1]")
    need(e["t_es_s"] <= e["t_frame_s"], "energy.t_es_s", "must not exceed energy.t_frame_s")
    need(e["n_training_slots"] >= 1, "energy.n_training_slots", "must be >= 1")
    if e["initial_j"] is not None:
        need(0 <= e["initial_j"] <= e["e_max_j"], "energy.initial_j", "must lie in [0, e_max_j]")
    if e["revive_j"] is not None:
        need(e["revive_j"] >= 0, "energy.revive_j", "must be nonnegative")
    for mode, load in e["loads"].items():
        need(load["resistance_ohm"] > 0, f"energy.loads.{mode}.resistance_ohm", "must be positive")
        need(load["current_a"] >= 0, f"energy.loads.{mode}.current_a", "must be nonnegative")
        need(load["duration_s"] >= 0, f"energy.loads.{mode}.duration_s", "must be nonnegative")
    busy = sum(e["loads"][m]["duration_s"] for m in ("rx", "act", "tx"))
    need(busy <= e["t_frame_s"], "energy.loads", "awake mode durations exceed energy.t_frame_s")

    _check_controller(tree["controller"], "controller", need)

    s = tree["sim"]
    need(s["frames"] >= 0, "sim.frames", "must be nonnegative")
    need(0 <= s["seed"] < 2**64, "sim.seed", "must be an unsigned 64-bit integer")
    need(s["mode"] in ("bs", "ts"), "sim.mode", "must be 'bs' or 'ts'")
    need(0 <= s["warmup_fraction"] < 1, "sim.warmup_fraction", "must lie in [0, 1)")
    need(s["csi_sigma"] >= 0, "sim.csi_sigma", "must be nonnegative")
    need(s["backoff_max_s"] >= 0, "sim.backoff_max_s", "must be nonnegative")
    need(s["integrator"] in ("discrete", "ode"), "sim.integrator", "must be 'discrete' or 'ode'")
    need(s["ode_dt_s"] > 0, "sim.ode_dt_s", "must be positive")

    r = tree["run"]
    need(r["samples"] >= 1, "run.samples", "must be >= 1")
    need(r["alpha_points"] >= 2, "run.alpha_points", "must be >= 2")
    need(r["static_alpha_points"] >= 1, "run.static_alpha_points", "must be >= 1")
    need(r["static_max_iter"] >= 1, "run.static_max_iter", "must be >= 1")
    need(r["oracle_restarts"] >= 1, "run.oracle_restarts", "must be >= 1")

    w = tree["sweep"]
    need(all(x > 0 for x in w["penalty_weight_j2"]), "sweep.penalty_weight_j2",
         "values must be positive")
    need(all(x < 1 for x in w["utility_exponent"]), "sweep.utility_exponent",
         "values must be < 1")
    need(all(x > 0 for x in w["p_tot_w"]), "sweep.p_tot_w", "values must be positive")
    need(w["gain_layout"] in ("pair", "spread"), "sweep.gain_layout",
         "must be 'pair' or 'spread'")

    K = len(n["radius_m"])
    last = -1
    for i, ev in enumerate(tree["events"]):
        p = f"events[{i + 1}]"
        if (ev["frame"] is None) == (ev["at_fraction"] is None):
            errors.append(f"{p}.frame: give exactly one of frame or at_fraction")
        elif ev["frame"] is not None:
            need(ev["frame"] >= 0, f"{p}.frame", "must be nonnegative")
        else:
            need(0 <= ev["at_fraction"] <= 1, f"{p}.at_fraction", "must lie in [0, 1]")
        pos = ev["frame"] if ev["frame"] is not None else (
            ev["at_fraction"] * s["frames"] if ev["at_fraction"] is not None else last)
        need(pos >= last, f"{p}.frame", "events must be sorted by frame")
        last = max(last, pos)
        act = ev["action"]
        if act == "move_node":
            need(ev["node"] is not None and 1 <= ev["node"] <= K, f"{p}.node",
                 f"must reference an existing node (1..{K})")
            need(ev["radius_m"] is not None and ev["radius_m"] > 0, f"{p}.radius_m",
                 "must be given and positive")
            need(ev["azimuth_deg"] is not None, f"{p}.azimuth_deg", "must be given")
        elif act == "set_budget":
            need(ev["p_ant_w"] is not None or ev["p_tot_w"] is not None, f"{p}.p_tot_w",
                 "set_budget needs p_ant_w and/or p_tot_w")
            for key in ("p_ant_w", "p_tot_w"):
                if ev[key] is not None:
                    need(ev[key] > 0, f"{p}.{key}", "must be positive")
        elif act == "set_config":
            need(any(ev[k] is not None for k in _CONTROLLER_KEYS), f"{p}.action",
                 "set_config needs at least one controller key")
            merged = {k: ev[k] if ev[k] is not None else tree["controller"][k]
                      for k in _CONTROLLER_KEYS}
            _check_controller(merged, p, need)
        elif act is not None:
            errors.append(f"{p}.action: unknown action {act!r} "
                          "(expected move_node, set_budget or set_config)")
        else:
            errors.append(f"{p}.action: missing")
        if act != "move_node":
            for key in ("node", "radius_m", "azimuth_deg"):
                if ev[key] is not None:
                    errors.append(f"{p}.{key}: not used by action {act!r}")


def _check_controller(c: dict, prefix: str, need) -> None:
    need(c["penalty_weight_j2"] > 0, f"{prefix}.penalty_weight_j2", "must be positive")
    need(c["utility_exponent"] < 1, f"{prefix}.utility_exponent", "must be < 1")
    need(c["neutrality_margin_j"] >= 0, f"{prefix}.neutrality_margin_j", "must be nonnegative")
    need(0 <= c["sigma_min"] <= 1, f"{prefix}.sigma_min", "must lie in [0, 1]")
    if c["kappa_override_j"] is not None:
        need(c["kappa_override_j"] > 0, f"{prefix}.kappa_override_j", "must be positive")


def _controller(c: dict) -> ControllerConfig:
    return ControllerConfig(**{k: c[k] for k in _CONTROLLER_KEYS})


def event_frame(ev: dict, n_frames: int) -> int:
    if ev["frame"] is not None:
        return ev["frame"]
    return int(np.floor(ev["at_fraction"] * n_frames))


def build_scenario(tree: dict, n_frames: int | None = None, seed: int | None = None,
                   mode: str | None = None) -> Scenario:
    """Domain objects from a validated tree; optional overrides for frames, seed, mode."""
    a, n, b, e, s = (tree[k] for k in ("array", "nodes", "budget", "energy", "sim"))
    frames = s["frames"] if n_frames is None else n_frames
    pattern = None
    if a["pattern_gain"]:
        pattern = AzimuthPattern(tuple(a["pattern_azimuth_deg"]), tuple(a["pattern_gain"]))
    radio = RadioConstants(wavelength_m=wavelength_for(a["frequency_hz"]), rx_gain=a["rx_gain"],
                           **({"tx_element_gain": pattern} if pattern else {}))
    energy = EnergyParams(
        cap=SupercapParams(e["capacitance_f"], e["leak_resistance_ohm"], e["e_max_j"], e["e_min_j"]),
        loads={m: ModeLoad(**l) for m, l in e["loads"].items()},
        timing=FrameTiming(e["t_frame_s"], e["t_es_s"], e["n_training_slots"]),
        eta=e["eta"], revive_j=e["revive_j"])
    base_budget = bf.PowerBudget(b["p_ant_w"], b["p_tot_w"])
    controller = _controller(tree["controller"])

    events = []
    budget_now, ctrl_now = dict(b), dict(tree["controller"])
    for ev in tree["events"]:
        frame = event_frame(ev, frames)
        if ev["action"] == "move_node":
            events.append(Event(frame, "move_node", node=ev["node"] - 1,
                                placement=NodePlacement.from_degrees(ev["radius_m"],
                                                                     ev["azimuth_deg"])))
        elif ev["action"] == "set_budget":
            budget_now.update({k: ev[k] for k in ("p_ant_w", "p_tot_w") if ev[k] is not None})
            events.append(Event(frame, "set_budget",
                                budget=bf.PowerBudget(budget_now["p_ant_w"], budget_now["p_tot_w"])))
        else:
            ctrl_now.update({k: ev[k] for k in _CONTROLLER_KEYS if ev[k] is not None})
            events.append(Event(frame, "set_config", config=_controller(ctrl_now)))

    return Scenario(
        placements=tuple(NodePlacement.from_degrees(r, az)
                         for r, az in zip(n["radius_m"], n["azimuth_deg"])),
        array_kind=a["kind"], n_antennas=a["n_antennas"], array_dimension_m=a["dimension_m"],
        radio=radio, budget=base_budget, energy=energy, controller=controller,
        events=tuple(events), n_frames=frames, seed=s["seed"] if seed is None else seed,
        mode=s["mode"] if mode is None else mode, initial_energy_j=e["initial_j"],
        warmup_fraction=s["warmup_fraction"], csi_sigma=s["csi_sigma"],
        backoff_max_s=s["backoff_max_s"], integrator=s["integrator"], ode_dt_s=s["ode_dt_s"],
    )


_LINE_RE = re.compile(r"line (\d+)")


def parse_config(text: str) -> RunConfig:
    """Parse and validate; raises ``ConfigError`` listing every problem found."""
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = _LINE_RE.search(str(exc))
        where = f"line {m.group(1)}" if m else "unknown line"
        raise ConfigError([f"syntax error at {where}: {exc}"]) from None
    errors: list[str] = []
    tree = _normalize(raw, errors)
    _check(tree, errors)  # badly typed values were replaced by defaults, so this is safe
    if errors:
        raise ConfigError(errors)
    try:
        scenario = build_scenario(tree)
    except WpsnError as exc:  # constructor checks the tree validation did not cover
        raise ConfigError([str(exc)]) from None
    return RunConfig(tree=tree, scenario=scenario, run=dict(tree["run"]), sweep=dict(tree["sweep"]))


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def _strip_none(obj):
    if isinstance(obj, dict):
        return {k: _strip_none(v) for k, v in obj.items() if v is not None}
    if isinstance(obj, list):
        return [_strip_none(v) for v in obj]
    return obj


def emit_config(cfg: RunConfig | dict) -> str:
    """Fully explicit TOML text; ``parse_config(emit_config(c)) == c``."""
    tree = cfg.tree if isinstance(cfg, RunConfig) else cfg
    out = _strip_none(tree)
    if not out["events"]:
        out.pop("events")
    return tomli_w.dumps(out)
