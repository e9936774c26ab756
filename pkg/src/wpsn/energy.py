"""Sensor-node energy bookkeeping: harvesting, mode loads, supercapacitor leakage.

Stored energy E and capacitor voltage are related by ``E = C V**2 / 2``.  A
mode load is a resistor in parallel with a constant-current sink, so the
power drawn in mode m is ``V**2 / R_m + I_m * V``.

Two paths advance the stored energy over one frame:

* ``integrate_frame`` solves the continuous-time balance with RK4 over the
  frame's mode schedule;
* ``frame_update`` is the discrete per-frame model that freezes E at its
  frame-start value.  Leakage is charged to the always-present part of the
  consumption (``varphi``) so that the expected variation stays
  ``eta * T_es * r - kappa * sigma - varphi``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import InvalidArgument

MODES = ("idle", "act", "rx", "tx")


@dataclass(frozen=True)
class SupercapParams:
    capacitance_f: float = 0.1
    leak_resistance_ohm: float = 1e6
    e_max_j: float = 0.18
    e_min_j: float = 0.02

    def __post_init__(self):
        if not (self.capacitance_f > 0 and self.leak_resistance_ohm > 0):
            raise InvalidArgument("capacitance and leakage resistance must be positive")
        if not 0 <= self.e_min_j < self.e_max_j:
            raise InvalidArgument("need 0 <= e_min_j < e_max_j")

    def voltage(self, e_j: float) -> float:
        return float(np.sqrt(2 * e_j / self.capacitance_f))


@dataclass(frozen=True)
class ModeLoad:
    resistance_ohm: float
    current_a: float
    duration_s: float = 0.0  # time spent in this mode during an awake frame


@dataclass(frozen=True)
class FrameTiming:
    t_frame_s: float = 0.5
    t_es_s: float = 0.4
    n_training_slots: int = 8

    def __post_init__(self):
        if not (self.t_frame_s > 0 and 0 < self.t_es_s <= self.t_frame_s):
            raise InvalidArgument("need 0 < t_es_s <= t_frame_s")
        if self.n_training_slots < 1:
            raise InvalidArgument("need at least one training slot")

    @property
    def training_slot_s(self) -> float:
        return (self.t_frame_s - self.t_es_s) / self.n_training_slots


# Mode loads calibrated so that kappa(0.1 J) is 2.77e-4 J with C = 0.1 F
# (currents are a CC2420/MSP430-like profile scaled to that target).
DEFAULT_LOADS = {
    "idle": ModeLoad(1e6, 1e-6),
    "rx": ModeLoad(1e5, 12.9e-3, 0.010),
    "act": ModeLoad(1e5, 0.343e-3, 0.020),
    "tx": ModeLoad(1e5, 11.94e-3, 0.005),
}


@dataclass(frozen=True)
class EnergyParams:
    cap: SupercapParams = field(default_factory=SupercapParams)
    loads: dict = field(default_factory=lambda: dict(DEFAULT_LOADS))
    timing: FrameTiming = field(default_factory=FrameTiming)
    eta: float = 0.5
    revive_j: float | None = None  # defaults to e_min_j

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise InvalidArgument(f"eta must be in (0, 1], got {self.eta}")
        missing = set(MODES) - set(self.loads)
        if missing:
            raise InvalidArgument(f"loads missing modes: {sorted(missing)}")
        for m, load in self.loads.items():
            if not load.resistance_ohm > 0 or load.current_a < 0 or load.duration_s < 0:
                raise InvalidArgument(f"invalid load for mode {m!r}")
        if self.awake_busy_s > self.timing.t_frame_s:
            raise InvalidArgument("awake mode durations exceed the frame length")

    @property
    def awake_busy_s(self) -> float:
        return sum(self.loads[m].duration_s for m in ("rx", "act", "tx"))

    @property
    def awake_durations(self) -> dict:
        """T_m for an awake frame; idle fills the rest of the frame."""
        d = {m: self.loads[m].duration_s for m in ("rx", "act", "tx")}
        d["idle"] = self.timing.t_frame_s - self.awake_busy_s
        return d

    @property
    def revive_threshold_j(self) -> float:
        return self.cap.e_min_j if self.revive_j is None else self.revive_j

    def with_cap(self, **kw) -> "EnergyParams":
        return replace(self, cap=replace(self.cap, **kw))


@dataclass
class NodeEnergyState:
    stored_j: float
    alive: bool = True


def _check_energy(e_j):
    if np.any(np.asarray(e_j) < 0):
        raise InvalidArgument(f"stored energy must be nonnegative, got {e_j}")


def consumed_power(mode: str, e_j, loads: dict, cap: SupercapParams):
    """delta(m, E) = 2E / (C R_m) + sqrt(2 / C) I_m sqrt(E)."""
    _check_energy(e_j)
    load = loads[mode]
    C = cap.capacitance_f
    return 2 * e_j / (C * load.resistance_ohm) + np.sqrt(2 / C) * load.current_a * np.sqrt(e_j)


def leakage_power(e_j, cap: SupercapParams):
    _check_energy(e_j)
    return 2 * e_j / (cap.capacitance_f * cap.leak_resistance_ohm)


def harvested_power(receive_w, eta: float):
    if not 0 < eta <= 1:
        raise InvalidArgument(f"eta must be in (0, 1], got {eta}")
    return eta * np.asarray(receive_w)


def frame_energies(a: int, e_j, receive_w, params: EnergyParams):
    """Harvested and consumed energy over one frame, E frozen at its start value.

    Consumption includes leakage over the whole frame.
    """
    _check_energy(e_j)
    T = params.timing.t_frame_s
    delta_plus = params.eta * params.timing.t_es_s * np.asarray(receive_w)
    if a:
        spent = sum(consumed_power(m, e_j, params.loads, params.cap) * t
                    for m, t in params.awake_durations.items())
    else:
        spent = consumed_power("idle", e_j, params.loads, params.cap) * T
    delta_minus = spent + leakage_power(e_j, params.cap) * T
    return delta_plus, delta_minus


def kappa_varphi(e_j, params: EnergyParams):
    """(kappa, varphi): extra energy of an awake frame, and the always-spent part."""
    _, d0 = frame_energies(0, e_j, 0.0, params)
    _, d1 = frame_energies(1, e_j, 0.0, params)
    return d1 - d0, d0


def frame_update(e_j: float, receive_w: float, a: int, params: EnergyParams) -> float:
    dp, dm = frame_energies(a, e_j, receive_w, params)
    return float(min(max(e_j + dp - dm, 0.0), params.cap.e_max_j))


def expected_variation(receive_w, sigma, e_j, params: EnergyParams):
    if np.any(np.asarray(sigma) < 0) or np.any(np.asarray(sigma) > 1):
        raise InvalidArgument("sigma must lie in [0, 1]")
    kappa, varphi = kappa_varphi(e_j, params)
    return params.eta * params.timing.t_es_s * np.asarray(receive_w) - kappa * sigma - varphi


def advance(state: NodeEnergyState, receive_w: float, a: int, params: EnergyParams) -> NodeEnergyState:
    """Discrete update plus alive/revive bookkeeping."""
    e = frame_update(state.stored_j, receive_w, a, params)
    if state.alive:
        alive = e >= params.cap.e_min_j
    else:
        alive = e >= params.revive_threshold_j
    return NodeEnergyState(e, alive)


# -- continuous-time path ------------------------------------------------------


def _derivative(e, harvest_w, mode, params):
    e = max(e, 0.0)
    return (harvest_w - consumed_power(mode, e, params.loads, params.cap)
            - leakage_power(e, params.cap))


def integrate_frame(
    e0_j: float,
    receive_w: float,
    mode_schedule: Sequence[tuple[str, float]],
    params: EnergyParams,
    dt_s: float = 1e-3,
) -> tuple[float, bool]:
    """RK4 solution of dE/dt = eta r - delta(m, E) - delta_leak(E) over one frame.

    Receive power is applied only in the energy-transfer slot, which closes
    the frame.  E is clamped to [0, E_max] after every step.  Returns
    ``(E_end, alive)``.
    """
    if dt_s <= 0:
        raise InvalidArgument("dt_s must be positive")
    _check_energy(e0_j)
    harvest = params.eta * receive_w
    es_start = params.timing.t_frame_s - params.timing.t_es_s
    e_max = params.cap.e_max_j

    # split mode segments at the start of the energy-transfer slot
    pieces = []
    t = 0.0
    for mode, dur in mode_schedule:
        if dur <= 0:
            continue
        end = t + dur
        if t < es_start < end:
            pieces.append((mode, es_start - t, 0.0))
            pieces.append((mode, end - es_start, harvest))
        else:
            pieces.append((mode, dur, harvest if t >= es_start else 0.0))
        t = end

    e = float(e0_j)
    for mode, dur, p in pieces:
        steps = max(int(np.ceil(dur / dt_s - 1e-9)), 1)
        h = dur / steps
        for _ in range(steps):
            k1 = _derivative(e, p, mode, params)
            k2 = _derivative(e + h / 2 * k1, p, mode, params)
            k3 = _derivative(e + h / 2 * k2, p, mode, params)
            k4 = _derivative(e + h * k3, p, mode, params)
            e = min(max(e + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4), 0.0), e_max)
    return e, e >= params.cap.e_min_j
