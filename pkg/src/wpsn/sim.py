"""Frame-by-frame simulation of the beacon/node protocol.

Per frame: apply scripted events, refresh the channel if geometry changed,
let the controller choose the beam and awake-frame ratios, draw each node's
activity, advance stored energies, and record everything.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import beamforming as bf
from .controller import ControllerConfig, NeutralController, utility
from .energy import EnergyParams, FrameTiming, integrate_frame, kappa_varphi
from .errors import InvalidArgument
from .geometry import NodePlacement, RadioConstants, build_layout, channel_matrix

log = logging.getLogger(__name__)

# derived-stream purposes
_ACTIVITY, _BACKOFF, _CSI = 1, 2, 3


@dataclass(frozen=True)
class Event:
    frame: int
    action: str  # move_node | set_budget | set_config
    node: Optional[int] = None  # 0-based
    placement: Optional[NodePlacement] = None
    budget: Optional[bf.PowerBudget] = None
    config: Optional[ControllerConfig] = None


@dataclass(frozen=True)
class Scenario:
    placements: tuple
    array_kind: str = "circular"
    n_antennas: int = 8
    array_dimension_m: float = 0.21
    radio: RadioConstants = field(default_factory=RadioConstants)
    budget: bf.PowerBudget = field(default_factory=lambda: bf.PowerBudget(0.14, 1.12))
    energy: EnergyParams = field(default_factory=EnergyParams)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    events: tuple = ()
    n_frames: int = 1000
    seed: int = 0
    mode: str = "bs"
    initial_energy_j: Optional[float] = None  # defaults to E_max / 2
    warmup_fraction: float = 0.05
    csi_sigma: float = 0.0
    backoff_max_s: float = 0.0
    integrator: str = "discrete"  # or "ode"
    ode_dt_s: float = 1e-3

    def __post_init__(self):
        validate_scenario(self)

    @property
    def n_nodes(self) -> int:
        return len(self.placements)

    @property
    def warmup_frames(self) -> int:
        return int(np.floor(self.warmup_fraction * self.n_frames))


def validate_scenario(sc: Scenario) -> None:
    if sc.n_nodes < 1:
        raise InvalidArgument("scenario needs at least one node")
    if sc.n_frames < 0:
        raise InvalidArgument("n_frames must be nonnegative")
    if sc.mode not in ("bs", "ts"):
        raise InvalidArgument(f"unknown mode {sc.mode!r}")
    if sc.integrator not in ("discrete", "ode"):
        raise InvalidArgument(f"unknown integrator {sc.integrator!r}")
    if not 0 <= sc.warmup_fraction < 1:
        raise InvalidArgument("warmup_fraction must lie in [0, 1)")
    frames = [ev.frame for ev in sc.events]
    if frames != sorted(frames):
        raise InvalidArgument("events must be sorted by frame")
    for ev in sc.events:
        if ev.action == "move_node":
            if ev.node is None or not 0 <= ev.node < sc.n_nodes or ev.placement is None:
                raise InvalidArgument(f"move_node event at frame {ev.frame} references a missing node")
        elif ev.action == "set_budget":
            if ev.budget is None:
                raise InvalidArgument(f"set_budget event at frame {ev.frame} has no budget")
        elif ev.action == "set_config":
            if ev.config is None:
                raise InvalidArgument(f"set_config event at frame {ev.frame} has no config")
        else:
            raise InvalidArgument(f"unknown event action {ev.action!r}")
    e0 = sc.initial_energy_j
    if e0 is not None and not 0 <= e0 <= sc.energy.cap.e_max_j:
        raise InvalidArgument("initial_energy_j must lie in [0, E_max]")


def sample_activity(sigma, rng: np.random.Generator) -> int:
    if not 0 <= sigma <= 1:
        raise InvalidArgument(f"sigma must lie in [0, 1], got {sigma}")
    return int(rng.random() < sigma)


def mode_schedule(awake: bool, timing: FrameTiming, params: EnergyParams,
                  backoff_s: float = 0.0) -> list[tuple[str, float]]:
    """Mode sequence of one frame; durations always sum to ``t_frame_s``."""
    T = timing.t_frame_s
    if not awake:
        return [("idle", T)]
    d = params.awake_durations
    backoff = min(max(backoff_s, 0.0), d["idle"])  # never overflow the frame
    rest = T - (d["rx"] + d["act"] + backoff + d["tx"])
    return [("rx", d["rx"]), ("act", d["act"]), ("idle", backoff), ("tx", d["tx"]),
            ("idle", max(rest, 0.0))]


@dataclass
class TimeSeries:
    weights: np.ndarray  # F x N complex
    receive_w: np.ndarray  # F x K
    stored_j: np.ndarray  # F x K, at frame start
    deficiency_j: np.ndarray
    sigma: np.ndarray
    activity: np.ndarray
    alive: np.ndarray  # F x K, at frame start
    harvested_j: np.ndarray
    consumed_j: np.ndarray
    utility: np.ndarray  # F x K, mu(sigma)
    beam_index: np.ndarray  # time-sharing node served, -1 in beam-splitting mode
    final_stored_j: np.ndarray
    warmup_frames: int
    frame_s: float

    @property
    def n_frames(self) -> int:
        return self.receive_w.shape[0]

    def window(self, start: Optional[int] = None, stop: Optional[int] = None) -> slice:
        return slice(self.warmup_frames if start is None else start, stop)

    def summary(self, start: Optional[int] = None, stop: Optional[int] = None) -> dict:
        sl = self.window(start, stop)
        if self.n_frames == 0 or self.utility[sl].shape[0] == 0:
            return {"frames": self.n_frames, "avg_sum_utility": float("nan"),
                    "avg_sum_deficiency_j": float("nan")}
        u = self.utility[sl].sum(axis=1)
        d = self.deficiency_j[sl].sum(axis=1)
        return {
            "frames": self.n_frames,
            "avg_sum_utility": float(u.mean()),
            "sem_sum_utility": float(u.std(ddof=1) / np.sqrt(len(u))) if len(u) > 1 else 0.0,
            "avg_sum_deficiency_j": float(d.mean()),
            "avg_sigma": self.sigma[sl].mean(axis=0).tolist(),
            "avg_deficiency_j": self.deficiency_j[sl].mean(axis=0).tolist(),
            "min_stored_j": float(self.stored_j[sl].min()),
            "min_energy_node": int(np.argmin(self.stored_j[sl].min(axis=0))) + 1,
            "all_alive": bool(self.alive[sl].all()),
        }


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def run(sc: Scenario) -> TimeSeries:
    F, K, N = sc.n_frames, sc.n_nodes, sc.n_antennas
    params = sc.energy
    layout = build_layout(sc.array_kind, N, sc.array_dimension_m)
    placements = list(sc.placements)
    budget = sc.budget
    config = sc.controller
    events = list(sc.events)

    out = TimeSeries(
        weights=np.zeros((F, N), complex),
        receive_w=np.zeros((F, K)), stored_j=np.zeros((F, K)), deficiency_j=np.zeros((F, K)),
        sigma=np.zeros((F, K)), activity=np.zeros((F, K), dtype=np.int8),
        alive=np.zeros((F, K), dtype=bool), harvested_j=np.zeros((F, K)),
        consumed_j=np.zeros((F, K)), utility=np.zeros((F, K)),
        beam_index=np.full(F, -1, dtype=int), final_stored_j=np.zeros(K),
        warmup_frames=sc.warmup_frames, frame_s=params.timing.t_frame_s,
    )
    e0 = params.cap.e_max_j / 2 if sc.initial_energy_j is None else sc.initial_energy_j
    e = np.full(K, float(e0))
    alive = e >= params.cap.e_min_j
    uniforms = np.array([_rng(sc.seed, _ACTIVITY, k).random(F) for k in range(K)]).T \
        if F else np.zeros((0, K))
    backoff_rngs = [_rng(sc.seed, _BACKOFF, k) for k in range(K)]
    csi_rng = _rng(sc.seed, _CSI)

    H_true = channel_matrix(layout, placements, sc.radio)
    dirty = True
    controller = NeutralController(config, params, budget, sc.mode)
    ts = None
    ev_i = 0
    e_min, revive = params.cap.e_min_j, params.revive_threshold_j

    for t in range(F):
        while ev_i < len(events) and events[ev_i].frame <= t:
            ev = events[ev_i]
            if ev.action == "move_node":
                placements[ev.node] = ev.placement
                H_true = channel_matrix(layout, placements, sc.radio)
            elif ev.action == "set_budget":
                budget = ev.budget
            elif ev.action == "set_config":
                config = ev.config
            log.debug("frame %d: applied %s", t, ev.action)
            controller = NeutralController(config, params, budget, sc.mode)
            dirty = True
            ev_i += 1

        if sc.csi_sigma > 0:
            z = csi_rng.standard_normal((K, N)) + 1j * csi_rng.standard_normal((K, N))
            H_est = H_true * (1 + sc.csi_sigma * z / np.sqrt(2))
            ts = bf.ts_solution(H_est, budget)
        else:
            H_est = H_true
            if dirty:
                ts = bf.ts_solution(H_est, budget)
        dirty = False

        kappa, varphi = kappa_varphi(e, params)
        dec = controller.decide(H_est, e, alive=alive, ts=ts, kappa=kappa)
        if sc.mode == "ts":
            out.beam_index[t] = int(np.argmax(ts.power_matrix @ dec.deficiency))
        r = bf.receive_power(H_true, dec.weights)
        a = (uniforms[t] < dec.awake_ratios).astype(np.int8)

        out.weights[t] = dec.weights
        out.receive_w[t] = r
        out.stored_j[t] = e
        out.deficiency_j[t] = dec.deficiency
        out.sigma[t] = dec.awake_ratios
        out.activity[t] = a
        out.alive[t] = alive
        out.utility[t] = utility(dec.awake_ratios, config.utility_exponent)

        if sc.integrator == "discrete":
            dp = params.eta * params.timing.t_es_s * r
            dm = kappa * a + varphi
            e_next = np.minimum(np.maximum(e + dp - dm, 0.0), params.cap.e_max_j)
        else:
            e_next = np.empty(K)
            dp = params.eta * params.timing.t_es_s * r
            for k in range(K):
                backoff = backoff_rngs[k].uniform(0, sc.backoff_max_s) if a[k] else 0.0
                sched = mode_schedule(bool(a[k]), params.timing, params, backoff)
                e_next[k], _ = integrate_frame(e[k], r[k], sched, params, sc.ode_dt_s)
            dm = e + dp - e_next  # consumption implied by the trajectory, clamping included
        out.harvested_j[t] = dp
        out.consumed_j[t] = dm
        alive = np.where(alive, e_next >= e_min, e_next >= revive)
        e = e_next

    out.final_stored_j = e.copy()
    return out


def with_overrides(sc: Scenario, **kw) -> Scenario:
    return replace(sc, **kw)
