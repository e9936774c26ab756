"""Energy-neutral control: per-frame drift-plus-penalty decisions and the
static reference problem they are measured against.

Each frame the beacon

* steers power by beam splitting with the stored-energy deficiencies
  ``E_max - E_k`` as receive-power weights, and
* sets each node's awake-frame ratio to the maximizer of
  ``mu(sigma) - (kappa / lambda) * deficiency * sigma`` on [0, 1].

``static_optimum`` solves the long-run utility problem whose value U*(eps)
appears in the performance bounds; ``upsilon`` is the constant of the
drift bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linprog, minimize

from . import beamforming as bf
from .energy import EnergyParams, kappa_varphi
from .errors import Infeasible, InvalidArgument, UnsupportedConfig

UTILITY_FLOOR = -1e30


@dataclass(frozen=True)
class ControllerConfig:
    penalty_weight_j2: float = 5e-6
    utility_exponent: float = 0.0
    neutrality_margin_j: float = 1e-6
    sigma_min: float = 1e-4
    # constant kappa used by the decision rule instead of kappa(E), if set
    kappa_override_j: Optional[float] = None

    def __post_init__(self):
        if not self.penalty_weight_j2 > 0:
            raise InvalidArgument("penalty_weight_j2 must be positive")
        if self.neutrality_margin_j < 0:
            raise InvalidArgument("neutrality_margin_j must be nonnegative")
        if self.utility_exponent >= 1:
            raise UnsupportedConfig(
                f"utility_exponent must be < 1, got {self.utility_exponent}")
        if not 0 <= self.sigma_min <= 1:
            raise InvalidArgument("sigma_min must lie in [0, 1]")


@dataclass
class ControlDecision:
    weights: np.ndarray
    awake_ratios: np.ndarray
    deficiency: np.ndarray


def utility(sigma, psi: float):
    """(sigma**psi - 1) / psi, or ln(sigma) at psi = 0.

    sigma = 0 with psi <= 0 maps to UTILITY_FLOOR.
    """
    s = np.asarray(sigma, dtype=float)
    if np.any(s < 0) or np.any(s > 1):
        raise InvalidArgument(f"sigma must lie in [0, 1], got {sigma}")
    with np.errstate(divide="ignore"):
        if psi == 0:
            u = np.log(s)
        else:
            u = (np.power(s, psi) - 1) / psi
    u = np.where(np.isfinite(u), u, UTILITY_FLOOR)
    return float(u) if u.ndim == 0 else u


def deficiency(e_vec, e_max: float) -> np.ndarray:
    e = np.asarray(e_vec, dtype=float)
    if np.any(e < 0) or np.any(e > e_max + 1e-12):
        raise InvalidArgument("stored energy must lie in [0, E_max]")
    return np.maximum(e_max - e, 0.0)


def awake_ratio(deficiency_j, config: ControllerConfig, kappa_j):
    """Closed-form maximizer of mu(sigma) - (kappa / lambda) * deficiency * sigma."""
    psi = config.utility_exponent
    if psi >= 1:
        raise UnsupportedConfig("awake_ratio needs utility_exponent < 1")
    price = np.asarray(kappa_j, dtype=float) * np.asarray(deficiency_j, dtype=float) \
        / config.penalty_weight_j2
    with np.errstate(divide="ignore"):
        sigma = np.where(price > 0, np.power(np.where(price > 0, price, 1.0), 1.0 / (psi - 1)), 1.0)
    sigma = np.minimum(sigma, 1.0)
    return float(sigma) if sigma.ndim == 0 else sigma


def awake_objective(sigma, deficiency_j, config: ControllerConfig, kappa_j):
    return utility(sigma, config.utility_exponent) \
        - kappa_j / config.penalty_weight_j2 * deficiency_j * np.asarray(sigma)


def uniform_beam(n_antennas: int, budget: bf.PowerBudget) -> np.ndarray:
    return np.full(n_antennas, np.sqrt(min(budget.p_ant_w, budget.p_tot_w / n_antennas)),
                   dtype=complex)


def select_weights(channel, e_vec, e_max: float, budget: bf.PowerBudget,
                   ts_candidates=None) -> np.ndarray:
    """Beam maximizing sum_k (E_max - E_k) r_k."""
    H = np.atleast_2d(np.asarray(channel, dtype=complex))
    omega = deficiency(e_vec, e_max)
    if not np.any(omega > 0):
        return uniform_beam(H.shape[1], budget)
    return bf._bs_weights(H, omega, budget, ts_candidates=ts_candidates)


def select_ts_beam(ts: bf.TsSolution, e_vec, e_max: float) -> tuple[int, np.ndarray]:
    """Time-sharing comparison mode: the single-node beam with the best
    deficiency-weighted receive power."""
    omega = deficiency(e_vec, e_max)
    i = int(np.argmax(ts.power_matrix @ omega))
    return i, ts.weights[i]


class NeutralController:
    """Per-frame decision rule; holds configuration only."""

    def __init__(self, config: ControllerConfig, params: EnergyParams, budget: bf.PowerBudget,
                 mode: str = "bs"):
        if mode not in ("bs", "ts"):
            raise InvalidArgument(f"unknown beamforming mode {mode!r}")
        self.config = config
        self.params = params
        self.budget = budget
        self.mode = mode

    def decide(self, channel, e_vec, alive=None, ts: Optional[bf.TsSolution] = None,
               kappa=None) -> ControlDecision:
        e = np.asarray(e_vec, dtype=float)
        e_max = self.params.cap.e_max_j
        omega = deficiency(e, e_max)
        if ts is None:
            ts = bf.ts_solution(channel, self.budget)
        if self.mode == "ts":
            _, w = select_ts_beam(ts, e, e_max)
        else:
            w = select_weights(channel, e, e_max, self.budget, ts_candidates=ts.weights)
        if self.config.kappa_override_j is not None:
            kappa = np.full_like(e, self.config.kappa_override_j)
        elif kappa is None:
            kappa, _ = kappa_varphi(e, self.params)
        sigma = np.maximum(awake_ratio(omega, self.config, kappa), self.config.sigma_min)
        if alive is not None:
            sigma = np.where(np.asarray(alive, dtype=bool), sigma, 0.0)
        return ControlDecision(weights=w, awake_ratios=np.atleast_1d(sigma), deficiency=omega)


# -- static reference problem --------------------------------------------------


@dataclass
class StaticOptimum:
    r_star: np.ndarray
    sigma_star: np.ndarray
    u_star: float
    kappa_bar: float
    varphi_bar: float
    n_alpha: int
    iterations: int
    gap: float  # Frank-Wolfe duality gap at exit (upper bound on suboptimality)
    candidates: np.ndarray = field(repr=False, default=None)


def worst_case_costs(params: EnergyParams, n_grid: int = 257) -> tuple[float, float]:
    """Largest kappa(E) and varphi(E) over [E_min, E_max]."""
    e = np.linspace(params.cap.e_min_j, params.cap.e_max_j, n_grid)
    kappa, varphi = kappa_varphi(e, params)
    return float(np.max(kappa)), float(np.max(varphi))


def _sigma_of_r(r, gain, kappa_bar, floor):
    return np.minimum((gain * r - floor) / kappa_bar, 1.0)


def _mixture_weights(S, tau0, value, gradient):
    """Maximize value(tau @ S) over the simplex, starting from a feasible tau0."""
    big = 1e12

    def obj(tau):
        v = value(tau @ S)
        return -v if np.isfinite(v) else big

    def jac(tau):
        return -(S @ gradient(tau @ S))

    res = minimize(obj, tau0, jac=jac, method="SLSQP", bounds=[(0.0, 1.0)] * len(tau0),
                   constraints=[{"type": "eq", "fun": lambda t: t.sum() - 1.0,
                                 "jac": lambda t: np.ones_like(t)}],
                   options={"ftol": 1e-15, "maxiter": 500})
    tau = np.clip(res.x, 0.0, None)
    tau = tau / tau.sum()
    return tau if obj(tau) <= obj(tau0) else tau0


def static_optimum(channel, params: EnergyParams, budget: bf.PowerBudget,
                   config: ControllerConfig, n_alpha: int = 2000, seed: int = 0,
                   max_iter: int = 300, tol: float = 1e-9) -> StaticOptimum:
    """Maximize sum_k mu(sigma_k) subject to energy neutrality with margin eps
    for every stored-energy level in [E_min, E_max] and r in conv(R).

    For fixed r the best sigma_k is ``min((eta T_es r_k - varphi_bar - eps) /
    kappa_bar, 1)``.  The outer problem is concave in r and is solved by
    Frank-Wolfe over the convex hull of beam-splitting and time-sharing
    receive-power vectors; each Frank-Wolfe step also queries beam splitting
    with the current gradient as weights.
    """
    H = np.atleast_2d(np.asarray(channel, dtype=complex))
    K = H.shape[0]
    psi = config.utility_exponent
    gain = params.eta * params.timing.t_es_s
    kappa_bar, varphi_bar = worst_case_costs(params)
    floor = varphi_bar + config.neutrality_margin_j

    ts = bf.ts_solution(H, budget)
    pts = [ts.power_matrix]
    if K > 1:
        alphas = bf.alpha_grid(K, n_alpha, seed)
        pts.append(np.array([bf.receive_power(H, bf._bs_weights(H, a, budget, ts_candidates=ts.weights))
                             for a in alphas]))
    P = np.vstack(pts)

    # feasibility: maximize the worst node's slack over mixtures of candidate points
    M = P.shape[0]
    c = np.zeros(M + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-gain * P.T, np.ones((K, 1))])
    b_ub = -floor * np.ones(K)
    A_eq = np.hstack([np.ones((1, M)), np.zeros((1, 1))])
    lp = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0],
                 bounds=[(0, None)] * M + [(None, None)], method="highs")
    slack = lp.x[-1]
    r = lp.x[:M] @ P
    margins = gain * r - floor
    if slack < 0 or (psi <= 0 and slack <= 0):
        node = int(np.argmin(margins))
        raise Infeasible(
            f"energy neutrality with margin {config.neutrality_margin_j:g} J is unattainable; "
            f"node {node + 1} is short by {-margins[node]:.3g} J per frame", node=node)

    def value(r):
        s = _sigma_of_r(r, gain, kappa_bar, floor)
        if np.any(s < 0) or (psi <= 0 and np.any(s <= 0)):
            return -np.inf
        return float(np.sum(utility(s, psi)))

    def gradient(r):
        s = _sigma_of_r(r, gain, kappa_bar, floor)
        active = (gain * r - floor) / kappa_bar < 1.0
        with np.errstate(divide="ignore"):
            du = np.power(np.maximum(s, 1e-300), psi - 1)
        return np.where(active, du * gain / kappa_bar, 0.0)

    # fully corrective Frank-Wolfe: add the best vertex, then re-optimize the
    # mixture weights over the active vertices
    support = np.flatnonzero(lp.x[:M] > 1e-12)
    S = P[support]
    tau = lp.x[:M][support]
    tau = tau / tau.sum()
    r = tau @ S
    gap = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        g = gradient(r)
        if not np.any(g > 0):
            gap = 0.0
            break
        fresh = bf.receive_power(H, bf._bs_weights(H, g, budget, ts_candidates=ts.weights))
        scores = P @ g
        vertex = P[int(np.argmax(scores))]
        if fresh @ g > scores.max():
            P = np.vstack([P, fresh])
            vertex = fresh
        gap = float(vertex @ g - r @ g)
        if gap <= tol * max(1.0, abs(value(r))):
            break
        S = np.vstack([S, vertex])
        tau = np.append(tau, 0.0)
        tau = _mixture_weights(S, tau, value, gradient)
        keep = tau > 1e-12
        S, tau = S[keep], tau[keep] / tau[keep].sum()
        r_new = tau @ S
        if not value(r_new) > value(r):
            break
        r = r_new

    sigma = _sigma_of_r(r, gain, kappa_bar, floor)
    return StaticOptimum(r_star=r, sigma_star=sigma, u_star=value(r), kappa_bar=kappa_bar,
                         varphi_bar=varphi_bar, n_alpha=n_alpha, iterations=it, gap=gap,
                         candidates=P)


# -- bound constants -----------------------------------------------------------


def max_receive_powers(channel, budget: bf.PowerBudget) -> np.ndarray:
    return np.diag(bf.ts_solution(channel, budget).power_matrix).copy()


def upsilon(params: EnergyParams, budget: bf.PowerBudget, channel=None, r_max=None,
            n_grid: int = 65, sigma_choices=(0, 1)) -> float:
    """Constant of the drift bound: half the largest per-frame second moment of
    the stored-energy change, summed over nodes.

    Each node's term is convex in r and linear in sigma, so its maximum sits
    at r in {0, r_max} and sigma in {0, 1}; kappa and varphi grow with E, so
    the grid over [E_min, E_max] includes both ends.
    """
    if r_max is None:
        if channel is None:
            raise InvalidArgument("upsilon needs a channel or explicit r_max")
        r_max = max_receive_powers(channel, budget)
    r_max = np.atleast_1d(np.asarray(r_max, dtype=float))
    c = params.eta * params.timing.t_es_s
    e = np.linspace(params.cap.e_min_j, params.cap.e_max_j, n_grid)
    kappa, varphi = kappa_varphi(e, params)
    total = 0.0
    for rk in r_max:
        best = 0.0
        for r in (0.0, rk):
            for s in sigma_choices:
                term = ((c * r) ** 2 - 2 * c * r * (kappa * s + varphi)
                        + (kappa**2 + 2 * kappa * varphi) * s + varphi**2)
                best = max(best, float(np.max(term)))
        total += best
    return 0.5 * total


@dataclass
class BoundReport:
    u_star: float
    upsilon_j2: float
    utility_lower_bound: float
    deficiency_upper_bound_j: float


def theorem_bounds(u_star: float, upsilon_j2: float, config: ControllerConfig) -> BoundReport:
    lam = config.penalty_weight_j2
    eps = config.neutrality_margin_j
    lb = u_star - upsilon_j2 / lam
    ub = (upsilon_j2 - lam * u_star) / eps if eps > 0 else np.inf
    return BoundReport(u_star, upsilon_j2, lb, ub)


def drift_bound_rhs(r, sigma, e_vec, params: EnergyParams, config: ControllerConfig,
                    upsilon_j2: float) -> float:
    """Right-hand side of the per-frame drift-plus-penalty inequality."""
    r = np.asarray(r, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    e = np.asarray(e_vec, dtype=float)
    omega = deficiency(e, params.cap.e_max_j)
    kappa, varphi = kappa_varphi(e, params)
    lam = config.penalty_weight_j2
    c = params.eta * params.timing.t_es_s
    mu = utility(sigma, config.utility_exponent)
    return float(-c * np.sum(omega * r)
                 - lam * np.sum(mu - kappa / lam * omega * sigma)
                 + np.sum(omega * varphi) + upsilon_j2)
