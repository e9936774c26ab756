"""Energy beamforming under per-antenna and total transmit power caps.

Two techniques are provided.  Time sharing focuses one beam on one node at a
time; its weights come from a water-filling solution over the antenna gain
magnitudes.  Beam splitting serves several nodes with one weight vector built
from the principal eigenvector of the weighted channel covariance
``V(alpha) = sum_k alpha_k conj(h_k) h_k^T``.

``sdr_oracle`` is a slow reference solver (projected gradient ascent with
random restarts) used to check both.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateChannel, DegenerateGeometry, InvalidArgument, NumericError

FEAS_TOL = 1e-9
CONDITION_CAP = 1e8


@dataclass(frozen=True)
class PowerBudget:
    p_ant_w: float
    p_tot_w: float

    def __post_init__(self):
        if not (self.p_ant_w > 0 and self.p_tot_w > 0):
            raise InvalidArgument(
                f"power caps must be positive (p_ant_w={self.p_ant_w}, p_tot_w={self.p_tot_w})")

    def is_feasible(self, w, tol: float = FEAS_TOL) -> bool:
        p = np.abs(np.asarray(w)) ** 2
        return bool(np.all(p <= self.p_ant_w + tol) and p.sum() <= self.p_tot_w + tol)


def normalize_phase(w: np.ndarray) -> np.ndarray:
    """Rotate ``w`` so its first nonzero entry is real and nonnegative."""
    w = np.asarray(w, dtype=complex)
    nz = np.flatnonzero(np.abs(w) > 0)
    if nz.size == 0:
        return w.copy()
    return w * np.exp(-1j * np.angle(w[nz[0]]))


def receive_power(channel, weights) -> np.ndarray:
    """``r_k = |h_k^T w|^2`` for every row of ``channel``."""
    H = np.atleast_2d(np.asarray(channel, dtype=complex))
    w = np.asarray(weights, dtype=complex)
    if w.ndim != 1 or H.shape[1] != w.shape[0]:
        raise InvalidArgument(f"channel {H.shape} and weights {w.shape} do not match")
    return np.abs(H @ w) ** 2


def channel_covariances(channel) -> np.ndarray:
    """Stack of ``G_k = conj(h_k) h_k^T``, shape K x N x N."""
    H = np.atleast_2d(np.asarray(channel, dtype=complex))
    return np.conj(H)[:, :, None] * H[:, None, :]


# -- time sharing --------------------------------------------------------------


def water_fill(magnitudes, budget: PowerBudget) -> tuple[np.ndarray, float]:
    """Maximize ``sum(a_n x_n)`` s.t. ``x_n**2 <= P_ant`` and ``sum(x**2) <= P_tot``.

    Returns ``(x, dual_price)``.  Antennas with zero gain receive no power.
    """
    a = np.asarray(magnitudes, dtype=float)
    N = a.size
    p_ant, p_tot = budget.p_ant_w, budget.p_tot_w
    cap = np.sqrt(p_ant)
    x = np.zeros(N)
    active = a > 0
    if not active.any():
        raise DegenerateChannel("channel row is all zero")
    if p_tot >= N * p_ant:
        x[active] = cap
        return x, 0.0

    # dual-price breakpoints lambda_i = a_(i) / (2 sqrt(P_ant)), ascending
    order = np.argsort(a, kind="stable")
    a_sorted = a[order]
    lam = a_sorted / (2 * cap)
    head = np.concatenate([[0.0], np.cumsum(a_sorted**2)[:-1]])  # sum over l < i
    with np.errstate(divide="ignore", invalid="ignore"):
        P = np.where(lam > 0, head / (2 * lam) ** 2, np.inf) + (N - np.arange(N)) * p_ant
    ok = np.flatnonzero(P <= p_tot)
    i_star = ok[0] + 1 if ok.size else N + 1  # 1-based as in the derivation
    sum_sq = head[i_star - 1] if i_star <= N else float(np.sum(a_sorted**2))
    price = 0.5 * np.sqrt(sum_sq / (p_tot - (N - i_star + 1) * p_ant))
    x[active] = np.minimum(a[active] / (2 * price), cap)
    return x, float(price)


def ts_weights(channel_row, budget: PowerBudget, return_price: bool = False):
    """Weights maximizing the power received by a single node."""
    h = np.asarray(channel_row, dtype=complex)
    x, price = water_fill(np.abs(h), budget)
    w = normalize_phase(x * np.exp(-1j * np.angle(h)))
    return (w, price) if return_price else w


@dataclass
class TsSolution:
    weights: np.ndarray  # K x N, row i is w^{TS,i}
    power_matrix: np.ndarray  # K x K, entry (i, k) is r_k under w^{TS,i}
    dual_price: np.ndarray

    def average_power(self, tau) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        if tau.shape != (self.power_matrix.shape[0],) or np.any(tau < 0) or not np.isclose(tau.sum(), 1.0):
            raise InvalidArgument("time-sharing proportions must lie on the simplex")
        return tau @ self.power_matrix


def ts_solution(channel, budget: PowerBudget) -> TsSolution:
    H = np.atleast_2d(np.asarray(channel, dtype=complex))
    K = H.shape[0]
    if K < 1:
        raise InvalidArgument("channel has no rows")
    W = np.empty_like(H)
    prices = np.empty(K)
    for i in range(K):
        W[i], prices[i] = ts_weights(H[i], budget, return_price=True)
    R = np.abs(W @ H.T) ** 2
    return TsSolution(weights=W, power_matrix=R, dual_price=prices)


# -- beam splitting ------------------------------------------------------------


def weighted_covariance(channel, alpha) -> np.ndarray:
    H = np.atleast_2d(np.asarray(channel, dtype=complex))
    alpha = np.asarray(alpha, dtype=float)
    return (H.conj().T * alpha) @ H


def principal_eigvec(V: np.ndarray) -> tuple[float, np.ndarray]:
    try:
        z, U = np.linalg.eigh(V)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigendecomposition of {V.shape} covariance failed: {exc}") from exc
    return float(z[-1]), U[:, -1]


def _bs_from_covariance(V: np.ndarray, budget: PowerBudget) -> np.ndarray:
    _, v1 = principal_eigvec(V)
    # with V = sum z_n conj(u_n) u_n^T, the eigenvector returned by eigh is conj(u_1)
    u1 = np.conj(v1)
    if budget.p_tot_w <= budget.p_ant_w:
        return normalize_phase(np.sqrt(budget.p_tot_w) * np.conj(u1))
    return ts_weights(u1, budget)


def _bs_weights(H: np.ndarray, alpha: np.ndarray, budget: PowerBudget,
                fallback: bool = True, ts_candidates: Optional[np.ndarray] = None) -> np.ndarray:
    V = weighted_covariance(H, alpha)
    w = _bs_from_covariance(V, budget)
    if not fallback or budget.p_tot_w <= budget.p_ant_w:
        return w
    # Under active per-antenna caps the eigen-direction beam is approximate and
    # can lose to a single-node beam; keep whichever scores higher.
    best = float(np.real(w.conj() @ V @ w))
    for k in np.flatnonzero(alpha > 0):
        cand = ts_weights(H[k], budget) if ts_candidates is None else ts_candidates[k]
        val = float(np.real(cand.conj() @ V @ cand))
        if val > best * (1 + 1e-12):
            w, best = cand, val
    return w


def bs_weights(channel, alpha, budget: PowerBudget, fallback: bool = True) -> np.ndarray:
    """Beam-splitting weights for receive-power weights ``alpha``.

    Exact when only the total power cap binds.  Otherwise the per-antenna
    problem is approximated by keeping the principal eigen-direction only
    and water-filling over it; with ``fallback`` the single-node beams are
    also scored and the best candidate is returned.
    """
    H = np.atleast_2d(np.asarray(channel, dtype=complex))
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (H.shape[0],):
        raise InvalidArgument(f"alpha has shape {alpha.shape}, expected ({H.shape[0]},)")
    if np.any(alpha < 0) or not np.any(alpha > 0):
        raise InvalidArgument("alpha must be nonnegative and not all zero")
    return _bs_weights(H, alpha, budget, fallback)


# -- reference solver ----------------------------------------------------------


@dataclass(frozen=True)
class OracleConfig:
    restarts: int = 16
    max_iter: int = 4000
    tol: float = 1e-15
    step_scale: float = 1e3
    seed: int = 12345


def project_feasible(W: np.ndarray, budget: PowerBudget) -> np.ndarray:
    """Euclidean projection of each row of ``W`` onto the power-feasible set.

    The set is the intersection of per-entry discs of radius sqrt(P_ant) with
    the ball of radius sqrt(P_tot).  Phases are preserved and magnitudes
    become ``min(s * |y_n|, sqrt(P_ant))`` with ``s`` in (0, 1] solved
    exactly per row.
    """
    W = np.atleast_2d(W)
    m = np.abs(W)
    a2, b2 = budget.p_ant_w, budget.p_tot_w
    a = np.sqrt(a2)
    clipped = np.minimum(m, a)
    need = np.sum(clipped**2, axis=1) > b2
    out = np.where(m > 0, W / np.where(m > 0, m, 1.0), 0) * clipped
    if not need.any():
        return out
    M = -np.sort(-m[need], axis=1)  # descending
    n = M.shape[1]
    tail = np.cumsum((M**2)[:, ::-1], axis=1)[:, ::-1]  # tail[c] = sum_{j >= c} M_j^2
    c = np.arange(n)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.sqrt(np.maximum(b2 - c * a2, 0.0) / tail)
    upper_ok = s * M <= a * (1 + 1e-12)
    prev = np.concatenate([np.full((M.shape[0], 1), np.inf), M[:, :-1]], axis=1)
    lower_ok = s * prev >= a * (1 - 1e-12)
    valid = upper_ok & lower_ok & np.isfinite(s) & (b2 - c * a2 > 0)
    pick = np.argmax(valid, axis=1)
    s_row = s[np.arange(M.shape[0]), pick]
    s_row = np.minimum(s_row, 1.0)
    mags = np.minimum(m[need] * s_row[:, None], a)
    phase = np.where(m[need] > 0, W[need] / np.where(m[need] > 0, m[need], 1.0), 0)
    out[need] = phase * mags
    return out


def sdr_oracle(channel, alpha, budget: PowerBudget, config: Optional[OracleConfig] = None):
    """Reference maximizer of ``sum_k alpha_k |h_k^T w|^2`` over feasible ``w``.

    The objective is convex, so every projected-gradient step is an ascent
    step regardless of step length.  Restarts are random and batched.
    Returns ``(w, objective)``.
    """
    config = config or OracleConfig()
    H = np.atleast_2d(np.asarray(channel, dtype=complex))
    alpha = np.asarray(alpha, dtype=float)
    V = weighted_covariance(H, alpha)
    N = H.shape[1]
    rng = np.random.default_rng(config.seed)
    W = rng.standard_normal((config.restarts, N)) + 1j * rng.standard_normal((config.restarts, N))
    W = project_feasible(W * np.sqrt(budget.p_tot_w), budget)
    scale = np.linalg.norm(V, 2)
    if scale == 0:
        return normalize_phase(W[0]), 0.0
    step = config.step_scale / scale

    def objective(X):
        return np.real(np.einsum("rn,nm,rm->r", X.conj(), V, X))

    f = objective(W)
    for it in range(config.max_iter):
        G = W @ V.T  # gradient direction V w for each row
        W_new = project_feasible(W + step * G, budget)
        f_new = objective(W_new)
        W = W_new
        done = np.all(f_new - f <= config.tol * np.maximum(np.abs(f_new), 1e-300))
        f = f_new
        if done and it > 10:
            break
    best = int(np.argmax(f))
    return normalize_phase(W[best]), float(f[best])


# -- region, Pareto and gain ---------------------------------------------------


def sample_weights(n_antennas: int, budget: PowerBudget, seed: int, index: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))
    phase = rng.uniform(0, 2 * np.pi, n_antennas)
    mag = np.sqrt(rng.uniform(0, 1, n_antennas))
    w = mag * np.exp(1j * phase)
    peak = np.max(np.abs(w))
    if peak == 0:
        return np.zeros(n_antennas, dtype=complex)
    # scale onto the boundary of the feasible set, then shrink radially
    to_boundary = min(np.sqrt(budget.p_ant_w) / peak, np.sqrt(budget.p_tot_w) / np.linalg.norm(w))
    w = w * to_boundary * np.sqrt(rng.uniform(0, 1))
    return w


def sample_region(channel, budget: PowerBudget, n_samples: int, seed: int) -> np.ndarray:
    """``n_samples`` x K receive-power vectors from random feasible weights.

    Sample i depends only on ``(seed, i)``.
    """
    if n_samples < 1:
        raise InvalidArgument("n_samples must be >= 1")
    H = np.atleast_2d(np.asarray(channel, dtype=complex))
    W = np.array([sample_weights(H.shape[1], budget, seed, i) for i in range(n_samples)])
    return np.abs(W @ H.T) ** 2


def alpha_grid(K: int, n_points: int, seed: int = 0) -> np.ndarray:
    """Receive-power weights on the simplex: an even grid for K=2, Dirichlet draws
    (vertices first) otherwise."""
    if K == 1:
        return np.ones((1, 1))
    if K == 2:
        t = np.linspace(0, 1, n_points)
        return np.column_stack([t, 1 - t])
    rng = np.random.default_rng(seed)
    pts = [np.eye(K)[i] for i in range(min(K, n_points))]
    extra = max(n_points - len(pts), 0)
    if extra:
        pts.extend(rng.dirichlet(np.ones(K), size=extra))
    return np.array(pts)


def pareto_frontier(channel, budget: PowerBudget, alphas, method: str = "oracle",
                    oracle: Optional[OracleConfig] = None) -> np.ndarray:
    H = np.atleast_2d(np.asarray(channel, dtype=complex))
    rows = []
    for alpha in np.atleast_2d(alphas):
        if method == "oracle":
            w, _ = sdr_oracle(H, alpha, budget, oracle)
        elif method == "bs":
            w = bs_weights(H, alpha, budget)
        else:
            raise InvalidArgument(f"unknown frontier method {method!r}")
        rows.append(receive_power(H, w))
    return np.array(rows)


def dominated(points, frontier, slack: float = FEAS_TOL) -> np.ndarray:
    """Boolean mask over ``frontier``: True where some point strictly exceeds it
    in every coordinate by more than ``slack``."""
    P = np.atleast_2d(points)
    F = np.atleast_2d(frontier)
    return np.array([np.any(np.all(P > f + slack, axis=1)) for f in F])


def beta_vector(ts: TsSolution, condition_cap: float = CONDITION_CAP) -> np.ndarray:
    """Normal vector of the hyperplane through all time-sharing power vectors."""
    R = ts.power_matrix
    cond = np.linalg.cond(R)
    if not np.isfinite(cond) or cond > condition_cap:
        raise DegenerateGeometry(
            f"time-sharing power matrix is singular (condition {cond:.3g}); nodes co-located?")
    return np.linalg.solve(R, np.ones(R.shape[0]))


@dataclass
class GainReport:
    gamma: float
    gamma_oracle: Optional[float]
    beta: np.ndarray = field(repr=False)


def gain_report(channel, budget: PowerBudget, with_oracle: bool = True,
                oracle: Optional[OracleConfig] = None) -> GainReport:
    H = np.atleast_2d(np.asarray(channel, dtype=complex))
    ts = ts_solution(H, budget)
    beta = beta_vector(ts)
    # beta can carry negative entries for K >= 3; the eigen-direction is still defined
    w = _bs_weights(H, beta, budget)
    gamma = float(beta @ receive_power(H, w))
    gamma_oracle = None
    if with_oracle:
        _, gamma_oracle = sdr_oracle(H, beta, budget, oracle)
    return GainReport(gamma=gamma, gamma_oracle=gamma_oracle, beta=beta)


def beam_splitting_gain(channel, budget: PowerBudget) -> float:
    return gain_report(channel, budget, with_oracle=False).gamma
