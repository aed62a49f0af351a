"""Two news sources: attention alpha on R-evidence, 1 - alpha on L-evidence.

Payoffs are symmetric (delta for the correct action, 0 otherwise).  Without
news the log-odds drift at rate -lam (2 alpha - 1); alpha = 1/2 freezes the
belief.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit
import scipy.sparse as sps
from scipy.optimize import brentq
from scipy.sparse.linalg import spsolve

from .bayesian import Case, benchmark
from .core import PayoffSpec, llr, p_lower, prob
from .equilibrium import CostRegime, EquilibriumSolution, u_roots, _integration_constant
from .errors import ConvergenceError, DomainError, Unsupported


@dataclass(frozen=True)
class TwoSourceSpec:
    delta: float
    c: float
    lam: float = 1.0

    def __post_init__(self):
        if not all(math.isfinite(x) for x in (self.delta, self.c, self.lam)):
            raise DomainError("two-source spec must be finite")
        if self.delta <= 0 or self.c <= 0 or self.lam <= 0:
            raise DomainError("delta, c and lam must be positive")

    @property
    def payoff_spec(self) -> PayoffSpec:
        return PayoffSpec(self.delta, 0.0, 0.0, self.delta, self.c, self.lam)

    @property
    def c_bar(self) -> float:
        return self.lam * self.delta / 2.0

    @property
    def c_low_star(self) -> float:
        """Cost below which splitting attention is part of the Bayesian plan."""
        return self.lam * self.delta / (1.0 + math.e ** 2)

    @property
    def u_split(self) -> float:
        """Value of splitting attention until evidence arrives."""
        return self.delta - 2.0 * self.c / self.lam

    @property
    def u_hat(self) -> float:
        return self.delta / 2.0

    @property
    def p_l_B(self) -> float:
        return self.c / (self.lam * self.delta)

    @property
    def low_cost(self) -> bool:
        return self.c < self.c_low_star


@dataclass(frozen=True)
class AttentionPolicy:
    alpha: float | None   # None when the DM stops for sure
    m: float
    nu: float
    rho: float | None
    pi: float
    region: str

    def mirrored(self) -> "AttentionPolicy":
        flip = lambda x: None if x is None else 1.0 - x
        return AttentionPolicy(flip(self.alpha), self.m, self.nu, flip(self.rho), 1.0 - self.pi, self.region)


def single_source_value_at_half(spec: TwoSourceSpec) -> float:
    """Value at belief 1/2 of seeking R-evidence only (Bayesian)."""
    b = benchmark(spec.payoff_spec)
    return float(b.Phi(0.5)) if b.experiments else spec.u_hat


# ---------------------------------------------------------------------------
# Bayesian two-source benchmark by policy iteration


@dataclass(frozen=True)
class TwoSourceBayes:
    spec: TwoSourceSpec
    z: np.ndarray
    value: np.ndarray
    alpha: np.ndarray     # nan where the DM stops
    p_l_B: float
    p_r_B: float
    p_L_B: float | None   # inner edge of the confirmatory region left of 1/2
    p_R_B: float | None
    iterations: int

    def value_at(self, p):
        return np.interp(llr(np.asarray(p, float)), self.z, self.value)


def two_source_dp(spec: TwoSourceSpec, dt: float = 5e-4, min_points: int = 4000,
                  max_iter: int = 500) -> TwoSourceBayes:
    """Discrete-time Bayesian two-source problem on a symmetric log-odds grid
    with step lam*dt, solved by Howard policy iteration."""
    return _two_source_dp(spec, dt, min_points, max_iter)


@lru_cache(maxsize=16)
def _two_source_dp(spec, dt, min_points, max_iter):
    lam, c, d = spec.lam, spec.c, spec.delta
    h = lam * dt
    z_edge = abs(llr(min(spec.p_l_B, 0.49))) + 1.0
    half_n = max(int(math.ceil(z_edge / h)), (min_points - 1) // 2 + 1)
    z = h * np.arange(-half_n, half_n + 1)
    n = len(z)
    p = prob(z)
    stop = d * np.maximum(p, 1 - p)
    alphas = np.array([1.0, 0.0, 0.5])
    shift = np.array([-1, 1, 0])
    rates = lam * (alphas[:, None] * p[None, :] + (1 - alphas[:, None]) * (1 - p[None, :]))
    jump = -np.expm1(-rates * dt)                 # P(evidence within dt)
    # payoff on evidence minus the exact expected cost c E[min(arrival, dt)]
    reward = jump * (d - c / rates)
    keep = 1.0 - jump
    idx = np.arange(n)
    nxt = np.clip(idx[None, :] + shift[:, None], 0, n - 1)
    valid = (idx[None, :] + shift[:, None] >= 0) & (idx[None, :] + shift[:, None] <= n - 1)

    V = _sweeps(stop, reward, keep)
    Q = np.where(valid, reward + keep * V[nxt], -np.inf)
    best_a = np.argmax(Q, axis=0)
    pol = np.where(Q[best_a, idx] > stop + 1e-13, best_a, -1)  # -1: stop
    for it in range(1, max_iter + 1):
        rows, cols, vals = [idx], [idx], [np.ones(n)]
        rhs = stop.copy()
        cont = pol >= 0
        a = pol[cont]
        ii = idx[cont]
        rows.append(ii)
        cols.append(nxt[a, ii])
        vals.append(-keep[a, ii])
        rhs[cont] = reward[a, ii]
        A = sps.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
        V = spsolve(A.tocsc(), rhs)
        Q = np.where(valid, reward + keep * V[nxt], -np.inf)
        best_a = np.argmax(Q, axis=0)
        best_q = Q[best_a, idx]
        cur = np.where(pol >= 0, Q[np.maximum(pol, 0), idx], stop)
        new = np.where(best_q > stop + 1e-13, best_a, -1)
        # keep the current choice unless strictly improved
        improve = np.maximum(best_q, stop) > cur + 1e-13
        new = np.where(improve, new, pol)
        if np.array_equal(new, pol):
            break
        pol = new
    else:
        raise ConvergenceError("policy iteration did not settle")
    alpha = np.where(pol >= 0, alphas[np.maximum(pol, 0)], np.nan)
    cont = np.flatnonzero(pol >= 0)
    p_l_B = float(p[cont[0]]) if cont.size else 0.5
    p_r_B = float(p[cont[-1]]) if cont.size else 0.5
    left = (z < 0) & (pol == 1)  # confirmatory L-seeking left of 1/2
    p_L_B = float(p[np.flatnonzero(left)[0]]) if left.any() else None
    right = (z > 0) & (pol == 0)
    p_R_B = float(p[np.flatnonzero(right)[-1]]) if right.any() else None
    return TwoSourceBayes(spec, z, V, alpha, p_l_B, p_r_B, p_L_B, p_R_B, it)


@njit(cache=True)
def _sweep_kernel(floor, r1, k1, r0, k0, v, tol, max_sweeps):
    n = v.shape[0]
    for _ in range(max_sweeps):
        change = 0.0
        for i in range(1, n):
            w = max(floor[i], r1[i] + k1[i] * v[i - 1], v[i])
            change = max(change, w - v[i])
            v[i] = w
        for i in range(n - 2, -1, -1):
            w = max(v[i], r0[i] + k0[i] * v[i + 1])
            change = max(change, w - v[i])
            v[i] = w
        if change < tol:
            return True
    return False


def _sweeps(stop, reward, keep, tol=1e-13, max_sweeps=200_000):
    """Alternating Gauss-Seidel sweeps: upward sweeps carry moves down one
    cell (R-seeking), downward sweeps carry moves up (L-seeking)."""
    split = reward[2] / (1.0 - keep[2])
    v = np.array(stop, dtype=float)
    ok = _sweep_kernel(np.maximum(stop, split), np.ascontiguousarray(reward[0]), np.ascontiguousarray(keep[0]),
                       np.ascontiguousarray(reward[1]), np.ascontiguousarray(keep[1]), v, tol, max_sweeps)
    if not ok:
        raise ConvergenceError("value sweeps did not settle")
    return v


def bayes_two_source(p: float, spec: TwoSourceSpec, dp: TwoSourceBayes | None = None) -> AttentionPolicy:
    """Bayesian attention and stopping at belief p."""
    if not 0.0 <= p <= 1.0:
        raise DomainError("belief outside [0,1]")
    if spec.c >= spec.c_bar:
        rho = 1.0 if p > 0.5 else (0.0 if p < 0.5 else 0.5)
        return AttentionPolicy(None, 1.0, 0.0, rho, p, "stop")
    pl = spec.p_l_B
    if p <= pl:
        return AttentionPolicy(None, 1.0, 0.0, 0.0, p, "stop")
    if p >= 1 - pl:
        return AttentionPolicy(None, 1.0, 0.0, 1.0, p, "stop")
    if not spec.low_cost:
        if p <= 0.5:
            return AttentionPolicy(1.0, 0.0, 0.0, None, p, "contradictory")
        return AttentionPolicy(0.0, 0.0, 0.0, None, p, "contradictory")
    if dp is None:
        dp = two_source_dp(spec)
    if p == 0.5:
        return AttentionPolicy(0.5, 0.0, 0.0, None, p, "split")
    q = min(p, 1 - p)
    inner = dp.p_L_B if dp.p_L_B is not None else 0.5
    confirm = q > inner
    alpha = (0.0 if confirm else 1.0) if p < 0.5 else (1.0 if confirm else 0.0)
    return AttentionPolicy(alpha, 0.0, 0.0, None, p, "confirmatory" if confirm else "contradictory")


# ---------------------------------------------------------------------------
# ambiguity


def _band_solution(spec: TwoSourceSpec) -> EquilibriumSolution:
    """Flat-value curve anchored at (1/2, Phi*(1/2)) for the R-seeking band."""
    ps = spec.payoff_spec
    u1, u2 = u_roots(ps)
    v_half = single_source_value_at_half(spec)
    C = _integration_constant(u1, u2, 0.5, v_half, ps.d_l)
    return EquilibriumSolution(ps, math.inf, Case.CASE1, CostRegime.INTERMEDIATE, p2=0.5,
                               u1=u1, u2=u2, C_coef=C, region3_exists=True)


def large_ambiguity(spec: TwoSourceSpec, delta: float) -> bool:
    v_half = single_source_value_at_half(spec)
    return spec.delta * (1 - p_lower(0.5, delta)) > v_half


def p_plus_minus(spec: TwoSourceSpec):
    """(p_minus, p_plus): where the band's flat value falls to the hedge value."""
    if spec.low_cost or spec.c >= spec.c_bar:
        raise Unsupported("randomized bands need intermediate cost")
    band = _band_solution(spec)
    level = max(spec.u_split, spec.u_hat)
    if band.vhat(0.5) <= level:
        raise Unsupported("hedge value not below the band's value at 1/2")
    z = brentq(lambda zz: band.vhat_z(zz) - level, 0.0, 60.0, xtol=1e-13, rtol=4 * np.finfo(float).eps)
    pp = prob(z)
    return 1.0 - pp, pp


def _hedge(spec: TwoSourceSpec) -> AttentionPolicy:
    if spec.u_split > spec.u_hat:
        return AttentionPolicy(0.5, 0.0, 0.0, None, 0.5, "split")
    return AttentionPolicy(None, 1.0, 0.0, 0.5, 0.5, "hedge")


def hedge_value(spec: TwoSourceSpec) -> float:
    return max(spec.u_split, spec.u_hat)


def two_source_equilibrium(p_bar: float, delta: float, spec: TwoSourceSpec) -> AttentionPolicy:
    if spec.c >= spec.c_bar:
        raise Unsupported("no experimentation at this cost")
    lo = p_lower(p_bar, delta)
    # an endpoint within round-off of 1/2 is 1/2, so mirrored sets classify alike
    p_bar = 0.5 if abs(llr(p_bar)) < 1e-12 else p_bar
    lo = 0.5 if abs(llr(lo)) < 1e-12 else lo
    if p_bar <= 0.5:
        pol = bayes_two_source(p_bar, spec)
        return AttentionPolicy(pol.alpha, pol.m, pol.nu, pol.rho, p_bar, pol.region)
    if lo >= 0.5:
        pol = bayes_two_source(lo, spec)
        if lo == 0.5:
            # break the tie at 1/2 toward the side the set lies on
            pol = pol.mirrored()
        return AttentionPolicy(pol.alpha, pol.m, pol.nu, pol.rho, lo, pol.region)
    if spec.low_cost or not large_ambiguity(spec, delta):
        return _hedge(spec)
    p_minus, p_plus = p_plus_minus(spec)
    band = _band_solution(spec)
    ps = spec.payoff_spec
    in_upper, in_lower = p_bar <= p_plus, lo >= p_minus
    if in_upper and in_lower:
        # both bands apply: take the higher flat value, i.e. the end nearer 1/2
        in_lower = band.vhat(1.0 - lo) > band.vhat(p_bar)
        in_upper = not in_lower
    if in_upper:
        v = band.vhat(p_bar)
        return AttentionPolicy(1.0, 0.0, ps.lam * (ps.u_r_R - v) / ps.d_l, 0.0,
                               (ps.u_l_L - v) / ps.d_l, "randomized")
    if in_lower:
        v = band.vhat(1.0 - lo)
        return AttentionPolicy(0.0, 0.0, ps.lam * (ps.u_r_R - v) / ps.d_l, 1.0,
                               1.0 - (ps.u_l_L - v) / ps.d_l, "randomized")
    return _hedge(spec)


def attention_derivative(p_bar: float, spec: TwoSourceSpec) -> float:
    """dG/d alpha at alpha = 1 on the R-seeking randomized band."""
    band = _band_solution(spec)
    ps = spec.payoff_spec
    v = band.vhat(p_bar)
    pi = (ps.u_l_L - v) / ps.d_l
    return (pi * (ps.u_r_R - v) - (1 - pi) * (ps.u_l_L - v)
            - 2 * float(band.dvhat(p_bar)) * p_bar * (1 - p_bar))


def band_value(p_bar: float, spec: TwoSourceSpec) -> float:
    return _band_solution(spec).vhat(p_bar)


# ---------------------------------------------------------------------------
# simulation of the prior set


@dataclass
class TwoSourcePaths:
    times: np.ndarray      # common time grid
    p_bar: np.ndarray      # no-news state path on the grid
    stop_time: np.ndarray
    action: np.ndarray     # 0 = l, 1 = r
    state_R: np.ndarray


def simulate_two_source(p_bar0: float, delta: float, spec: TwoSourceSpec, n_paths: int,
                        seed: int, t_max: float = 10.0, dt: float = 1e-3) -> TwoSourcePaths:
    """Follow the equilibrium from p_bar0.  The no-news state is advanced on a
    time grid using the attention in force; evidence arrives per path."""
    lam = spec.lam
    n_steps = int(round(t_max / dt))
    times = dt * np.arange(n_steps + 1)
    path = np.empty(n_steps + 1)
    alpha = np.empty(n_steps + 1)
    stop_now = np.zeros(n_steps + 1, dtype=bool)
    rho = np.full(n_steps + 1, np.nan)
    z = llr(p_bar0)
    for k in range(n_steps + 1):
        pb = prob(z)
        path[k] = pb
        pol = two_source_equilibrium(pb, delta, spec)
        if pol.m >= 1 or pol.nu > 0:
            stop_now[k] = pol.m >= 1
            if pol.nu > 0:
                raise Unsupported("randomized bands are not simulated here")
            rho[k] = pol.rho
        alpha[k] = np.nan if pol.alpha is None else pol.alpha
        if stop_now[k]:
            path[k + 1:] = pb
            alpha[k + 1:] = np.nan
            break
        z -= lam * (2 * pol.alpha - 1) * dt
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    is_R = rng.random(n_paths) < 0.5
    first_stop = np.flatnonzero(stop_now)
    t_stop_det = times[first_stop[0]] if first_stop.size else np.inf
    # evidence: in state R rate lam*alpha, in state L rate lam*(1-alpha)
    a = np.nan_to_num(alpha, nan=0.0)
    haz_R = np.concatenate([[0.0], np.cumsum(lam * a[:-1] * dt)])
    haz_L = np.concatenate([[0.0], np.cumsum(lam * (1 - a[:-1]) * dt)])
    e = rng.exponential(size=n_paths)
    # cumulative hazards are nondecreasing, so the first crossing is a binary search
    k_hit = np.where(is_R, np.searchsorted(haz_R, e), np.searchsorted(haz_L, e))
    any_hit = k_hit <= n_steps
    t_ev = np.where(any_hit, times[np.minimum(k_hit, n_steps)], np.inf)
    ev = t_ev < t_stop_det
    stop_time = np.where(ev, t_ev, t_stop_det)
    action = np.where(ev, is_R.astype(int), -1)
    if first_stop.size:
        r = rho[first_stop[0]]
        draw = rng.random(n_paths) < r
        action = np.where(ev, action, draw.astype(int))
    return TwoSourcePaths(times, path, stop_time, action, is_R)
