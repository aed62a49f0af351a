"""Stopping-time distributions, learning times and Monte Carlo paths.

Absent news the state drifts down deterministically (log-odds fall at rate
lam), so the equilibrium stopping time is described by a hazard along that
path plus atoms at boundary crossings.  Breakthroughs arrive at rate lam in
state R and end the problem with action r.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.integrate import solve_ivp

from .bayesian import Case, benchmark
from .core import AmbiguityInterval, PayoffSpec, llr, p_lower, prob, stopping_payoffs
from .equilibrium import CostRegime, EquilibriumSolution, knightian, solve
from .errors import DomainError, Unsupported

ACTION_L, ACTION_R = 0, 1


def _ln1p_exp(x):
    return np.logaddexp(0.0, x)


@dataclass(frozen=True)
class Atom:
    t: float
    mass: float     # conditional probability of stopping at t given survival
    rho: float      # probability of action r given a stop here


@dataclass(frozen=True)
class StoppingDistribution:
    """Law of the stopping time given survival weights for the two states.

    `p_R` is the probability of state R (1 for conditioning on R, 0 for L,
    theta for a prior).  Without news the stopping hazard is `nu` on
    [t_a, t_b] (closed-form cumulative hazard) or the constant `nu_const`
    forever; atoms are applied in time order."""
    sol: EquilibriumSolution
    p_bar0: float
    p_R: float
    atoms: tuple = ()
    t_a: float = math.inf
    t_b: float = math.inf
    nu_const: float = 0.0

    @property
    def lam(self) -> float:
        return self.sol.spec.lam

    def cum_hazard(self, t):
        """Integrated no-news stopping hazard from 0 to t."""
        t = np.asarray(t, dtype=float)
        if self.nu_const > 0:
            return self.nu_const * t
        if not math.isfinite(self.t_a):
            return np.zeros_like(t)
        sol, s = self.sol, self.sol.spec
        z0 = llr(self.p_bar0)
        a = sol._exponent()
        alpha, beta = s.u_r_R - sol.u1, s.u_r_R - sol.u2
        lnC = math.log(sol.C_coef)

        def F(z):
            return beta * z + (alpha - beta) / a * _ln1p_exp(lnC + a * z)

        tc = np.clip(t, self.t_a, self.t_b)
        return (F(z0 - s.lam * self.t_a) - F(z0 - s.lam * tc)) / s.d_l

    def survival_L(self, t):
        """Survival without news and without breakthroughs."""
        t = np.asarray(t, dtype=float)
        out = np.exp(-self.cum_hazard(t))
        for a in self.atoms:
            out = np.where(t >= a.t, out * (1 - a.mass), out)
        return out

    def survival(self, t):
        t = np.asarray(t, dtype=float)
        w = self.p_R * np.exp(-self.lam * t) + (1 - self.p_R)
        return w * self.survival_L(t)

    def cdf(self, t):
        out = 1.0 - self.survival(t)
        return float(out) if np.ndim(t) == 0 else out

    def cdf_left(self, t):
        """F(t-), the CDF just before t."""
        t = np.asarray(t, dtype=float)
        out = np.exp(-self.cum_hazard(t))
        for a in self.atoms:
            out = np.where(t > a.t, out * (1 - a.mass), out)
        w = self.p_R * np.exp(-self.lam * t) + (1 - self.p_R)
        res = 1.0 - w * out
        return float(res) if np.ndim(t) == 0 else res

    @property
    def horizon(self) -> float:
        """Time at which the remaining mass is exhausted (inf if never)."""
        full = [a.t for a in self.atoms if a.mass >= 1.0]
        return min(full) if full else math.inf

    def mean(self) -> float:
        from scipy.integrate import quad
        h = self.horizon
        if not math.isfinite(h):
            if self.nu_const > 0 and not self.atoms:
                return self.p_R / (self.lam + self.nu_const) + (1 - self.p_R) / self.nu_const
            raise DomainError("distribution has no finite horizon")
        cuts = sorted({0.0, h, *[a.t for a in self.atoms if a.t < h],
                       *[x for x in (self.t_a, self.t_b) if math.isfinite(x) and x < h]})
        return float(sum(quad(lambda t: float(self.survival(t)), lo, hi, epsabs=1e-13, epsrel=1e-12)[0]
                         for lo, hi in zip(cuts[:-1], cuts[1:]) if hi > lo))


def _time_to(z0: float, p: float, lam: float) -> float:
    return (z0 - llr(p)) / lam


def _build(sol: EquilibriumSolution, p_bar0: float, p_R: float) -> StoppingDistribution:
    if not 0.0 < p_bar0 < 1.0:
        raise DomainError("initial state must lie in (0,1)")
    lam = sol.spec.lam
    pt = sol.policy(p_bar0)
    if sol.knightian:
        if pt.m >= 1:
            return StoppingDistribution(sol, p_bar0, p_R, (Atom(0.0, 1.0, pt.rho),))
        return StoppingDistribution(sol, p_bar0, p_R, nu_const=pt.nu)
    if pt.m >= 1.0:
        return StoppingDistribution(sol, p_bar0, p_R, (Atom(0.0, 1.0, pt.rho),))
    z0 = llr(p_bar0)
    atoms = []
    if pt.m > 0:  # starting exactly on the Case-2 atom
        atoms.append(Atom(0.0, pt.m, 1.0))
    t_a = t_b = math.inf
    if sol.region3_exists and p_bar0 > sol.p2:
        t_a = max(0.0, _time_to(z0, sol.p3, lam))
        t_b = _time_to(z0, sol.p2, lam)
    if sol.case is Case.CASE2 and p_bar0 > sol.p2 and sol.region(sol.p2) == 0:
        atoms.append(Atom(_time_to(z0, sol.p2, lam), sol.m_atom_p2, 1.0))
    atoms.append(Atom(_time_to(z0, sol.p1, lam), 1.0, 0.0))
    return StoppingDistribution(sol, p_bar0, p_R, tuple(atoms), t_a, t_b)


def _weight(conditioning) -> float:
    if conditioning in ("L", "l"):
        return 0.0
    if conditioning in ("R", "r"):
        return 1.0
    theta = float(conditioning)
    if not 0.0 <= theta <= 1.0:
        raise DomainError("prior weight outside [0,1]")
    return theta


def stopping_cdf(sol: EquilibriumSolution, p_bar0: float, conditioning="L") -> StoppingDistribution:
    """Stopping-time law under state L, state R, or a prior weight theta on R."""
    return _build(sol, p_bar0, _weight(conditioning))


def naive_cdf(sol: EquilibriumSolution, p_bar0: float, conditioning="L") -> StoppingDistribution:
    """A DM who re-optimises a committed plan at every instant: she keeps
    experimenting until the state reaches p1 (or stops at once if her current
    plan says so)."""
    s = sol.spec
    b = benchmark(s)
    p_R = _weight(conditioning)
    lo = p_lower(p_bar0, sol.delta)
    if not b.experiments:
        return _build(solve(s, 0.0), p_bar0, p_R) if sol.delta == 0 else \
            StoppingDistribution(sol, p_bar0, p_R, (Atom(0.0, 1.0, _high_cost_rho(s, lo, p_bar0)),))
    if p_bar0 <= b.p_l_B:
        return StoppingDistribution(sol, p_bar0, p_R, (Atom(0.0, 1.0, 0.0),))
    if lo >= b.p_r_B:
        return StoppingDistribution(sol, p_bar0, p_R, (Atom(0.0, 1.0, 1.0),))
    if b.case is Case.CASE2 and lo < b.p_r_B < p_bar0:
        raise Unsupported("the naive plan mixes action r with experimentation here")
    t1 = _time_to(llr(p_bar0), b.p_l_B, s.lam)
    return StoppingDistribution(sol, p_bar0, p_R, (Atom(t1, 1.0, 0.0),))


def _high_cost_rho(s, lo, hi):
    sp = stopping_payoffs(s)
    if hi <= sp.p_hat:
        return 0.0
    if lo >= sp.p_hat:
        return 1.0
    return sp.rho_hat


# ---------------------------------------------------------------------------
# expected learning time


def knightian_learning_time(spec: PayoffSpec, theta):
    """Expected stopping time under stationary randomized stopping."""
    pt = knightian(spec)
    if pt.nu <= 0:
        raise Unsupported("the hedged action ends the problem at once")
    th = np.asarray(theta, dtype=float)
    out = th / (spec.lam + pt.nu) + (1 - th) / pt.nu
    return float(out) if np.ndim(theta) == 0 else out


def learning_time_residual(spec: PayoffSpec, theta, T, dT, nu) -> float:
    """lam th (1-th) T' - 1 + T (th lam + nu)."""
    th = np.asarray(theta)
    return spec.lam * th * (1 - th) * dT - 1 + T * (th * spec.lam + nu)


def _in_scope(spec: PayoffSpec):
    b = benchmark(spec)
    if b.case is not Case.CASE1 or spec.c > spec.c_low:
        raise Unsupported("learning-time results cover Case 1 with c <= c_low only")
    return b


def expected_learning_time(spec: PayoffSpec, delta: float, theta, rtol: float = 1e-10):
    """Expected stopping time for the prior set centred (in log-odds) at theta."""
    _in_scope(spec)
    if math.isinf(delta):
        return knightian_learning_time(spec, theta)
    sol = solve(spec, delta)
    if sol.knightian:
        return knightian_learning_time(spec, theta)
    lam = spec.lam
    half = delta / 2.0
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    z = llr(th)
    z_state = z + half
    z1, z4 = llr(sol.p1), llr(sol.p4)
    out = np.zeros_like(th)
    inside = (z_state > z1) & (z_state < z4)
    if inside.any():
        cuts = [z1 - half]
        if sol.region3_exists:
            cuts += [llr(sol.p2) - half, llr(sol.p3) - half]
        cuts.append(z4 - half)
        cuts = sorted(set(cuts))

        def rhs(zz, T):
            thz = prob(zz)
            nu = sol.policy(prob(zz + half)).nu if sol.region3_exists else 0.0
            return [(1.0 - T[0] * (thz * lam + nu)) / lam]

        T0 = 0.0
        zi = z[inside]
        res = np.empty_like(zi)
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            sel = (zi >= lo) & (zi <= hi)
            r = solve_ivp(rhs, (lo, hi), [T0], method="RK45", rtol=rtol, atol=1e-12,
                          dense_output=True)
            if sel.any():
                res[sel] = r.sol(zi[sel])[0]
            T0 = r.y[0, -1]
        out[inside] = res
    return float(out[0]) if np.ndim(theta) == 0 else out


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass(frozen=True)
class TrajectorySample:
    stop_time: float
    action: str
    breakthrough: bool
    seed: int


@dataclass
class SimulationResult:
    stop_time: np.ndarray
    action: np.ndarray       # 0 = l, 1 = r
    breakthrough: np.ndarray
    state_R: np.ndarray
    seed: int

    def __len__(self):
        return len(self.stop_time)

    def samples(self) -> Iterator[TrajectorySample]:
        for t, a, b in zip(self.stop_time, self.action, self.breakthrough):
            yield TrajectorySample(float(t), "r" if a else "l", bool(b), self.seed)


class _PathStreams:
    """Independent uniform streams, one per path, keyed by (seed, path index)."""

    def __init__(self, seed: int, n: int, block: int = 16):
        root = np.random.SeedSequence(seed)
        self.gens = [np.random.Generator(np.random.PCG64(ss)) for ss in root.spawn(n)]
        self.block = block
        self.buf = np.stack([g.random(block) for g in self.gens])
        self.pos = np.zeros(n, dtype=np.int64)

    def take(self, idx: np.ndarray) -> np.ndarray:
        """Next uniform for each path in idx."""
        need = idx[self.pos[idx] >= self.buf.shape[1]]
        if need.size:
            extra = np.zeros((self.buf.shape[0], self.block))
            for i in need:
                extra[i] = self.gens[i].random(self.block)
            self.buf = np.concatenate([self.buf, extra], axis=1)
        out = self.buf[idx, self.pos[idx]]
        self.pos[idx] += 1
        return out


def simulate(sol: EquilibriumSolution, theta_true: float, n_paths: int, seed: int,
             p_bar0: float) -> SimulationResult:
    """Simulate stopping times and actions.

    Randomized stopping is drawn by thinning a Poisson process whose rate
    bounds the policy's stopping rate; atoms and actions use separate
    uniforms.  Each path uses its own stream, so results for a path do not
    depend on n_paths."""
    if n_paths < 1:
        raise DomainError("need at least one path")
    s = sol.spec
    lam = s.lam
    streams = _PathStreams(seed, n_paths)
    all_idx = np.arange(n_paths)
    u_state = streams.take(all_idx)
    u_break = streams.take(all_idx)
    u_atom = streams.take(all_idx)
    u_act = streams.take(all_idx)
    is_R = u_state < theta_true
    t_break = np.where(is_R, -np.log1p(-u_break) / lam, np.inf)

    dist = _build(sol, p_bar0, 0.0)
    t_stop = np.full(n_paths, np.inf)
    act = np.zeros(n_paths, dtype=np.int64)

    # randomized stopping by thinning
    t_nu = np.full(n_paths, np.inf)
    if dist.nu_const > 0:
        t_nu = -np.log1p(-streams.take(all_idx)) / dist.nu_const
    elif math.isfinite(dist.t_a):
        z0 = llr(p_bar0)
        nu_of_t = lambda t: s.lam * (s.u_r_R - sol.vhat_z(z0 - lam * t)) / s.d_l
        bound = float(max(nu_of_t(dist.t_a), nu_of_t(dist.t_b))) * (1 + 1e-12)
        cur = np.full(n_paths, dist.t_a)
        active = all_idx.copy()
        while active.size:
            gap = -np.log1p(-streams.take(active)) / bound
            cur[active] += gap
            alive = cur[active] < dist.t_b
            active = active[alive]
            if not active.size:
                break
            acc = streams.take(active) * bound < nu_of_t(cur[active])
            t_nu[active[acc]] = cur[active[acc]]
            active = active[~acc]
    t_stop = t_nu.copy()
    act[:] = ACTION_L  # randomized stopping is always for l

    for a in dist.atoms:
        hit = (t_stop > a.t) & (u_atom < a.mass)
        choose_r = u_act < a.rho
        t_stop = np.where(hit, a.t, t_stop)
        act = np.where(hit, np.where(choose_r, ACTION_R, ACTION_L), act)
        if a.mass < 1:
            # reuse the uniform for later atoms, conditioned on not stopping here
            u_atom = np.where(hit, u_atom, (u_atom - a.mass) / (1 - a.mass))

    brk = t_break < t_stop
    t_stop = np.where(brk, t_break, t_stop)
    act = np.where(brk, ACTION_R, act)
    return SimulationResult(t_stop, act, brk, is_R, seed)


def ks_distance(samples: np.ndarray, dist: StoppingDistribution) -> float:
    """Kolmogorov distance between an empirical law and `dist`, atoms included."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    x = x[np.isfinite(x)]
    vals, counts = np.unique(x, return_counts=True)
    right = np.cumsum(counts) / n
    left = right - counts / n
    return float(max(np.max(np.abs(dist.cdf(vals) - right)),
                     np.max(np.abs(dist.cdf_left(vals) - left))))


# ---------------------------------------------------------------------------
# single crossing of stopping-time laws


@dataclass(frozen=True)
class CrossingReport:
    t_hat: float
    sign_changes: int
    holds: bool
    max_violation: float


def single_crossing_check(spec: PayoffSpec, P: AmbiguityInterval, Q: AmbiguityInterval,
                          n_grid: int = 10_000, tol: float = 1e-9, conditioning="L") -> CrossingReport:
    """Check that F_Q - F_P changes sign at most once, from >= 0 to <= 0."""
    _in_scope(spec)
    if not (Q.p_low <= P.p_low + 1e-15 and P.p_bar <= Q.p_bar + 1e-15):
        raise DomainError("P must be contained in Q")
    FP = stopping_cdf(solve(spec, P.delta), P.p_bar, conditioning)
    FQ = stopping_cdf(solve(spec, Q.delta), Q.p_bar, conditioning)
    h = max(FP.horizon, FQ.horizon)
    if not math.isfinite(h):
        raise Unsupported("stopping time without finite horizon")
    t = np.linspace(0.0, 1.05 * h, n_grid)
    d = FQ.cdf(t) - FP.cdf(t)
    sgn = np.where(d > tol, 1, np.where(d < -tol, -1, 0))
    nz = sgn[sgn != 0]
    changes = int(np.count_nonzero(np.diff(nz))) if nz.size else 0
    if nz.size == 0:
        return CrossingReport(0.0, 0, True, 0.0)
    first_neg = np.flatnonzero(sgn < 0)
    t_hat = float(t[first_neg[0]]) if first_neg.size else float(t[-1])
    before = d[t < t_hat]
    after = d[t >= t_hat]
    viol = max(float(np.max(-before, initial=0.0)), float(np.max(after, initial=0.0)))
    holds = viol <= tol and changes <= 1
    return CrossingReport(t_hat, changes, holds, viol)
