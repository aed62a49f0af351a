"""Independent numerical checks of the closed-form equilibrium.

* `value_by_quadrature` integrates the payoff of the equilibrium policy along
  the deterministic no-news path, using only the policy table.
* `hjb_residual` evaluates the saddle-point HJB functional and scans control
  and nature grids.
* `discrete_saddle_solve` runs backward induction on a discrete-time game in
  which the DM commits for one step against nature.
* `bayes_value_iteration` is a plain discrete-time Bayesian stopping solver.
* `diffusion_policy_value` solves the linear boundary-value problems for the
  state-conditional values of a diffusion stopping policy.
* `diffusion_bayes_dp` is a binomial-tree Bayesian stopping solver for the
  diffusion model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import spsolve
from scipy.special import expit

from .core import PayoffSpec, U_l, U_mix, U_r, llr, p_lower, prob, stopping_payoffs
from .diffusion import DiffusionSolution, DiffusionSpec
from .equilibrium import EquilibriumSolution, PolicyPoint
from .errors import ConvergenceError, DomainError


# ---------------------------------------------------------------------------
# value of the policy by quadrature


def _path_events(sol: EquilibriumSolution, p_bar0: float):
    """Times at which the no-news state path crosses region boundaries."""
    lam = sol.spec.lam
    z0 = llr(p_bar0)
    marks = [b for b in (sol.p1, sol.p2, sol.p3, sol.p4) if b is not None and b < p_bar0]
    return sorted({(z0 - llr(b)) / lam for b in marks if (z0 - llr(b)) > 0})


def value_by_quadrature(sol: EquilibriumSolution, p: float, p_bar0: float,
                        rtol: float = 1e-11, atol: float = 1e-13) -> float:
    """Expected payoff at prior p of following the equilibrium policy from
    state p_bar0.  Hazards and atoms are read from `sol.policy` only."""
    s = sol.spec
    lam = s.lam
    z0 = llr(p_bar0)
    state = lambda t: prob(z0 - lam * t)

    # (survival in L, survival in R, collected payoff in L, collected in R)
    y = np.array([1.0, 1.0, 0.0, 0.0])
    t = 0.0

    def atom(y, t, pt: PolicyPoint):
        if pt.m <= 0:
            return y
        rho = pt.rho if pt.rho is not None else 0.0
        pay_L = rho * s.u_r_L + (1 - rho) * s.u_l_L - s.c * t
        pay_R = rho * s.u_r_R + (1 - rho) * s.u_l_R - s.c * t
        out = y.copy()
        out[2] += y[0] * pt.m * pay_L
        out[3] += y[1] * pt.m * pay_R
        out[0] *= 1 - pt.m
        out[1] *= 1 - pt.m
        return out

    def rhs(t, y):
        pt = sol.policy(state(t))
        nu = pt.nu
        rho = pt.rho if pt.rho is not None else 0.0
        stop_L = rho * s.u_r_L + (1 - rho) * s.u_l_L - s.c * t
        stop_R = rho * s.u_r_R + (1 - rho) * s.u_l_R - s.c * t
        return [-nu * y[0], -(nu + lam) * y[1],
                y[0] * nu * stop_L,
                y[1] * (nu * stop_R + lam * (s.u_r_R - s.c * t))]

    events = _path_events(sol, p_bar0)
    y = atom(y, t, sol.policy(p_bar0))
    for t_next in events + [None]:
        if y[0] <= 0 and y[1] <= 0:
            break
        if t_next is None:
            # no further boundary: the policy never stops again (cannot happen
            # for experimentation states, which drift into region 1)
            if y[0] > 1e-15 or y[1] > 1e-15:
                raise ConvergenceError("path never reaches a stopping region")
            break
        if t_next > t:
            res = solve_ivp(rhs, (t, t_next), y, method="DOP853", rtol=rtol, atol=atol)
            if not res.success:
                raise ConvergenceError(res.message)
            y = res.y[:, -1]
            t = t_next
        y = atom(y, t, sol.policy(state(t)))
    return float(p * y[3] + (1 - p) * y[2])


# ---------------------------------------------------------------------------
# saddle-point HJB functional


def G(m, nu, rho, p, p_bar, sol: EquilibriumSolution, derivs=None) -> float:
    s = sol.spec
    v, v_p, v_pb = derivs if derivs is not None else sol.derivatives(p, p_bar)
    u_rho = U_mix(p, 0.0 if rho is None else rho, s)
    eta = lambda x: -s.lam * x * (1 - x)
    cont = -s.c + nu * (u_rho - v) + p * s.lam * (s.u_r_R - v) + v_p * eta(p) + v_pb * eta(p_bar)
    return m * (u_rho - v) + (1 - m) * cont


@dataclass(frozen=True)
class HJBReport:
    g_policy: float
    max_over_controls: float
    min_over_nature: float
    g_at_pi: float  # equals g_policy; kept for clarity in reports
    atom: bool = False  # interior atom: nature's choice is checked on the value segment
    segment_slope: float = 0.0

    def ok(self, tol: float = 1e-6) -> bool:
        nature_ok = (abs(self.segment_slope) < tol if self.atom
                     else self.min_over_nature >= self.g_at_pi - tol)
        return abs(self.g_policy) < tol and self.max_over_controls <= self.g_policy + tol and nature_ok


def hjb_residual(sol: EquilibriumSolution, p_bar: float, n_controls: int = 11,
                 n_nature: int = 201, nu_max: float | None = None) -> HJBReport:
    s = sol.spec
    pt = sol.policy(p_bar)
    g0 = G(pt.m, pt.nu, pt.rho, pt.pi, p_bar, sol)
    if nu_max is None:
        nu_max = 10.0 * s.lam + 2 * pt.nu
    ms = np.unique(np.r_[np.linspace(0, 1, n_controls), pt.m])
    nus = np.unique(np.r_[np.linspace(0, nu_max, n_controls), pt.nu])
    rhos = sorted({0.0, stopping_payoffs(s).rho_hat, 1.0} | ({pt.rho} if pt.rho is not None else set()))
    d_pi = sol.derivatives(pt.pi, p_bar)
    best = -math.inf
    for rho in rhos:
        for m in ms:
            for nu in nus:
                best = max(best, G(m, nu, rho, pt.pi, p_bar, sol, d_pi))
    lo = p_lower(p_bar, sol.delta) if not sol.knightian else 0.0
    hi = p_bar if not sol.knightian else 1.0
    ps = np.unique(np.r_[np.linspace(lo, hi, n_nature), pt.pi])
    worst = min(G(pt.m, pt.nu, pt.rho, q, p_bar, sol) for q in ps)
    atom = 0.0 < pt.m < 1.0
    slope = sol.value_segment(p_bar).slope if atom else 0.0
    return HJBReport(g0, best, worst, g0, atom, slope)


# ---------------------------------------------------------------------------
# discrete-time one-step-commitment game


def solve_stage_game(A: np.ndarray):
    """Maxmin of an n x 2 zero-sum game (row player maximises).

    Returns (value, row mix, minmax value).  Supports of at most two rows are
    enumerated; ties prefer pure rows, then lower row indices."""
    n = A.shape[0]
    best_v, best_x = -math.inf, None
    tie = 1e-13
    for j in range(n):
        v = min(A[j, 0], A[j, 1])
        if v > best_v + tie:
            best_v, best_x = v, np.eye(n)[j]
    for j in range(n):
        for k in range(j + 1, n):
            dj = A[j, 0] - A[j, 1]
            dk = A[k, 0] - A[k, 1]
            if dj * dk >= 0 or dj == dk:
                continue
            t = -dk / (dj - dk)
            if not 0.0 < t < 1.0:
                continue
            v = t * A[j, 0] + (1 - t) * A[k, 0]
            if v > best_v + tie:
                x = np.zeros(n)
                x[j], x[k] = t, 1 - t
                best_v, best_x = v, x
    # column player's side: min over y of the upper envelope
    ys = [0.0, 1.0]
    for j in range(n):
        for k in range(j + 1, n):
            a = (A[j, 0] - A[j, 1]) - (A[k, 0] - A[k, 1])
            if a != 0:
                y = (A[k, 1] - A[j, 1]) / a
                if 0 < y < 1:
                    ys.append(y)
    minmax = min(max(y * A[i, 0] + (1 - y) * A[i, 1] for i in range(n)) for y in ys)
    return best_v, best_x, minmax


@dataclass
class DiscreteSaddleResult:
    z: np.ndarray          # state log-odds grid
    p_bar: np.ndarray
    V_L: np.ndarray        # conditional values given state L
    V_R: np.ndarray
    worst: np.ndarray      # min over the prior set of the value
    x: np.ndarray          # DM mixes over (stop l, stop r, continue)
    exchange_gap: float    # max |maxmin - minmax| over stage games
    dt: float

    @property
    def mixing(self) -> np.ndarray:
        """States where the DM strictly mixes between stopping for l and continuing."""
        return (self.x[:, 0] > 1e-12) & (self.x[:, 0] < 1 - 1e-12)

    def nature_choice(self) -> np.ndarray:
        """Per state: -1 lower corner, +1 upper corner, 0 indifferent."""
        lo = p_lower(self.p_bar, self.delta)
        v_lo = lo * self.V_R + (1 - lo) * self.V_L
        v_hi = self.p_bar * self.V_R + (1 - self.p_bar) * self.V_L
        d = v_lo - v_hi
        scale = 1e-9
        return np.where(d < -scale, -1, np.where(d > scale, 1, 0))

    delta: float = 0.0


def discrete_saddle_solve(spec: PayoffSpec, delta: float, dt: float = 1e-3,
                          z_lo: float | None = None, z_hi: float | None = None,
                          min_points: int = 2000) -> DiscreteSaddleResult:
    """Backward induction in the state, starting from an absorbing far-left cell.

    The state grid has log-odds step lam*dt, so one step of no news moves the
    state exactly one cell down."""
    if dt <= 0 or delta < 0:
        raise DomainError("need dt > 0 and delta >= 0")
    lam, c = spec.lam, spec.c
    h = lam * dt
    sp = stopping_payoffs(spec)
    if z_lo is None:
        z_lo = llr(spec.k / spec.d_R) - 1.0 if spec.c < spec.c_bar else llr(sp.p_hat) - 1.0
    if z_hi is None:
        z_hi = max(llr(sp.p_hat), 0.0) + delta + 6.0
    n = max(min_points, int(math.ceil((z_hi - z_lo) / h)) + 1)
    z = z_lo + h * np.arange(n)
    pb = prob(z)
    pl = prob(z - delta)
    e = math.exp(-lam * dt)
    V_L = np.empty(n)
    V_R = np.empty(n)
    X = np.zeros((n, 3))
    gap = 0.0
    stop_l = (spec.u_l_L, spec.u_l_R)
    stop_r = (spec.u_r_L, spec.u_r_R)
    for i in range(n):
        rows = [stop_l, stop_r]
        if i > 0:
            rows.append((-c * dt + V_L[i - 1],
                         e * V_R[i - 1] + (1 - e) * spec.u_r_R - c * (1 - e) / lam))
        else:
            rows.append((-math.inf, -math.inf))
        cond = np.array(rows)
        A = np.column_stack([pl[i] * cond[:, 1] + (1 - pl[i]) * cond[:, 0],
                             pb[i] * cond[:, 1] + (1 - pb[i]) * cond[:, 0]])
        if i == 0:
            A = A[:2]
        v, x, mm = solve_stage_game(A)
        gap = max(gap, abs(v - mm))
        if i == 0:
            x = np.r_[x, 0.0]
        X[i] = x
        used = x > 0
        V_L[i] = float(np.dot(x[used], cond[used, 0]))
        V_R[i] = float(np.dot(x[used], cond[used, 1]))
    worst = np.minimum(pl * V_R + (1 - pl) * V_L, pb * V_R + (1 - pb) * V_L)
    return DiscreteSaddleResult(z, pb, V_L, V_R, worst, X, gap, dt, delta)


def saddle_gap(sol: EquilibriumSolution, res: DiscreteSaddleResult, margin: float = 0.0) -> float:
    """Sup-norm gap between discrete and closed-form worst-case values over
    states from p1 up to the top of the grid."""
    mask = res.z >= res.z[0] + margin
    closed = np.array([sol.worst_value(p) for p in res.p_bar[mask]])
    return float(np.max(np.abs(closed - res.worst[mask])))


def mixing_band(res: DiscreteSaddleResult):
    """(z_low, z_high) of the longest run of states where stop-l is mixed, or None."""
    m = res.mixing
    if not m.any():
        return None
    idx = np.flatnonzero(m)
    runs = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
    run = max(runs, key=len)
    return float(res.z[run[0]]), float(res.z[run[-1]])


# ---------------------------------------------------------------------------
# Bayesian value iteration


def bayes_value_iteration(spec: PayoffSpec, n: int = 2000, dt: float = 1e-3):
    """Discrete-time Bayesian value on a uniform belief grid.

    The no-news belief only moves down, so one ascending sweep solves the
    dynamic program; the continuation at the in-cell update is linear in
    the unknown value and is solved for directly."""
    lam, c = spec.lam, spec.c
    p = np.linspace(0.0, 1.0, n)
    e = math.exp(-lam * dt)
    V = np.empty(n)
    stop = np.maximum(U_l(p, spec), U_r(p, spec))
    V[0] = stop[0]
    step = p[1] - p[0]
    for i in range(1, n):
        q = p[i] * e / (p[i] * e + 1 - p[i])
        brk = p[i] * (1 - e)
        a = -c * dt + brk * spec.u_r_R
        b = 1 - brk
        j = int(q // step)
        if j >= i:
            j = i - 1
        w = (q - p[j]) / step  # weight on p[j+1]
        if j + 1 < i:
            cont = a + b * ((1 - w) * V[j] + w * V[j + 1])
        else:
            denom = 1 - b * w
            cont = (a + b * (1 - w) * V[j]) / denom
        V[i] = max(stop[i], cont)
    return p, V


# ---------------------------------------------------------------------------
# diffusion model


def diffusion_policy_value(sol: DiffusionSolution, n: int = 40001):
    """Realized (V_R, V_L) of the policy in `sol` on a uniform z grid, by
    central finite differences of the conditional-value equations.

    Only the boundaries and the stopping-rate table are read."""
    s = sol.spec
    z = np.linspace(sol.z_l, sol.z_r, n)
    h = z[1] - z[0]
    nu = np.array([sol.stopping_rate(x)[0] if sol.z_l < x < sol.z_r else 0.0 for x in z])
    nu[[0, -1]] = 0.0
    out = []
    for state in ("R", "L"):
        drift = (1 if state == "R" else -1) * s.psi ** 2 / 2
        # randomized stopping takes r on the left of 0 and l on the right
        pay = np.where(z < 0, s.delta if state == "R" else 0.0, 0.0 if state == "R" else s.delta)
        a = s.psi ** 2 / (2 * h * h)
        lo = np.full(n - 1, a - drift / (2 * h))
        up = np.full(n - 1, a + drift / (2 * h))
        di = -2 * a - nu
        rhs = s.c - nu * pay
        lo[-1] = 0.0
        up[0] = 0.0
        di[[0, -1]] = 1.0
        rhs[0] = 0.0 if state == "R" else s.delta
        rhs[-1] = s.delta if state == "R" else 0.0
        A = sps.diags([lo, di, up], [-1, 0, 1], format="csc")
        out.append(spsolve(A, rhs))
    return z, out[0], out[1]


def diffusion_bayes_dp(spec: DiffusionSpec, dt: float = 1e-4, z_max: float | None = None):
    """Bayesian stopping on a binomial tree: each step the signal moves the
    log-odds by +/- h with h = log((1+a)/(1-a)), a = psi sqrt(dt)/2, which
    makes the tree exactly Bayesian.  Solved by policy iteration.

    Returns (z grid, value, z_l, z_r)."""
    a = spec.psi * math.sqrt(dt) / 2
    if not a < 0.5:
        raise DomainError("time step too large for the tree")
    h = math.log((1 + a) / (1 - a))
    if z_max is None:
        z_max = 2 * math.asinh(spec.delta * spec.psi ** 2 / (4 * spec.c)) + 2.0
    m = int(math.ceil(z_max / h))
    z = h * np.arange(-m, m + 1)
    n = z.size
    p = expit(z)
    q = 0.5 * (1 + a * (2 * p - 1))  # chance of an up-move given belief p
    stop = np.maximum(spec.delta * p, spec.delta * (1 - p))
    cont = np.zeros(n, dtype=bool)
    cont[1:-1] = np.abs(z[1:-1]) < 0.5
    for _ in range(200):
        # evaluate: continue where `cont`, else stop
        lo = np.where(cont[1:], -(1 - q[1:]), 0.0)
        up = np.where(cont[:-1], -q[:-1], 0.0)
        A = sps.diags([lo, np.ones(n), up], [-1, 0, 1], format="csc")
        rhs = np.where(cont, -spec.c * dt, stop)
        V = spsolve(A, rhs)
        cv = np.full(n, -np.inf)
        cv[1:-1] = -spec.c * dt + q[1:-1] * V[2:] + (1 - q[1:-1]) * V[:-2]
        new = cv > stop + 1e-15
        if np.array_equal(new, cont):
            break
        cont = new
    else:
        raise ConvergenceError("policy iteration did not settle")
    inside = z[cont]
    return z, V, float(inside.min() - h / 2), float(inside.max() + h / 2)
