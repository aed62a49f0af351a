"""Incremental learning: the log-likelihood ratio follows a Brownian motion
with drift +psi^2/2 in state R and -psi^2/2 in state L.

Payoffs are symmetric: delta for the matching action, 0 otherwise.  A prior
set is the log-odds interval [z - Delta/2, z + Delta/2] around the midpoint
state z.  For a Markov stopping rule in z, the value at belief y is
p(y) V_R(z) + (1 - p(y)) V_L(z) with V_R, V_L the state-conditional values.
Under pure experimentation

    V_R = a_R + b_R e^{-z} + k z,    V_L = a_L + b_L e^{z} - k z,   k = 2c/psi^2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy.special import expit, logit

from .errors import ConvergenceError, DomainError, LargeDelta

_ODE_TOL = dict(method="DOP853", rtol=1e-12, atol=1e-13)


@dataclass(frozen=True)
class DiffusionSpec:
    mu_R: float
    mu_L: float
    sigma: float
    delta: float = 1.0
    c: float = 0.05

    def __post_init__(self):
        vals = (self.mu_R, self.mu_L, self.sigma, self.delta, self.c)
        if not all(math.isfinite(v) for v in vals):
            raise DomainError("diffusion spec must contain finite numbers")
        if not self.mu_R > self.mu_L:
            raise DomainError("need mu_R > mu_L")
        if not self.sigma > 0 or not self.delta > 0 or not self.c > 0:
            raise DomainError("sigma, delta and c must be positive")

    @classmethod
    def from_psi(cls, psi: float, delta: float = 1.0, c: float = 0.05) -> "DiffusionSpec":
        return cls(psi / 2, -psi / 2, 1.0, delta, c)

    @property
    def psi(self) -> float:
        return (self.mu_R - self.mu_L) / self.sigma

    @property
    def k(self) -> float:
        return 2 * self.c / self.psi ** 2

    def U_r(self, z):
        return self.delta * expit(z)

    def U_l(self, z):
        return self.delta * expit(-z)


# ---------------------------------------------------------------------------
# Bayesian benchmark


def bayes_boundaries_z(spec: DiffusionSpec) -> tuple[float, float]:
    """Symmetric Bayesian boundaries.  With V = A + (4c/psi^2) z (p - 1/2),
    smooth pasting against delta*p reduces to z + sinh z = delta psi^2 / (4c)."""
    rhs = spec.delta * spec.psi ** 2 / (4 * spec.c)
    hi = max(1.0, math.asinh(rhs)) + 1.0
    z = brentq(lambda x: x + math.sinh(x) - rhs, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return -z, z


def bayes_value_z(spec: DiffusionSpec, z):
    """Bayesian value Phi^B as a function of log-odds."""
    z = np.asarray(z, dtype=float)
    _, zr = bayes_boundaries_z(spec)
    K = 2 * spec.k
    A = spec.U_r(zr) - K * zr * (expit(zr) - 0.5)
    inside = A + K * z * (expit(z) - 0.5)
    stop = np.maximum(spec.U_r(z), spec.U_l(z))
    out = np.where(np.abs(z) < zr, inside, stop)
    return out if out.ndim else float(out)


def _belief_rhs(spec):
    two_over = 2.0 / spec.psi ** 2

    def rhs(z, y):
        return [y[1], two_over * spec.c - 2.0 * (expit(z) - 0.5) * y[1]]
    return rhs


def bayes_boundaries_shooting(spec: DiffusionSpec, z_max: float = 40.0) -> tuple[float, float]:
    """Independent route: shoot from z = 0 with V'(0) = 0 and bisect on V(0)
    until the path touches delta*p(z) tangentially."""
    rhs = _belief_rhs(spec)
    gap = lambda z, y: y[0] - spec.delta * expit(z)
    gap.terminal = True
    gap.direction = -1

    def dives(v0):
        s = solve_ivp(rhs, [0.0, z_max], [v0, 0.0], events=gap, **_ODE_TOL)
        return s.t_events[0].size > 0

    lo, hi = 0.5 * spec.delta, spec.delta
    if not dives(lo) or dives(hi):
        raise ConvergenceError("shooting bracket failed")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if dives(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    slope_gap = lambda z, y: y[1] - spec.delta * expit(z) * (1 - expit(z))
    slope_gap.terminal = True
    s = solve_ivp(rhs, [0.0, z_max], [hi, 0.0], events=slope_gap, **_ODE_TOL)
    if not s.t_events[0].size:
        raise ConvergenceError("no tangency along the shot")
    zr = float(s.t_events[0][0])
    return -zr, zr


# ---------------------------------------------------------------------------
# conditional values under pure experimentation


@dataclass(frozen=True)
class _Experiment:
    """Pure experimentation between two states with given end values."""

    aR: float
    bR: float
    aL: float
    bL: float
    k: float

    @classmethod
    def fit(cls, k, z0, z1, R0, R1, L0, L1) -> "_Experiment":
        bR = ((R1 - k * z1) - (R0 - k * z0)) / (math.exp(-z1) - math.exp(-z0))
        aR = R0 - k * z0 - bR * math.exp(-z0)
        bL = ((L1 + k * z1) - (L0 + k * z0)) / (math.exp(z1) - math.exp(z0))
        aL = L0 + k * z0 - bL * math.exp(z0)
        return cls(aR, bR, aL, bL, k)

    def VR(self, z):
        return self.aR + self.bR * np.exp(-z) + self.k * z

    def VL(self, z):
        return self.aL + self.bL * np.exp(z) - self.k * z

    def dVR(self, z):
        return -self.bR * np.exp(-z) + self.k

    def dVL(self, z):
        return self.bL * np.exp(z) - self.k


def _pasting_gap(ex: _Experiment, z_l: float, delta_w: float) -> float:
    """Tangency at the state's right-most belief, where V_R = 0, V_L = delta:
    d/dz [p V_R + (1-p) V_L] - U_l'  reduces to  p V_R' + (1-p) V_L'."""
    p = expit(z_l + delta_w / 2)
    return p * ex.dVR(z_l) + (1 - p) * ex.dVL(z_l)


def _symmetric(spec: DiffusionSpec, b: float) -> _Experiment:
    return _Experiment.fit(spec.k, -b, b, 0.0, spec.delta, spec.delta, 0.0)


# ---------------------------------------------------------------------------
# solution object


@dataclass(frozen=True)
class DiffusionSolution:
    spec: DiffusionSpec
    delta_w: float
    z_l_B: float
    z_r_B: float
    z_l: float
    z_r: float
    mixed: bool
    outer: _Experiment
    z_m: float = 0.0
    v0: float = float("nan")
    band_z: np.ndarray = field(default_factory=lambda: np.empty(0))
    band_V: np.ndarray = field(default_factory=lambda: np.empty(0))
    band_nu: np.ndarray = field(default_factory=lambda: np.empty(0))
    band_zeta: np.ndarray = field(default_factory=lambda: np.empty(0))
    other_roots: tuple = ()
    _vhat: object = None

    def vhat(self, z):
        """Flat band value and its slope at z (band only, mirrored)."""
        z = np.asarray(z, dtype=float)
        y = self._vhat.sol(-np.abs(z))
        return y[0], np.where(z <= 0, y[1], -y[1])

    def conditional_values(self, z):
        """(V_R(z), V_L(z)) for a midpoint state inside the experimentation
        region; outside, the stopping payoffs."""
        z = np.asarray(z, dtype=float)
        d = self.spec.delta
        neg = z <= 0
        zz = np.where(neg, z, -z)
        R = self.outer.VR(zz)
        L = self.outer.VL(zz)
        R, L = np.where(neg, R, L), np.where(neg, L, R)
        if self.mixed:
            band = np.abs(z) < self.z_m
            if np.any(band):
                vh = self._vhat.sol(-np.abs(z))[0]
                R = np.where(band, vh, R)
                L = np.where(band, vh, L)
        R = np.where(z <= self.z_l, 0.0, np.where(z >= self.z_r, d, R))
        L = np.where(z <= self.z_l, d, np.where(z >= self.z_r, 0.0, L))
        return (R, L) if z.ndim else (float(R), float(L))

    def value(self, y, z):
        """Value at belief y (log-odds) when the midpoint state is z."""
        R, L = self.conditional_values(z)
        p = expit(y)
        return p * R + (1 - p) * L

    def worst_value(self, z):
        h = self.delta_w / 2
        return np.minimum(self.value(np.asarray(z) - h, z), self.value(np.asarray(z) + h, z))

    def stopping_rate(self, z) -> tuple[float, str | None]:
        """(rate, action) at z; rate is inf at the outer boundaries."""
        if z <= self.z_l:
            return math.inf, "l"
        if z >= self.z_r:
            return math.inf, "r"
        if self.mixed and 0 < abs(z) < self.z_m:
            slope = float(self._vhat.sol(-abs(z))[1])
            return -self.spec.psi ** 2 * slope / self.spec.delta, ("r" if z < 0 else "l")
        return 0.0, None

    def zeta(self, z):
        v, _ = self.vhat(z)
        return logit(v / self.spec.delta)

    # -- checks -----------------------------------------------------------

    def ordering_ok(self) -> bool:
        h = self.delta_w / 2
        return (self.z_l_B < self.z_l + h < 0 < self.z_r - h < self.z_r_B) if self.delta_w > 0 else \
            (abs(self.z_l - self.z_l_B) < 1e-9)

    def band_ode_residual(self, n: int = 401, h: float = 1e-4) -> float:
        """Residual of c = psi^2 (V/delta - 1/2) V' + psi^2/2 V'' on the band,
        with V'' from central differences of the interpolated slope."""
        if not self.mixed:
            return 0.0
        s = self.spec
        z = np.linspace(-self.z_m + 2 * h, -2 * h, n)
        V, dV = self._vhat.sol(z)
        d2 = (self._vhat.sol(z + h)[1] - self._vhat.sol(z - h)[1]) / (2 * h)
        r = s.psi ** 2 * (V / s.delta - 0.5) * dV + 0.5 * s.psi ** 2 * d2 - s.c
        return float(np.max(np.abs(r)))

    def indifference_residual(self) -> float:
        """max |U_r(zeta) - V(zeta, z)| on the z < 0 band."""
        if not self.mixed:
            return 0.0
        z = self.band_z
        return float(np.max(np.abs(self.spec.U_r(self.band_zeta) - self.value(self.band_zeta, z))))

    def junction_slope_gap(self) -> tuple[float, float]:
        """Jump in V_R' and V_L' where the band meets pure experimentation.
        A flat band with decreasing V cannot meet a convex V_R smoothly, so
        these are nonzero; they measure how far the band value is from the
        realized value of the policy."""
        if not self.mixed:
            return 0.0, 0.0
        z1 = -self.z_m
        s = float(self._vhat.sol(z1)[1])
        return float(self.outer.dVR(z1)) - s, float(self.outer.dVL(z1)) - s


# ---------------------------------------------------------------------------
# small ambiguity


def _small_root(spec: DiffusionSpec, delta_w: float, z_B: float) -> float:
    f = lambda b: _pasting_gap(_symmetric(spec, b), -b, delta_w)
    lo = max(delta_w / 2, 1e-9) + 1e-12
    hi = z_B + delta_w / 2 + 10.0
    grid = np.linspace(lo, hi, 4001)
    vals = np.array([f(b) for b in grid])
    idx = np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))
    if idx.size == 0:
        raise LargeDelta("no smooth-pasting boundary")
    i = idx[0]
    return brentq(f, grid[i], grid[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps)


def small_delta_boundaries(spec: DiffusionSpec, delta_w: float, n_check: int = 2001) -> tuple[float, float]:
    """Boundaries (z_l, z_r) of the pure-experimentation equilibrium; raises
    LargeDelta when the worst-case value dips below a stopping payoff."""
    return small_delta_solution(spec, delta_w, n_check)[0]


def small_delta_solution(spec: DiffusionSpec, delta_w: float, n_check: int = 2001):
    if delta_w < 0 or not math.isfinite(delta_w):
        raise DomainError("ambiguity width must be finite and nonnegative")
    z_lB, z_rB = bayes_boundaries_z(spec)
    b = z_rB if delta_w == 0 else _small_root(spec, delta_w, z_rB)
    ex = _symmetric(spec, b)
    sol = DiffusionSolution(spec, delta_w, z_lB, z_rB, -b, b, False, ex)
    if delta_w > 0:
        z = np.linspace(-b, 0.0, n_check)[1:]
        h = delta_w / 2
        ends = np.stack([z - h, z + h])
        vals = sol.value(ends, z)
        j = np.argmin(vals, axis=0)
        y = ends[j, np.arange(z.size)]
        slack = vals[j, np.arange(z.size)] - np.maximum(spec.U_r(y), spec.U_l(y))
        if slack.min() < -1e-12:
            raise LargeDelta(f"worst-case value falls {-slack.min():.3g} below a stopping payoff")
    return (-b, b), sol


# ---------------------------------------------------------------------------
# large ambiguity: flat band around z = 0


def _band_path(spec: DiffusionSpec, v0: float, z_m: float):
    return solve_ivp(_belief_rhs_flat(spec), [0.0, -z_m], [v0, 0.0], dense_output=True, **_ODE_TOL)


def _belief_rhs_flat(spec):
    two_over = 2.0 / spec.psi ** 2
    d = spec.delta

    def rhs(z, y):
        return [y[1], two_over * spec.c - 2.0 * (y[0] / d - 0.5) * y[1]]
    return rhs


def _family(spec: DiffusionSpec, delta_w: float, z_m: float, z_span: float):
    """For a band edge z_m: value at 0 from the edge condition (nature's
    belief reaches the top of the interval), outer boundary from smooth
    pasting.  Returns None when the edge cannot be met."""
    d = spec.delta
    target = d * expit(-z_m + delta_w / 2)
    g = lambda v0: _band_path(spec, v0, z_m).y[0, -1] - target
    if target <= 0.5 * d or g(0.5 * d) > 0:
        return None
    v0 = brentq(g, 0.5 * d, target, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    path = _band_path(spec, v0, z_m)
    vm, sm = path.y[0, -1], path.y[1, -1]
    z1 = -z_m

    def outer(zl):
        return _Experiment.fit(spec.k, zl, z1, 0.0, vm, d, vm)

    e1 = lambda zl: _pasting_gap(outer(zl), zl, delta_w)
    zs = z1 - np.linspace(1e-6, z_span, 1601)
    vals = np.array([e1(z) for z in zs])
    idx = np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))
    if idx.size == 0:
        return None
    i = idx[0]
    zl = brentq(e1, zs[i + 1], zs[i], xtol=1e-14)
    ex = outer(zl)
    closure = 0.5 * (ex.dVR(z1) + ex.dVL(z1)) - sm
    return dict(v0=v0, z_l=zl, ex=ex, path=path, closure=closure)


def mixed_region_solution(spec: DiffusionSpec, delta_w: float, n_tab: int = 401) -> DiffusionSolution:
    """Flat band (-z_m, z_m) with randomized stopping (r on the left, l on the
    right) inside pure experimentation up to (z_l, z_r).

    Matching at the band edge: outer values equal the band value and the
    outer segment is flat there; nature's belief sits at the top of the
    interval; the outer boundary satisfies smooth pasting; and the slope of
    the value at belief 1/2 is continuous across the edge (closing condition,
    which joins the small-ambiguity solution continuously)."""
    z_lB, z_rB = bayes_boundaries_z(spec)
    span = z_rB + delta_w + 10.0
    grid = np.r_[np.geomspace(1e-5, 0.05, 12), np.linspace(0.06, max(delta_w, 0.2), 80)]
    pts = []
    for zm in grid:
        fam = _family(spec, delta_w, zm, span)
        if fam is None:
            if pts:
                break
            continue
        pts.append((zm, fam["closure"]))
    roots = []
    for (z0, f0), (z1, f1) in zip(pts[:-1], pts[1:]):
        if np.sign(f0) != np.sign(f1):
            roots.append(brentq(lambda zm: _family(spec, delta_w, zm, span)["closure"], z0, z1, xtol=1e-12))
    if not roots:
        raise ConvergenceError("no band edge satisfies the matching conditions")
    z_m = roots[0]
    fam = _family(spec, delta_w, z_m, span)
    z = np.linspace(-z_m, 0.0, n_tab)[:-1]
    V, dV = fam["path"].sol(z)
    nu = -spec.psi ** 2 * dV / spec.delta
    zeta = logit(V / spec.delta)
    h = delta_w / 2
    if nu.min() < -1e-10:
        raise ConvergenceError("negative stopping rate on the band")
    if np.any(zeta <= z - h - 1e-10) or np.any(zeta >= z + h + 1e-10):
        raise ConvergenceError("nature's belief leaves the interval on the band")
    return DiffusionSolution(spec, delta_w, z_lB, z_rB, fam["z_l"], -fam["z_l"], True, fam["ex"],
                             z_m, fam["v0"], z, V, nu, zeta, tuple(roots[1:]), fam["path"])


def solve_diffusion(spec: DiffusionSpec, delta_w: float) -> DiffusionSolution:
    try:
        return small_delta_solution(spec, delta_w)[1]
    except LargeDelta:
        return mixed_region_solution(spec, delta_w)


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass(frozen=True)
class DiffusionMC:
    mean: float
    se: float
    mean_time: float
    n_paths: int


@njit(cache=True)
def _first_passage(z0, drift, psi, dt, zl, zr, band_z, band_nu, zm, delta, c, state_R, n_pairs, seed):
    """Antithetic Euler paths with a Brownian-bridge crossing correction and
    an exponential clock for randomized stopping.  Returns payoff per pair and
    mean stopping time."""
    out = np.empty(n_pairs)
    tsum = 0.0
    sq = psi * math.sqrt(dt)
    var = psi * psi * dt
    near = 8.0 * sq  # bridge crossing odds below e^-16 beyond this
    for i in range(n_pairs):
        tot = 0.0
        for sgn in (1.0, -1.0):
            np.random.seed(seed + i)
            z = z0
            t = 0.0
            clock = np.random.exponential()
            hazard = 0.0
            act = -1
            while True:
                if zm > 0.0 and abs(z) < zm and z != 0.0:
                    nu = np.interp(-abs(z), band_z, band_nu)
                    hazard += nu * dt
                    if hazard >= clock:
                        act = 1 if z < 0 else 0
                        break
                zn = z + drift * dt + sgn * sq * np.random.standard_normal()
                u = np.random.random()
                t += dt
                if zn >= zr:
                    act = 1
                    break
                if zn <= zl:
                    act = 0
                    break
                if zr - zn < near and math.exp(-2.0 * (zr - z) * (zr - zn) / var) > u:
                    act = 1
                    break
                if zn - zl < near and math.exp(-2.0 * (z - zl) * (zn - zl) / var) > u:
                    act = 0
                    break
                z = zn
            win = (act == 1) == state_R
            tot += (delta if win else 0.0) - c * t
            tsum += t
        out[i] = 0.5 * tot
    return out, tsum / (2 * n_pairs)


def simulate_diffusion(sol: DiffusionSolution, z0: float, state: str, n_paths: int, seed: int,
                       dt: float = 1e-4) -> DiffusionMC:
    """Monte Carlo of the state-conditional value V_state(z0) under the policy."""
    if state not in ("R", "L"):
        raise DomainError("state must be 'R' or 'L'")
    if not sol.z_l < z0 < sol.z_r:
        raise DomainError("start inside the experimentation region")
    s = sol.spec
    drift = s.psi ** 2 / 2 * (1 if state == "R" else -1)
    n_pairs = max(1, n_paths // 2)
    if sol.mixed:
        bz, bn = np.r_[sol.band_z, 0.0], np.r_[sol.band_nu, 0.0]
    else:
        bz, bn = np.zeros(2), np.zeros(2)
    seed_base = int(np.random.SeedSequence(seed).generate_state(1)[0] % (2 ** 31 - n_pairs - 1))
    pay, mt = _first_passage(float(z0), drift, s.psi, dt, sol.z_l, sol.z_r, bz, bn,
                             sol.z_m if sol.mixed else 0.0, s.delta, s.c, state == "R", n_pairs, seed_base)
    return DiffusionMC(float(pay.mean()), float(pay.std(ddof=1) / math.sqrt(n_pairs)), mt, 2 * n_pairs)
