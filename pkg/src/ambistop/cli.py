"""Command-line interface.

Every command reads a JSON run configuration and writes a table (CSV or
JSON) whose first line carries the SHA-256 of the canonical configuration.
Exit codes: 0 ok, 2 configuration error, 3 unsupported regime, 4 failed
verification.
"""
from __future__ import annotations

import hashlib
import json
import math
import sys
from dataclasses import dataclass, field

import click
import numpy as np

from . import diffusion as dif
from . import twosource as ts
from .bayesian import benchmark
from .core import PayoffSpec, llr, p_lower, prob, stopping_payoffs
from .dynamics import (expected_learning_time, knightian_learning_time, ks_distance, naive_cdf,
                       simulate, stopping_cdf)
from .equilibrium import solve
from .errors import (ConvergenceError, DomainError, LargeDelta, NoExperimentation, NoPreemptiveStop,
                     RegionError, Unsupported)
from .verify import all_passed, poisson_suite

EXIT_CONFIG, EXIT_UNSUPPORTED, EXIT_VERIFY = 2, 3, 4

PAYOFF_KEYS = ("u_r_R", "u_l_R", "u_r_L", "u_l_L", "c")


class ConfigError(Exception):
    def __init__(self, problems):
        super().__init__("; ".join(problems))
        self.problems = list(problems)


class VerificationFailed(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration


def _reject_constant(name):
    raise ConfigError([f"non-finite number {name} in config"])


def _finite(x, where, problems, positive=False, unit=False):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        problems.append(f"{where}: expected a number, got {x!r}")
        return None
    if not math.isfinite(x):
        problems.append(f"{where}: must be finite")
        return None
    if positive and not x > 0:
        problems.append(f"{where}: must be > 0")
    if unit and not 0.0 <= x <= 1.0:
        problems.append(f"{where}: must lie in [0, 1]")
    return float(x)


@dataclass
class RunConfig:
    raw: dict
    model: str = "poisson"
    payoffs: PayoffSpec | None = None
    two_source: ts.TwoSourceSpec | None = None
    diffusion: dif.DiffusionSpec | None = None
    delta: float | None = None
    p_bar0: float | None = None
    theta: float | None = None
    n_paths: int | None = None
    seed: int | None = None
    fmt: str = "csv"
    grid: dict = field(default_factory=dict)

    @property
    def digest(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def need(self, *names):
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise ConfigError([f"missing required field '{n}'" for n in missing])


def parse_config(text: str) -> RunConfig:
    try:
        raw = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        raise ConfigError([f"invalid JSON: {e}"]) from None
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a JSON object"])
    problems = []
    known = {"model", "payoffs", "two_source", "diffusion", "delta", "prior", "p_bar0", "theta",
             "n_paths", "seed", "format", "grid"}
    for k in raw:
        if k not in known:
            problems.append(f"unknown field '{k}'")
    cfg = RunConfig(raw)
    cfg.model = raw.get("model", "poisson")
    if cfg.model not in ("poisson", "twosource", "diffusion"):
        problems.append("model must be one of poisson, twosource, diffusion")
    cfg.fmt = raw.get("format", "csv")
    if cfg.fmt not in ("csv", "json"):
        problems.append("format must be csv or json")

    if cfg.model == "poisson":
        pay = raw.get("payoffs")
        if not isinstance(pay, dict):
            problems.append("payoffs: object with u_r_R, u_l_R, u_r_L, u_l_L, c[, lam] required")
        else:
            vals = {k: _finite(pay.get(k), f"payoffs.{k}", problems) for k in PAYOFF_KEYS}
            lam = _finite(pay.get("lam", 1.0), "payoffs.lam", problems, positive=True)
            _finite(pay.get("c"), "payoffs.c", problems, positive=True)
            extra = set(pay) - set(PAYOFF_KEYS) - {"lam"}
            problems += [f"payoffs: unknown field '{k}'" for k in sorted(extra)]
            if not problems:
                try:
                    cfg.payoffs = PayoffSpec(**vals, lam=lam)
                except DomainError as e:
                    problems.append(f"payoffs: {e}")
    elif cfg.model == "twosource":
        t = raw.get("two_source")
        if not isinstance(t, dict):
            problems.append("two_source: object with stake, c[, lam] required")
        else:
            st = _finite(t.get("stake", 1.0), "two_source.stake", problems, positive=True)
            c = _finite(t.get("c"), "two_source.c", problems, positive=True)
            lam = _finite(t.get("lam", 1.0), "two_source.lam", problems, positive=True)
            if not problems:
                cfg.two_source = ts.TwoSourceSpec(st, c, lam)
    else:
        d = raw.get("diffusion")
        if not isinstance(d, dict):
            problems.append("diffusion: object with psi (or mu_R, mu_L, sigma), stake, c required")
        else:
            st = _finite(d.get("stake", 1.0), "diffusion.stake", problems, positive=True)
            c = _finite(d.get("c"), "diffusion.c", problems, positive=True)
            if "psi" in d:
                psi = _finite(d["psi"], "diffusion.psi", problems, positive=True)
                if not problems:
                    cfg.diffusion = dif.DiffusionSpec.from_psi(psi, st, c)
            else:
                mr = _finite(d.get("mu_R"), "diffusion.mu_R", problems)
                ml = _finite(d.get("mu_L"), "diffusion.mu_L", problems)
                sg = _finite(d.get("sigma"), "diffusion.sigma", problems, positive=True)
                if not problems:
                    try:
                        cfg.diffusion = dif.DiffusionSpec(mr, ml, sg, st, c)
                    except DomainError as e:
                        problems.append(f"diffusion: {e}")

    if "delta" in raw and "prior" in raw:
        problems.append("give either delta or prior, not both")
    if "delta" in raw:
        cfg.delta = _finite(raw["delta"], "delta", problems)
        if cfg.delta is not None and cfg.delta < 0:
            problems.append("delta: must be >= 0")
    if "prior" in raw:
        pr = raw["prior"]
        if not (isinstance(pr, list) and len(pr) == 2):
            problems.append("prior: expected [p_low, p_high]")
        else:
            lo = _finite(pr[0], "prior[0]", problems, unit=True)
            hi = _finite(pr[1], "prior[1]", problems, unit=True)
            if lo is not None and hi is not None:
                if not 0 < lo <= hi < 1:
                    problems.append("prior: need 0 < p_low <= p_high < 1")
                else:
                    cfg.delta = float(llr(hi) - llr(lo))
                    cfg.p_bar0 = hi
    if "p_bar0" in raw:
        if cfg.p_bar0 is not None:
            problems.append("p_bar0 is implied by prior")
        cfg.p_bar0 = _finite(raw["p_bar0"], "p_bar0", problems, unit=True)
    if "theta" in raw:
        cfg.theta = _finite(raw["theta"], "theta", problems, unit=True)
    for key in ("n_paths", "seed"):
        if key in raw:
            v = raw[key]
            if isinstance(v, bool) or not isinstance(v, int) or v < (1 if key == "n_paths" else 0):
                problems.append(f"{key}: expected a {'positive' if key == 'n_paths' else 'non-negative'} integer")
            else:
                setattr(cfg, key, v)
    g = raw.get("grid", {})
    if not isinstance(g, dict):
        problems.append("grid: expected an object")
    else:
        for k, v in g.items():
            vs = v if isinstance(v, list) else [v]
            for i, x in enumerate(vs):
                _finite(x, f"grid.{k}[{i}]" if isinstance(v, list) else f"grid.{k}", problems)
        cfg.grid = g
    if problems:
        raise ConfigError(problems)
    return cfg


def _grid_values(cfg: RunConfig, key: str, default):
    v = cfg.grid.get(key)
    if v is None:
        return np.asarray(default, dtype=float)
    return np.asarray(v if isinstance(v, list) else [v], dtype=float)


def _grid_int(cfg: RunConfig, key: str, default: int) -> int:
    v = cfg.grid.get(key, default)
    if not float(v).is_integer() or v < 2:
        raise ConfigError([f"grid.{key}: expected an integer >= 2"])
    return int(v)


# ---------------------------------------------------------------------------
# output


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _json_cell(x):
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def emit(cfg: RunConfig, columns, rows, out):
    if cfg.fmt == "json":
        payload = {"config_sha256": cfg.digest, "columns": list(columns),
                   "rows": [[_json_cell(x) for x in r] for r in rows]}
        out.write(json.dumps(payload, sort_keys=True) + "\n")
        return
    out.write(f"# config_sha256={cfg.digest}\n")
    out.write(",".join(columns) + "\n")
    for r in rows:
        out.write(",".join(_cell(x) for x in r) + "\n")


def emit_record(cfg: RunConfig, record: dict, out):
    emit(cfg, ("key", "value"), list(record.items()), out)


# ---------------------------------------------------------------------------
# commands


def _poisson(cfg: RunConfig):
    if cfg.model != "poisson":
        raise ConfigError([f"this command needs model 'poisson', config has '{cfg.model}'"])
    return cfg.payoffs


def cmd_thresholds(cfg, out, **_):
    s = _poisson(cfg)
    b = benchmark(s)
    sp = stopping_payoffs(s)
    emit_record(cfg, {"p_l_B": b.p_l_B, "p_r_B": b.p_r_B, "c_bar": s.c_bar, "c_low": s.c_low,
                      "p_hat": sp.p_hat, "u_hat": sp.u_hat, "p_star": b.p_star, "case": b.case.value}, out)


def _solution_record(sol) -> dict:
    return {"delta": sol.delta, "case": sol.case.value, "cost_regime": sol.cost_regime.value,
            "p1": sol.p1, "p2": sol.p2, "p3": sol.p3, "p4": sol.p4, "u1": sol.u1, "u2": sol.u2,
            "C": sol.C_coef, "v_dstar": sol.v_dstar, "p_dstar": sol.p_dstar, "m_atom_p2": sol.m_atom_p2,
            "delta_c": sol.delta_c, "region3_exists": sol.region3_exists, "hedged_band": sol.hedged_band,
            "knightian": sol.knightian}


def cmd_solve(cfg, out, **_):
    s = _poisson(cfg)
    cfg.need("delta")
    emit_record(cfg, _solution_record(solve(s, cfg.delta)), out)


def cmd_policy(cfg, out, state=None, **_):
    s = _poisson(cfg)
    cfg.need("delta")
    p_bar = state if state is not None else cfg.p_bar0
    if p_bar is None:
        raise ConfigError(["policy needs --state or p_bar0"])
    sol = solve(s, cfg.delta)
    pt = sol.policy(p_bar)
    seg = sol.value_segment(p_bar)
    rec = {"p_bar": p_bar, "p_low": p_lower(p_bar, cfg.delta), **pt.as_dict(),
           "V_at_p_low": seg.v_at_lower, "V_at_p_bar": seg.v_at_upper, "worst_value": sol.worst_value(p_bar)}
    emit_record(cfg, rec, out)


def _time_grid(cfg, dists):
    n = _grid_int(cfg, "n_t", 201)
    t_max = cfg.grid.get("t_max")
    if t_max is None:
        h = max(d.horizon for d in dists)
        t_max = 1.05 * h if math.isfinite(h) else 10.0
    return np.linspace(0.0, float(t_max), n)


def cmd_cdf(cfg, out, **_):
    s = _poisson(cfg)
    cfg.need("delta", "p_bar0")
    sol = solve(s, cfg.delta)
    conds = ["L", "R"] + ([cfg.theta] if cfg.theta is not None else [])
    dists = [stopping_cdf(sol, cfg.p_bar0, c) for c in conds]
    t = _time_grid(cfg, dists)
    cols = ["t", "F_L", "F_R"] + (["F_theta"] if cfg.theta is not None else [])
    vals = [d.cdf(t) for d in dists]
    emit(cfg, cols, [[ti, *(v[i] for v in vals)] for i, ti in enumerate(t)], out)


def cmd_simulate(cfg, out, paths=False, **_):
    s = _poisson(cfg)
    cfg.need("delta", "p_bar0", "theta", "n_paths", "seed")
    sol = solve(s, cfg.delta)
    res = simulate(sol, cfg.theta, cfg.n_paths, cfg.seed, cfg.p_bar0)
    if paths:
        rows = [[i, bool(r), t, "r" if a else "l", bool(b)]
                for i, (r, t, a, b) in enumerate(zip(res.state_R, res.stop_time, res.action, res.breakthrough))]
        emit(cfg, ["path", "state_R", "stop_time", "action", "breakthrough"], rows, out)
        return
    rec = {"n_paths": cfg.n_paths, "seed": cfg.seed, "share_R": float(res.state_R.mean()),
           "mean_stop_time": float(np.mean(res.stop_time)), "share_action_r": float(res.action.mean()),
           "share_breakthrough": float(res.breakthrough.mean())}
    for name, mask in (("L", ~res.state_R), ("R", res.state_R)):
        if mask.any():
            rec[f"ks_{name}"] = ks_distance(res.stop_time[mask], stopping_cdf(sol, cfg.p_bar0, name))
    emit_record(cfg, rec, out)


def cmd_learning_time(cfg, out, theta_grid=None, **_):
    s = _poisson(cfg)
    if theta_grid is not None:
        theta = np.linspace(0.0, 1.0, theta_grid + 2)[1:-1]
    else:
        theta = _grid_values(cfg, "theta", np.linspace(0.01, 0.99, 99))
    deltas = _grid_values(cfg, "deltas", [0.0, 1.0, 2.0])
    cols = ["theta"] + [f"T_delta={format(d, 'g')}" for d in deltas] + ["T_knightian"]
    curves = [np.atleast_1d(expected_learning_time(s, float(d), theta)) for d in deltas]
    kn = np.atleast_1d(knightian_learning_time(s, theta))
    emit(cfg, cols, [[th, *(c[i] for c in curves), kn[i]] for i, th in enumerate(theta)], out)


def cmd_cdf_compare(cfg, out, **_):
    s = _poisson(cfg)
    cfg.need("delta", "p_bar0")
    cond = cfg.theta if cfg.theta is not None else "L"
    sol = solve(s, cfg.delta)
    zero = solve(s, 0.0)
    p_mid = float(prob(llr(cfg.p_bar0) - cfg.delta / 2.0))
    bayes = stopping_cdf(zero, p_mid, cond)
    soph = stopping_cdf(sol, cfg.p_bar0, cond)
    naive = naive_cdf(sol, cfg.p_bar0, cond)
    t = _time_grid(cfg, [bayes, soph, naive])
    emit(cfg, ["t", "F_bayes", "F_naive", "F_sophisticated"],
         [[ti, a, b, c] for ti, a, b, c in zip(t, bayes.cdf(t), naive.cdf(t), soph.cdf(t))], out)


def cmd_sweep_delta(cfg, out, **_):
    s = _poisson(cfg)
    deltas = _grid_values(cfg, "deltas", np.linspace(0.0, 4.0, 41))
    cols = None
    rows = []
    for d in deltas:
        rec = _solution_record(solve(s, float(d)))
        cols = list(rec)
        rows.append(list(rec.values()))
    emit(cfg, cols, rows, out)


def cmd_two_source(cfg, out, policy=False, **_):
    if cfg.model != "twosource":
        raise ConfigError(["two-source needs model 'twosource'"])
    spec = cfg.two_source
    if policy:
        cfg.need("delta")
        pb = _grid_values(cfg, "p_bar", np.linspace(0.02, 0.98, 49))
        rows = []
        for p in pb:
            a = ts.two_source_equilibrium(float(p), cfg.delta, spec)
            rows.append([p, a.alpha, a.m, a.nu, a.rho, a.pi, a.region])
        emit(cfg, ["p_bar", "alpha", "m", "nu", "rho", "pi", "region"], rows, out)
        return
    rec = {"c_low_star": spec.c_low_star, "u_split": spec.u_split, "u_hat": spec.u_hat,
           "c_bar": spec.c_bar, "p_l_B": spec.p_l_B, "low_cost": spec.low_cost}
    if spec.c < spec.c_bar:
        dp = ts.two_source_dp(spec)
        rec.update(p_L_B=dp.p_L_B, p_R_B=dp.p_R_B, dp_value_at_half=dp.value_at(0.5))
    if not spec.low_cost and spec.c < spec.c_bar:
        try:
            rec["p_minus"], rec["p_plus"] = ts.p_plus_minus(spec)
        except Unsupported:
            pass
    if cfg.delta is not None:
        rec["large_ambiguity"] = ts.large_ambiguity(spec, cfg.delta)
    emit_record(cfg, rec, out)


def cmd_diffusion(cfg, out, band=False, **_):
    if cfg.model != "diffusion":
        raise ConfigError(["diffusion needs model 'diffusion'"])
    cfg.need("delta")
    sol = dif.solve_diffusion(cfg.diffusion, cfg.delta)
    if band:
        if not sol.mixed:
            raise Unsupported("no randomized-stopping band at this width")
        emit(cfg, ["z", "V", "nu", "zeta"],
             [list(r) for r in zip(sol.band_z, sol.band_V, sol.band_nu, sol.band_zeta)], out)
        return
    gR, gL = sol.junction_slope_gap()
    rec = {"psi": cfg.diffusion.psi, "z_l_B": sol.z_l_B, "z_r_B": sol.z_r_B, "z_l": sol.z_l, "z_r": sol.z_r,
           "mixed": sol.mixed, "z_m": sol.z_m if sol.mixed else None, "V_at_0": sol.value(0.0, 0.0),
           "ordering_ok": sol.ordering_ok(), "band_ode_residual": sol.band_ode_residual(),
           "indifference_residual": sol.indifference_residual(),
           "junction_slope_gap_R": gR, "junction_slope_gap_L": gL}
    emit_record(cfg, rec, out)


def cmd_verify(cfg, out, **_):
    s = _poisson(cfg)
    cfg.need("delta")
    checks = poisson_suite(s, cfg.delta)
    emit(cfg, ["check", "value", "tolerance", "passed"],
         [[c.name, c.value, c.tolerance, c.passed] for c in checks], out)
    if not all_passed(checks):
        raise VerificationFailed(", ".join(c.name for c in checks if not c.passed))


# ---------------------------------------------------------------------------
# click wiring


def _run(fn, config_path, out_path, fmt, **kw):
    with open(config_path) as fh:
        cfg = parse_config(fh.read())
    if fmt is not None:
        cfg.fmt = fmt
    if out_path:
        with open(out_path, "w", newline="") as out:
            fn(cfg, out, **kw)
    else:
        fn(cfg, sys.stdout, **kw)


def _command(name, fn, extra=()):
    def callback(config, out, fmt, **kw):
        _run(fn, config, out, fmt, **kw)

    params = [click.Argument(["config"], type=click.Path(exists=True, dir_okay=False)),
              click.Option(["--out", "-o"], type=click.Path(dir_okay=False), default=None,
                           help="Write to this file instead of stdout."),
              click.Option(["--format", "fmt"], type=click.Choice(["csv", "json"]), default=None,
                           help="Override the config's output format."), *extra]
    return click.Command(name, callback=callback, params=params, help=(fn.__doc__ or "").strip() or None)


@click.group()
@click.version_option(package_name="ambistop")
def cli():
    """Optimal stopping under ambiguity: solvers, simulators and oracle checks."""


cmd_thresholds.__doc__ = "Bayesian thresholds, cost cutoffs and case."
cmd_solve.__doc__ = "Equilibrium boundaries and coefficients."
cmd_policy.__doc__ = "Policy and value segment at one state."
cmd_cdf.__doc__ = "Stopping-time CDF by true state."
cmd_simulate.__doc__ = "Monte Carlo of stopping times and actions."
cmd_learning_time.__doc__ = "Expected learning time over a grid of centres."
cmd_cdf_compare.__doc__ = "Bayesian, naive and sophisticated stopping-time CDFs."
cmd_sweep_delta.__doc__ = "Boundaries over a grid of ambiguity widths."
cmd_two_source.__doc__ = "Two-source thresholds, or the equilibrium policy with --policy."
cmd_diffusion.__doc__ = "Diffusion-model boundaries, or the band table with --band."
cmd_verify.__doc__ = "Oracle suite with a pass/fail report."

for _name, _fn, _extra in [
    ("thresholds", cmd_thresholds, ()),
    ("solve", cmd_solve, ()),
    ("policy", cmd_policy, (click.Option(["--state"], type=click.FloatRange(0, 1), default=None),)),
    ("cdf", cmd_cdf, ()),
    ("simulate", cmd_simulate, (click.Option(["--paths"], is_flag=True, help="Emit one row per path."),)),
    ("learning-time", cmd_learning_time,
     (click.Option(["--theta-grid"], type=click.IntRange(1), default=None,
                   help="Use this many evenly spaced interior centres."),)),
    ("cdf-compare", cmd_cdf_compare, ()),
    ("sweep-delta", cmd_sweep_delta, ()),
    ("two-source", cmd_two_source, (click.Option(["--policy"], is_flag=True),)),
    ("diffusion", cmd_diffusion, (click.Option(["--band"], is_flag=True),)),
    ("verify", cmd_verify, ()),
]:
    cli.add_command(_command(_name, _fn, _extra))

_UNSUPPORTED = (Unsupported, LargeDelta, NoExperimentation, NoPreemptiveStop, RegionError, ConvergenceError)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="ambistop", standalone_mode=False)
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.ClickException as e:
        e.show()
        return EXIT_CONFIG
    except click.exceptions.Abort:
        return 1
    except ConfigError as e:
        for p in e.problems:
            click.echo(f"config error: {p}", err=True)
        return EXIT_CONFIG
    except DomainError as e:
        click.echo(f"config error: {e}", err=True)
        return EXIT_CONFIG
    except _UNSUPPORTED as e:
        click.echo(f"unsupported: {type(e).__name__}: {e}", err=True)
        return EXIT_UNSUPPORTED
    except VerificationFailed as e:
        click.echo(f"verification failed: {e}", err=True)
        return EXIT_VERIFY
    return 0


def entry():
    sys.exit(main())
