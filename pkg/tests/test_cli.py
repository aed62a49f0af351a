import json

import pytest

from ambistop.cli import EXIT_CONFIG, EXIT_UNSUPPORTED, main, parse_config, ConfigError

POISSON = {"model": "poisson",
           "payoffs": {"u_r_R": 1, "u_l_R": 0, "u_r_L": 0, "u_l_L": 1, "c": 0.1},
           "delta": 2.0, "p_bar0": 0.7, "theta": 0.5, "n_paths": 500, "seed": 3,
           "grid": {"n_t": 11, "deltas": [0, 2], "theta": [0.3, 0.6]}}


def run(tmp_path, capsys, cfg, *args):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg) if isinstance(cfg, dict) else cfg)
    code = main([args[0], str(path), *args[1:]])
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    lines = text.strip().splitlines()
    assert lines[0].startswith("# config_sha256=")
    return [ln.split(",") for ln in lines[1:]]


@pytest.mark.parametrize("cmd", ["thresholds", "solve", "cdf", "simulate", "learning-time", "cdf-compare",
                                 "sweep-delta", "verify"])
def test_poisson_commands(tmp_path, capsys, cmd):
    code, out, err = run(tmp_path, capsys, POISSON, cmd)
    assert code == 0, err
    assert len(rows(out)) >= 2


def test_solve_values(tmp_path, capsys):
    code, out, _ = run(tmp_path, capsys, POISSON, "solve")
    table = dict(r for r in rows(out)[1:])
    assert float(table["p3"]) == pytest.approx(0.717775048, abs=1e-8)
    assert table["region3_exists"] == "true"


def test_policy_state_flag(tmp_path, capsys):
    code, out, _ = run(tmp_path, capsys, POISSON, "policy", "--state", "0.6")
    table = dict(r for r in rows(out)[1:])
    assert code == 0 and table["region"] == "3"


def test_output_is_deterministic(tmp_path, capsys):
    a = run(tmp_path, capsys, POISSON, "simulate", "--paths")[1]
    b = run(tmp_path, capsys, POISSON, "simulate", "--paths")[1]
    assert a == b and len(rows(a)) == 501


def test_json_output_and_file(tmp_path, capsys):
    dest = tmp_path / "out.json"
    code, _, _ = run(tmp_path, capsys, POISSON, "thresholds", "--format", "json", "--out", str(dest))
    data = json.loads(dest.read_text())
    assert code == 0 and data["columns"] == ["key", "value"]
    assert len(data["config_sha256"]) == 64


def test_digest_ignores_key_order():
    a = parse_config(json.dumps(POISSON))
    b = parse_config(json.dumps(dict(reversed(list(POISSON.items())))))
    assert a.digest == b.digest


@pytest.mark.parametrize("text", [
    '{"model": "poisson", "payoffs": {"u_r_R": NaN, "u_l_R": 0, "u_r_L": 0, "u_l_L": 1, "c": 0.1}}',
    '{"model": "poisson", "payoffs": {"u_r_R": 1, "u_l_R": 0, "u_r_L": 0, "u_l_L": 1, "c": Infinity}}',
    '{"model": "poisson", "payoffs": {"u_r_R": true, "u_l_R": 0, "u_r_L": 0, "u_l_L": 1, "c": 0.1}}',
    '{"model": "poisson", "payoffs": {"u_r_R": 1, "u_l_R": 0, "u_r_L": 0, "u_l_L": 1, "c": -1}}',
    '{"model": "poisson", "payoffs": {"u_r_R": 0, "u_l_R": 1, "u_r_L": 0, "u_l_L": 1, "c": 0.1}}',
    '{"model": "bandit"}',
    '{"model": "poisson", "payoffs": {"u_r_R": 1, "u_l_R": 0, "u_r_L": 0, "u_l_L": 1, "c": 0.1}, "extra": 1}',
    '{"model": "poisson", "payoffs": {"u_r_R": 1, "u_l_R": 0, "u_r_L": 0, "u_l_L": 1, "c": 0.1}, "prior": [0.7, 0.2]}',
    '[1, 2]',
    '{not json',
])
def test_bad_configs(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_bad_config_exit_code(tmp_path, capsys):
    code, out, err = run(tmp_path, capsys, '{"model": "poisson"}', "solve")
    assert code == EXIT_CONFIG and "config error" in err and out == ""


def test_missing_field_exit_code(tmp_path, capsys):
    cfg = dict(POISSON)
    del cfg["delta"]
    code, _, err = run(tmp_path, capsys, cfg, "solve")
    assert code == EXIT_CONFIG and "delta" in err


def test_prior_bounds(tmp_path, capsys):
    cfg = {k: v for k, v in POISSON.items() if k not in ("delta", "p_bar0")}
    cfg["prior"] = [0.2, 0.6]
    c = parse_config(json.dumps(cfg))
    assert c.p_bar0 == 0.6 and c.delta == pytest.approx(1.7917594692, abs=1e-9)


def test_unsupported_exit_code(tmp_path, capsys):
    cfg = dict(POISSON, payoffs={"u_r_R": 1, "u_l_R": 0, "u_r_L": 0.8, "u_l_L": 1, "c": 0.1})
    code, _, err = run(tmp_path, capsys, cfg, "learning-time")
    assert code == EXIT_UNSUPPORTED and "unsupported" in err


def test_two_source(tmp_path, capsys):
    cfg = {"model": "twosource", "two_source": {"stake": 1, "c": 0.2}, "delta": 1.0,
           "grid": {"p_bar": [0.3, 0.7]}}
    code, out, _ = run(tmp_path, capsys, cfg, "two-source")
    table = dict(r for r in rows(out)[1:])
    assert code == 0 and float(table["p_plus"]) == pytest.approx(0.73404026, abs=1e-7)
    code, out, _ = run(tmp_path, capsys, cfg, "two-source", "--policy")
    assert code == 0 and len(rows(out)) == 3


def test_diffusion(tmp_path, capsys):
    cfg = {"model": "diffusion", "diffusion": {"psi": 1, "stake": 1, "c": 0.05}, "delta": 2.0}
    code, out, _ = run(tmp_path, capsys, cfg, "diffusion")
    table = dict(r for r in rows(out)[1:])
    assert code == 0 and table["mixed"] == "true"
    code, out, _ = run(tmp_path, capsys, cfg, "diffusion", "--band")
    assert code == 0 and rows(out)[0] == ["z", "V", "nu", "zeta"]
    code, _, _ = run(tmp_path, capsys, dict(cfg, delta=3.0), "diffusion")
    assert code == EXIT_UNSUPPORTED


def test_wrong_model_for_command(tmp_path, capsys):
    cfg = {"model": "diffusion", "diffusion": {"psi": 1, "stake": 1, "c": 0.05}, "delta": 0.5}
    code, _, _ = run(tmp_path, capsys, cfg, "solve")
    assert code == EXIT_CONFIG


def test_theta_grid_flag(tmp_path, capsys):
    code, out, _ = run(tmp_path, capsys, POISSON, "learning-time", "--theta-grid", "9")
    body = rows(out)
    assert code == 0 and len(body) == 10 and float(body[1][0]) == pytest.approx(0.1)
