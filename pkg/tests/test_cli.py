import io as _io
import json

import pytest

from gasflow.cli import run


def call(*argv):
    buf = _io.StringIO()
    code = run(list(argv), stdout=buf)
    return code, buf.getvalue()


def test_roots_example(tmp_path):
    code, out = call("field", "roots", "--n", "2", "--out", str(tmp_path))
    assert code == 0 and json.loads(out) == {"roots": [1, 2]}
    code, out = call("field", "roots", "--n", "3", "--out", str(tmp_path))
    assert json.loads(out) == {"roots": [1, 2, 3]}


def test_equilibrium_seed_gives_constant_trajectory(tmp_path):
    code, _ = call("ode", "run", "--system", "const-div", "--a0", "0", "--gtilde0", "0",
                   "--out", str(tmp_path))
    assert code == 0
    lines = (tmp_path / "trajectory.csv").read_text().splitlines()
    assert lines[0] == "t,a,Gtilde"
    assert all(l.split(",")[1:] == ["0", "0"] for l in lines[1:])


def test_asymptotics_example(tmp_path):
    code, _ = call("ode", "asymptotics", "--system", "2d-special", "--mu", "0.3", "--l", "0",
                   "--gamma", "1.4", "--t-end", "1e4", "--out", str(tmp_path))
    assert code == 0
    rep = json.loads((tmp_path / "asymptotics.json").read_text())
    assert all(c["pass"] for c in rep["checks"].values())
    assert rep["checks"]["t_alpha"]["expected"] == pytest.approx(1 / 2.8)
    assert rep["fits"]["alpha"]["exponent"] == pytest.approx(-1.0, abs=0.03)


def test_validation_errors_exit_2(tmp_path, capsys):
    assert call("ode", "run", "--t-end", "-1", "--out", str(tmp_path))[0] == 2
    assert call("ode", "run", "--system", "const-div", "--g10", "1", "--out", str(tmp_path))[0] == 2
    assert call("ode", "run", "--system", "5d", "--out", str(tmp_path))[0] == 2
    cfg = tmp_path / "bad.json"
    cfg.write_text('{"t_end": 1,\n "bogus": 2}')
    assert call("ode", "run", "--config", str(cfg))[0] == 2
    assert "bogus" in capsys.readouterr().err
    cfg.write_text('{"t_end": 1,\n "tol": }')
    assert call("ode", "run", "--config", str(cfg))[0] == 2
    assert "line 2" in capsys.readouterr().err


def test_bad_thread_setting(tmp_path, monkeypatch):
    monkeypatch.setenv("GASFLOW_THREADS", "zero")
    assert call("field", "roots", "--out", str(tmp_path))[0] == 2


def test_numerical_event_exit_3(tmp_path):
    code, out = call("field", "characteristics", "--F", '{"kind": "sin", "amp": 2.0}',
                     "--box", "3", "--grid", "5", "--out", str(tmp_path))
    assert code == 3
    ev = json.loads((tmp_path / "event.json").read_text())
    assert ev["critical_x1"] == pytest.approx(-0.5)
    assert json.loads(out) == ev


def test_blow_up_exit_3(tmp_path):
    code, _ = call("ode", "run", "--system", "const-div", "--Ep", "0", "--a0", "-1",
                   "--out", str(tmp_path))
    assert code == 3
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["events"][0]["kind"] in ("blow_up", "positivity_loss")


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"system": "const-div", "t-end": 2.0, "a0": 0.3}))
    out = tmp_path / "o"
    code, text = call("ode", "run", "--config", str(cfg), "--t-end", "3", "--dry-run",
                      "--out", str(out))
    rep = json.loads(text)
    assert code == 0 and rep["dry_run"]
    assert rep["config"]["t_end"] == 3 and rep["config"]["a0"] == 0.3
    assert not out.exists()


@pytest.mark.parametrize("argv", [
    ("ode", "phase"), ("ode", "equilibria"), ("field", "check"), ("field", "sphere"),
    ("solution", "assemble"), ("solution", "residual"), ("verify", "functionals"),
    ("verify", "identities"), ("verify", "lemma51"), ("verify", "corollary"),
    ("verify", "singularity"),
])
def test_every_command_has_dry_run(tmp_path, argv):
    extra = ["--system", "const-div"] if argv[0] == "ode" else []
    code, text = call(*argv, *extra, "--dry-run", "--out", str(tmp_path / "x"))
    assert code == 0 and json.loads(text)["dry_run"]
    assert not (tmp_path / "x").exists()


def test_phase_outputs(tmp_path):
    code, _ = call("ode", "phase", "--system", "dry-friction", "--mu", "0.4", "--t-end", "3",
                   "--out", str(tmp_path))
    assert code == 0
    svg = (tmp_path / "portrait.svg").read_text()
    assert 'viewBox="0 0 800 600"' in svg and "<polyline" in svg
    raw = (tmp_path / "portrait.csv").read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    rep = json.loads((tmp_path / "portrait.json").read_text())
    assert len(rep["seeds"]) == 8
    assert [e["tag"] for e in rep["equilibria"]] == ["stable", "unstable"]


def test_same_seed_is_byte_identical(tmp_path):
    for d in ("a", "b"):
        call("verify", "lemma51", "--trials", "3", "--seed", "11", "--out", str(tmp_path / d))
        call("ode", "phase", "--system", "const-div", "--t-end", "2", "--out", str(tmp_path / d))
    for name in ("lemma51.csv", "lemma51.json", "portrait.csv", "portrait.svg", "portrait.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    call("verify", "lemma51", "--trials", "3", "--seed", "12", "--out", str(tmp_path / "c"))
    assert (tmp_path / "c" / "lemma51.csv").read_bytes() != (tmp_path / "a" / "lemma51.csv").read_bytes()


def test_solution_residual_command(tmp_path):
    code, _ = call("solution", "residual", "--mu", "0.3", "--l", "0.5", "--k", "5",
                   "--out", str(tmp_path))
    assert code == 0
    rep = json.loads((tmp_path / "residual.json").read_text())
    assert rep["second_order"]


def test_corollary_command(tmp_path):
    code, text = call("verify", "corollary", "--mu", "0", "--delta", "0.1", "--out", str(tmp_path))
    assert code == 0 and json.loads(text)["feasible"] is False
