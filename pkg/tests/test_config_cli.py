import csv
import shutil
import subprocess
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bulkq import cli, rates
from bulkq.config import ConfigError, Scenario, load, parse_config, serialize
from bulkq.model import QueueConfig

CONFIGS = Path(__file__).resolve().parent.parent / "demos" / "configs"

MINIMAL = """
[queue]
k = 1
B = 1
mu = 1

[rate]
kind = constant
a = 1

[run]
horizon = 1
checkpoints = 1
"""


def test_minimal_defaults():
    sc = parse_config(MINIMAL)
    assert sc.queue == QueueConfig(1, 1, 1.0)
    assert sc.rate == rates.constant(1.0)
    assert sc.checkpoints == (1.0,)
    g = sc.grid
    assert g.N == 40 and g.x_max == 25.0 and g.dx == pytest.approx(1e-3)
    assert sc.n_reps == 100_000 and sc.seed == 12345 and sc.N_b == 10
    assert sc.frozen_lam == 1.0


@pytest.mark.parametrize("edit, message", [
    (("k = 1", "k = 3", "B = 1", "B = 2"), "k must not exceed B"),
    (("kind = constant\na = 1", "kind = sinusoid\na = 0.5\nb = 0.9"),
     "intensity must be nonnegative"),
    (("mu = 1", "mu = 0"), "mu"),
    (("horizon = 1", "horizon = 1\nbogus = 2"), "line 13: unknown key 'bogus'"),
    (("[run]", "[runs]"), "line 11: unknown section"),
    (("a = 1", "a = 1.2.3"), "line 9: malformed number"),
    (("checkpoints = 1", "checkpoints = 1, 0.5"), "ascending"),
    (("checkpoints = 1", "checkpoints = 2"), "ascending"),
    (("kind = constant", "kind = cubic"), "unknown rate kind"),
    (("a = 1", "a = 1\nomega = 2"), "does not apply"),
    (("k = 1", "k = 1\nk = 1"), "duplicate key"),
    (("horizon = 1\n", ""), "missing required key 'horizon'"),
])
def test_config_errors(edit, message):
    text = MINIMAL
    for old, new in zip(edit[::2], edit[1::2]):
        text = text.replace(old, new, 1)
    with pytest.raises(ConfigError, match=message):
        parse_config(text)


def test_config_error_line_numbers_for_invariants():
    text = MINIMAL.replace("k = 1", "k = 3").replace("B = 1", "B = 2")
    with pytest.raises(ConfigError, match=r"^line 2: "):
        parse_config(text)


def test_grid_and_spectral_sections():
    text = MINIMAL + """
[grid]
N = 12
x_max = 5
dx = 0.01

[spectral]
gamma = 0.5, 0.5+1j
sweep = -0.5, 2, 6
N_b = 4
lam = 0.7

[sim]
n_reps = 10
seed = 3
"""
    sc = parse_config(text)
    assert (sc.grid.N, sc.grid.M) == (12, 500)
    pts = sc.spectral_points()
    assert len(pts) == 8 and pts[1].gamma == 0.5 + 1j and pts[-1].gamma == 2.0
    assert all(p.lam == 0.7 for p in pts)
    assert (sc.n_reps, sc.seed, sc.N_b) == (10, 3, 4)


def test_boundary_truncation_default_follows_grid():
    small = MINIMAL + "\n[grid]\nN = 5\n"
    assert parse_config(small).N_b == 5
    with pytest.raises(ConfigError, match="N_b"):
        parse_config(small + "\n[spectral]\nN_b = 6\n")


def test_spectral_point_outside_s_is_config_error():
    with pytest.raises(ConfigError, match="must exceed"):
        parse_config(MINIMAL + "\n[spectral]\ngamma = -2\n")


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.cfg")), ids=lambda p: p.name)
def test_demo_configs_round_trip(path):
    sc = load(path)
    assert parse_config(serialize(sc)) == sc


finite = dict(allow_nan=False, allow_infinity=False)


@st.composite
def scenarios(draw):
    B = draw(st.integers(1, 6))
    k = draw(st.integers(1, B))
    mu = draw(st.floats(0.1, 10, **finite))
    kind = draw(st.sampled_from(["constant", "sinusoid", "piecewise"]))
    if kind == "constant":
        rf = rates.constant(draw(st.floats(0, 5, **finite)))
    elif kind == "sinusoid":
        a = draw(st.floats(0, 5, **finite))
        rf = rates.sinusoid(a, draw(st.floats(-a, a, **finite)), draw(st.floats(0.1, 3, **finite)),
                            draw(st.floats(-3, 3, **finite)))
    else:
        bp = sorted(draw(st.sets(st.floats(0.01, 10, **finite), min_size=1, max_size=3)))
        vals = draw(st.lists(st.floats(0, 5, **finite), min_size=len(bp) + 1,
                             max_size=len(bp) + 1))
        rf = rates.piecewise(bp, vals)
    horizon = draw(st.floats(0.5, 20, **finite))
    cps = tuple(sorted(draw(st.sets(st.floats(0, horizon, **finite), min_size=1, max_size=4))))
    gammas = tuple(draw(st.lists(st.complex_numbers(max_magnitude=3, **finite)
                                 .filter(lambda z: z.real > -mu and z != -1.0), max_size=2)))
    return Scenario(
        queue=QueueConfig(k, B, mu), rate=rf, horizon=horizon, checkpoints=cps,
        grid_overrides=(("N", max(5 * B, 10)),), gammas=gammas,
        N_b=draw(st.integers(1, 5)), spectral_lam=1.0,
        n_reps=draw(st.integers(1, 10 ** 6)), seed=draw(st.integers(0, 2 ** 31)),
    )


@settings(max_examples=60, deadline=None)
@given(scenarios())
def test_round_trip(sc):
    assert parse_config(serialize(sc)) == sc


# -- CLI ---------------------------------------------------------------------------

def _write(tmp_path, text, name="s.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_solve_without_arrivals(tmp_path):
    text = MINIMAL.replace("a = 1", "a = 0").replace("checkpoints = 1", "checkpoints = 0, 0.5, 1")
    text += "\n[grid]\nN = 5\nx_max = 2\ndx = 0.01\n"
    out = tmp_path / "out"
    assert cli.main(["solve", "--config", _write(tmp_path, text), "--out", str(out)]) == 0
    rows = _read_csv(out / "trajectory.csv")
    head = rows[0]
    assert head[:3] == ["t", "idle_0", "Q_0"] and head[-2:] == ["total_mass", "lost_mass"]
    assert [float(r[0]) for r in rows[1:]] == [0.0, 0.5, 1.0]
    assert all(float(r[1]) == 1.0 for r in rows[1:])


def test_simulate_writes_csv(tmp_path):
    text = MINIMAL + "\n[sim]\nn_reps = 200\nseed = 1\n"
    out = tmp_path / "o"
    assert cli.main(["simulate", "--config", _write(tmp_path, text), "--out", str(out)]) == 0
    rows = _read_csv(out / "simulation.csv")
    assert rows[0] == ["t", "state_label", "probability", "std_error"]
    assert sum(float(r[2]) for r in rows[1:]) == pytest.approx(1.0)


def test_output_dir_from_environment(tmp_path, monkeypatch):
    text = MINIMAL.replace("a = 1", "a = 0") + "\n[grid]\nN = 5\nx_max = 1\ndx = 0.1\n"
    monkeypatch.setenv("BULKQ_OUT", str(tmp_path / "env"))
    assert cli.main(["solve", "--config", _write(tmp_path, text)]) == 0
    assert (tmp_path / "env" / "trajectory.csv").exists()


def test_spectral_warns_but_succeeds(tmp_path, capsys):
    out = tmp_path / "sp"
    code = cli.main(["spectral", "--config", str(CONFIGS / "spectral_k2B3.cfg"), "--out", str(out)])
    captured = capsys.readouterr()
    assert code == 0
    assert "printed_closed_form_deviations WARN" in captured.out
    assert "warning" in captured.err
    rows = _read_csv(out / "closed_form_report.csv")
    d11 = [r for r in rows if r[2:4] == ["d", "1,1"]]
    assert len(d11) == 1 and d11[0][-1] == "WARN"
    assert float(d11[0][6]) == pytest.approx(0.380952380952381, rel=1e-12)
    for name in ("residuals.csv", "char_indicator.csv"):
        assert (out / name).exists()


def test_config_error_exit_code(tmp_path, capsys):
    bad = MINIMAL.replace("k = 1", "k = 3").replace("B = 1", "B = 2")
    assert cli.main(["solve", "--config", _write(tmp_path, bad)]) == 2
    assert "k must not exceed B" in capsys.readouterr().err
    assert cli.main(["solve", "--config", str(tmp_path / "missing.cfg")]) == 2


def test_runtime_fault_exit_code(tmp_path, capsys):
    # checkpoint 0.55 is not on the dt = 0.1 time grid
    text = MINIMAL.replace("checkpoints = 1", "checkpoints = 0.55")
    text += "\n[grid]\nN = 5\nx_max = 2\ndx = 0.1\n"
    assert cli.main(["solve", "--config", _write(tmp_path, text), "--out", str(tmp_path)]) == 3
    assert "runtime fault" in capsys.readouterr().err


def test_failed_check_exit_code(tmp_path, capsys):
    # a very coarse grid misses the oracle by far more than the tolerance
    text = MINIMAL + "\n[grid]\nN = 10\nx_max = 10\ndx = 0.1\n\n[sim]\nn_reps = 2000\nseed = 5\n"
    out = tmp_path / "v"
    assert cli.main(["verify", "--config", _write(tmp_path, text), "--out", str(out)]) == 1
    lines = (out / "verify_summary.txt").read_text().splitlines()
    status = dict(line.split()[:2] for line in lines[1:])
    assert status["solver_vs_uniformization"] == "FAIL"
    assert status["conservation"] == "PASS"


@pytest.mark.skipif(shutil.which("bulkq") is None, reason="console script not installed")
def test_console_script(tmp_path):
    text = MINIMAL.replace("a = 1", "a = 0") + "\n[grid]\nN = 5\nx_max = 1\ndx = 0.1\n"
    res = subprocess.run(["bulkq", "solve", "--config", _write(tmp_path, text),
                          "--out", str(tmp_path / "cs")], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    rows = _read_csv(tmp_path / "cs" / "trajectory.csv")
    assert np.allclose([float(r[1]) for r in rows[1:]], 1.0)
