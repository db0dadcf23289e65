import json
import math

import numpy as np
import pytest

from forster_nhqc import atom, cli
from forster_nhqc.config import (ConfigError, ScenarioConfig, SweepSpec, parse_config_text,
                                 parse_input_state, parse_quantity)


def write(tmp_path, text, name="scenario.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


def run(tmp_path, command, text="", *extra, out="out"):
    cfg = write(tmp_path, text)
    code = cli.main([command, "--config", str(cfg), "--out", str(tmp_path / out), "--jobs", "1",
                     *extra])
    return code, tmp_path / out


# -- parsing ---------------------------------------------------------------------


@pytest.mark.parametrize("text, value", [
    ("2pi*4.43 MHz", 2 * math.pi * 4.43e6),
    ("-2pi*15 MHz", -2 * math.pi * 15e6),
    ("21.5 us", 21.5e-6),
    ("21.5 μs", 21.5e-6),
    ("1 kHz", 1e3),
    ("0.25", 0.25),
    ("1e-3 s", 1e-3),
])
def test_parse_quantity(text, value):
    assert parse_quantity(text) == pytest.approx(value, rel=1e-15)


@pytest.mark.parametrize("text", ["abc", "3 parsecs", "2pi*"])
def test_parse_quantity_errors(text):
    with pytest.raises(ConfigError):
        parse_quantity(text)


def test_config_text_and_aliases():
    cfg = parse_config_text("""
        # physical CNOT with decay
        preset = physical
        gamma  = 1 kHz
        delta' = 2pi*1 MHz
        runs   = 7
        snr    = inf
        sweep  = defect -2pi*15 MHz 2pi*15 MHz 21
    """)
    assert cfg.gamma == 1e3 and cfg.n_runs == 7 and math.isinf(cfg.snr)
    assert cfg.delta_prime == pytest.approx(2 * math.pi * 1e6)
    assert cfg.sweep.points == 21 and cfg.sweep.values[0] == pytest.approx(-2 * math.pi * 15e6)
    T, V, ob = cfg.resolved()
    assert V * T == pytest.approx(atom.PHYSICAL_VT)
    assert ob == pytest.approx(2 * math.pi * 4.43e6)


def test_resolution_rules():
    assert ScenarioConfig().resolved() == (1.0, 18000.0, 600.0)
    assert ScenarioConfig(T=2.0).resolved() == (2.0, 9000.0, 300.0)
    assert ScenarioConfig(V=9000.0).resolved()[0] == pytest.approx(2.0)
    assert ScenarioConfig(T=1.0, V=100.0).resolved()[:2] == (1.0, 100.0)


@pytest.mark.parametrize("text, field", [
    ("gate = toffoli", "gate"),
    ("frame = lab", "frame"),
    ("T = -1", "T"),
    ("bogus = 3", "bogus"),
    ("n_points = 100", "n_points"),
    ("sweep = epsilon 0.1 -0.1 5", "sweep"),
    ("sweep = temperature 0 1 5", "sweep"),
    ("sweep = epsilon 0 1 0", "sweep"),
    ("input_state = 00+22", "input_state"),
    ("gate = custom", "v_a"),
    ("steps = many", "steps"),
    ("just words", "line"),
])
def test_config_errors_name_field(text, field):
    with pytest.raises(ConfigError, match=field):
        parse_config_text(text)


def test_input_state():
    assert np.allclose(parse_input_state("00+10"), np.array([1, 0, 1, 0]) / math.sqrt(2))


def test_sweep_spec():
    s = SweepSpec.parse("epsilon -0.1 0.1 21")
    assert s.values.size == 21 and s.values[10] == pytest.approx(0.0, abs=1e-15)


def test_config_hash_is_stable():
    a, b = ScenarioConfig(eta=0.5), ScenarioConfig(eta=0.5)
    assert a.hash() == b.hash() != ScenarioConfig(eta=0.6).hash()


# -- commands -------------------------------------------------------------------


def test_exit_code_for_bad_config(tmp_path, capsys):
    code, _ = run(tmp_path, "design", "eta = -1\n")
    assert code == 2 and "eta" in capsys.readouterr().err
    code = cli.main(["design", "--config", str(tmp_path / "missing.cfg"),
                     "--out", str(tmp_path / "x")])
    assert code == 2
    code, _ = run(tmp_path, "sweep", "")
    assert code == 2


def test_design_summary(tmp_path):
    code, out = run(tmp_path, "design")
    assert code == 0
    man = json.loads((out / "design.json").read_text())
    assert {"config_hash", "versions", "wall_time", "rows"} <= set(man)
    s = man["summary"]
    assert s["omega_max_T"] == pytest.approx(36.05, rel=5e-3)
    assert s["q_s"] < 1e-10 and s["q_s_quadrature"] < 1e-10
    assert (out / "pulse.csv").read_text().startswith("t,omega_x,omega_y")


def test_design_physical_units(tmp_path):
    code, out = run(tmp_path, "design", "preset = physical\nT = 21.5 us\n")
    assert code == 0
    s = json.loads((out / "design.json").read_text())["summary"]
    assert abs(s["omega_max_over_2pi"] - 0.27e6) <= 0.005e6


def test_unit_round_trip(tmp_path):
    """The same scenario in SI units and in dimensionless form agrees to 1e-9."""
    si = ScenarioConfig(preset="physical", steps=20000)
    T, V, ob = si.resolved()
    dimless = ScenarioConfig(T=1.0, V=V * T, omega_b=ob * T, steps=20000)
    f_si = cli.evaluate(si)["fidelity"]
    f_dl = cli.evaluate(dimless)["fidelity"]
    assert abs(f_si - f_dl) < 1e-9


def test_sweep_rows_and_reproducibility(tmp_path):
    text = "frame = effective\nsweep = epsilon -0.1 0.1 5\n"
    code, out1 = run(tmp_path, "sweep", text, out="a")
    assert code == 0
    code, out2 = run(tmp_path, "sweep", text, "--jobs", "2", out="b")
    assert code == 0
    body1 = (out1 / "sweep_epsilon.csv").read_text()
    assert body1 == (out2 / "sweep_epsilon.csv").read_text()
    assert len(body1.splitlines()) == 6
    m1 = json.loads((out1 / "sweep.json").read_text())
    m2 = json.loads((out2 / "sweep.json").read_text())
    assert m1["config_hash"] == m2["config_hash"] and len(m1["rows"]) == 5


def test_sweep_range_flags(tmp_path):
    code, out = run(tmp_path, "sweep", "frame = effective\n", "--channel", "epsilon",
                    "--range", "-0.05", "0.05", "3")
    assert code == 0 and len((out / "sweep_epsilon.csv").read_text().splitlines()) == 4
    code, _ = run(tmp_path, "sweep", "", "--channel", "epsilon")
    assert code == 2


def test_failed_points_are_recorded(tmp_path):
    # a deliberately coarse integrator fails its certificate on every point
    text = "steps = 64\ncertify = true\nsweep = epsilon 0 0.01 2\n"
    code, out = run(tmp_path, "sweep", text)
    assert code == 3
    rows = json.loads((out / "sweep.json").read_text())["rows"]
    assert len(rows) == 2 and all(r["status"] == "failed" for r in rows)
    assert all("ConvergenceError" in r["error"] for r in rows)


def test_montecarlo_noise_disabled_equals_baseline(tmp_path):
    text = "frame = effective\nruns = 3\nsnr = inf\n"
    code, out = run(tmp_path, "montecarlo", text)
    assert code == 0
    rows = json.loads((out / "montecarlo.json").read_text())["rows"]
    base = cli.evaluate(ScenarioConfig(frame="effective"))["fidelity"]
    assert all(r["fidelity"] == base for r in rows)


def test_montecarlo_seeds_reproducible(tmp_path):
    text = "frame = effective\nruns = 2\nsnr = 10\nseed = 5\n"
    _, out1 = run(tmp_path, "montecarlo", text, out="a")
    _, out2 = run(tmp_path, "montecarlo", text, out="b")
    a = (out1 / "montecarlo.csv").read_text()
    assert a == (out2 / "montecarlo.csv").read_text()
    assert [int(line.split(",")[1]) for line in a.splitlines()[1:]] == [5, 6]


@pytest.fixture(scope="module")
def closed_table(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("tt")
    code, out = run(tmp, "truthtable")
    assert code == 0
    return out


def test_truthtable_closed(closed_table):
    s = json.loads((closed_table / "truthtable.json").read_text())["summary"]
    # converged value: the |10>, |11> rows lose 2.2e-3 to states outside the subspace
    assert s["min_success"] == pytest.approx(0.997764, abs=1e-5)
    assert len((closed_table / "truthtable.txt").read_text().splitlines()) == 5


def test_truthtable_closed_reaches_0998(closed_table):
    """Closed-system minimum success population of at least 0.998.

    Known failure: the converged minimum is 0.99776 (see the decisions ledger).
    """
    s = json.loads((closed_table / "truthtable.json").read_text())["summary"]
    assert s["min_success"] >= 0.998


def test_simulate_and_phases(tmp_path):
    code, out = run(tmp_path, "simulate", "trace_points = 11\n")
    assert code == 0
    s = json.loads((out / "simulate.json").read_text())["summary"]
    assert abs(s["fidelity_full"] - 0.9989) < 1e-3 and s["fidelity_effective"] > 0.99999
    for name in ("fidelity.csv", "populations.csv", "phases.csv"):
        assert len((out / name).read_text().splitlines()) > 2
    code, out = run(tmp_path, "phases", out="ph")
    assert code == 0
    s = json.loads((out / "phases.json").read_text())["summary"]
    assert abs(s["dynamic_T_simulated"]) < 1e-6
    assert abs(s["geometric_T_simulated"] - math.pi) < 1e-6


def test_shipped_configs_parse():
    from pathlib import Path
    from forster_nhqc.config import load_config
    paths = sorted((Path(__file__).parents[1] / "configs").glob("*.cfg"))
    assert len(paths) >= 5
    for path in paths:
        load_config(path)
