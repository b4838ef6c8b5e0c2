import json

import pytest

from hallmhd.algebra import sobolev_norm_sq
from hallmhd.cli import ConfigError, main, parse_config
from hallmhd.data import ConstraintError, EmptyAnnulusError, build_beltrami_seed, build_cutoff, check_annulus
from hallmhd.io import load_snapshot, load_state, read_time_series
from hallmhd.reference import reference_state

SMALL = ["params.m0=1", "run.n=16", "run.horizon=0.05", "run.samples=4"]


def write_ini(path, text):
    path.write_text(text)
    return str(path)


def test_defaults_and_overrides(tmp_path):
    cfg = parse_config(write_ini(tmp_path / "c.ini", "[params]\nnu = 30\n[run]\nn = 32\n"), ["mu=40", "stepper.dt_max=0.02"], seed=7)
    assert cfg.params.nu == 30 and cfg.params.mu == 40 and cfg.run.n == 32
    assert cfg.stepper.dt_max == 0.02 and cfg.run.rng_seed == 7
    assert cfg.horizon == pytest.approx(20 / 30)
    assert cfg.as_dict()["run"]["horizon"] == pytest.approx(20 / 30)


@pytest.mark.parametrize(
    "text, overrides, match",
    [
        ("[params]\nfoo = 1\n", [], "unknown key"),
        ("[physics]\nnu = 1\n", [], "unknown section"),
        ("[run]\nn = many\n", [], "cannot parse"),
        ("", ["n"], "KEY=VAL"),
        ("", ["run.mode=dance"], "unknown mode"),
        ("", ["run.samples=1"], "samples"),
        ("", ["stepper.dt_min=1"], "dt_min"),
    ],
)
def test_invalid_configs(tmp_path, text, overrides, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(write_ini(tmp_path / "c.ini", text), overrides)


def test_constraint_messages():
    with pytest.raises(ConstraintError, match=r"0 < delta <= 1/2"):
        parse_config(None, ["delta=0.7"])
    with pytest.raises(EmptyAnnulusError, match="minimal feasible delta"):
        parse_config(None, ["m0=1", "delta=0.05", "n=16"])


def test_exit_codes(tmp_path, capsys):
    assert main(["gen-data", "--override", "delta=0.9", "--output", str(tmp_path / "x")]) == 2
    assert "0 < delta <= 1/2" in capsys.readouterr().err
    assert main(["evolve", "--output", str(tmp_path / "y"), "--override", "stepper.dt_min=0.5", "--override", "stepper.dt_max=1"] + sum((["--override", o] for o in SMALL), [])) == 3
    assert (tmp_path / "y" / "abort.snap").exists()
    assert "ABORTED" in (tmp_path / "y" / "report.txt").read_text()


def test_gen_data_snapshot(tmp_path):
    out = tmp_path / "g"
    args = ["gen-data", "--output", str(out), "--seed", "3"] + sum((["--override", o] for o in SMALL), [])
    assert main(args) == 0
    fields, header = load_snapshot(out / "data.snap")
    assert set(fields) == {"v0", "u0", "b0"} and header["meta"]["rng_seed"] == 3
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["rng_seed"] == 3 and "numpy" in manifest["versions"]


def test_evolve_outputs_are_consistent(tmp_path):
    out = tmp_path / "e"
    assert main(["evolve", "--output", str(out)] + sum((["--override", o] for o in SMALL), [])) == 0
    header, rows = read_time_series(out / "timeseries.jsonl")
    assert [r["t"] for r in rows] == pytest.approx([0, 0.0125, 0.025, 0.0375, 0.05])
    assert "output_dir" not in header["config"]["run"]
    # energy recomputed from the final snapshot
    cfg = parse_config(None, SMALL)
    state, _ = load_state(out / "final.snap")
    seed = build_beltrami_seed(cfg.params, state.grid, rng_seed=0)
    ref = reference_state(seed, build_cutoff(cfg.params, state.grid), cfg.params, state.t)
    e = sobolev_norm_sq(state.u_hat - ref.f_tilde, 3) + sobolev_norm_sq(state.b_hat - ref.g_tilde, 3)
    assert e == pytest.approx(rows[-1]["e_u"] + rows[-1]["e_b"], rel=1e-12)
    timing = [json.loads(x) for x in (out / "timing.jsonl").read_text().splitlines()]
    assert len(timing) == len(rows)
    assert "[PASS] exact identities" in (out / "report.txt").read_text()


def test_sweep_runs_each_combination(tmp_path, capsys):
    out = tmp_path / "s"
    args = ["sweep", "--mode", "verify-seed", "--output", str(out), "--vary", "params.delta=0.25,0.3"]
    args += sum((["--override", o] for o in SMALL), [])
    assert main(args) == 0
    reports = sorted(out.glob("run_*/report.txt"))
    assert len(reports) == 2
    assert all("[PASS] seed correctness" in r.read_text() for r in reports)
    assert main(["sweep", "--vary", "params.bogus=1", "--output", str(out)]) == 2


def test_annulus_feasibility_at_m0_4(capsys, tmp_path):
    # P = 32: |m| = 5 modes such as (5,0,0) and (4,3,0) sit at |xi| = 0.98 and survive dealiasing on n = 32
    cfg = parse_config(None, ["run.n=32", "params.delta=0.05", "params.m0=4"])
    assert check_annulus(cfg.params.grid(32), 0.05) > 0
    # on n = 8 only |m_axis| <= 2 is retained, so nothing reaches |xi| = 0.95
    with pytest.raises(EmptyAnnulusError) as err:
        parse_config(None, ["run.n=8", "params.delta=0.05", "params.m0=4"])
    assert err.value.minimal_delta > 0.05
    assert main(["gen-data", "--output", str(tmp_path / "a"), "--override", "run.n=8",
                 "--override", "delta=0.05", "--override", "m0=4"]) == 2
    assert "minimal feasible delta" in capsys.readouterr().err


def test_minimal_config_fills_defaults(tmp_path):
    ini = write_ini(tmp_path / "m.ini", "[run]\nmode = gen-data\nn = 64\n[params]\nm0 = 4\ndelta = 0.25\n")
    cfg = parse_config(ini, [])
    assert cfg.run.mode == "gen-data" and cfg.params.nu == 20.0 and cfg.stepper.dt_max > 0
    assert cfg.horizon == pytest.approx(20 / min(cfg.params.nu, cfg.params.mu))


def test_verify_seed_reports_each_property(tmp_path, capsys):
    out = tmp_path / "v"
    assert main(["verify-seed", "--output", str(out)] + sum((["--override", o] for o in SMALL), [])) == 0
    text = (out / "report.txt").read_text()
    for label in ("curl v0", "Fourier support", "L1-Fourier", "weighted decay"):
        line = next(x for x in text.splitlines() if label in x)
        assert line.startswith("[PASS]") or line.startswith("[FAIL]")


def test_full_report_wiring(tmp_path):
    out = tmp_path / "f"
    small_checks = [
        "checks.seed_n=16", "checks.decay_n=16", "checks.delta_n=32", "checks.delta_m0=2",
        "checks.commutator_ns=8,16", "checks.commutator_pairs=3", "checks.trend_n=16",
        "checks.trend_m0=1,2", "checks.trend_dt_max=0.05", "checks.determinism_n=16",
        "params.m0=1", "run.horizon=0.1",
    ]
    status = main(["full-report", "--output", str(out)] + sum((["--override", o] for o in small_checks), []))
    assert status == 0
    text = (out / "report.txt").read_text()
    table = text[text.index("check "):].splitlines()[1:]
    assert len(table) == 8
    assert all(("PASS" in row) != ("FAIL" in row) for row in table)
