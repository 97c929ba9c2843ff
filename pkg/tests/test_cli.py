import csv
import json

import numpy as np
import pytest

from mflsm import cli, experiment, forward
from mflsm.errors import NumericalError


@pytest.fixture(scope="module")
def reproduced(tmp_path_factory):
    out = tmp_path_factory.mktemp("repro")
    assert cli.main(["reproduce", "--out", str(out)]) == 0
    return out


def test_config_round_trip(tmp_path, capsys):
    assert cli.main(["config"]) == 0
    text = capsys.readouterr().out
    path = tmp_path / "exp.json"
    path.write_text(text)
    spec = experiment.load_spec(path)
    assert spec.to_dict() == experiment.ExperimentSpec().validate().to_dict()


def test_runs_expand_one_per_cell():
    spec = experiment.ExperimentSpec().validate()
    runs = spec.runs()
    assert len(runs) == len(spec.cells()) * len(spec.methods) == 10
    assert len({r.label for r in runs}) == len(runs)
    ids = [spec.run_id(r) for r in runs]
    assert len(set(ids)) == len(ids)
    assert ids == [experiment.ExperimentSpec().validate().run_id(r) for r in runs]


def test_reference_alphas():
    spec = experiment.ExperimentSpec().validate()
    assert spec.alpha_for("MLSM_parallel", 27.0) == 1e-2
    assert spec.alpha_for("MLSM_parallel", 12.0) == 1e-6
    assert spec.alpha_for("MF_MLSM", 12.0) == 1e-6


def test_forward_files(tmp_path):
    spec = experiment.ExperimentSpec().validate()
    paths = experiment.cmd_forward(spec, tmp_path)
    assert sorted(p.name for p in paths) == ["clean.lsmd", "snr12.lsmd", "snr27.lsmd"]
    ds = forward.read_dataset(tmp_path / "data" / "clean.lsmd")
    assert ds.shape == (8, 50, 50) and not ds.noise_applied
    assert forward.read_dataset(tmp_path / "data" / "snr12.lsmd").snr_db == 12


def test_forward_seed_behaviour(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    for out, seed in ((a, "0"), (b, "0"), (c, "1")):
        assert cli.main(["forward", "--out", str(out), "--seed", seed]) == 0
    for name in ("clean.lsmd", "snr27.lsmd", "snr12.lsmd"):
        assert (a / "data" / name).read_bytes() == (b / "data" / name).read_bytes()
    assert (a / "data" / "clean.lsmd").read_bytes() == (c / "data" / "clean.lsmd").read_bytes()
    assert (a / "data" / "snr27.lsmd").read_bytes() != (c / "data" / "snr27.lsmd").read_bytes()


def test_reproduce_table_rows(reproduced):
    rows = list(csv.DictReader((reproduced / "report" / "coverage_table_long.csv").open()))
    assert len(rows) == 8
    assert {(r["aperture_deg"], r["snr_db"]) for r in rows} == {("180", "27"), ("180", "12"), ("144", "27"), ("144", "12")}
    wide = list(csv.DictReader((reproduced / "report" / "coverage_table.csv").open()))
    assert len(wide) == 4
    for r in rows:
        assert float(r["threshold_used"]) > 0


def test_reproduce_outputs(reproduced):
    maps = sorted(p.name for p in (reproduced / "maps").glob("*.json"))
    assert len(maps) == 10
    for stem in (p[: -len(".json")] for p in maps):
        assert (reproduced / "maps" / f"{stem}.csv").exists()
        assert (reproduced / "maps" / f"{stem}.pgm").exists()
    figs = sorted(p.name for p in (reproduced / "figures").glob("*.png"))
    assert figs == ["aperture_144.png", "aperture_180.png", "aperture_93.6.png"]
    all_rows = list(csv.DictReader((reproduced / "report" / "coverage_all.csv").open()))
    assert len(all_rows) == 10
    spec = json.loads((reproduced / "experiment.json").read_text())
    assert spec["seed"] == 0


def test_report_stage_rescores_maps(reproduced, tmp_path, capsys):
    assert cli.main(["report", "--maps", str(reproduced / "maps"), "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "Aperture 180 deg, SNR = 27 dB" in out
    assert (tmp_path / "report" / "coverage_table_long.csv").read_bytes() == (
        reproduced / "report" / "coverage_table_long.csv"
    ).read_bytes()


def test_limited_aperture_panels(tmp_path):
    assert cli.main(["reproduce", "--aperture", "93.6", "--snr", "27", "--out", str(tmp_path)]) == 0
    metas = [json.loads(p.read_text()) for p in (tmp_path / "maps").glob("*.json")]
    assert len(metas) == 2
    alphas = {m["method"]: m["alpha"] for m in metas}
    assert alphas == {"MLSM_parallel": 1e-2, "MF_MLSM": 1e-6}
    assert [p.name for p in (tmp_path / "figures").glob("*.png")] == ["aperture_93.6.png"]


def test_staged_invert(tmp_path):
    assert cli.main(["forward", "--out", str(tmp_path)]) == 0
    code = cli.main(
        ["invert", "--data", str(tmp_path / "data"), "--out", str(tmp_path), "--aperture", "144", "--snr", "inf",
         "--methods", "LSM", "--alpha-mlsm", "1e-3"]
    )
    assert code == 0
    metas = [json.loads(p.read_text()) for p in (tmp_path / "maps").glob("*.json")]
    assert len(metas) == 1 and metas[0]["method"] == "LSM_single" and metas[0]["alpha"] == 1e-3


def test_empty_methods_is_invalid(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"methods": []}))
    out = tmp_path / "out"
    assert cli.main(["reproduce", "--config", str(cfg), "--out", str(out)]) == 2
    assert not out.exists()


def test_malformed_json_reports_position(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{\n  "seed": 1,\n  oops\n}')
    assert cli.main(["forward", "--config", str(cfg)]) == 2
    assert "bad.json:3:3" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        ["forward", "--threshold", "median"],
        ["forward", "--methods", "DSM"],
        ["forward", "--aperture", "100"],
    ],
)
def test_invalid_options(argv, tmp_path):
    assert cli.main(argv + ["--out", str(tmp_path / "x")]) == 2


def test_numerical_failure_exit_code(monkeypatch, tmp_path):
    def boom(*a, **k):
        raise NumericalError("matrix is singular")

    monkeypatch.setattr(experiment, "cmd_forward", boom)
    assert cli.main(["forward", "--out", str(tmp_path)]) == 3


def test_stdout_is_only_the_table(tmp_path, capsys):
    assert cli.main(["reproduce", "--aperture", "180", "--snr", "27", "--no-figures", "-v", "--out", str(tmp_path)]) == 0
    cap = capsys.readouterr()
    lines = cap.out.strip().splitlines()
    assert lines[0].startswith("Setting") and len(lines) == 2
    assert not (tmp_path / "figures").exists()


def test_mf_mode_flag(tmp_path):
    assert cli.main(["reproduce", "--aperture", "180", "--snr", "27", "--methods", "MF_MLSM", "--mf-mode", "stacked",
                     "--no-figures", "--out", str(tmp_path)]) == 0
    meta = json.loads(next((tmp_path / "maps").glob("*.json")).read_text())
    assert meta["mf_mode"] == "stacked"


def test_load_maps_round_trip(reproduced):
    maps = experiment.load_maps(reproduced / "maps")
    m = next(x for x in maps if x.method == "MF_MLSM" and x.meta["aperture_deg"] == 144.0 and x.snr_db == 12)
    assert m.values.shape == (46, 46)
    assert np.isfinite(m.values).all()


@pytest.mark.filterwarnings("ignore:L-curve has no interior corner")
def test_l_curve_policy(tmp_path):
    cfg = tmp_path / "lc.json"
    cfg.write_text(json.dumps({"scene": {"alpha_policy": "l_curve"}, "settings": [[180, 27]], "methods": ["MLSM"]}))
    assert cli.main(["reproduce", "--config", str(cfg), "--no-figures", "--out", str(tmp_path / "o")]) == 0
    meta = json.loads(next((tmp_path / "o" / "maps").glob("*.json")).read_text())
    assert 1e-3 <= meta["alpha"] <= 1e-1
