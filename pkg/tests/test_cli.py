import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from zinbnngp import cli
from zinbnngp.cli import OUT_ENV, main, sha256
from zinbnngp.gibbs import ZinbSampler

# coefficient and hyperparameter rows of a simulation-study results table
REPORT_ROWS = ["alpha0", "alpha1", "beta0", "beta1", "l11", "sigma11", "l12", "sigma12",
              "l21", "sigma21", "l22", "sigma22", "sigma_eps11", "sigma_eps12", "sigma_eps21",
              "sigma_eps22", "r"]


def manifest(out):
    return json.loads((Path(out) / "manifest.json").read_text())


def tree(out):
    return {p.relative_to(out).as_posix(): p.read_bytes()
            for p in sorted(Path(out).rglob("*")) if p.is_file() and p.name != "manifest.json"}


@pytest.fixture(scope="module")
def desk(tmp_path_factory):
    """A desk-scale simulated dataset and a short fit of it."""
    root = tmp_path_factory.mktemp("desk")
    assert main(["simulate", "--preset", "sim3", "--scale", "0.3", "--seed", "3", "--out", str(root / "sim")]) == 0
    assert main(["fit", "--data", str(root / "sim" / "data.csv"), "--iters", "10", "--burn", "5", "--thin", "1",
                 "--seed", "4", "--out", str(root / "fit")]) == 0
    return root


# -- simulate ----------------------------------------------------------------------

def test_sim1_preset_dimensions(tmp_path):
    assert main(["simulate", "--preset", "sim1", "--seed", "0", "--out", str(tmp_path)]) == 0
    m = manifest(tmp_path)
    assert (m["S"], m["T"], m["N"]) == (200, 20, 4000)
    data = pd.read_csv(tmp_path / "data.csv")
    assert data["location"].nunique() == 200 and data["time"].nunique() == 20


def test_sim3_preset_is_poisson(desk):
    truth = json.loads((desk / "sim" / "truth.json").read_text())
    assert truth["design"]["repetition"] == "poisson" and truth["design"]["lam"] == 2.0


def test_scaled_preset(desk):
    m = manifest(desk / "sim")
    assert (m["S"], m["T"]) == (60, 6)
    assert {f["path"] for f in m["files"]} == {"data.csv", "truth.json"}


def test_simulate_design_from_config(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("design:\n  S: 7\n  T: 3\n  seed: 2\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert (manifest(tmp_path / "o")["S"], manifest(tmp_path / "o")["T"]) == (7, 3)


# -- fit -----------------------------------------------------------------------------

def test_fit_retains_requested_draws(desk):
    samples = desk / "fit" / "samples"
    for f in samples.glob("*.csv"):
        assert len(pd.read_csv(f)) == 5, f.name
    m = manifest(desk / "fit")
    assert m["status"] == "ok" and m["exit_code"] == 0
    assert "r" in m["acceptance"]["samples"]


def test_fit_emits_all_table_parameters(desk):
    out = desk / "sum5"
    assert main(["summarize", str(desk / "fit"), "--out", str(out)]) == 0
    table = pd.read_csv(out / "summary.csv")
    assert set(REPORT_ROWS) <= set(table["parameter"])
    assert table["parameter"].str.match(r"a\[").sum() == 60


def test_manifest_inventory_matches_files(desk):
    out = desk / "fit"
    m = manifest(out)
    listed = {f["path"]: f for f in m["files"]}
    on_disk = tree(out)
    assert set(listed) == set(on_disk)
    for path, entry in listed.items():
        assert entry["bytes"] == len(on_disk[path])
        assert entry["sha256"] == sha256(out / path)
    for key in ("config", "seed", "version", "started", "finished"):
        assert key in m


def test_same_seed_gives_identical_sample_files(desk, tmp_path):
    assert main(["fit", "--data", str(desk / "sim" / "data.csv"), "--iters", "10", "--burn", "5",
                 "--seed", "4", "--out", str(tmp_path)]) == 0
    assert tree(tmp_path) == tree(desk / "fit")


def test_parallel_chains_write_subdirectories(desk, tmp_path):
    assert main(["fit", "--data", str(desk / "sim" / "data.csv"), "--iters", "6", "--burn", "3",
                 "--chains", "2", "--out", str(tmp_path / "f")]) == 0
    assert sorted(p.name for p in (tmp_path / "f").iterdir() if p.is_dir()) == ["chain_1", "chain_2"]
    a = pd.read_csv(tmp_path / "f" / "chain_1" / "r.csv")
    b = pd.read_csv(tmp_path / "f" / "chain_2" / "r.csv")
    assert not a.equals(b)
    assert main(["summarize", str(tmp_path / "f"), "--out", str(tmp_path / "s")]) == 0
    assert manifest(tmp_path / "s")["n_draws"] == 6


# -- summarize -------------------------------------------------------------------------

def test_summarize_with_truth_fitted_and_groups(desk, tmp_path):
    data = pd.read_csv(desk / "sim" / "data.csv")
    locs = sorted(data["location"].unique())
    groups = pd.DataFrame({"location": locs, "group": [("low", "mid", "high")[i % 3] for i in range(len(locs))]})
    groups.to_csv(tmp_path / "groups.csv", index=False)
    out = tmp_path / "s"
    assert main(["summarize", str(desk / "fit" / "samples"), "--truth", str(desk / "sim" / "truth.json"),
                 "--data", str(desk / "sim" / "data.csv"), "--fitted", "--rr", str(tmp_path / "groups.csv"),
                 "--out", str(out)]) == 0
    table = pd.read_csv(out / "summary.csv")
    assert (table["ess"] <= 5 + 1e-9).all()
    rec = pd.read_csv(out / "recovery.csv")
    assert set(REPORT_ROWS) <= set(rec["parameter"])
    assert rec["covered"].isin([True, False]).all()
    rr = pd.read_csv(out / "risk_ratio.csv")
    assert len(rr) == 3 * 6 and set(rr["entity"]) == {"low", "mid", "high"}
    assert np.allclose(rr.loc[rr.entity == "low", "mean"], 1.0)
    units = pd.read_csv(out / "fitted_units.csv")
    assert list(units.columns) == ["entity", "time", "mean", "lo", "hi"]
    assert manifest(out)["rr_reference"] == "low"


def test_malformed_samples_report_file_and_line(desk, tmp_path):
    import shutil
    bad = tmp_path / "samples"
    shutil.copytree(desk / "fit" / "samples", bad)
    lines = (bad / "r.csv").read_text().splitlines()
    lines[2] = "not-a-number"
    (bad / "r.csv").write_text("\n".join(lines) + "\n")
    assert main(["summarize", str(bad), "--out", str(tmp_path / "s")]) == 3
    assert "r.csv:3" in manifest(tmp_path / "s")["error"]["message"]


# -- errors and exit codes ----------------------------------------------------------------

def test_missing_out_is_config_error(monkeypatch, capsys):
    monkeypatch.delenv(OUT_ENV, raising=False)
    assert main(["simulate", "--preset", "sim1"]) == 2
    assert OUT_ENV in capsys.readouterr().err


def test_env_out_used_only_without_flag(monkeypatch, tmp_path):
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "env"))
    assert main(["simulate", "--preset", "sim3", "--scale", "0.05", "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "data.csv").exists() and not (tmp_path / "env").exists()
    assert main(["simulate", "--preset", "sim3", "--scale", "0.05"]) == 0
    assert (tmp_path / "env" / "data.csv").exists()


def test_bad_config_exit_2_with_manifest(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("sampler:\n  iterations: 3\n")
    out = tmp_path / "o"
    assert main(["fit", "--data", "x.csv", "--config", str(cfg), "--out", str(out)]) == 2
    m = manifest(out)
    assert m["status"] == "error" and m["error"]["type"] == "SchemaError" and m["files"] == []


def test_bad_data_exit_3_without_partial_output(desk, tmp_path):
    data = pd.read_csv(desk / "sim" / "data.csv")
    data.loc[4, "y"] = -1
    data.to_csv(tmp_path / "bad.csv", index=False)
    out = tmp_path / "o"
    assert main(["fit", "--data", str(tmp_path / "bad.csv"), "--iters", "4", "--burn", "2", "--out", str(out)]) == 3
    assert [p.name for p in out.iterdir()] == ["manifest.json"]
    assert main(["fit", "--data", str(tmp_path / "none.csv"), "--out", str(tmp_path / "o2")]) == 3


def test_invalid_prior_rejected_before_output(desk, tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("priors:\n  alpha_mean: [0, 0, 0, 0]\n")
    out = tmp_path / "o"
    assert main(["fit", "--data", str(desk / "sim" / "data.csv"), "--config", str(cfg), "--out", str(out)]) == 2
    assert [p.name for p in out.iterdir()] == ["manifest.json"]


def test_numerical_failure_exit_4_names_step(desk, tmp_path, monkeypatch):
    def broken(self):
        raise np.linalg.LinAlgError("not positive definite")

    monkeypatch.setattr(ZinbSampler, "step_count_block", broken)
    out = tmp_path / "o"
    assert main(["fit", "--data", str(desk / "sim" / "data.csv"), "--iters", "4", "--burn", "2",
                 "--out", str(out)]) == 4
    err = manifest(out)["error"]
    assert err["step"] == "count_block" and err["iteration"] == 0
    assert not (out / "samples").exists()


def test_unwritable_out(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["simulate", "--preset", "sim1", "--out", str(blocker / "sub")]) == 2


# -- end to end ------------------------------------------------------------------------------

def _pipeline(root):
    assert main(["simulate", "--preset", "sim3", "--scale", "0.15", "--seed", "11", "--out", str(root / "sim")]) == 0
    assert main(["fit", "--data", str(root / "sim" / "data.csv"), "--iters", "8", "--burn", "4",
                 "--seed", "12", "--out", str(root / "fit")]) == 0
    assert main(["summarize", str(root / "fit"), "--truth", str(root / "sim" / "truth.json"),
                 "--data", str(root / "sim" / "data.csv"), "--fitted", "--out", str(root / "sum")]) == 0
    return tree(root)


def test_end_to_end_determinism(tmp_path):
    a = _pipeline(tmp_path / "a")
    b = _pipeline(tmp_path / "b")
    assert a == b
    assert "sum/recovery.csv" in a


def test_module_entry_point_parses():
    parser = cli.build_parser()
    args = parser.parse_args(["fit", "--data", "d.csv", "--chains", "3"])
    assert args.chains == 3 and args.command == "fit"
