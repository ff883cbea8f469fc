import subprocess
import sys

import numpy as np
import pytest

from mellin_deconv import DensityEstimate, MellinContext, Uniform01
from mellin_deconv.cli import main, read_dataset
from mellin_deconv.harness import ExperimentConfig, dump_config, load_config

from conftest import fixture_sample


@pytest.fixture
def dataset(tmp_path):
    path = tmp_path / "y.csv"
    y = np.asarray(fixture_sample())
    np.savetxt(path, y, delimiter=",", header="y", comments="", fmt="%.17g")
    return path


def read_csv(path):
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def test_read_dataset_round_trips(dataset):
    np.testing.assert_array_equal(read_dataset(str(dataset)), fixture_sample())


def test_read_dataset_rejects_nonpositive(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("y\n1.0\n-2.0\n")
    assert main(["estimate", str(path), "--k", "2"]) == 2


def test_estimate_matches_library(dataset, tmp_path):
    out = tmp_path / "est.csv"
    rc = main(["estimate", str(dataset), "--noise", "uniform()", "--k", "4", "--range", "1", "20",
               "--eval-points", "5", "-o", str(out)])
    assert rc == 0
    table = read_csv(out)
    est = DensityEstimate(fixture_sample(), Uniform01(), MellinContext(1.0), 4)
    np.testing.assert_array_equal(table[:, 1], est.on_grid(table[:, 0]))
    assert out.read_text().splitlines()[0] == "x1,estimate"


def test_select_writes_trace(dataset, tmp_path, capsys):
    out = tmp_path / "trace.csv"
    assert main(["select", str(dataset), "--noise", "uniform()", "-o", str(out)]) == 0
    table = read_csv(out)
    assert table.shape == (5, 5)
    assert table[:, -1].sum() == 1
    assert table[-1, 2] == 0.0
    assert "selected k" in capsys.readouterr().err


def test_transforms_table(capsys):
    assert main(["transforms", "uniform()", "--t", "0", "1", "2"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "t,closed_re,closed_im,quad_re,quad_im,abs_diff"
    assert max(float(line.split(",")[-1]) for line in lines[1:]) < 1e-6


def test_transforms_domain_error(capsys):
    assert main(["transforms", "uniform()", "--c", "0"]) == 2
    assert "error" in capsys.readouterr().err


def test_recipe_emits_loadable_config(tmp_path):
    out = tmp_path / "fig5.yaml"
    assert main(["recipe", "fig5", "-o", str(out)]) == 0
    cfg = load_config(str(out))
    assert cfg.d == 2 and cfg.chi1 == 1.2
    assert main(["recipe", "fig1", "--all", "-o", str(tmp_path / "fig1")]) == 0
    assert len(list((tmp_path / "fig1").glob("*.yaml"))) == 8
    assert main(["recipe", "fig3"]) == 2


def test_simulate_writes_report(tmp_path):
    cfg = ExperimentConfig(target=["gamma(shape=4,scale=2)"], noise=["uniform()"], c=[1.0], n=200,
                           replicates=2, mode="fixed", k=[3.0], eval_points=[20])
    path = tmp_path / "cfg.yaml"
    dump_config(cfg, str(path))
    out = tmp_path / "run"
    assert main(["simulate", str(path), "-o", str(out), "--plot-script"]) == 0
    for name in ("risks.csv", "summary.csv", "median.csv", "manifest.json", "config.yaml", "plot.gp"):
        assert (out / name).exists()
    assert read_csv(out / "risks.csv").shape == (2, 3)
    # overriding replicates on the command line
    assert main(["simulate", str(path), "-o", str(tmp_path / "run3"), "--replicates", "3"]) == 0
    assert read_csv(tmp_path / "run3" / "risks.csv").shape == (3, 3)


def test_rates_table(tmp_path, capsys):
    cfg = ExperimentConfig(target=["gamma(shape=4,scale=2)"], noise=["none()"], c=[1.0], n=100,
                           replicates=3, mode="power", k_exponent=0.3, eval_points=[10])
    path = tmp_path / "cfg.yaml"
    dump_config(cfg, str(path))
    assert main(["rates", str(path), "--n-list", "100", "400", "--bootstrap", "50"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "n,mean_risk,median_risk"
    assert out[3].startswith("# slope,")


def test_console_entry_point_runs():
    res = subprocess.run([sys.executable, "-m", "mellin_deconv.cli", "recipe", "fig6"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "loggamma(a=0.5,lambda=1)" in res.stdout
