import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from hingeagg.cli import main
from hingeagg.distributions import FiniteDistribution, save_distribution

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture
def files(tmp_path):
    (tmp_path / "cls.txt").write_text("# two opposite rules\n1 -1\n-1, 1\n")
    (tmp_path / "sym.txt").write_text("0 +1\n1 +1\n")
    (tmp_path / "skew.txt").write_text("0 +1\n0 +1\n1 -1\n")
    save_distribution(FiniteDistribution([0.5, 0.5], [0.9, 0.2]), tmp_path / "d.json")
    return tmp_path


def run(capsys, *argv):
    code = main(list(map(str, argv)))
    out = capsys.readouterr()
    return code, out.out, out.err


def table(out):
    lines = out.splitlines()
    start = lines.index("rule,empirical_risk,weight,minimizer") + 1
    rows = []
    for line in lines[start:]:
        if not line[0].isdigit():
            break
        rows.append([float(x) for x in line.split(",")])
    return np.array(rows)


class TestAggregate:
    def test_symmetric_sample(self, files, capsys):
        code, out, _ = run(capsys, "aggregate", "--class", files / "cls.txt", "--sample", files / "sym.txt")
        assert code == 0
        t = table(out)
        np.testing.assert_array_equal(t[:, 2], [0.5, 0.5])
        assert "aggregate 0.0 0.0" in out

    def test_erm_one_hot(self, files, capsys):
        code, out, _ = run(
            capsys, "aggregate", "--class", files / "cls.txt", "--sample", files / "skew.txt", "--procedure", "erm"
        )
        assert code == 0
        t = table(out)
        np.testing.assert_array_equal(t[:, 2], [1.0, 0.0])
        np.testing.assert_array_equal(t[:, 3], [1, 0])

    def test_full_precision_weights(self, files, capsys):
        _, out, _ = run(capsys, "aggregate", "--class", files / "cls.txt", "--sample", files / "skew.txt")
        w = table(out)[:, 2]
        assert w[0] == 1.0 / (1.0 + np.exp(-6.0))

    def test_excess_report(self, files, capsys):
        code, out, _ = run(
            capsys,
            "aggregate",
            "--class", files / "cls.txt",
            "--sample", files / "skew.txt",
            "--distribution", files / "d.json",
            "--procedure", "ERM",
        )
        assert code == 0
        assert "excess_hinge 0.0" in out and "excess_bayes 0.0" in out

    def test_malformed_class(self, files, capsys):
        (files / "bad.txt").write_text("1 -1\n# note\n1 x\n")
        code, _, err = run(capsys, "aggregate", "--class", files / "bad.txt", "--sample", files / "sym.txt")
        assert code == 2
        assert "bad.txt:3" in err

    def test_malformed_sample(self, files, capsys):
        (files / "bad.txt").write_text("0 +1\n1 0\n")
        code, _, err = run(capsys, "aggregate", "--class", files / "cls.txt", "--sample", files / "bad.txt")
        assert code == 2 and "bad.txt:2" in err

    def test_dimension_mismatch(self, files, capsys):
        (files / "far.txt").write_text("5 +1\n")
        code, _, _ = run(capsys, "aggregate", "--class", files / "cls.txt", "--sample", files / "far.txt")
        assert code == 2

    def test_missing_file(self, files, capsys):
        code, _, err = run(capsys, "aggregate", "--class", files / "nope.txt", "--sample", files / "sym.txt")
        assert code == 2 and "nope.txt" in err

    def test_unknown_procedure(self, files, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["aggregate", "--procedure", "bagging"])
        assert exc.value.code == 2


class TestSimulate:
    def args(self, tmp_path, *extra):
        return [
            "simulate",
            "--set", "n_grid=[64, 128, 256, 512]",
            "--set", "trials=5",
            "--output", tmp_path / "r.csv",
            *extra,
        ]

    def test_rerun_identical(self, tmp_path, capsys):
        assert run(capsys, *self.args(tmp_path))[0] == 0
        first = (tmp_path / "r.csv").read_bytes()
        assert run(capsys, *self.args(tmp_path, "--threads", "3"))[0] == 0
        assert (tmp_path / "r.csv").read_bytes() == first
        assert (tmp_path / "r.json").exists()

    def test_seed_override(self, tmp_path, capsys):
        run(capsys, *self.args(tmp_path, "--seed", "1"))
        a = (tmp_path / "r.csv").read_bytes()
        run(capsys, *self.args(tmp_path, "--seed", "2"))
        assert (tmp_path / "r.csv").read_bytes() != a

    def test_trials_zero(self, tmp_path, capsys):
        code, _, err = run(capsys, "simulate", "--set", "trials=0", "--output", tmp_path / "r.csv")
        assert code == 2 and "trials" in err
        assert not (tmp_path / "r.csv").exists()

    def test_unknown_key(self, tmp_path, capsys):
        code, _, err = run(capsys, "simulate", "--set", "bogus=1", "--output", tmp_path / "r.csv")
        assert code == 2 and "bogus" in err

    def test_config_file(self, tmp_path, capsys, monkeypatch):
        # output_path is relative to the working directory
        monkeypatch.chdir(tmp_path)
        cfg = tmp_path / "c.toml"
        cfg.write_text('kappa = 2.0\nn_grid = [64, 128]\ntrials = 3\noutput_path = "sub/out.csv"\n')
        code, _, _ = run(capsys, "simulate", "--config", cfg)
        assert code == 0
        assert (tmp_path / "sub" / "out.csv").exists()

    def test_nested_config_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "c.toml"
        cfg.write_text("[table]\nx = 1\n")
        assert run(capsys, "simulate", "--config", cfg)[0] == 2

    def test_bad_threads(self, tmp_path, capsys):
        assert run(capsys, *self.args(tmp_path, "--threads", "0"))[0] == 2


class TestRates:
    def write_csv(self, path, kappa, values):
        header = "n,M,kappa,procedure,mean_excess_hinge,stderr_hinge,mean_excess_bayes,stderr_bayes,theory_remainder,trials,seed"
        lines = [header] + [
            f"{n},16,{kappa},AEW,{v!r},0.0,0.0,0.0,0.0,1,0" for n, v in values
        ]
        path.write_text("\n".join(lines) + "\n")

    def test_power_law(self, tmp_path, capsys):
        self.write_csv(tmp_path / "r.csv", 1.0, [(n, 5.0 / n) for n in (128, 256, 512, 1024, 2048)])
        code, out, _ = run(capsys, "rates", "--input", tmp_path / "r.csv")
        assert code == 0
        assert "AEW,-1.000000,-1.000000,1.000000,5" in out

    def test_kappa2_target(self, tmp_path, capsys):
        self.write_csv(tmp_path / "r.csv", 2.0, [(n, n**-0.6) for n in (128, 256, 512, 1024)])
        _, out, _ = run(capsys, "rates", "--input", tmp_path / "r.csv")
        assert ",-0.666667," in out

    def test_insufficient_points(self, tmp_path, capsys):
        self.write_csv(tmp_path / "r.csv", 1.0, [(128, 0.1), (256, 0.0), (512, 0.02)])
        assert run(capsys, "rates", "--input", tmp_path / "r.csv")[0] == 2

    def test_simulate_then_fit(self, capsys):
        code, out, _ = run(capsys, "rates", "--set", "n_grid=[64, 128, 256, 512]", "--set", "trials=20")
        assert code == 0
        assert out.splitlines()[0] == "procedure,slope,target_slope,r_squared,points"
        assert len(out.splitlines()) == 3


class TestBounds:
    def rows(self, out):
        lines = out.splitlines()
        assert lines[0] == "n,remainder,thm1_bound,thm2_bound"
        return np.array([[float(x) for x in line.split(",")] for line in lines[1:]])

    def test_delta_zero_column(self, capsys):
        code, out, _ = run(capsys, "bounds", "--kappa", "2", "--M", "16", "--n-range", "128:4096")
        assert code == 0
        r = self.rows(out)
        np.testing.assert_array_equal(r[:, 0], [128, 256, 512, 1024, 2048, 4096])
        np.testing.assert_allclose(r[:, 1], (np.log(16) / r[:, 0]) ** (2 / 3), rtol=1e-14)
        assert np.all(r[:, 3] < r[:, 2])

    def test_reference_row(self, capsys):
        _, out, _ = run(capsys, "bounds", "--kappa", "1", "--M", "16", "--n-range", "1024:1024")
        assert self.rows(out)[0, 1] == pytest.approx(0.0027076061740622863, rel=1e-15)

    def test_kappa_below_one(self, capsys):
        assert run(capsys, "bounds", "--kappa", "0.5")[0] == 2

    def test_output_file(self, tmp_path, capsys):
        assert run(capsys, "bounds", "--output", tmp_path / "b.csv", "--n-range", "128:256")[0] == 0
        assert len((tmp_path / "b.csv").read_text().splitlines()) == 3


class TestOracle:
    def test_report(self, files, capsys):
        code, out, _ = run(
            capsys, "oracle", "--distribution", files / "d.json", "--class", files / "cls.txt", "--grid-step", "0.05"
        )
        assert code == 0
        vals = dict(line.split() for line in out.splitlines())
        assert float(vals["gap"]) >= -1e-12
        assert float(vals["gap"]) <= float(vals["slack"])

    def test_needs_inputs(self, capsys):
        assert run(capsys, "oracle")[0] == 2


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "hingeagg", "bounds", "--n-range", "128:128"],
        capture_output=True,
        text=True,
        cwd=ROOT,
    )
    assert proc.returncode == 0
    assert proc.stdout.startswith("n,remainder")
