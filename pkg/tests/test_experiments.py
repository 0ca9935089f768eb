import json
import math

import numpy as np
import pytest

from hingeagg.aggregates import FunctionClass, Procedure
from hingeagg.distributions import FiniteDistribution, hinge_risk, save_distribution
from hingeagg.experiments import (
    CSV_COLUMNS,
    ExperimentConfig,
    ExperimentResult,
    InsufficientPointsError,
    ResultRow,
    fit_power_law,
    fit_rate,
    hull_oracle,
    monte_carlo,
    read_result_csv,
    run_trial,
    simplex_grid,
    trial_seed,
)
from hingeagg.lower_bound import choose_params, cube_distribution
from hingeagg.textio import save_class

from conftest import random_class, random_distribution


def small_config(**overrides):
    base = dict(kappa=1.0, M=16, n_grid=[64, 128, 256], trials=8, procedures=["ERM", "AEW"], master_seed=3)
    base.update(overrides)
    return ExperimentConfig.from_mapping(base)


def fixed_cube_files(tmp_path, rows, n=256):
    """A cube law with sigma = (+1, -1, +1) written to disk with a custom class."""
    params = choose_params(n, 16, 1.0)
    dist = cube_distribution(params, [1, -1, 1])
    save_distribution(dist, tmp_path / "cube.json")
    save_class(FunctionClass(np.array(rows, dtype=float)), tmp_path / "cls.txt")
    return dist


class TestConfig:
    def test_defaults_validate(self):
        ExperimentConfig().validate()

    def test_unknown_key(self):
        with pytest.raises(ValueError, match="unknown"):
            ExperimentConfig.from_mapping({"bogus": 1})

    @pytest.mark.parametrize(
        "bad",
        [
            {"trials": 0},
            {"n_grid": [128, 64]},
            {"n_grid": [128, 128]},
            {"n_grid": [4, 64]},
            {"procedures": ["bagging"]},
            {"loss": "square"},
            {"kappa": 0.5},
            {"sigma": [1, 1]},
        ],
    )
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            small_config(**bad)

    def test_relative_paths(self, tmp_path):
        fixed_cube_files(tmp_path, [[1, -1, 1, 1], [-1, 1, -1, 1]])
        cfg = ExperimentConfig.from_mapping(
            {"distribution": "cube.json", "class": "cls.txt", "n_grid": [64]}, base_dir=tmp_path
        )
        assert cfg.distribution == str(tmp_path / "cube.json")

    def test_round_trip_mapping(self):
        cfg = small_config()
        assert ExperimentConfig.from_mapping(cfg.to_mapping()) == cfg


class TestTrials:
    def test_seed_scheme(self):
        a = trial_seed(1, 64, Procedure.AEW, 0)
        assert a == trial_seed(1, 64, Procedure.AEW, 0)
        others = {
            trial_seed(2, 64, Procedure.AEW, 0),
            trial_seed(1, 128, Procedure.AEW, 0),
            trial_seed(1, 64, Procedure.ERM, 0),
            trial_seed(1, 64, Procedure.AEW, 1),
        }
        assert a not in others and len(others) == 4

    def test_deterministic(self):
        cfg = small_config()
        assert run_trial(cfg, 64, "AEW", 99) == run_trial(cfg, 64, "AEW", 99)

    @pytest.mark.parametrize("proc", list(Procedure))
    def test_bayes_only_class_zero_excess(self, tmp_path, proc):
        dist = fixed_cube_files(tmp_path, [[1, -1, 1, 1], [1, -1, 1, 1]])
        assert np.array_equal(dist.bayes_rule.values, [1, -1, 1, 1])
        cfg = ExperimentConfig.from_mapping(
            {"distribution": str(tmp_path / "cube.json"), "class": str(tmp_path / "cls.txt"), "n_grid": [64]}
        )
        for seed in range(5):
            out = run_trial(cfg, 64, proc, seed)
            assert out.excess_hinge == 0.0 and out.excess_bayes == 0.0

    def test_bayes_and_opposite(self, tmp_path):
        # fixed sigma cube, class {f*, -f*}
        f = [1, -1, 1, 1]
        dist = fixed_cube_files(tmp_path, [f, [-v for v in f]])
        cfg = ExperimentConfig.from_mapping(
            {
                "kappa": 1.0,
                "distribution": "cube",
                "class": str(tmp_path / "cls.txt"),
                "sigma": [1, -1, 1],
                "n_grid": [256, 512, 1024],
                "trials": 40,
                "procedures": ["ERM"],
            }
        )
        res = monte_carlo(cfg)
        for row in res.rows:
            assert row.delta == 0.0
            assert row.mean_excess_hinge < row.theorem1_bound
        # the opposite rule loses on the heavy atom, so ERM almost never picks it
        assert res.rows[-1].mean_excess_hinge == 0.0
        assert dist.optimal_hinge_risk == hinge_risk(dist, f)

    def test_outcome_invariants(self):
        cfg = small_config(procedures=["ERM", "AERM", "AEW", "CAEW"], kappa=2.0, trials=20)
        res = monte_carlo(cfg, keep_outcomes=True)
        for (n, proc), cell in res.outcomes.items():
            for o in cell:
                assert o.excess_hinge >= -1e-12
                assert o.excess_bayes <= o.excess_hinge + 1e-12
                if proc is Procedure.AEW:
                    assert o.empirical_risk <= o.erm_empirical_risk + math.log(o.M) / n + 1e-12
        # same seed, same sample: a unique minimizer makes ERM and AERM agree
        unique = 0
        for n in cfg.n_grid:
            for t in range(cfg.trials):
                seed = trial_seed(cfg.master_seed, n, Procedure.ERM, t)
                a, b = run_trial(cfg, n, "ERM", seed), run_trial(cfg, n, "AERM", seed)
                if a.n_minimizers == 1:
                    unique += 1
                    assert a.excess_hinge == b.excess_hinge
                else:
                    assert b.empirical_risk <= a.empirical_risk + 1e-12
        assert unique > 0


class TestMonteCarlo:
    def test_single_trial_matches_run_trial(self):
        cfg = small_config(trials=1, procedures=["AEW"])
        res = monte_carlo(cfg)
        for row in res.rows:
            ex_h, ex_b = run_trial(cfg, row.n, "AEW", trial_seed(3, row.n, Procedure.AEW, 0))
            assert row.mean_excess_hinge == max(ex_h, 0.0)
            assert row.mean_excess_bayes == max(ex_b, 0.0)
            assert math.isnan(row.stderr_hinge)

    def test_thread_invariance(self):
        cfg = small_config(procedures=["ERM", "CAEW"], kappa=2.0)
        a = monte_carlo(cfg, threads=1).to_csv_text()
        b = monte_carlo(cfg, threads=4).to_csv_text()
        assert a == b

    def test_seed_changes_output(self):
        assert monte_carlo(small_config()).to_csv_text() != monte_carlo(small_config(master_seed=4)).to_csv_text()

    def test_stderr_definition(self):
        cfg = small_config(trials=12, procedures=["ERM"])
        res = monte_carlo(cfg, keep_outcomes=True)
        for row in res.rows:
            x = np.array([o.excess_hinge for o in res.outcomes[(row.n, Procedure.ERM)]])
            assert row.stderr_hinge == pytest.approx(x.std(ddof=1) / math.sqrt(12), rel=1e-12, abs=1e-300)

    def test_theorem1_inequality(self):
        res = monte_carlo(small_config(procedures=list(Procedure), kappa=2.0, trials=10))
        for row in res.rows:
            assert row.mean_excess_hinge <= row.theorem1_bound

    def test_csv_and_metadata(self, tmp_path):
        cfg = small_config()
        res = monte_carlo(cfg)
        path = res.write_csv(tmp_path / "out" / "r.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert len(lines) == 1 + len(cfg.n_grid) * 2
        meta = json.loads((tmp_path / "out" / "r.json").read_text())
        assert meta["config"]["master_seed"] == 3
        back = read_result_csv(path)
        assert [r.mean_excess_hinge for r in back.rows] == [r.mean_excess_hinge for r in res.rows]
        assert not list((tmp_path / "out").glob("*.tmp"))


class TestFit:
    def test_exact_power_law(self):
        ns = [2**k for k in range(5, 12)]
        slope, _, r2, used = fit_power_law(ns, [3.0 / n for n in ns])
        assert slope == pytest.approx(-1.0, abs=1e-10)
        assert r2 == pytest.approx(1.0) and used == 7

    def test_zero_points_dropped(self):
        ns = [2**k for k in range(5, 12)]
        vals = [n ** (-2 / 3) for n in ns]
        vals[0] = 0.0
        vals[3] = 0.0
        slope, _, _, used = fit_power_law(ns, vals)
        assert used == 5 and slope == pytest.approx(-2 / 3, abs=1e-10)

    def test_insufficient(self):
        with pytest.raises(InsufficientPointsError):
            fit_power_law([1, 2, 3, 4], [1.0, 0.0, 0.5, 0.2])

    def test_fit_rate_target(self):
        rows = [
            ResultRow(n, 16, 2.0, "AEW", n ** (-2 / 3), 0.0, 0.0, 0.0, 0.0, 1, 0)
            for n in (128, 256, 512, 1024)
        ]
        fit = fit_rate(ExperimentResult(rows), "AEW")
        assert fit.target_exponent == pytest.approx(2 / 3)
        assert fit.slope == pytest.approx(-2 / 3, abs=1e-10)
        with pytest.raises(InsufficientPointsError):
            fit_rate(ExperimentResult(rows), "ERM")


class TestHull:
    def test_simplex_grid(self):
        g = simplex_grid(3, 4)
        assert len(g) == math.comb(6, 2)
        assert np.all(g.sum(axis=1) == 4)
        assert len({tuple(r) for r in g}) == len(g)

    def test_opposite_pair(self):
        d = FiniteDistribution([0.3, 0.7], [0.9, 0.2])
        cls = FunctionClass(np.array([[1.0, 1.0], [-1.0, -1.0]]))
        vertex, grid = hull_oracle(d, cls, 0.01)
        assert grid >= vertex - 1e-12

    def test_contains_bayes(self, rng):
        for _ in range(10):
            d = random_distribution(rng, 4)
            rows = np.vstack([d.bayes_rule.values, random_class(rng, 2, 4, True).values])
            vertex, _ = hull_oracle(d, FunctionClass(rows), 0.1)
            assert vertex == d.optimal_hinge_risk

    def test_slack(self, rng):
        for _ in range(20):
            d = random_distribution(rng, 5)
            cls = random_class(rng, 3, 5, binary=True)
            vertex, grid = hull_oracle(d, cls, 0.05)
            assert vertex - 1e-12 <= grid <= vertex + 2 * 0.05 * 3

    def test_errors(self, rng):
        d = random_distribution(rng, 3)
        with pytest.raises(ValueError):
            hull_oracle(d, random_class(rng, 5, 3, True), 0.1)
        with pytest.raises(ValueError):
            hull_oracle(d, random_class(rng, 3, 3, True), 0.0)
        with pytest.raises(ValueError):
            hull_oracle(d, random_class(rng, 3, 3, True), 0.6)
