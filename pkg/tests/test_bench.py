import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_array_equal

import main
import store
from bench.comparison import compare_sampling
from bench.evaluation import EvalBudget, FixedPolicy, run_evaluation
from bench.experiment import ExperimentSpec, GridBudget, load_experiment, run_experiment
from bench.presets import PRESETS, apply_preset, get_preset, load_named, preset_hyper
from bench.structure import fit_order_up_to, visited_orders
from env.errors import ExperimentError
from env.network import Network
from heuristics.base_stock import BaseStockParams, BaseStockPolicy
from mip.lp_format import read_lp
from parl.sampling import SamplingSpec
from parl.train import ParlHyper
from valuenet.relu_net import FitHyper, init_net
from tests.conftest import make_network

SMALL_HYPER = {"iterations": 3, "paths": 2, "steps": 8, "hidden": [4], "fit": {"epochs": 5, "batch_size": 8},
               "sampling": {"eta": 2}, "parallelism": 2}
SMALL_EVAL = EvalBudget(runs=2, episodes=1, steps=8)
EXPERIMENTS = Path(__file__).resolve().parent.parent / "experiments"


@pytest.fixture
def idle():
    return make_network(demand="const(0)", production="const(0)", price=0, holding=0, fixed_cost=0,
                        init="uniform(0,0)")


def write_spec(tmp_path, doc):
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(doc))
    return path


class TestEvaluation:
    def test_deterministic(self, smoke):
        a = run_evaluation(FixedPolicy([3]), smoke, runs=2, episodes=2, steps=16)
        b = run_evaluation(FixedPolicy([3]), smoke, runs=2, episodes=2, steps=16)
        pd.testing.assert_frame_equal(a.runs, b.runs)

    def test_idle_network_earns_nothing(self, idle):
        report = run_evaluation(FixedPolicy([0]), idle, runs=3, episodes=2, steps=16)
        assert report.mean == 0.0
        assert report.std == 0.0

    def test_paired_demand_traces(self, smoke):
        a = run_evaluation(FixedPolicy([0]), smoke, runs=2, episodes=2, steps=16, keep_demands=True)
        b = run_evaluation(FixedPolicy([4]), smoke, runs=2, episodes=2, steps=16, keep_demands=True)
        assert set(a.demands) == {0, 1}
        for run in a.demands:
            assert_array_equal(a.demands[run], b.demands[run])

    def test_report_frame(self, smoke):
        frame = run_evaluation(FixedPolicy([2]), smoke, runs=3, episodes=1, steps=8).to_frame()
        assert len(frame) == 6
        assert frame["run"].tolist()[-3:] == ["mean", "median", "std"]
        assert (frame["status"].iloc[-3:] == "aggregate").all()

    def test_failed_runs_are_excluded(self, smoke):
        def broken(state):
            raise RuntimeError("solver crashed")

        report = run_evaluation(broken, smoke, runs=2, episodes=1, steps=4)
        assert (report.runs["status"] == "failed").all()
        assert report.completed.empty


class TestPresets:
    def test_desk_caps_max_order(self):
        config, _ = load_named("1s3r")
        capped = apply_preset(config, PRESETS["desk"])
        assert all(link.max_order == 10 for link in capped.links)
        assert apply_preset(config, PRESETS["paper"]) is config

    def test_preset_hyper(self):
        hyper = preset_hyper(PRESETS["desk"], seed=3)
        assert (hyper.iterations, hyper.paths, hyper.steps, hyper.seed) == (5, 4, 64, 3)

    def test_unknown_names(self):
        with pytest.raises(KeyError):
            get_preset("laptop")
        with pytest.raises(FileNotFoundError):
            load_named("no-such-network")


class TestExperiment:
    def test_unknown_method(self, tmp_path):
        path = write_spec(tmp_path, {"name": "x", "config": "1s1r-smoke", "method": "sarsa"})
        with pytest.raises(ExperimentError, match="unknown method"):
            load_experiment(path)

    def test_unreadable(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ExperimentError):
            load_experiment(path)

    def test_bad_hyper(self, tmp_path):
        path = write_spec(tmp_path, {"name": "x", "config": "1s1r-smoke", "method": "parl",
                                     "hyper": {"iterations": 0}})
        with pytest.raises(ExperimentError, match="iterations"):
            load_experiment(path)

    def test_shipped_specs_load(self):
        for name in ("smoke_parl", "1s3r_bs", "1s2w3r_da", "backorder_bs", "backorder_parl"):
            spec = load_experiment(EXPERIMENTS / f"{name}.json")
            assert spec.method in ("parl", "bs", "da")

    def test_base_stock_run(self, tmp_path):
        spec = ExperimentSpec(name="bs-smoke", config="1s1r-smoke", method="bs",
                              grid=GridBudget(runs=1, episodes=1, steps=8), evaluation=SMALL_EVAL)
        run_dir = run_experiment(spec, tmp_path)
        for name in ("config.cfg", "experiment.json", "eval_report.csv", "grid_search_seed0.csv",
                     "base_stock_seed0.jsonl", "demands_bs_seed0.csv"):
            assert (run_dir / name).exists()
        report = pd.read_csv(run_dir / "eval_report.csv")
        assert len(report) == 2 + 3

    def test_parl_run(self, tmp_path):
        spec = ExperimentSpec(name="parl-smoke", config="1s1r-smoke", method="parl", hyper=SMALL_HYPER,
                              evaluation=SMALL_EVAL, keep_demands=False)
        run_dir = run_experiment(spec, tmp_path)
        curve = pd.read_csv(run_dir / "learning_curve_seed0.csv")
        assert curve["iteration"].tolist() == [1, 2, 3]
        assert len(list((run_dir / "checkpoints").glob("critic_*.txt"))) == 3
        structure = json.loads((run_dir / "order_up_to_seed0.json").read_text())
        assert set(structure) == {"level", "r2", "samples"}

    def test_da_and_fixed_runs(self, tmp_path):
        da = run_experiment(ExperimentSpec(name="da-smoke", config="1s1r-smoke", method="da",
                                           evaluation=SMALL_EVAL), tmp_path)
        assert store.read_jsonl(da / "da_levels.jsonl")[0]["node"] == "R1"
        fixed = run_experiment(ExperimentSpec(name="fixed-smoke", config="1s1r-smoke", method="fixed",
                                              fixed_action=[3], evaluation=SMALL_EVAL), tmp_path)
        assert (fixed / "eval_report.csv").exists()

    def test_fixed_needs_full_action(self, tmp_path):
        spec = ExperimentSpec(name="fixed-bad", config="1s1r-smoke", method="fixed", fixed_action=[1, 2],
                              evaluation=SMALL_EVAL)
        with pytest.raises(ExperimentError):
            run_experiment(spec, tmp_path)


class TestSamplingComparison:
    def test_one_row_per_scheme(self, smoke):
        hyper = ParlHyper(iterations=1, paths=2, steps=8, hidden=(4,), fit=FitHyper(epochs=5, batch_size=8),
                          sampling=SamplingSpec(eta=2), parallelism=2)
        table = compare_sampling(smoke, hyper, EvalBudget(runs=1, episodes=1, steps=8))
        assert table["scheme"].tolist() == ["quantile", "random"]
        assert (table["train_time_per_step"] > 0).all()


class TestOrderUpToFit:
    def test_exact_policy(self):
        ip = np.arange(-5, 40)
        fitted = fit_order_up_to(ip, np.clip(27 - ip, 0, 50), cap=50)
        assert fitted.level == pytest.approx(27.0)
        assert fitted.r2 == pytest.approx(1.0)
        assert fitted.samples == 45

    def test_capped_orders(self):
        ip = np.arange(-5, 40)
        fitted = fit_order_up_to(ip, np.clip(27 - ip, 0, 10), cap=10)
        assert fitted.level == pytest.approx(27.0)

    def test_noisy_orders(self):
        rng = np.random.default_rng(0)
        ip = rng.integers(0, 40, size=400)
        orders = np.clip(27 - ip, 0, None) + rng.normal(0, 1, size=400)
        fitted = fit_order_up_to(ip, orders)
        assert abs(fitted.level - 27) < 0.5
        assert 0.9 < fitted.r2 < 1.0

    def test_empty(self):
        with pytest.raises(ExperimentError):
            fit_order_up_to([], [])

    def test_base_stock_policy_is_recovered(self):
        network = Network(load_named("1sinf1r-backorder")[0])
        policy = BaseStockPolicy(BaseStockParams({network.link_names[0]: (27, 27)}), network)
        visited = visited_orders(network, policy, seeds=[0, 1], steps=64)
        assert len(visited) == 128
        fitted = fit_order_up_to(visited["inventory_position"], visited["order"], cap=float(network.max_order[0]))
        assert fitted.level == pytest.approx(27.0)
        assert fitted.r2 == pytest.approx(1.0)

    def test_unknown_link(self, smoke):
        with pytest.raises(ExperimentError):
            visited_orders(smoke, FixedPolicy([1]), link=3)


class TestStore:
    def test_latest_checkpoint(self, tmp_path):
        first, second = init_net(3, (2,), seed=0), init_net(3, (2,), seed=1)
        store.save_checkpoint(tmp_path, first, 1)
        store.save_checkpoint(tmp_path, second, 2)
        latest = store.load_checkpoint(tmp_path)
        assert_array_equal(latest.c, second.c)
        assert_array_equal(store.load_checkpoint(tmp_path, 1).c, first.c)

    def test_no_checkpoints(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            store.load_checkpoint(tmp_path)

    def test_jsonl_appends(self, tmp_path):
        path = tmp_path / "rows.jsonl"
        store.append_jsonl(path, [{"a": 1}])
        store.append_jsonl(path, [{"a": 2}])
        assert store.read_jsonl(path) == [{"a": 1}, {"a": 2}]


class TestCli:
    def run(self, monkeypatch, *argv):
        monkeypatch.setattr(sys, "argv", ["main.py", *argv])
        main.main()

    def test_export_lp(self, monkeypatch, tmp_path):
        self.run(monkeypatch, "export-lp", "--config", "1s1r-smoke", "--out", str(tmp_path))
        (lp,) = tmp_path.glob("*/step.lp")
        model = read_lp(lp.read_text())
        assert model.count("integer") == 1
        stats = store.read_jsonl(lp.parent / "model_stats.jsonl")
        assert stats[0]["variables"] == model.n_vars

    def test_paper_preset(self, monkeypatch, tmp_path, caplog):
        self.run(monkeypatch, "export-lp", "--config", "1s1r-smoke", "--preset", "paper", "--out", str(tmp_path))
        assert list(tmp_path.glob("*/step.lp"))
        assert "Preset 'paper'" in caplog.text

    def test_unknown_preset_rejected(self, monkeypatch, tmp_path):
        with pytest.raises(SystemExit) as info:
            self.run(monkeypatch, "export-lp", "--preset", "full", "--out", str(tmp_path))
        assert info.value.code == 2

    def test_da(self, monkeypatch, tmp_path):
        self.run(monkeypatch, "da", "--config", "1sinf1r-backorder", "--out", str(tmp_path))
        (path,) = tmp_path.glob("*/da_levels.jsonl")
        assert store.read_jsonl(path)[0]["units"] == 27

    def test_fixed_eval(self, monkeypatch, tmp_path):
        self.run(monkeypatch, "eval", "--method", "fixed", "--action", "2", "--out", str(tmp_path))
        (path,) = tmp_path.glob("*/eval_report.csv")
        assert len(pd.read_csv(path)) == PRESETS["desk"].runs + 3

    def test_fatal_error_exits_nonzero(self, monkeypatch, tmp_path):
        with pytest.raises(SystemExit) as info:
            self.run(monkeypatch, "da", "--config", "no-such-network", "--out", str(tmp_path))
        assert info.value.code == 1

    def test_no_command_prints_help(self, monkeypatch, capsys):
        self.run(monkeypatch)
        assert "usage" in capsys.readouterr().out
