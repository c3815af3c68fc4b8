# Copyright 2025 Liatrio
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import json
from unittest.mock import patch

import pandas as pd
import pytest

from triangle_stream import experiments
from triangle_stream.cache import CacheManager, InMemoryCache

from triangle_stream.experiments import (
    ExperimentKind,
    ExperimentSpec,
    ExperimentSpecError,
    PlotDataError,
    Configuration,
    build_configurations,
    configuration_variance_bound,
    emit_plotdata,
    load_stream,
    resolve_budget,
    run_experiment,
)
from triangle_stream.pipeline import Algorithm
from triangle_stream.stream_ingest import write_edge_list
from triangle_stream.triangle_oracle import (
    exact_count,
    pair_counts,
    partition_stats,
    variance_bound,
)


def _spec(tmp_path, **overrides):
    values = {
        "kind": "unbiasedness",
        "gen": [30, 120],
        "trials": 4,
        "algorithms": ["cocos_opt"],
        "k_values": [2],
        "budgets": [1000],
        "output_dir": str(tmp_path / "results"),
        "base_seed": 3,
    }
    values.update(overrides)
    return ExperimentSpec.from_dict(values)


class TestExperimentSpec:
    """Validation of experiment specs."""

    def test_from_json_file(self, tmp_path):
        path = tmp_path / "spec.json"
        path.write_text(
            json.dumps({"kind": "variance_vs_k", "gen": [20, 50], "k_values": [1, 2]}),
            encoding="utf-8",
        )
        spec = ExperimentSpec.from_json_file(path)
        assert spec.kind is ExperimentKind.VARIANCE_VS_K
        assert spec.gen == (20, 50)
        assert spec.to_dict()["gen"] == [20, 50]

    @pytest.mark.parametrize(
        "overrides, message",
        [
            ({"algorithms": ["triest"]}, "unknown algorithm"),
            ({"trials": 0}, "trials"),
            ({"budgets": [1.5]}, "fractional budget"),
            ({"budgets": [1]}, "budget must be at least 2"),
            ({"k_values": []}, "k_values"),
            ({"thetas": [-1.0]}, "theta"),
            ({"input_path": "graph.txt"}, "exactly one"),
            ({"kind": "scalability"}, "stream_sizes"),
            ({"kind": "nonsense"}, "nonsense"),
            ({"bogus": 1}, "unknown spec keys"),
        ],
    )
    def test_rejects_bad_specs(self, tmp_path, overrides, message):
        with pytest.raises(ExperimentSpecError, match=message):
            _spec(tmp_path, **overrides)

    def test_kind_is_required(self):
        with pytest.raises(ExperimentSpecError, match="kind"):
            ExperimentSpec.from_dict({"gen": [10, 20]})

    def test_unreadable_spec_file(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ExperimentSpecError):
            ExperimentSpec.from_json_file(path)


class TestBuildConfigurations:
    """Grid expansion per experiment kind."""

    def test_variance_vs_k(self, tmp_path):
        spec = _spec(
            tmp_path,
            kind="variance_vs_k",
            algorithms=["trifly", "cocos_opt"],
            k_values=[1, 2, 4],
        )
        configs = build_configurations(spec, 120)
        assert [(c.label, c.k) for c in configs] == [
            ("trifly", 1),
            ("trifly", 2),
            ("trifly", 4),
            ("cocos_opt", 1),
            ("cocos_opt", 2),
            ("cocos_opt", 4),
        ]
        assert [c.index for c in configs] == list(range(6))

    def test_single_machine_baseline_collapses_to_one_worker(self, tmp_path):
        spec = _spec(
            tmp_path,
            kind="accuracy_vs_workers",
            algorithms=["triest_impr"],
            k_values=[1, 2, 8],
        )
        (config,) = build_configurations(spec, 120)
        assert config.k == 1
        assert config.algorithm is Algorithm.TRIFLY

    def test_fractional_budgets(self, tmp_path):
        spec = _spec(tmp_path, kind="accuracy_vs_budget", budgets=[0.1, 0.5, 40])
        assert [c.budget for c in build_configurations(spec, 120)] == [12, 60, 40]

    def test_resolve_budget_floor(self):
        assert resolve_budget(0.001, 100) == 2
        assert resolve_budget(25, 100) == 25

    def test_theta_sweep(self, tmp_path):
        spec = _spec(tmp_path, kind="theta_sweep", thetas=[0.0, 0.2, 1.0])
        assert [c.theta for c in build_configurations(spec, 120)] == [0.0, 0.2, 1.0]

    def test_partition_stats_ignore_algorithms(self, tmp_path):
        spec = _spec(tmp_path, kind="partition_stats", k_values=[2, 4])
        configs = build_configurations(spec, 120)
        assert [(c.label, c.k) for c in configs] == [("random_f", 2), ("random_f", 4)]


class TestRunExperiment:
    """End-to-end runs on small generated graphs."""

    def test_unbiasedness_in_exact_regime(self, tmp_path):
        spec = _spec(tmp_path)
        files = run_experiment(spec)
        assert set(files) == {"trials", "summary", "manifest", "local_trials"}

        truth = exact_count(load_stream(spec)).global_count
        trials = pd.read_csv(files["trials"])
        assert len(trials) == 4
        assert (trials["global_estimate"] == truth).all()
        assert (trials["global_error"] == 0.0).all()

        summary = pd.read_csv(files["summary"])
        assert summary.loc[0, "mean_estimate"] == truth
        assert summary.loc[0, "variance"] == 0.0
        assert summary.loc[0, "variance_bound"] == 0.0

        local_trials = pd.read_csv(files["local_trials"])
        assert (local_trials["estimate"] == local_trials["truth"]).all()

        manifest = json.loads(files["manifest"].read_text(encoding="utf-8"))
        assert manifest["oracle"] == {
            "status": "computed",
            "triangles": truth,
            "edge_limit": spec.oracle_edge_limit,
        }
        assert manifest["stream"]["source"] == "gen:30,120"
        assert "trials.csv" in manifest["files"]

    def test_reproducible_across_runs_and_job_counts(self, tmp_path):
        first = run_experiment(_spec(tmp_path / "a", budgets=[20], k_values=[3]))
        second = run_experiment(
            _spec(tmp_path / "b", budgets=[20], k_values=[3], jobs=3)
        )
        pd.testing.assert_frame_equal(
            pd.read_csv(first["trials"]).drop(columns=["elapsed_seconds"]),
            pd.read_csv(second["trials"]).drop(columns=["elapsed_seconds"]),
        )

    def test_reshuffle_records_stream_seeds(self, tmp_path):
        files = run_experiment(_spec(tmp_path, budgets=[20], reshuffle=True))
        trials = pd.read_csv(files["trials"])
        assert trials["stream_seed"].notna().all()
        assert trials["stream_seed"].nunique() == len(trials)

    def test_oracle_limit_skips_accuracy(self, tmp_path):
        files = run_experiment(_spec(tmp_path, oracle_edge_limit=10))
        manifest = json.loads(files["manifest"].read_text(encoding="utf-8"))
        assert manifest["oracle"]["status"] == "skipped"
        trials = pd.read_csv(files["trials"])
        assert trials["global_error"].isna().all()
        assert "local_trials" not in files

    def test_partition_stats(self, tmp_path):
        spec = _spec(tmp_path, kind="partition_stats", k_values=[1, 2, 4], trials=3)
        files = run_experiment(spec)
        truth = exact_count(load_stream(spec)).global_count
        summary = pd.read_csv(files["summary"])
        for _, row in summary.iterrows():
            assert row["mean_triangles"] * row["k"] == pytest.approx(truth)
        one_worker = summary[summary["k"] == 1].iloc[0]
        assert one_worker["mean_load"] == 120
        manifest = json.loads(files["manifest"].read_text(encoding="utf-8"))
        assert manifest["slopes"]["mean_triangles"] == pytest.approx(-1.0)

    def test_scalability_uses_requested_sizes(self, tmp_path):
        spec = _spec(tmp_path, kind="scalability", stream_sizes=[60, 120], trials=2)
        files = run_experiment(spec)
        summary = pd.read_csv(files["summary"])
        assert summary["stream_edges"].tolist() == [60, 120]

    def test_file_input(self, tmp_path, bowtie_stream):
        path = tmp_path / "bowtie.txt"
        write_edge_list(bowtie_stream, path)
        files = run_experiment(
            _spec(tmp_path, gen=None, input_path=str(path), budgets=[10], trials=2)
        )
        trials = pd.read_csv(files["trials"])
        assert (trials["global_estimate"] == 2.0).all()

    def test_scaled_file_input_cannot_grow(self, tmp_path, bowtie_stream):
        path = tmp_path / "bowtie.txt"
        write_edge_list(bowtie_stream, path)
        spec = _spec(
            tmp_path,
            kind="scalability",
            gen=None,
            input_path=str(path),
            stream_sizes=[100],
        )
        with pytest.raises(ExperimentSpecError):
            run_experiment(spec)


class TestVarianceBoundCaching:
    """Oracle-derived quantities are computed once per stream and mapping."""

    @pytest.fixture
    def fresh_cache(self):
        manager = CacheManager(InMemoryCache(max_entries=16))
        with patch.object(experiments, "cache_manager", manager):
            yield manager

    @pytest.fixture
    def stream(self, tmp_path):
        return load_stream(_spec(tmp_path, gen=[40, 200]))

    @staticmethod
    def _config(index, algorithm, k, budget, theta=0.2):
        return Configuration(index, str(algorithm), algorithm, k, budget, theta, 200)

    def test_trifly_pair_counts_shared_across_k(self, fresh_cache, stream):
        """One brute-force pair count serves a whole variance-vs-k grid."""
        oracle = exact_count(stream)
        with patch.object(experiments, "pair_counts", wraps=pair_counts) as counted:
            bounds = [
                configuration_variance_bound(
                    stream, oracle, self._config(i, Algorithm.TRIFLY, k, 20)
                )
                for i, k in enumerate([1, 2, 4, 8])
            ]
        assert counted.call_count == 1

        pairs = pair_counts(stream, oracle=oracle)
        z = variance_bound(len(stream), 20, oracle.global_count, pairs)
        assert bounds == pytest.approx([z, z / 2, z / 4, z / 8])
        assert fresh_cache.health_check()["entries"] == 1

    def test_partitions_shared_across_budgets(self, fresh_cache, stream):
        """Budgets of one mapping reuse the partition; z_i follows each budget."""
        oracle = exact_count(stream)
        budgets = [10, 20, 40]
        with patch.object(
            experiments, "partition_stats", wraps=partition_stats
        ) as partitioned:
            bounds = [
                configuration_variance_bound(
                    stream, oracle, self._config(i, Algorithm.COCOS_OPT, 4, b)
                )
                for i, b in enumerate(budgets)
            ]
        assert partitioned.call_count == 1

        for budget, bound in zip(budgets, bounds):
            config = self._config(0, Algorithm.COCOS_OPT, 4, budget)
            assignment = experiments.final_assignment(stream, config)
            direct = partition_stats(stream, assignment, 4, budget, oracle=oracle)
            assert bound == pytest.approx(sum(p.variance_bound for p in direct))

    def test_distinct_mappings_are_not_shared(self, fresh_cache, stream):
        """Worker count and theta are part of the partition key."""
        oracle = exact_count(stream)
        with patch.object(
            experiments, "partition_stats", wraps=partition_stats
        ) as partitioned:
            for i, (k, theta) in enumerate([(2, 0.2), (4, 0.2), (4, 1.0)]):
                configuration_variance_bound(
                    stream, oracle, self._config(i, Algorithm.COCOS_OPT, k, 20, theta)
                )
        assert partitioned.call_count == 3

    def test_modulo_mapping_ignores_theta(self, fresh_cache, stream):
        oracle = exact_count(stream)
        with patch.object(
            experiments, "partition_stats", wraps=partition_stats
        ) as partitioned:
            for i, theta in enumerate([0.0, 0.5]):
                configuration_variance_bound(
                    stream,
                    oracle,
                    self._config(i, Algorithm.COCOS_SIMPLE, 4, 20, theta),
                )
        assert partitioned.call_count == 1


class TestEmitPlotData:
    """gnuplot series from result directories."""

    def test_variance_vs_k_series(self, tmp_path):
        spec = _spec(
            tmp_path,
            kind="variance_vs_k",
            algorithms=["trifly", "cocos_simple"],
            k_values=[1, 2],
            budgets=[30],
            trials=3,
        )
        run_experiment(spec)
        written = emit_plotdata(spec.output_dir)
        assert sorted(p.name for p in written) == [
            "variance_vs_k_cocos_simple.dat",
            "variance_vs_k_trifly.dat",
        ]
        lines = written[0].read_text(encoding="utf-8").splitlines()
        assert lines[0] == "# k variance variance_bound"
        assert len(lines) == 3

    def test_unbiasedness_histograms(self, tmp_path):
        spec = _spec(tmp_path, budgets=[20], trials=6)
        run_experiment(spec)
        out_dir = tmp_path / "plots"
        (path,) = emit_plotdata(spec.output_dir, out_dir)
        assert path.parent == out_dir
        assert path.name == "unbiasedness_cocos_opt_k2_b20.dat"
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0].startswith("# true_global")
        assert lines[1] == "# estimate count"
        assert sum(int(line.split()[1]) for line in lines[2:]) == 6

    def test_missing_results(self, tmp_path):
        with pytest.raises(PlotDataError, match="missing result file"):
            emit_plotdata(tmp_path)

    def test_missing_column(self, tmp_path):
        spec = _spec(tmp_path, kind="variance_vs_k", trials=2)
        files = run_experiment(spec)
        summary = pd.read_csv(files["summary"]).drop(columns=["variance_bound"])
        summary.to_csv(files["summary"], index=False)
        with pytest.raises(PlotDataError, match="variance_bound"):
            emit_plotdata(spec.output_dir)
