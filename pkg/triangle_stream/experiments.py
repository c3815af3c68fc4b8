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

"""
Seeded, reproducible experiment driver.

An ``ExperimentSpec`` expands into a list of configurations; every
configuration runs ``trials`` independent pipeline runs on a thread pool.
Results land in ``trials.csv`` (one row per trial), ``summary.csv`` (one
row per configuration) and ``manifest.json``. Unbiasedness runs also write
``local_trials.csv`` with the local estimates of a few tracked nodes.

trials.csv columns:
    config_index, trial, algorithm, k, budget, theta, stream_edges, seed,
    stream_seed, global_estimate, true_global, global_error, local_error,
    local_rmse, rank_correlation, rank_correlation_defined, lucky, unlucky,
    messages_total, evictions_total, load_imbalance, storage_redundancy,
    elapsed_seconds

summary.csv columns:
    config_index, algorithm, k, budget, theta, stream_edges, trials,
    true_global, mean_estimate, variance, stderr, bias_in_stderr,
    variance_bound, mean_global_error, stderr_global_error, mean_local_error,
    mean_local_rmse, mean_rank_correlation, mean_load_imbalance,
    mean_storage_redundancy, mean_elapsed_seconds

Partition-statistics runs use their own columns, documented on
``_partition_trial``.
"""

import json
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from enum import StrEnum
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
import pandas as pd
from opentelemetry.semconv.trace import SpanAttributes

from . import __version__
from .cache import cache_manager
from .metrics import accuracy_report, fit_loglog_slope, trial_stats
from .pipeline import (
    Aggregation,
    Algorithm,
    ExecutionMode,
    PipelineConfig,
    TrianglePipeline,
)
from .routing import MappingPolicy, NodeMap
from .seeding import derive_seed, numpy_rng
from .stream_ingest import (
    GraphStream,
    gen_random_graph,
    parse_edge_list,
    shuffle_stream,
)
from .telemetry import (
    PipelineAttributes,
    add_enhanced_error_attributes,
    add_span_attributes,
    get_logger,
    get_tracer,
)
from .triangle_oracle import (
    TriangleSet,
    exact_count,
    expected_partition_load,
    pair_counts,
    partition_stats,
    random_assignment,
    variance_bound,
)

tracer = get_tracer()
logger = get_logger()

TRIEST_IMPR = "triest_impr"
DEFAULT_ORACLE_EDGE_LIMIT = 2_000_000
TRACKED_LOCAL_NODES = 20
RANDOM_MAPPING = "random_f"


class ExperimentSpecError(ValueError):
    """An experiment spec is incomplete or inconsistent."""


class PlotDataError(ValueError):
    """Result files lack the columns a plot series needs."""


class ExperimentKind(StrEnum):
    UNBIASEDNESS = "unbiasedness"
    VARIANCE_VS_K = "variance_vs_k"
    ACCURACY_VS_BUDGET = "accuracy_vs_budget"
    ACCURACY_VS_WORKERS = "accuracy_vs_workers"
    SPEED_ACCURACY = "speed_accuracy"
    SCALABILITY = "scalability"
    THETA_SWEEP = "theta_sweep"
    PARTITION_STATS = "partition_stats"


ALGORITHM_LABELS = {str(a) for a in Algorithm} | {TRIEST_IMPR}

Budget = Union[int, float]


def read_spec_file(path: Union[str, Path]) -> dict[str, Any]:
    """Raw fields of a JSON spec file, not yet validated."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except (OSError, json.JSONDecodeError) as e:
        raise ExperimentSpecError(f"cannot load spec {path}: {e}") from e
    if not isinstance(data, dict):
        raise ExperimentSpecError(f"spec {path} must hold a JSON object")
    return data


@dataclass
class ExperimentSpec:
    """One study: a kind, the algorithms and grids to sweep, and a stream source.

    Budgets are absolute edge counts (``int``) or fractions of the stream
    length (``float`` in ``(0, 1]``). Fractions need |E| up front, which a
    real stream does not offer; they exist for experiments only.
    """

    kind: ExperimentKind
    algorithms: list[str] = field(default_factory=lambda: [str(Algorithm.COCOS_OPT)])
    trials: int = 100
    k_values: list[int] = field(default_factory=lambda: [4])
    budgets: list[Budget] = field(default_factory=lambda: [100])
    thetas: list[float] = field(default_factory=lambda: [0.2])
    stream_sizes: list[int] = field(default_factory=list)
    input_path: Optional[str] = None
    gen: Optional[tuple[int, int]] = None
    delimiter: Optional[str] = None
    output_dir: str = "results"
    base_seed: int = 0
    jobs: int = 1
    shuffle: bool = False
    reshuffle: bool = False
    aggregation: Aggregation = Aggregation.EAGER
    execution: ExecutionMode = ExecutionMode.DETERMINISTIC
    instrument: bool = False
    oracle_edge_limit: int = DEFAULT_ORACLE_EDGE_LIMIT
    histogram_bins: int = 30

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ExperimentSpecError(f"unknown spec keys: {sorted(unknown)}")
        if "kind" not in data:
            raise ExperimentSpecError("spec needs a kind")
        values = dict(data)
        if values.get("gen") is not None:
            values["gen"] = tuple(values["gen"])
        return cls(**values).validate()

    @classmethod
    def from_json_file(cls, path: Union[str, Path]) -> "ExperimentSpec":
        return cls.from_dict(read_spec_file(path))

    def validate(self) -> "ExperimentSpec":
        try:
            self.kind = ExperimentKind(self.kind)
            self.aggregation = Aggregation(self.aggregation)
            self.execution = ExecutionMode(self.execution)
        except ValueError as e:
            raise ExperimentSpecError(str(e)) from None

        if self.trials < 1:
            raise ExperimentSpecError(f"trials must be at least 1, got {self.trials}")
        if self.kind is not ExperimentKind.PARTITION_STATS and not self.algorithms:
            raise ExperimentSpecError("algorithms must not be empty")
        for label in self.algorithms:
            if label not in ALGORITHM_LABELS:
                raise ExperimentSpecError(
                    f"unknown algorithm {label!r}, "
                    f"expected one of {sorted(ALGORITHM_LABELS)}"
                )
        for name in ("k_values", "budgets", "thetas"):
            if not getattr(self, name):
                raise ExperimentSpecError(f"{name} must not be empty")
        if any(k < 1 for k in self.k_values):
            raise ExperimentSpecError(f"k values must be at least 1: {self.k_values}")
        for budget in self.budgets:
            if isinstance(budget, float):
                if not 0.0 < budget <= 1.0:
                    raise ExperimentSpecError(
                        f"fractional budget must lie in (0, 1], got {budget}"
                    )
            elif budget < 2:
                raise ExperimentSpecError(f"budget must be at least 2, got {budget}")
        if any(theta < 0 for theta in self.thetas):
            raise ExperimentSpecError(
                f"theta values must be non-negative: {self.thetas}"
            )
        if self.kind is ExperimentKind.SCALABILITY and not self.stream_sizes:
            raise ExperimentSpecError("scalability experiments need stream_sizes")
        if (self.input_path is None) == (self.gen is None):
            raise ExperimentSpecError("give exactly one of input_path or gen")
        if self.gen is not None and len(self.gen) != 2:
            raise ExperimentSpecError(f"gen must be (n, m), got {self.gen}")
        if self.jobs < 1:
            raise ExperimentSpecError(f"jobs must be at least 1, got {self.jobs}")
        return self

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        for key, value in data.items():
            if isinstance(value, StrEnum):
                data[key] = str(value)
        if self.gen is not None:
            data["gen"] = list(self.gen)
        return data


@dataclass(frozen=True)
class Configuration:
    index: int
    label: str
    algorithm: Algorithm
    k: int
    budget: int
    theta: float
    stream_edges: int


def resolve_budget(budget: Budget, edges: int) -> int:
    """Absolute budget for a stream of ``edges`` edges."""
    if isinstance(budget, float):
        resolved = max(2, int(round(budget * edges)))
        logger.warning(
            "Fractional budget resolved against the stream length",
            extra={"fraction": budget, "edges": edges, "budget": resolved},
        )
        return resolved
    return int(budget)


def _algorithm_for(label: str) -> Algorithm:
    if label == TRIEST_IMPR:
        return Algorithm.TRIFLY
    if label == RANDOM_MAPPING:
        return Algorithm.COCOS_SIMPLE
    return Algorithm(label)


def build_configurations(spec: ExperimentSpec, edges: int) -> list[Configuration]:
    """Expand the experiment grids into configurations, in a fixed order."""
    kind = spec.kind
    k0, theta0 = spec.k_values[0], spec.thetas[0]
    budget0 = spec.budgets[0]

    grid: list[tuple[str, int, Budget, float, int]] = []
    if kind is ExperimentKind.PARTITION_STATS:
        grid.extend((RANDOM_MAPPING, k, budget0, theta0, edges) for k in spec.k_values)
    for label in spec.algorithms if kind is not ExperimentKind.PARTITION_STATS else []:
        if kind in (ExperimentKind.VARIANCE_VS_K, ExperimentKind.ACCURACY_VS_WORKERS):
            grid.extend((label, k, budget0, theta0, edges) for k in spec.k_values)
        elif kind is ExperimentKind.ACCURACY_VS_BUDGET:
            grid.extend((label, k0, b, theta0, edges) for b in spec.budgets)
        elif kind is ExperimentKind.THETA_SWEEP:
            grid.extend((label, k0, budget0, theta, edges) for theta in spec.thetas)
        elif kind is ExperimentKind.SCALABILITY:
            grid.extend(
                (label, k0, budget0, theta0, size) for size in spec.stream_sizes
            )
        else:
            grid.extend(
                (label, k, b, theta0, edges)
                for k in spec.k_values
                for b in spec.budgets
            )

    configurations = []
    seen = set()
    for label, k, budget, theta, size in grid:
        if label == TRIEST_IMPR:
            k = 1
        key = (label, k, budget, theta, size)
        if key in seen:
            continue
        seen.add(key)
        configurations.append(
            Configuration(
                index=len(configurations),
                label=label,
                algorithm=_algorithm_for(label),
                k=k,
                budget=resolve_budget(budget, size),
                theta=theta,
                stream_edges=size,
            )
        )
    return configurations


def load_stream(spec: ExperimentSpec) -> GraphStream:
    """The experiment's base stream, in the order every trial replays."""
    if spec.input_path is not None:
        stream = parse_edge_list(spec.input_path, spec.delimiter)
    else:
        n, m = spec.gen
        stream = gen_random_graph(n, m, derive_seed(spec.base_seed))
    if spec.shuffle:
        stream = shuffle_stream(stream, spec.base_seed)
    return stream


def _scaled_stream(spec: ExperimentSpec, base: GraphStream, size: int) -> GraphStream:
    """A stream of ``size`` edges for scalability runs.

    File inputs are truncated; generated inputs are regenerated at the same
    average degree.
    """
    if spec.input_path is not None:
        if size > len(base):
            raise ExperimentSpecError(
                f"stream size {size} exceeds the {len(base)} edges of {spec.input_path}"
            )
        return GraphStream(edges=base.edges[:size])
    n, m = spec.gen
    nodes = max(int(math.ceil(n * size / m)), int(math.isqrt(2 * size)) + 2)
    return gen_random_graph(nodes, size, derive_seed(spec.base_seed, size))


def compute_oracle(stream: GraphStream, limit: int) -> Optional[TriangleSet]:
    """Exact counts through the oracle cache, or ``None`` past ``limit`` edges."""
    if len(stream) > limit:
        logger.warning(
            "Stream exceeds the oracle limit, accuracy columns are omitted",
            extra={"edges": len(stream), "limit": limit},
        )
        return None
    return cache_manager.get_or_set(
        "exact_count", stream.fingerprint(), lambda: exact_count(stream)
    )


def final_assignment(
    stream: GraphStream, config: Configuration, hash_salt: int = 0
) -> dict[int, int]:
    """f at the end of the stream; independent of the sampling seed."""
    policy = (
        MappingPolicy.ADAPTIVE
        if config.algorithm is Algorithm.COCOS_OPT
        else MappingPolicy.MODULO
    )
    node_map = NodeMap(config.k, policy=policy, theta=config.theta, salt=hash_salt)
    for edge in stream:
        node_map.route(edge)
    return node_map.snapshot(stream.nodes())


def configuration_variance_bound(
    stream: GraphStream, oracle: TriangleSet, config: Configuration
) -> float:
    """z for one worker, z/k for Tri-Fly, the sum of z_i for CoCoS.

    Pair counts are cached per stream and partitions per stream and mapping;
    z itself is recomputed for every budget.
    """
    fingerprint = stream.fingerprint()
    if config.algorithm is Algorithm.TRIFLY:
        pairs = cache_manager.get_or_set(
            "pair_counts", fingerprint, lambda: pair_counts(stream, oracle=oracle)
        )
        z = variance_bound(len(stream), config.budget, oracle.global_count, pairs)
        return z / config.k

    adaptive = config.algorithm is Algorithm.COCOS_OPT
    partitions = cache_manager.get_or_set(
        "partitions",
        fingerprint,
        lambda: partition_stats(
            stream,
            final_assignment(stream, config),
            config.k,
            config.budget,
            oracle=oracle,
        ),
        policy=str(MappingPolicy.ADAPTIVE if adaptive else MappingPolicy.MODULO),
        k=config.k,
        theta=config.theta if adaptive else None,
    )
    return float(
        sum(
            variance_bound(p.load, config.budget, p.triangles, p.pairs)
            for p in partitions
        )
    )


def _tracked_nodes(oracle: TriangleSet, seed: int) -> list[int]:
    candidates = sorted(node for node, count in oracle.per_node.items() if count > 0)
    if len(candidates) <= TRACKED_LOCAL_NODES:
        return candidates
    chosen = numpy_rng(seed, 2).choice(
        len(candidates), size=TRACKED_LOCAL_NODES, replace=False
    )
    return sorted(candidates[i] for i in chosen.tolist())


def _run_trial(
    spec: ExperimentSpec,
    config: Configuration,
    trial: int,
    stream: GraphStream,
    oracle: Optional[TriangleSet],
    tracked: list[int],
) -> tuple[dict[str, Any], list[dict[str, Any]]]:
    seed = derive_seed(spec.base_seed, config.index, trial, 0)
    stream_seed = derive_seed(spec.base_seed, config.index, trial, 1)
    trial_stream = shuffle_stream(stream, stream_seed) if spec.reshuffle else stream

    pipeline = TrianglePipeline(
        PipelineConfig(
            algorithm=config.algorithm,
            k=config.k,
            budget=config.budget,
            theta=config.theta,
            seed=seed,
            aggregation=spec.aggregation,
            execution=spec.execution,
            instrumentation=spec.instrument,
        )
    )
    report = pipeline.process(trial_stream)
    estimates = report.estimates

    loads = report.master_loads
    mean_load = sum(loads) / len(loads)
    row: dict[str, Any] = {
        "config_index": config.index,
        "trial": trial,
        "algorithm": config.label,
        "k": config.k,
        "budget": config.budget,
        "theta": config.theta,
        "stream_edges": len(trial_stream),
        "seed": seed,
        "stream_seed": stream_seed if spec.reshuffle else None,
        "global_estimate": estimates.global_estimate,
        "true_global": None,
        "global_error": None,
        "local_error": None,
        "local_rmse": None,
        "rank_correlation": None,
        "rank_correlation_defined": None,
        "lucky": report.lucky_count,
        "unlucky": report.unlucky_count,
        "messages_total": sum(report.messages_sent.values()),
        "evictions_total": sum(report.worker_evictions),
        "load_imbalance": max(loads) / mean_load if mean_load else 1.0,
        "storage_redundancy": report.storage_redundancy,
        "elapsed_seconds": report.elapsed_seconds,
    }

    local_rows = []
    if oracle is not None:
        truth = {node: oracle.local(node) for node in oracle.nodes}
        accuracy = accuracy_report(
            oracle.global_count,
            truth,
            estimates.global_estimate,
            estimates.local_estimates,
        )
        row.update(
            true_global=oracle.global_count,
            global_error=accuracy.global_error,
            local_error=accuracy.local_error,
            local_rmse=accuracy.local_rmse,
            rank_correlation=accuracy.rank_correlation,
            rank_correlation_defined=accuracy.rank_correlation_defined,
        )
        for node in tracked:
            local_rows.append(
                {
                    "config_index": config.index,
                    "trial": trial,
                    "node": node,
                    "estimate": estimates.local(node),
                    "truth": oracle.local(node),
                }
            )
    return row, local_rows


def _partition_trial(
    spec: ExperimentSpec,
    config: Configuration,
    trial: int,
    stream: GraphStream,
    oracle: TriangleSet,
) -> dict[str, Any]:
    """One random f. Columns: config_index, trial, k, budget, seed,
    triangles_total, mean_triangles, mean_load, mean_type1, mean_type2,
    variance_bound_sum."""
    seed = derive_seed(spec.base_seed, config.index, trial, 0)
    assignment = random_assignment(oracle.nodes, config.k, seed)
    partitions = partition_stats(
        stream, assignment, config.k, config.budget, oracle=oracle
    )
    k = config.k
    return {
        "config_index": config.index,
        "trial": trial,
        "k": k,
        "budget": config.budget,
        "seed": seed,
        "triangles_total": sum(p.triangles for p in partitions),
        "mean_triangles": sum(p.triangles for p in partitions) / k,
        "mean_load": sum(p.load for p in partitions) / k,
        "mean_type1": sum(p.pairs.type1 for p in partitions) / k,
        "mean_type2": sum(p.pairs.type2 for p in partitions) / k,
        "variance_bound_sum": sum(p.variance_bound for p in partitions),
    }


def _mean_and_stderr(values: pd.Series) -> tuple[float, float]:
    values = values.dropna()
    if len(values) == 0:
        return math.nan, math.nan
    if len(values) == 1:
        return float(values.iloc[0]), math.nan
    stats = trial_stats(values.to_numpy())
    return stats.mean, stats.stderr


def summarize_trials(
    trials: pd.DataFrame,
    configurations: list[Configuration],
    bounds: dict[int, float],
) -> pd.DataFrame:
    """One summary row per configuration."""
    rows = []
    for config in configurations:
        group = trials[trials["config_index"] == config.index]
        estimates = group["global_estimate"].to_numpy(dtype=np.float64)
        if len(estimates) >= 2:
            stats = trial_stats(estimates)
            mean, variance, stderr = stats
        else:
            mean, variance, stderr = float(estimates[0]), math.nan, math.nan

        true_values = group["true_global"].dropna()
        truth = float(true_values.iloc[0]) if len(true_values) else math.nan
        bias = math.nan
        if stderr and not math.isnan(truth):
            bias = abs(mean - truth) / stderr
        mean_error, stderr_error = _mean_and_stderr(group["global_error"])
        rows.append(
            {
                "config_index": config.index,
                "algorithm": config.label,
                "k": config.k,
                "budget": config.budget,
                "theta": config.theta,
                "stream_edges": config.stream_edges,
                "trials": len(group),
                "true_global": truth,
                "mean_estimate": mean,
                "variance": variance,
                "stderr": stderr,
                "bias_in_stderr": bias,
                "variance_bound": bounds.get(config.index, math.nan),
                "mean_global_error": mean_error,
                "stderr_global_error": stderr_error,
                "mean_local_error": _mean_and_stderr(group["local_error"])[0],
                "mean_local_rmse": _mean_and_stderr(group["local_rmse"])[0],
                "mean_rank_correlation": _mean_and_stderr(group["rank_correlation"])[0],
                "mean_load_imbalance": float(group["load_imbalance"].mean()),
                "mean_storage_redundancy": float(group["storage_redundancy"].mean()),
                "mean_elapsed_seconds": float(group["elapsed_seconds"].mean()),
            }
        )
    return pd.DataFrame(rows)


def summarize_partitions(
    trials: pd.DataFrame,
    configurations: list[Configuration],
    oracle: TriangleSet,
    edges: int,
) -> pd.DataFrame:
    rows = []
    for config in configurations:
        group = trials[trials["config_index"] == config.index]
        row = {
            "config_index": config.index,
            "k": config.k,
            "budget": config.budget,
            "trials": len(group),
            "expected_triangles": oracle.global_count / config.k,
            "expected_load": expected_partition_load(edges, config.k),
        }
        for column in ("mean_triangles", "mean_load", "mean_type1", "mean_type2"):
            mean, stderr = _mean_and_stderr(group[column])
            row[column] = mean
            row[column.replace("mean_", "stderr_")] = stderr
        row["mean_variance_bound_sum"] = float(group["variance_bound_sum"].mean())
        rows.append(row)
    return pd.DataFrame(rows)


def fitted_slopes(kind: ExperimentKind, summary: pd.DataFrame) -> dict[str, float]:
    """Log-log slopes recorded in the manifest, keyed by series."""
    series: list[tuple[str, str, str, pd.DataFrame]] = []
    if kind is ExperimentKind.PARTITION_STATS:
        for column in ("mean_triangles", "mean_load", "mean_type1", "mean_type2"):
            series.append((column, "k", column, summary))
    else:
        x_column, y_column = {
            ExperimentKind.VARIANCE_VS_K: ("k", "variance"),
            ExperimentKind.ACCURACY_VS_WORKERS: ("k", "mean_global_error"),
            ExperimentKind.ACCURACY_VS_BUDGET: ("budget", "mean_global_error"),
            ExperimentKind.SCALABILITY: ("stream_edges", "mean_elapsed_seconds"),
        }.get(kind, (None, None))
        if x_column is None:
            return {}
        for label, group in summary.groupby("algorithm", sort=False):
            series.append((str(label), x_column, y_column, group))

    slopes = {}
    for name, x_column, y_column, frame in series:
        try:
            slopes[name] = fit_loglog_slope(
                frame[x_column].tolist(), frame[y_column].tolist()
            )
        except ValueError:
            logger.debug("Not enough points for a slope", extra={"series": name})
    return slopes


def _execute(jobs: int, tasks: list, run_task) -> list:
    """Run tasks on a thread pool; results keep task order."""
    if jobs == 1:
        return [run_task(*task) for task in tasks]
    results = [None] * len(tasks)
    with ThreadPoolExecutor(max_workers=jobs) as executor:
        futures = {executor.submit(run_task, *task): i for i, task in enumerate(tasks)}
        for future in as_completed(futures):
            results[futures[future]] = future.result()
    return results


def run_experiment(spec: ExperimentSpec) -> dict[str, Path]:
    """Run every configuration and trial of ``spec`` and write the result files.

    Returns:
        Mapping from file role (``trials``, ``summary``, ``manifest`` and,
        for unbiasedness, ``local_trials``) to the written path.
    """
    spec.validate()
    with tracer.start_as_current_span("experiments.run_experiment") as span:
        add_span_attributes(
            span,
            **{
                SpanAttributes.CODE_FUNCTION: "run_experiment",
                PipelineAttributes.EXPERIMENT_KIND: str(spec.kind),
                PipelineAttributes.EXPERIMENT_TRIALS: spec.trials,
                PipelineAttributes.SEED: spec.base_seed,
            },
        )
        try:
            return _run_experiment(spec)
        except Exception as e:
            add_enhanced_error_attributes(span, e, kind=str(spec.kind))
            logger.error(
                "Experiment failed",
                exc_info=True,
                extra={"kind": str(spec.kind), "error_type": e.__class__.__name__},
            )
            raise


def _run_experiment(spec: ExperimentSpec) -> dict[str, Path]:
    output_dir = Path(spec.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    base = load_stream(spec)
    configurations = build_configurations(spec, len(base))
    logger.info(
        "Starting experiment",
        extra={
            "kind": str(spec.kind),
            "configurations": len(configurations),
            "trials": spec.trials,
            "edges": len(base),
        },
    )

    streams: dict[int, GraphStream] = {len(base): base}
    if spec.kind is ExperimentKind.SCALABILITY:
        for size in spec.stream_sizes:
            streams.setdefault(size, _scaled_stream(spec, base, size))
    oracles = {
        size: compute_oracle(stream, spec.oracle_edge_limit)
        for size, stream in streams.items()
    }
    oracle = oracles[len(base)]
    files: dict[str, Path] = {}

    if spec.kind is ExperimentKind.PARTITION_STATS:
        if oracle is None:
            raise ExperimentSpecError(
                "partition statistics need the exact oracle; raise oracle_edge_limit"
            )
        tasks = [
            (spec, config, trial, base, oracle)
            for config in configurations
            for trial in range(spec.trials)
        ]
        trials = pd.DataFrame(_execute(spec.jobs, tasks, _partition_trial))
        summary = summarize_partitions(trials, configurations, oracle, len(base))
    else:
        tracked = (
            _tracked_nodes(oracle, spec.base_seed)
            if oracle is not None and spec.kind is ExperimentKind.UNBIASEDNESS
            else []
        )
        tasks = [
            (
                spec,
                config,
                trial,
                streams[config.stream_edges],
                oracles[config.stream_edges],
                tracked,
            )
            for config in configurations
            for trial in range(spec.trials)
        ]
        results = _execute(spec.jobs, tasks, _run_trial)
        trials = pd.DataFrame([row for row, _ in results])
        local_rows = [local for _, locals_ in results for local in locals_]

        bounds = {}
        if oracle is not None and spec.kind in (
            ExperimentKind.UNBIASEDNESS,
            ExperimentKind.VARIANCE_VS_K,
        ):
            bounds = {
                config.index: configuration_variance_bound(base, oracle, config)
                for config in configurations
            }
        summary = summarize_trials(trials, configurations, bounds)
        if local_rows:
            files["local_trials"] = output_dir / "local_trials.csv"
            pd.DataFrame(local_rows).to_csv(files["local_trials"], index=False)

    files["trials"] = output_dir / "trials.csv"
    files["summary"] = output_dir / "summary.csv"
    files["manifest"] = output_dir / "manifest.json"
    trials.to_csv(files["trials"], index=False)
    summary.to_csv(files["summary"], index=False)

    manifest = {
        "package_version": __version__,
        "kind": str(spec.kind),
        "spec": spec.to_dict(),
        "stream": {
            "edges": len(base),
            "nodes": len(base.nodes()),
            "fingerprint": base.fingerprint(),
            "source": spec.input_path or f"gen:{spec.gen[0]},{spec.gen[1]}",
        },
        "oracle": {
            "status": "computed" if oracle is not None else "skipped",
            "triangles": oracle.global_count if oracle is not None else None,
            "edge_limit": spec.oracle_edge_limit,
        },
        "configurations": len(configurations),
        "slopes": fitted_slopes(spec.kind, summary),
        "files": sorted(path.name for path in files.values()),
    }
    with open(files["manifest"], "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2)

    logger.info(
        "Experiment finished",
        extra={"kind": str(spec.kind), "output_dir": str(output_dir)},
    )
    return files


def _require(frame: pd.DataFrame, columns: list[str], source: Path) -> None:
    missing = [column for column in columns if column not in frame.columns]
    if missing:
        raise PlotDataError(f"{source} lacks columns {missing}")


def _write_series(path: Path, frame: pd.DataFrame, header: str = "") -> Path:
    with open(path, "w", encoding="utf-8") as handle:
        if header:
            handle.write(f"# {header}\n")
        handle.write("# " + " ".join(frame.columns) + "\n")
        frame.to_csv(handle, sep=" ", header=False, index=False, na_rep="nan")
    return path


def _per_algorithm(
    summary: pd.DataFrame,
    out_dir: Path,
    stem: str,
    columns: list[str],
    source: Path,
) -> list[Path]:
    _require(summary, ["algorithm", *columns], source)
    written = []
    for label, group in summary.groupby("algorithm", sort=False):
        written.append(
            _write_series(out_dir / f"{stem}_{label}.dat", group[columns])
        )
    return written


def emit_plotdata(
    results_dir: Union[str, Path], out_dir: Optional[Union[str, Path]] = None
) -> list[Path]:
    """Write gnuplot-ready ``.dat`` series for an experiment's results.

    Raises:
        PlotDataError: If a result file is missing or lacks a column.
    """
    results_dir = Path(results_dir)
    out_dir = Path(out_dir) if out_dir is not None else results_dir / "plotdata"

    with tracer.start_as_current_span("experiments.emit_plotdata") as span:
        add_span_attributes(
            span,
            **{
                SpanAttributes.CODE_FUNCTION: "emit_plotdata",
                "results.dir": str(results_dir),
            },
        )
        try:
            written = _emit_plotdata(results_dir, out_dir)
        except (OSError, PlotDataError, ValueError) as e:
            add_enhanced_error_attributes(span, e, results_dir=str(results_dir))
            logger.error(
                "Failed to emit plot data",
                exc_info=True,
                extra={"results_dir": str(results_dir)},
            )
            raise
        logger.info(
            "Plot data written",
            extra={"out_dir": str(out_dir), "series": len(written)},
        )
        return written


def _emit_plotdata(results_dir: Path, out_dir: Path) -> list[Path]:
    manifest_path = results_dir / "manifest.json"
    summary_path = results_dir / "summary.csv"
    trials_path = results_dir / "trials.csv"
    for path in (manifest_path, summary_path, trials_path):
        if not path.exists():
            raise PlotDataError(f"missing result file {path}")

    with open(manifest_path, "r", encoding="utf-8") as handle:
        manifest = json.load(handle)
    try:
        kind = ExperimentKind(manifest.get("kind"))
    except ValueError:
        raise PlotDataError(f"{manifest_path} names no known experiment kind") from None
    summary = pd.read_csv(summary_path)
    out_dir.mkdir(parents=True, exist_ok=True)

    if kind is ExperimentKind.VARIANCE_VS_K:
        return _per_algorithm(
            summary,
            out_dir,
            "variance_vs_k",
            ["k", "variance", "variance_bound"],
            summary_path,
        )
    if kind is ExperimentKind.ACCURACY_VS_WORKERS:
        return _per_algorithm(
            summary,
            out_dir,
            "accuracy_vs_workers",
            ["k", "mean_global_error", "stderr_global_error"],
            summary_path,
        )
    if kind is ExperimentKind.ACCURACY_VS_BUDGET:
        _require(summary, ["budget", "stream_edges"], summary_path)
        summary = summary.assign(
            budget_fraction=summary["budget"] / summary["stream_edges"]
        )
        return _per_algorithm(
            summary,
            out_dir,
            "accuracy_vs_budget",
            ["budget_fraction", "mean_global_error", "stderr_global_error"],
            summary_path,
        )
    if kind is ExperimentKind.SPEED_ACCURACY:
        return _per_algorithm(
            summary,
            out_dir,
            "speed_accuracy",
            ["mean_elapsed_seconds", "mean_global_error", "k", "budget"],
            summary_path,
        )
    if kind is ExperimentKind.SCALABILITY:
        return _per_algorithm(
            summary,
            out_dir,
            "scalability",
            ["stream_edges", "mean_elapsed_seconds"],
            summary_path,
        )
    if kind is ExperimentKind.THETA_SWEEP:
        return _per_algorithm(
            summary,
            out_dir,
            "theta_sweep",
            [
                "theta",
                "mean_global_error",
                "mean_load_imbalance",
                "mean_storage_redundancy",
            ],
            summary_path,
        )
    if kind is ExperimentKind.PARTITION_STATS:
        columns = ["k", "mean_triangles", "mean_load", "mean_type1", "mean_type2"]
        _require(summary, columns, summary_path)
        return [_write_series(out_dir / "partition_stats.dat", summary[columns])]

    return _unbiasedness_histograms(
        pd.read_csv(trials_path),
        summary,
        out_dir,
        manifest.get("spec", {}).get("histogram_bins", 30),
        trials_path,
    )


def _unbiasedness_histograms(
    trials: pd.DataFrame,
    summary: pd.DataFrame,
    out_dir: Path,
    bins: int,
    source: Path,
) -> list[Path]:
    _require(trials, ["config_index", "global_estimate"], source)
    _require(
        summary, ["config_index", "algorithm", "k", "budget", "true_global"], source
    )
    written = []
    for _, config in summary.iterrows():
        estimates = trials.loc[
            trials["config_index"] == config["config_index"], "global_estimate"
        ].to_numpy(dtype=np.float64)
        counts, edges = np.histogram(estimates, bins=bins)
        centers = (edges[:-1] + edges[1:]) / 2.0
        frame = pd.DataFrame({"estimate": centers, "count": counts})
        name = (
            f"unbiasedness_{config['algorithm']}"
            f"_k{config['k']}_b{config['budget']}.dat"
        )
        written.append(
            _write_series(
                out_dir / name,
                frame,
                header=f"true_global {config['true_global']} mean {estimates.mean()!r}",
            )
        )
    return written
