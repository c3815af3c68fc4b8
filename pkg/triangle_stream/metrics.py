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

"""Accuracy metrics and cross-trial statistics."""

import math
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np
from scipy.stats import rankdata

from .stream_ingest import NodeId


class RankCorrelation(NamedTuple):
    """Spearman coefficient; ``defined`` is False when a rank vector is constant."""

    coefficient: float
    defined: bool


class TrialStats(NamedTuple):
    mean: float
    variance: float
    stderr: float


@dataclass(frozen=True)
class AccuracyReport:
    global_error: float
    local_error: float
    local_rmse: float
    rank_correlation: float
    rank_correlation_defined: bool


def global_error(truth: float, estimate: float) -> float:
    """``|x - x̂| / (1 + x)``."""
    if truth < 0:
        raise ValueError(f"true count must be non-negative, got {truth}")
    return abs(truth - estimate) / (1.0 + truth)


def _aligned(
    truth: Mapping[NodeId, float], estimate: Mapping[NodeId, float]
) -> tuple[np.ndarray, np.ndarray]:
    """Vectors over the truth's node set; missing estimates read as 0."""
    if not truth:
        raise ValueError("metrics need at least one node")
    nodes = list(truth)
    x = np.fromiter((truth[node] for node in nodes), dtype=np.float64, count=len(nodes))
    x_hat = np.fromiter(
        (estimate.get(node, 0.0) for node in nodes), dtype=np.float64, count=len(nodes)
    )
    return x, x_hat


def local_error(
    truth: Mapping[NodeId, float], estimate: Mapping[NodeId, float]
) -> float:
    """Mean over nodes of ``|x[u] - x̂[u]| / (1 + x[u])``."""
    x, x_hat = _aligned(truth, estimate)
    return float(np.mean(np.abs(x - x_hat) / (1.0 + x)))


def local_rmse(
    truth: Mapping[NodeId, float], estimate: Mapping[NodeId, float]
) -> float:
    x, x_hat = _aligned(truth, estimate)
    return float(np.sqrt(np.mean((x - x_hat) ** 2)))


def rank_correlation(
    truth: Mapping[NodeId, float], estimate: Mapping[NodeId, float]
) -> RankCorrelation:
    """Spearman's coefficient with average ranks for ties."""
    x, x_hat = _aligned(truth, estimate)
    if len(x) < 2:
        return RankCorrelation(0.0, False)
    ranks_x = rankdata(x, method="average")
    ranks_est = rankdata(x_hat, method="average")
    if np.ptp(ranks_x) == 0 or np.ptp(ranks_est) == 0:
        return RankCorrelation(0.0, False)
    return RankCorrelation(float(np.corrcoef(ranks_x, ranks_est)[0, 1]), True)


def trial_stats(samples: Sequence[float]) -> TrialStats:
    """Mean, unbiased sample variance and standard error of the mean.

    Raises:
        ValueError: With fewer than two samples.
    """
    values = np.asarray(samples, dtype=np.float64)
    n = values.size
    if n < 2:
        raise ValueError(f"sample variance needs at least 2 samples, got {n}")
    variance = float(np.var(values, ddof=1))
    return TrialStats(float(np.mean(values)), variance, math.sqrt(variance / n))


def accuracy_report(
    true_global: float,
    true_local: Mapping[NodeId, float],
    estimated_global: float,
    estimated_local: Mapping[NodeId, float],
) -> AccuracyReport:
    """All four accuracy metrics for one run.

    ``true_local`` must cover every node of the final graph, zeros included.
    """
    correlation = rank_correlation(true_local, estimated_local)
    return AccuracyReport(
        global_error=global_error(true_global, estimated_global),
        local_error=local_error(true_local, estimated_local),
        local_rmse=local_rmse(true_local, estimated_local),
        rank_correlation=correlation.coefficient,
        rank_correlation_defined=correlation.defined,
    )


def fit_loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``log x``.

    Points with a non-positive coordinate are skipped.
    """
    pairs = [(x, y) for x, y in zip(xs, ys) if x > 0 and y > 0]
    if len(pairs) < 2:
        raise ValueError("a log-log fit needs at least two positive points")
    log_x = np.log([x for x, _ in pairs])
    log_y = np.log([y for _, y in pairs])
    slope, _ = np.polyfit(log_x, log_y, 1)
    return float(slope)
