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
Exact ground truth for desk-scale streams.

Computes the triangle set with per-node counts, the Type-1 / Type-2
triangle pair counts that drive the variance bounds, the bounds themselves,
and per-worker partition statistics under a node mapping f.
"""

from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, Optional

from opentelemetry.semconv.trace import SpanAttributes

from .seeding import numpy_rng
from .stream_ingest import Edge, GraphStream, NodeId
from .telemetry import PipelineAttributes, add_span_attributes, get_logger, get_tracer

tracer = get_tracer()
logger = get_logger()

Triangle = tuple[NodeId, NodeId, NodeId]


class IncompleteAssignmentError(KeyError):
    """A node of the stream has no worker under the given assignment."""


@dataclass
class TriangleSet:
    """All triangles of a stream with the edge that closed each one."""

    triangles: set[Triangle] = field(default_factory=set)
    per_node: dict[NodeId, int] = field(default_factory=dict)
    closing_edge: dict[Triangle, Edge] = field(default_factory=dict)
    nodes: set[NodeId] = field(default_factory=set)
    edge_count: int = 0

    @property
    def global_count(self) -> int:
        return len(self.triangles)

    def local(self, node: NodeId) -> int:
        return self.per_node.get(node, 0)


@dataclass(frozen=True)
class PairCounts:
    """Type-1 and Type-2 triangle pairs, plus all pairs sharing an edge."""

    type1: int = 0
    type2: int = 0
    shared_edge_pairs: int = 0

    @property
    def total(self) -> int:
        return self.type1 + self.type2


@dataclass(frozen=True)
class WorkerPartition:
    """What one worker can count under a fixed node mapping."""

    worker: int
    triangles: int
    load: int
    pairs: PairCounts
    variance_bound: float


def exact_count(stream: GraphStream) -> TriangleSet:
    """Enumerate every triangle once, at the arrival of its last edge."""
    with tracer.start_as_current_span("triangle_oracle.exact_count") as span:
        add_span_attributes(
            span,
            **{
                SpanAttributes.CODE_FUNCTION: "exact_count",
                PipelineAttributes.STREAM_EDGES: len(stream),
            },
        )
        adjacency: dict[NodeId, set[NodeId]] = defaultdict(set)
        per_node: dict[NodeId, int] = defaultdict(int)
        result = TriangleSet(edge_count=len(stream))

        for edge in stream:
            u, v = edge
            neighbours_u = adjacency[u]
            neighbours_v = adjacency[v]
            if len(neighbours_u) > len(neighbours_v):
                neighbours_u, neighbours_v = neighbours_v, neighbours_u
            for w in neighbours_u:
                if w in neighbours_v:
                    triangle = tuple(sorted((u, v, w)))
                    result.triangles.add(triangle)
                    result.closing_edge[triangle] = edge
                    per_node[u] += 1
                    per_node[v] += 1
                    per_node[w] += 1
            adjacency[u].add(v)
            adjacency[v].add(u)

        result.per_node = dict(per_node)
        result.nodes = set(adjacency)
        add_span_attributes(
            span, **{PipelineAttributes.ORACLE_TRIANGLES: result.global_count}
        )
        logger.debug(
            "Exact triangle count finished",
            extra={"edges": len(stream), "triangles": result.global_count},
        )
        return result


def _triangle_edges(triangle: Triangle) -> tuple[Edge, Edge, Edge]:
    a, b, c = triangle
    return Edge(a, b), Edge(a, c), Edge(b, c)


def _classify_pair(shared: Edge, closing_a: Edge, closing_b: Edge) -> int:
    """0 for neither type, 1 for Type-1, 2 for Type-2.

    A pair counts only when neither triangle was closed by the shared edge.
    Type-1: both closing edges touch the same endpoint of the shared edge.
    Type-2: they touch different endpoints.
    """
    if closing_a == shared or closing_b == shared:
        return 0
    s_u, s_v = shared
    end_a = s_u if s_u in closing_a else s_v
    end_b = s_u if s_u in closing_b else s_v
    return 1 if end_a == end_b else 2


def pair_counts(
    stream: GraphStream,
    oracle: Optional[TriangleSet] = None,
    restrict_to: Optional[Iterable[Triangle]] = None,
) -> PairCounts:
    """Count Type-1 and Type-2 triangle pairs by brute force over shared edges.

    Args:
        stream: The stream; arrival order decides each triangle's last edge.
        oracle: Precomputed ``exact_count(stream)``, to avoid recounting.
        restrict_to: Only pairs with both triangles in this set are counted.
    """
    oracle = oracle if oracle is not None else exact_count(stream)
    triangles = oracle.triangles if restrict_to is None else set(restrict_to)

    by_edge: dict[Edge, list[Triangle]] = defaultdict(list)
    for triangle in triangles:
        for edge in _triangle_edges(triangle):
            by_edge[edge].append(triangle)

    type1 = type2 = shared_pairs = 0
    for shared, incident in by_edge.items():
        if len(incident) < 2:
            continue
        for first, second in combinations(incident, 2):
            shared_pairs += 1
            kind = _classify_pair(
                shared, oracle.closing_edge[first], oracle.closing_edge[second]
            )
            if kind == 1:
                type1 += 1
            elif kind == 2:
                type2 += 1
    return PairCounts(type1=type1, type2=type2, shared_edge_pairs=shared_pairs)


def variance_bound(t: int, budget: int, triangles: int, pairs: PairCounts) -> float:
    """Upper bound z on the variance of a single-reservoir global estimate.

    ``max(0, |T|((t-1)(t-2)/(b(b-1)) - 1) + (p+q)(t-1-b)/b)``.
    """
    if budget < 2:
        raise ValueError(f"budget must be at least 2, got {budget}")
    b = float(budget)
    value = triangles * ((t - 1) * (t - 2) / (b * (b - 1)) - 1.0)
    value += pairs.total * (t - 1 - b) / b
    return max(0.0, value)


def designated_worker(
    triangle: Triangle, closing: Edge, assignment: Mapping[NodeId, int]
) -> int:
    """The only worker able to count ``triangle`` under CoCoS.

    f(u) when the closing edge {u, v} is lucky, otherwise f(w) for the
    third node w.
    """
    u, v = closing
    fu, fv = assignment[u], assignment[v]
    if fu == fv:
        return fu
    (w,) = set(triangle) - {u, v}
    return assignment[w]


def partition_stats(
    stream: GraphStream,
    assignment: Mapping[NodeId, int],
    k: int,
    budget: int,
    oracle: Optional[TriangleSet] = None,
) -> list[WorkerPartition]:
    """Per-worker ``(|T_i|, l_i, p_i, q_i, z_i)`` under a complete mapping.

    Raises:
        IncompleteAssignmentError: If some stream node is unmapped.
    """
    oracle = oracle if oracle is not None else exact_count(stream)
    missing = [node for node in oracle.nodes if node not in assignment]
    if missing:
        raise IncompleteAssignmentError(
            f"{len(missing)} node(s) have no worker, e.g. {sorted(missing)[:5]}"
        )

    loads = [0] * k
    for u, v in stream:
        fu, fv = assignment[u], assignment[v]
        loads[fu] += 1
        if fv != fu:
            loads[fv] += 1

    owned: list[list[Triangle]] = [[] for _ in range(k)]
    for triangle in oracle.triangles:
        worker = designated_worker(triangle, oracle.closing_edge[triangle], assignment)
        owned[worker].append(triangle)

    partitions = []
    for worker in range(k):
        pairs = pair_counts(stream, oracle=oracle, restrict_to=owned[worker])
        partitions.append(
            WorkerPartition(
                worker=worker,
                triangles=len(owned[worker]),
                load=loads[worker],
                pairs=pairs,
                variance_bound=variance_bound(
                    loads[worker], budget, len(owned[worker]), pairs
                ),
            )
        )
    return partitions


def random_assignment(nodes: Iterable[NodeId], k: int, seed: int) -> dict[NodeId, int]:
    """Uniform random f: each node picks a worker independently."""
    ordered = sorted(nodes)
    workers = numpy_rng(seed).integers(0, k, size=len(ordered))
    return dict(zip(ordered, workers.tolist()))


def expected_partition_load(t: int, k: int) -> float:
    """E[l_i] under uniform random f: ``(2k-1) t / k^2``."""
    return (2 * k - 1) * t / (k * k)
