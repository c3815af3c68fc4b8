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
Graph stream ingestion.

Loads edge-list files, generates Erdos-Renyi streams, and replays them as
ordered sequences of undirected edges. Every materialized stream is simple:
no self-loops and no duplicate unordered pairs. Arrival time is the 1-based
position of an edge in the stream.
"""

import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Optional, Union

import numpy as np
from opentelemetry.semconv.trace import SpanAttributes

from .seeding import derive_seed
from .telemetry import (
    PipelineAttributes,
    add_enhanced_error_attributes,
    add_span_attributes,
    get_logger,
    get_tracer,
)

tracer = get_tracer()
logger = get_logger()

NodeId = int

COMMENT_PREFIXES = ("#", "%")
DEFAULT_DELIMITER = re.compile(r"[,\s]+")


class EdgeListFormatError(ValueError):
    """A line of an edge-list file could not be parsed."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class StreamSizeError(ValueError):
    """More edges were requested than the node count allows."""


class Edge(NamedTuple):
    """Undirected edge stored in canonical order ``u < v``."""

    u: NodeId
    v: NodeId

    @classmethod
    def of(cls, a: NodeId, b: NodeId) -> "Edge":
        """Build the canonical edge for an unordered pair."""
        if a == b:
            raise ValueError(f"self-loop on node {a} is not an edge")
        return cls(a, b) if a < b else cls(b, a)


@dataclass
class GraphStream:
    """An ordered, simple sequence of undirected edges."""

    edges: list[Edge] = field(default_factory=list)
    node_count_hint: Optional[int] = None

    def __len__(self) -> int:
        return len(self.edges)

    def __iter__(self) -> Iterator[Edge]:
        return iter(self.edges)

    def arrivals(self) -> Iterator[tuple[int, Edge]]:
        """Yield ``(t, edge)`` with 1-based arrival times."""
        return enumerate(self.edges, start=1)

    def nodes(self) -> set[NodeId]:
        """Every node that appears in some edge."""
        seen: set[NodeId] = set()
        for u, v in self.edges:
            seen.add(u)
            seen.add(v)
        return seen

    def fingerprint(self) -> str:
        """SHA-256 of the edge sequence; differs when the order differs."""
        digest = hashlib.sha256()
        digest.update(np.asarray(self.edges, dtype=np.int64).tobytes())
        return digest.hexdigest()


def _split(line: str, delimiter: Optional[str]) -> list[str]:
    if delimiter is None:
        return [token for token in DEFAULT_DELIMITER.split(line.strip()) if token]
    return [token.strip() for token in line.strip().split(delimiter) if token.strip()]


def _parse_line(
    line: str, line_number: int, delimiter: Optional[str]
) -> Optional[tuple[int, int]]:
    stripped = line.strip()
    if not stripped or stripped.startswith(COMMENT_PREFIXES):
        return None

    tokens = _split(stripped, delimiter)
    if len(tokens) < 2:
        raise EdgeListFormatError(
            f"expected two node ids, found {len(tokens)} field(s)", line_number
        )
    try:
        a, b = int(tokens[0]), int(tokens[1])
    except ValueError:
        raise EdgeListFormatError(
            f"node ids must be integers, got {tokens[0]!r} {tokens[1]!r}",
            line_number,
        ) from None
    if a < 0 or b < 0:
        raise EdgeListFormatError(f"negative node id in {a} {b}", line_number)
    return a, b


def iter_edge_list(
    path: Union[str, Path], delimiter: Optional[str] = None
) -> Iterator[Edge]:
    """Lazily yield the canonical edges of a file, dropping self-loops only.

    Columns after the second (weights, timestamps) are ignored. No
    deduplication happens here; the caller guarantees a simple stream.
    """
    with open(path, "r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            pair = _parse_line(line, line_number, delimiter)
            if pair is None or pair[0] == pair[1]:
                continue
            yield Edge.of(*pair)


def parse_edge_list(
    path: Union[str, Path], delimiter: Optional[str] = None
) -> GraphStream:
    """Load an edge-list file as a simple graph stream.

    Args:
        path: File with one ``u v`` pair per line. Lines starting with ``#``
            or ``%`` are comments.
        delimiter: Field separator. ``None`` accepts any mix of whitespace
            and commas.

    Returns:
        GraphStream with self-loops and repeated undirected pairs removed,
        keeping the first occurrence of each pair in file order.

    Raises:
        OSError: If the file cannot be read.
        EdgeListFormatError: On a malformed line or a negative id.
    """
    with tracer.start_as_current_span("stream_ingest.parse_edge_list") as span:
        add_span_attributes(
            span,
            **{
                SpanAttributes.CODE_FUNCTION: "parse_edge_list",
                PipelineAttributes.STREAM_SOURCE: str(path),
            },
        )
        try:
            seen: set[Edge] = set()
            edges: list[Edge] = []
            dropped_loops = 0
            dropped_duplicates = 0
            with open(path, "r", encoding="utf-8") as handle:
                for line_number, line in enumerate(handle, start=1):
                    pair = _parse_line(line, line_number, delimiter)
                    if pair is None:
                        continue
                    if pair[0] == pair[1]:
                        dropped_loops += 1
                        continue
                    edge = Edge.of(*pair)
                    if edge in seen:
                        dropped_duplicates += 1
                        continue
                    seen.add(edge)
                    edges.append(edge)
        except (OSError, EdgeListFormatError) as e:
            add_enhanced_error_attributes(span, e, path=str(path))
            logger.error(
                "Failed to parse edge list",
                exc_info=True,
                extra={"path": str(path), "error_type": e.__class__.__name__},
            )
            raise

        add_span_attributes(
            span,
            **{
                PipelineAttributes.STREAM_EDGES: len(edges),
                "stream.dropped.self_loops": dropped_loops,
                "stream.dropped.duplicates": dropped_duplicates,
            },
        )
        logger.info(
            "Parsed edge list",
            extra={
                "path": str(path),
                "edges": len(edges),
                "dropped_self_loops": dropped_loops,
                "dropped_duplicates": dropped_duplicates,
            },
        )
        return GraphStream(edges=edges)


def write_edge_list(stream: GraphStream, path: Union[str, Path]) -> None:
    """Persist a stream as ``u v`` lines in arrival order."""
    with open(path, "w", encoding="utf-8") as handle:
        for u, v in stream.edges:
            handle.write(f"{u} {v}\n")


def shuffle_stream(stream: GraphStream, seed: int) -> GraphStream:
    """Uniformly random permutation of the stream, deterministic in ``seed``.

    Materializes the whole stream; large scalability runs rely on the
    generator's own random order instead.
    """
    rng = np.random.default_rng(derive_seed(seed))
    order = rng.permutation(len(stream.edges))
    return GraphStream(
        edges=[stream.edges[i] for i in order],
        node_count_hint=stream.node_count_hint,
    )


def _decode_pair_indices(indices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map indices of the strict upper triangle to ``(u, v)`` with ``u < v``.

    Index ``v(v-1)/2 + u`` enumerates pairs column by column.
    """
    v = np.floor((1.0 + np.sqrt(1.0 + 8.0 * indices.astype(np.float64))) / 2.0)
    v = v.astype(np.int64)
    # float rounding near perfect squares can be off by one either way
    v -= ((v * (v - 1) // 2) > indices).astype(np.int64)
    v += (((v + 1) * v // 2) <= indices).astype(np.int64)
    u = indices - v * (v - 1) // 2
    return u, v


def gen_random_graph(n: int, m: int, seed: int) -> GraphStream:
    """Erdos-Renyi G(n, m) stream in uniformly random order.

    Args:
        n: Number of nodes, ids ``0..n-1``.
        m: Number of distinct edges sampled without replacement.
        seed: Generator seed; equal seeds give equal streams.

    Raises:
        StreamSizeError: If ``m`` exceeds ``n(n-1)/2`` or either is negative.
    """
    if n < 0 or m < 0:
        raise StreamSizeError(f"node and edge counts must be non-negative: {n}, {m}")
    capacity = n * (n - 1) // 2
    if m > capacity:
        raise StreamSizeError(
            f"cannot place {m} distinct edges among {n} nodes (max {capacity})"
        )

    with tracer.start_as_current_span("stream_ingest.gen_random_graph") as span:
        add_span_attributes(
            span,
            **{
                SpanAttributes.CODE_FUNCTION: "gen_random_graph",
                PipelineAttributes.STREAM_NODES: n,
                PipelineAttributes.STREAM_EDGES: m,
                PipelineAttributes.SEED: seed,
            },
        )
        if m == 0:
            return GraphStream(edges=[], node_count_hint=n)

        rng = np.random.default_rng(derive_seed(seed))
        # choice without replacement already returns a random order
        indices = rng.choice(capacity, size=m, replace=False).astype(np.int64)
        u, v = _decode_pair_indices(indices)
        edges = [Edge(a, b) for a, b in zip(u.tolist(), v.tolist())]
        return GraphStream(edges=edges, node_count_hint=n)


def renumber_nodes(stream: GraphStream) -> tuple[GraphStream, dict[NodeId, NodeId]]:
    """Relabel nodes densely as ``0..n-1`` in order of first appearance."""
    mapping: dict[NodeId, NodeId] = {}
    edges = []
    for u, v in stream.edges:
        a = mapping.setdefault(u, len(mapping))
        b = mapping.setdefault(v, len(mapping))
        edges.append(Edge.of(a, b))
    return GraphStream(edges=edges, node_count_hint=len(mapping)), mapping


def as_stream(edges: Iterable[tuple[int, int]]) -> GraphStream:
    """Build a stream from literal pairs, canonicalizing each edge."""
    return GraphStream(edges=[Edge.of(a, b) for a, b in edges])
