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
Per-worker sampling and counting.

A worker keeps a reservoir of at most ``b`` edges with an adjacency index
over it. For every edge it receives it first counts the triangles the edge
closes inside the reservoir, then (if the edge is assigned to it) offers the
edge to the reservoir. Tri-Fly and both CoCoS variants share this state
machine; they differ only in which workers receive and sample an edge.
"""

import random
from typing import NamedTuple, Optional, Union

from .seeding import python_rng
from .stream_ingest import Edge, NodeId

GLOBAL = "*"

UpdateKey = Union[NodeId, str]


class CountUpdate(NamedTuple):
    """An increment sent to the aggregator for one estimate."""

    key: UpdateKey
    delta: float


class ConsistencyError(RuntimeError):
    """The adjacency index no longer mirrors the reservoir."""


def discovery_probability(load: int, budget: int) -> float:
    """Probability that both wedge edges of a triangle are in the reservoir.

    ``min(1, b(b-1) / (l(l-1)))``, and 1 whenever ``l <= b`` or ``l < 2``.
    """
    if load <= budget or load < 2:
        return 1.0
    return min(1.0, (budget * (budget - 1)) / (load * (load - 1)))


class WorkerState:
    """Reservoir, adjacency index and load of one worker.

    Confined to a single logical worker; there is no internal locking.
    """

    __slots__ = (
        "worker_id",
        "budget",
        "load",
        "reservoir",
        "adjacency",
        "rng",
        "evictions",
        "eager_zero",
        "instrumented",
        "stored_ever",
        "assigned_edges",
        "discovered_triangles",
    )

    def __init__(
        self,
        worker_id: int,
        budget: int,
        seed: int = 0,
        *,
        rng: Optional[random.Random] = None,
        eager_zero: bool = False,
        instrumented: bool = False,
    ):
        if budget < 2:
            raise ValueError(f"budget must be at least 2, got {budget}")
        self.worker_id = worker_id
        self.budget = budget
        self.load = 0
        self.reservoir: list[Edge] = []
        self.adjacency: dict[NodeId, set[NodeId]] = {}
        if rng is None:
            rng = python_rng(seed, worker_id)
        self.rng = rng
        self.evictions = 0
        self.eager_zero = eager_zero

        self.instrumented = instrumented
        self.stored_ever: set[Edge] = set()
        self.assigned_edges: set[Edge] = set()
        self.discovered_triangles: set[tuple[NodeId, NodeId, NodeId]] = set()

    def count(self, edge: Edge) -> list[CountUpdate]:
        """Updates for every triangle ``edge`` closes in the reservoir.

        Emits ``(w, 1/p)`` per common neighbour ``w`` followed by the
        ``GLOBAL``, ``u`` and ``v`` totals. Nothing is emitted when no
        triangle is found unless ``eager_zero`` is set. Never mutates the
        reservoir.
        """
        u, v = edge
        adjacency = self.adjacency
        neighbours_u = adjacency.get(u)
        neighbours_v = adjacency.get(v)

        if not neighbours_u or not neighbours_v:
            return self._zero_updates(u, v)

        if len(neighbours_u) > len(neighbours_v):
            neighbours_u, neighbours_v = neighbours_v, neighbours_u
        common = [w for w in neighbours_u if w in neighbours_v]

        if not common:
            return self._zero_updates(u, v)

        weight = 1.0 / discovery_probability(self.load, self.budget)
        updates = [CountUpdate(w, weight) for w in common]
        total = weight * len(common)
        updates.append(CountUpdate(GLOBAL, total))
        updates.append(CountUpdate(u, total))
        updates.append(CountUpdate(v, total))

        if self.instrumented:
            for w in common:
                self.discovered_triangles.add(tuple(sorted((u, v, w))))
        return updates

    def _zero_updates(self, u: NodeId, v: NodeId) -> list[CountUpdate]:
        if not self.eager_zero:
            return []
        return [CountUpdate(GLOBAL, 0.0), CountUpdate(u, 0.0), CountUpdate(v, 0.0)]

    def sample(self, edge: Edge) -> bool:
        """Offer ``edge`` to the reservoir; returns whether it was stored."""
        self.load += 1
        if self.instrumented:
            self.assigned_edges.add(edge)

        if len(self.reservoir) < self.budget:
            self.reservoir.append(edge)
            self._link(edge)
        elif self.rng.random() * self.load < self.budget:
            slot = self.rng.randrange(self.budget)
            self._unlink(self.reservoir[slot])
            self.reservoir[slot] = edge
            self._link(edge)
            self.evictions += 1
        else:
            return False

        if self.instrumented:
            self.stored_ever.add(edge)
        return True

    def _link(self, edge: Edge) -> None:
        u, v = edge
        self.adjacency.setdefault(u, set()).add(v)
        self.adjacency.setdefault(v, set()).add(u)

    def _unlink(self, edge: Edge) -> None:
        u, v = edge
        for a, b in ((u, v), (v, u)):
            neighbours = self.adjacency[a]
            neighbours.discard(b)
            if not neighbours:
                del self.adjacency[a]

    def verify_consistency(self) -> None:
        """Raise ``ConsistencyError`` unless adjacency mirrors the reservoir."""
        expected = min(self.load, self.budget)
        if len(self.reservoir) != expected:
            raise ConsistencyError(
                f"worker {self.worker_id}: reservoir holds {len(self.reservoir)} "
                f"edges, expected min(l={self.load}, b={self.budget}) = {expected}"
            )
        if len(set(self.reservoir)) != len(self.reservoir):
            raise ConsistencyError(f"worker {self.worker_id}: duplicate reservoir edge")

        mirrored: dict[NodeId, set[NodeId]] = {}
        for u, v in self.reservoir:
            mirrored.setdefault(u, set()).add(v)
            mirrored.setdefault(v, set()).add(u)
        if mirrored != self.adjacency:
            raise ConsistencyError(
                f"worker {self.worker_id}: adjacency does not mirror the reservoir"
            )


def count(worker: WorkerState, edge: Edge) -> list[CountUpdate]:
    """Procedure COUNT on ``worker``."""
    return worker.count(edge)


def sample(worker: WorkerState, edge: Edge) -> bool:
    """Procedure SAMPLE on ``worker``."""
    return worker.sample(edge)
