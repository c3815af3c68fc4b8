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
Node-to-worker mapping and per-edge routing decisions.

The master owns a ``NodeMap`` (the function f). For each edge it decides
which workers receive the edge and which of them may sample it:

- LUCKY: f(u) = f(v), the edge goes to that worker only.
- UNLUCKY: f(u) != f(v), the edge goes to every worker and is assigned to
  f(u) and f(v).
- BROADCAST_ALL: Tri-Fly, every worker receives and samples the edge.
"""

from dataclasses import dataclass, field
from enum import StrEnum
from functools import lru_cache
from typing import Iterable, Optional

from .stream_ingest import Edge, NodeId

MASK64 = (1 << 64) - 1


class CaseTag(StrEnum):
    """How an edge was routed."""

    LUCKY = "lucky"
    UNLUCKY = "unlucky"
    BROADCAST_ALL = "broadcast_all"


class MappingPolicy(StrEnum):
    """Node mapping functions f supported by the master."""

    MODULO = "modulo"
    HASH = "hash"
    ADAPTIVE = "adaptive"


@dataclass(frozen=True, slots=True)
class RoutingDecision:
    """Targets of one edge and the workers assigned to sample it."""

    targets: tuple[int, ...]
    assigned: frozenset[int]
    case_tag: CaseTag

    def is_assigned(self, worker: int) -> bool:
        return worker in self.assigned


@dataclass(frozen=True, slots=True)
class AssignmentAudit:
    """Loads observed when a new node joined its neighbour's worker."""

    node: NodeId
    worker: int
    worker_load: int
    min_load: int
    theta: float

    @property
    def within_bound(self) -> bool:
        return self.worker_load <= (1.0 + self.theta) * self.min_load


@lru_cache(maxsize=64)
def _all_workers(k: int) -> tuple[int, ...]:
    return tuple(range(k))


@lru_cache(maxsize=64)
def route_broadcast(k: int) -> RoutingDecision:
    """Tri-Fly routing: every worker receives and samples the edge."""
    workers = _all_workers(k)
    return RoutingDecision(workers, frozenset(workers), CaseTag.BROADCAST_ALL)


def _decide(fu: int, fv: int, k: int) -> RoutingDecision:
    if fu == fv:
        return RoutingDecision((fu,), frozenset((fu,)), CaseTag.LUCKY)
    return RoutingDecision(_all_workers(k), frozenset((fu, fv)), CaseTag.UNLUCKY)


def salted_hash(node: NodeId, salt: int) -> int:
    """splitmix64 finalizer over ``node ^ salt``."""
    z = ((node ^ salt) + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def route_modulo(edge: Edge, k: int) -> RoutingDecision:
    """Route with ``f(u) = u mod k``."""
    if k < 1:
        raise ValueError(f"worker count must be at least 1, got {k}")
    return _decide(edge.u % k, edge.v % k, k)


@dataclass
class NodeMap:
    """The master's node mapping function f.

    Static policies (``MODULO``, ``HASH``) compute f on demand. The
    ``ADAPTIVE`` policy assigns nodes on first sight from current loads and
    never reassigns them.
    """

    k: int
    policy: MappingPolicy = MappingPolicy.MODULO
    theta: float = 0.2
    salt: int = 0
    audit: bool = False
    assignments: dict[NodeId, int] = field(default_factory=dict)
    loads: list[int] = field(default_factory=list)
    lucky_count: int = 0
    unlucky_count: int = 0
    audit_log: list[AssignmentAudit] = field(default_factory=list)

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"worker count must be at least 1, got {self.k}")
        if self.theta < 0:
            raise ValueError(f"theta must be non-negative, got {self.theta}")
        self.policy = MappingPolicy(self.policy)
        if not self.loads:
            self.loads = [0] * self.k

    def owner(self, node: NodeId) -> Optional[int]:
        """f(node), or ``None`` if the adaptive policy has not seen it."""
        if self.policy is MappingPolicy.MODULO:
            return node % self.k
        if self.policy is MappingPolicy.HASH:
            return salted_hash(node, self.salt) % self.k
        return self.assignments.get(node)

    def route(self, edge: Edge) -> RoutingDecision:
        """Decide targets for ``edge`` and update master-side loads."""
        if self.policy is MappingPolicy.ADAPTIVE:
            decision = self._assign_adaptive(edge)
        else:
            decision = _decide(self.owner(edge.u), self.owner(edge.v), self.k)

        if decision.case_tag is CaseTag.LUCKY:
            self.lucky_count += 1
        else:
            self.unlucky_count += 1
        for worker in decision.assigned:
            self.loads[worker] += 1
        return decision

    def _min_load_worker(self) -> int:
        loads = self.loads
        best = 0
        for i in range(1, self.k):
            if loads[i] < loads[best]:
                best = i
        return best

    def _assign_adaptive(self, edge: Edge) -> RoutingDecision:
        u, v = edge
        assignments = self.assignments
        fu = assignments.get(u)
        fv = assignments.get(v)

        if fu is None or fv is None:
            target = self._min_load_worker()
            if fu is None and fv is None:
                fu = fv = target
                assignments[u] = target
                assignments[v] = target
            elif fu is None:
                fu = self._join_or_balance(u, fv, target)
            else:
                fv = self._join_or_balance(v, fu, target)
        return _decide(fu, fv, self.k)

    def _join_or_balance(self, node: NodeId, neighbour_worker: int, target: int) -> int:
        loads = self.loads
        if loads[neighbour_worker] <= (1.0 + self.theta) * loads[target]:
            chosen = neighbour_worker
            if self.audit:
                self.audit_log.append(
                    AssignmentAudit(
                        node=node,
                        worker=neighbour_worker,
                        worker_load=loads[neighbour_worker],
                        min_load=loads[target],
                        theta=self.theta,
                    )
                )
        else:
            chosen = target
        self.assignments[node] = chosen
        return chosen

    def snapshot(self, nodes: Optional[Iterable[NodeId]] = None) -> dict[NodeId, int]:
        """Final assignment of ``nodes`` (all adaptive assignments by default)."""
        if nodes is None:
            if self.policy is not MappingPolicy.ADAPTIVE:
                raise ValueError("static policies need an explicit node set")
            return dict(self.assignments)
        snapshot = {}
        for node in nodes:
            worker = self.owner(node)
            if worker is not None:
                snapshot[node] = worker
        return snapshot

    def bound_violations(self) -> list[AssignmentAudit]:
        """Audited joins whose loads broke ``l_f(v) <= (1+theta) l_i*``."""
        return [entry for entry in self.audit_log if not entry.within_bound]


def route_adaptive(node_map: NodeMap, edge: Edge) -> RoutingDecision:
    """Adaptive routing of one edge (the master of CoCoS_OPT)."""
    if node_map.policy is not MappingPolicy.ADAPTIVE:
        raise ValueError(f"node map policy is {node_map.policy}, not adaptive")
    return node_map.route(edge)
