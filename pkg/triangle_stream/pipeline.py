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
Master, workers and aggregator wired together for one estimation run.

The master routes each edge, every receiving worker runs COUNT and, when
assigned, SAMPLE, and the aggregator sums the resulting updates. The same
state machines run either round-robin on one thread (``DETERMINISTIC``) or
as asyncio tasks joined by bounded FIFO queues (``CONCURRENT``).
"""

import asyncio
import json
import time
from collections import Counter
from collections.abc import AsyncIterable
from dataclasses import asdict, dataclass, field, fields
from enum import StrEnum
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Optional, Union

from opentelemetry.semconv.trace import SpanAttributes

from .routing import (
    AssignmentAudit,
    CaseTag,
    MappingPolicy,
    NodeMap,
    RoutingDecision,
    route_broadcast,
)
from .sampler_worker import GLOBAL, CountUpdate, UpdateKey, WorkerState
from .stream_ingest import Edge, GraphStream, NodeId
from .telemetry import (
    PipelineAttributes,
    add_enhanced_error_attributes,
    add_span_attributes,
    get_logger,
    get_tracer,
    record_run_metrics,
)
from .triangle_oracle import Triangle, TriangleSet, designated_worker

tracer = get_tracer()
logger = get_logger()

DEFAULT_CHANNEL_CAPACITY = 4096

CHANNEL_MASTER_TO_WORKER = "master_to_worker"
CHANNEL_WORKER_TO_AGGREGATOR = "worker_to_aggregator"
CHANNEL_QUERY = "query"

Router = Callable[[Edge], RoutingDecision]


class Algorithm(StrEnum):
    TRIFLY = "trifly"
    COCOS_SIMPLE = "cocos_simple"
    COCOS_OPT = "cocos_opt"


class Aggregation(StrEnum):
    EAGER = "eager"
    LAZY = "lazy"


class ExecutionMode(StrEnum):
    DETERMINISTIC = "deterministic"
    CONCURRENT = "concurrent"


class ConfigError(ValueError):
    """A pipeline configuration value is missing or out of range."""


class InstrumentationError(RuntimeError):
    """A check needs data that only instrumented runs collect."""


def _as_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str):
        lowered = value.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off", ""):
            return False
    if isinstance(value, int):
        return bool(value)
    raise ValueError(f"not a boolean: {value!r}")


@dataclass
class PipelineConfig:
    """Everything that determines a run, apart from the stream itself."""

    algorithm: Algorithm = Algorithm.COCOS_OPT
    k: int = 1
    budget: int = 1000
    theta: float = 0.2
    seed: int = 0
    aggregation: Aggregation = Aggregation.EAGER
    instrumentation: bool = False
    execution: ExecutionMode = ExecutionMode.DETERMINISTIC
    eager_zero: bool = False
    channel_capacity: int = DEFAULT_CHANNEL_CAPACITY
    # CoCoS_SIMPLE only; CoCoS_OPT is always adaptive
    mapping: Optional[MappingPolicy] = None
    hash_salt: int = 0

    _CONVERTERS = {
        "algorithm": Algorithm,
        "k": int,
        "budget": int,
        "theta": float,
        "seed": int,
        "aggregation": Aggregation,
        "instrumentation": _as_bool,
        "execution": ExecutionMode,
        "eager_zero": _as_bool,
        "channel_capacity": int,
        "mapping": MappingPolicy,
        "hash_salt": int,
    }

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "PipelineConfig":
        """Build and validate a config from loosely typed values.

        Raises:
            ConfigError: On an unknown key or a value that does not convert.
        """
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise ConfigError(f"unknown configuration key: {key}")
            if raw is None:
                continue
            try:
                kwargs[key] = cls._CONVERTERS[key](raw)
            except (TypeError, ValueError) as e:
                raise ConfigError(f"invalid value for {key}: {raw!r} ({e})") from None
        return cls(**kwargs).validate()

    def validate(self) -> "PipelineConfig":
        """Coerce enum fields and check ranges; returns ``self``."""
        try:
            self.algorithm = Algorithm(self.algorithm)
            self.aggregation = Aggregation(self.aggregation)
            self.execution = ExecutionMode(self.execution)
            if self.mapping is not None:
                self.mapping = MappingPolicy(self.mapping)
        except ValueError as e:
            raise ConfigError(str(e)) from None

        if self.k < 1:
            raise ConfigError(f"k must be at least 1, got {self.k}")
        if self.budget < 2:
            raise ConfigError(f"budget must be at least 2, got {self.budget}")
        if self.theta < 0:
            raise ConfigError(f"theta must be non-negative, got {self.theta}")
        if self.seed < 0 or self.seed >= 1 << 64:
            raise ConfigError(f"seed must fit in 64 unsigned bits, got {self.seed}")
        if self.channel_capacity < 1:
            raise ConfigError(
                f"channel_capacity must be positive, got {self.channel_capacity}"
            )
        if self.mapping is MappingPolicy.ADAPTIVE and (
            self.algorithm is not Algorithm.COCOS_OPT
        ):
            raise ConfigError("adaptive mapping requires algorithm=cocos_opt")
        return self

    def mapping_policy(self) -> Optional[MappingPolicy]:
        """The node mapping f in effect, ``None`` for Tri-Fly."""
        if self.algorithm is Algorithm.TRIFLY:
            return None
        if self.algorithm is Algorithm.COCOS_OPT:
            return MappingPolicy.ADAPTIVE
        return self.mapping or MappingPolicy.MODULO

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        for key, value in data.items():
            if isinstance(value, StrEnum):
                data[key] = str(value)
        return data


@dataclass
class EstimateStore:
    """Global estimate c̄ and the sparse per-node estimates c[u]."""

    global_estimate: float = 0.0
    local_estimates: dict[NodeId, float] = field(default_factory=dict)

    def local(self, node: NodeId) -> float:
        return self.local_estimates.get(node, 0.0)

    def to_dict(self) -> dict[str, Any]:
        return {
            "global": self.global_estimate,
            "local": {str(node): value for node, value in self.local_estimates.items()},
        }


class LocalAccumulator:
    """Worker-side sums held back until the aggregator queries them."""

    __slots__ = ("totals",)

    def __init__(self):
        self.totals: dict[UpdateKey, float] = {}

    def add(self, updates: Iterable[CountUpdate]) -> None:
        totals = self.totals
        for key, delta in updates:
            totals[key] = totals.get(key, 0.0) + delta

    def drain(self) -> dict[UpdateKey, float]:
        drained, self.totals = self.totals, {}
        return drained


class Aggregator:
    """Sums raw updates; a Tri-Fly run divides by k when read."""

    def __init__(self, divisor: int = 1):
        self.divisor = divisor
        self.raw_global = 0.0
        self.raw_local: dict[NodeId, float] = {}

    def apply(self, updates: Iterable[CountUpdate]) -> None:
        local = self.raw_local
        for key, delta in updates:
            if key == GLOBAL:
                self.raw_global += delta
            else:
                local[key] = local.get(key, 0.0) + delta

    def merge(self, totals: Mapping[UpdateKey, float]) -> None:
        self.apply(CountUpdate(key, delta) for key, delta in totals.items())

    def snapshot(self) -> EstimateStore:
        divisor = self.divisor
        if divisor == 1:
            return EstimateStore(self.raw_global, dict(self.raw_local))
        return EstimateStore(
            self.raw_global / divisor,
            {node: value / divisor for node, value in self.raw_local.items()},
        )


@dataclass
class RunReport:
    """Estimates plus the accounting of one run."""

    estimates: EstimateStore
    algorithm: Algorithm
    k: int
    budget: int
    seed: int
    aggregation: Aggregation
    execution: ExecutionMode
    instrumented: bool
    edges_processed: int
    lucky_count: int
    unlucky_count: int
    broadcast_count: int
    worker_loads: list[int]
    master_loads: list[int]
    worker_evictions: list[int]
    messages_sent: dict[str, int]
    elapsed_seconds: float
    stored_copies: int
    unique_stored: int
    per_edge_replication: dict[int, int] = field(default_factory=dict)
    per_triangle_counters: dict[Triangle, frozenset[int]] = field(default_factory=dict)
    assigned_edges: list[frozenset[Edge]] = field(default_factory=list)
    assignment: dict[NodeId, int] = field(default_factory=dict)
    audit_log: list[AssignmentAudit] = field(default_factory=list)

    @property
    def storage_redundancy(self) -> float:
        """Stored edge copies per distinct stored edge at the end of the run."""
        if self.unique_stored == 0:
            return 0.0
        return self.stored_copies / self.unique_stored

    @property
    def max_replication(self) -> int:
        return max(self.per_edge_replication, default=0)

    def to_dict(self, include_locals: bool = True) -> dict[str, Any]:
        """JSON-safe view; per-triangle and per-edge sets are summarized."""
        multi_counted = sum(
            1 for workers in self.per_triangle_counters.values() if len(workers) > 1
        )
        estimates = self.estimates.to_dict()
        if not include_locals:
            estimates.pop("local")
        return {
            "algorithm": str(self.algorithm),
            "k": self.k,
            "budget": self.budget,
            "seed": self.seed,
            "aggregation": str(self.aggregation),
            "execution": str(self.execution),
            "instrumented": self.instrumented,
            "estimates": estimates,
            "edges_processed": self.edges_processed,
            "lucky_count": self.lucky_count,
            "unlucky_count": self.unlucky_count,
            "broadcast_count": self.broadcast_count,
            "worker_loads": list(self.worker_loads),
            "master_loads": list(self.master_loads),
            "worker_evictions": list(self.worker_evictions),
            "messages_sent": dict(self.messages_sent),
            "elapsed_seconds": self.elapsed_seconds,
            "stored_copies": self.stored_copies,
            "unique_stored": self.unique_stored,
            "storage_redundancy": self.storage_redundancy,
            "per_edge_replication": {
                str(copies): edges
                for copies, edges in sorted(self.per_edge_replication.items())
            },
            "triangles_discovered": len(self.per_triangle_counters),
            "triangles_multi_counted": multi_counted,
            "assignment_audits": len(self.audit_log),
            "assignment_bound_violations": sum(
                1 for entry in self.audit_log if not entry.within_bound
            ),
        }

    def to_json(self, indent: Optional[int] = 2, include_locals: bool = True) -> str:
        return json.dumps(self.to_dict(include_locals=include_locals), indent=indent)

    def write_locals(self, path: Union[str, Path]) -> None:
        """Dump local estimates as ``node count`` lines sorted by node."""
        with open(path, "w", encoding="utf-8") as handle:
            for node in sorted(self.estimates.local_estimates):
                handle.write(f"{node} {self.estimates.local_estimates[node]!r}\n")


@dataclass(frozen=True, slots=True)
class _EdgeMessage:
    edge: Edge
    assigned: bool


@dataclass(slots=True)
class _PendingQuery:
    remaining: int
    future: asyncio.Future


@dataclass(frozen=True, slots=True)
class _QueryMessage:
    pending: _PendingQuery


@dataclass(frozen=True, slots=True)
class _Flush:
    totals: dict
    pending: Optional[_PendingQuery]


class TrianglePipeline:
    """One master, k workers and one aggregator, colocated in-process.

    ``feed`` and ``afeed`` may be called repeatedly to continue the same
    stream; each consumes its iterable exactly once. ``query_estimates``
    can be called between feeds.
    """

    def __init__(self, config: PipelineConfig, router: Optional[Router] = None):
        self.config = config.validate()
        k = config.k
        self.workers = [
            WorkerState(
                i,
                config.budget,
                config.seed,
                eager_zero=config.eager_zero,
                instrumented=config.instrumentation,
            )
            for i in range(k)
        ]
        self.aggregator = Aggregator(k if config.algorithm is Algorithm.TRIFLY else 1)
        self.accumulators = (
            [LocalAccumulator() for _ in range(k)]
            if config.aggregation is Aggregation.LAZY
            else None
        )

        policy = config.mapping_policy()
        self.node_map: Optional[NodeMap] = None
        if policy is not None:
            self.node_map = NodeMap(
                k,
                policy=policy,
                theta=config.theta,
                salt=config.hash_salt,
                audit=config.instrumentation,
            )
        if router is not None:
            self.router = router
        elif self.node_map is not None:
            self.router = self.node_map.route
        else:
            self.router = lambda edge: route_broadcast(k)

        self.messages_sent = {
            CHANNEL_MASTER_TO_WORKER: 0,
            CHANNEL_WORKER_TO_AGGREGATOR: 0,
            CHANNEL_QUERY: 0,
        }
        self.edges_processed = 0
        self.lucky_count = 0
        self.unlucky_count = 0
        self.broadcast_count = 0
        self.busy_seconds = 0.0
        self._seen_nodes: set[NodeId] = set()
        self._inbound: Optional[list[asyncio.Queue]] = None

    # master

    def _route(self, edge: Edge) -> RoutingDecision:
        decision = self.router(edge)
        tag = decision.case_tag
        if tag is CaseTag.LUCKY:
            self.lucky_count += 1
        elif tag is CaseTag.UNLUCKY:
            self.unlucky_count += 1
        else:
            self.broadcast_count += 1
        self.messages_sent[CHANNEL_MASTER_TO_WORKER] += len(decision.targets)
        self.edges_processed += 1
        if self.config.instrumentation:
            self._seen_nodes.add(edge.u)
            self._seen_nodes.add(edge.v)
        return decision

    # worker side

    def _handle(self, worker_id: int, edge: Edge, assigned: bool) -> list[CountUpdate]:
        """COUNT then SAMPLE on one worker; returns updates for eager delivery."""
        worker = self.workers[worker_id]
        updates = worker.count(edge)
        if assigned:
            worker.sample(edge)
        if not updates:
            return updates
        if self.accumulators is not None:
            self.accumulators[worker_id].add(updates)
            return []
        self.messages_sent[CHANNEL_WORKER_TO_AGGREGATOR] += len(updates)
        return updates

    def _step(self, edge: Edge) -> None:
        decision = self._route(edge)
        assigned = decision.assigned
        aggregator = self.aggregator
        for worker_id in decision.targets:
            updates = self._handle(worker_id, edge, worker_id in assigned)
            if updates:
                aggregator.apply(updates)

    def feed(self, edges: Iterable[Edge]) -> None:
        """Process edges round-robin on the calling thread."""
        busy = 0.0
        step = self._step
        clock = time.perf_counter
        for edge in edges:
            started = clock()
            step(edge)
            busy += clock() - started
        self.busy_seconds += busy

    async def afeed(self, edges: Union[Iterable[Edge], AsyncIterable[Edge]]) -> None:
        """Process edges with one asyncio task per worker and for the aggregator.

        Channels are bounded FIFO queues; a full channel blocks the master.
        A failing worker or aggregator cancels the run and its error is
        raised here.
        """
        capacity = self.config.channel_capacity
        k = self.config.k
        inbound = [asyncio.Queue(maxsize=capacity) for _ in range(k)]
        outbound: asyncio.Queue = asyncio.Queue(maxsize=capacity)
        self._inbound = inbound

        clock = time.perf_counter
        started = clock()
        waited = 0.0
        try:
            async with asyncio.TaskGroup() as group:
                for i in range(k):
                    group.create_task(self._worker_loop(i, inbound[i], outbound))
                group.create_task(self._aggregator_loop(outbound, k))
                waited = await self._master_loop(edges, inbound)
        except ExceptionGroup as failure:
            if len(failure.exceptions) == 1:
                raise failure.exceptions[0] from failure
            raise
        finally:
            self._inbound = None
            self.busy_seconds += clock() - started - waited

    async def _master_loop(
        self,
        edges: Union[Iterable[Edge], AsyncIterable[Edge]],
        inbound: list[asyncio.Queue],
    ) -> float:
        """Route every edge, then close the worker channels.

        Returns the seconds spent waiting on the stream itself.
        """
        clock = time.perf_counter
        waited = 0.0
        if isinstance(edges, AsyncIterable):
            iterator = aiter(edges)
            while True:
                wait_start = clock()
                try:
                    edge = await anext(iterator)
                except StopAsyncIteration:
                    break
                finally:
                    waited += clock() - wait_start
                await self._dispatch(edge, inbound)
        else:
            iterator = iter(edges)
            while True:
                wait_start = clock()
                edge = next(iterator, None)
                waited += clock() - wait_start
                if edge is None:
                    break
                await self._dispatch(edge, inbound)
        for queue in inbound:
            await queue.put(None)
        return waited

    async def _dispatch(self, edge: Edge, inbound: list[asyncio.Queue]) -> None:
        decision = self._route(edge)
        for worker_id in decision.targets:
            await inbound[worker_id].put(
                _EdgeMessage(edge, worker_id in decision.assigned)
            )

    async def _worker_loop(
        self, worker_id: int, inbound: asyncio.Queue, outbound: asyncio.Queue
    ) -> None:
        while True:
            message = await inbound.get()
            if message is None:
                await outbound.put(None)
                return
            if isinstance(message, _QueryMessage):
                totals = {}
                if self.accumulators:
                    totals = self.accumulators[worker_id].drain()
                self.messages_sent[CHANNEL_WORKER_TO_AGGREGATOR] += 1
                await outbound.put(_Flush(totals, message.pending))
                continue
            updates = self._handle(worker_id, message.edge, message.assigned)
            if updates:
                await outbound.put(updates)

    async def _aggregator_loop(self, outbound: asyncio.Queue, k: int) -> None:
        finished = 0
        while finished < k:
            message = await outbound.get()
            if message is None:
                finished += 1
            elif isinstance(message, _Flush):
                self.aggregator.merge(message.totals)
                pending = message.pending
                pending.remaining -= 1
                if pending.remaining == 0 and not pending.future.done():
                    pending.future.set_result(self.aggregator.snapshot())
            else:
                self.aggregator.apply(message)

    # aggregator side

    def query_estimates(self) -> EstimateStore:
        """Current estimates; under LAZY, flushes every worker first."""
        if self.accumulators is not None:
            k = self.config.k
            self.messages_sent[CHANNEL_QUERY] += k
            self.messages_sent[CHANNEL_WORKER_TO_AGGREGATOR] += k
            for accumulator in self.accumulators:
                self.aggregator.merge(accumulator.drain())
        return self.aggregator.snapshot()

    async def aquery_estimates(self) -> EstimateStore:
        """Query while ``afeed`` runs, as a message through every worker channel.

        Each worker answers after the edges already queued to it, so the
        result reflects a consistent prefix per worker.
        """
        inbound = self._inbound
        if inbound is None or self.accumulators is None:
            return self.query_estimates()
        pending = _PendingQuery(
            remaining=len(inbound), future=asyncio.get_running_loop().create_future()
        )
        self.messages_sent[CHANNEL_QUERY] += len(inbound)
        for queue in inbound:
            await queue.put(_QueryMessage(pending))
        return await pending.future

    def process(self, stream: Iterable[Edge]) -> RunReport:
        """Consume a whole stream and return the final report."""
        config = self.config
        with tracer.start_as_current_span("pipeline.run") as span:
            add_span_attributes(
                span,
                **{
                    SpanAttributes.CODE_FUNCTION: "process",
                    PipelineAttributes.ALGORITHM: str(config.algorithm),
                    PipelineAttributes.WORKERS: config.k,
                    PipelineAttributes.BUDGET: config.budget,
                    PipelineAttributes.THETA: config.theta,
                    PipelineAttributes.SEED: config.seed,
                    PipelineAttributes.AGGREGATION: str(config.aggregation),
                    PipelineAttributes.EXECUTION: str(config.execution),
                    PipelineAttributes.INSTRUMENTATION: config.instrumentation,
                },
            )
            try:
                if config.execution is ExecutionMode.CONCURRENT:
                    asyncio.run(self.afeed(stream))
                else:
                    self.feed(stream)
            except Exception as e:
                add_enhanced_error_attributes(
                    span, e, edges_processed=self.edges_processed
                )
                logger.error(
                    "Pipeline run failed",
                    exc_info=True,
                    extra={
                        "algorithm": str(config.algorithm),
                        "edges_processed": self.edges_processed,
                    },
                )
                raise

            report = self.report()
            messages = sum(report.messages_sent.values())
            global_estimate = report.estimates.global_estimate
            add_span_attributes(
                span,
                **{
                    PipelineAttributes.STREAM_EDGES: report.edges_processed,
                    PipelineAttributes.EDGES_LUCKY: report.lucky_count,
                    PipelineAttributes.EDGES_UNLUCKY: report.unlucky_count,
                    PipelineAttributes.MESSAGES_SENT: messages,
                    PipelineAttributes.GLOBAL_ESTIMATE: global_estimate,
                },
            )
            record_run_metrics(
                str(config.algorithm),
                report.edges_processed,
                messages,
                report.lucky_count,
                report.unlucky_count,
                report.elapsed_seconds,
            )
            logger.info(
                "Pipeline run finished",
                extra={
                    "algorithm": str(config.algorithm),
                    "k": config.k,
                    "budget": config.budget,
                    "edges": report.edges_processed,
                    "global_estimate": global_estimate,
                    "elapsed_seconds": report.elapsed_seconds,
                },
            )
            return report

    def report(self) -> RunReport:
        """Flush pending estimates and snapshot the accounting."""
        config = self.config
        estimates = self.query_estimates()
        workers = self.workers

        stored = Counter()
        for worker in workers:
            stored.update(worker.reservoir)

        replication: dict[int, int] = {}
        per_triangle: dict[Triangle, frozenset[int]] = {}
        assigned_edges: list[frozenset[Edge]] = []
        assignment: dict[NodeId, int] = {}
        audit_log: list[AssignmentAudit] = []
        if config.instrumentation:
            copies = Counter()
            emitters: dict[Triangle, set[int]] = {}
            for worker in workers:
                copies.update(worker.stored_ever)
                for triangle in worker.discovered_triangles:
                    emitters.setdefault(triangle, set()).add(worker.worker_id)
                assigned_edges.append(frozenset(worker.assigned_edges))
            replication = dict(Counter(copies.values()))
            per_triangle = {t: frozenset(ws) for t, ws in emitters.items()}
            if self.node_map is not None:
                assignment = self.node_map.snapshot(self._seen_nodes)
                audit_log = list(self.node_map.audit_log)

        if self.node_map is not None:
            master_loads = list(self.node_map.loads)
        else:
            master_loads = [worker.load for worker in workers]

        return RunReport(
            estimates=estimates,
            algorithm=config.algorithm,
            k=config.k,
            budget=config.budget,
            seed=config.seed,
            aggregation=config.aggregation,
            execution=config.execution,
            instrumented=config.instrumentation,
            edges_processed=self.edges_processed,
            lucky_count=self.lucky_count,
            unlucky_count=self.unlucky_count,
            broadcast_count=self.broadcast_count,
            worker_loads=[worker.load for worker in workers],
            master_loads=master_loads,
            worker_evictions=[worker.evictions for worker in workers],
            messages_sent=dict(self.messages_sent),
            elapsed_seconds=self.busy_seconds,
            stored_copies=sum(stored.values()),
            unique_stored=len(stored),
            per_edge_replication=replication,
            per_triangle_counters=per_triangle,
            assigned_edges=assigned_edges,
            assignment=assignment,
            audit_log=audit_log,
        )


def run(
    config: PipelineConfig, stream: Union[GraphStream, Iterable[Edge]]
) -> RunReport:
    """Run one algorithm over one stream end to end."""
    return TrianglePipeline(config).process(stream)


def query_estimates(pipeline: TrianglePipeline) -> EstimateStore:
    return pipeline.query_estimates()


@dataclass(frozen=True)
class PropertyVerdict:
    passed: bool
    checked: int
    failures: int = 0
    detail: str = ""


@dataclass(frozen=True)
class StructuralVerdict:
    """Outcome of the limited-redundancy checks on an instrumented run.

    Checks that do not apply to the run's algorithm are ``None``.
    """

    replication: PropertyVerdict
    single_counter: Optional[PropertyVerdict]
    designated_worker: Optional[PropertyVerdict]
    assignment_bound: Optional[PropertyVerdict]

    @property
    def passed(self) -> bool:
        return all(
            verdict.passed
            for verdict in (
                self.replication,
                self.single_counter,
                self.designated_worker,
                self.assignment_bound,
            )
            if verdict is not None
        )


def _check_replication(report: RunReport) -> PropertyVerdict:
    limit = report.k if report.algorithm is Algorithm.TRIFLY else min(2, report.k)
    over = sum(
        edges for copies, edges in report.per_edge_replication.items() if copies > limit
    )
    return PropertyVerdict(
        passed=over == 0,
        checked=sum(report.per_edge_replication.values()),
        failures=over,
        detail=f"max replication {report.max_replication}, limit {limit}",
    )


def _check_single_counter(report: RunReport, oracle: TriangleSet) -> PropertyVerdict:
    failures = 0
    spurious = 0
    for triangle, workers in report.per_triangle_counters.items():
        if triangle not in oracle.triangles:
            spurious += 1
        elif len(workers) > 1:
            failures += 1
    return PropertyVerdict(
        passed=failures == 0 and spurious == 0,
        checked=len(report.per_triangle_counters),
        failures=failures + spurious,
        detail=f"{failures} counted by several workers, {spurious} not in the graph",
    )


def _check_designated_worker(report: RunReport, oracle: TriangleSet) -> PropertyVerdict:
    failures = 0
    unresolved = 0
    for triangle in oracle.triangles:
        closing = oracle.closing_edge[triangle]
        try:
            worker = designated_worker(triangle, closing, report.assignment)
        except KeyError:
            unresolved += 1
            continue
        a, b, c = triangle
        wedge = [e for e in (Edge(a, b), Edge(a, c), Edge(b, c)) if e != closing]
        assigned = report.assigned_edges[worker]
        if not all(edge in assigned for edge in wedge):
            failures += 1
    return PropertyVerdict(
        passed=failures == 0 and unresolved == 0,
        checked=len(oracle.triangles),
        failures=failures + unresolved,
        detail=(
            f"{failures} wedges not assigned to their designated worker, "
            f"{unresolved} triangles with unmapped nodes"
        ),
    )


def _check_assignment_bound(report: RunReport) -> PropertyVerdict:
    violations = [entry for entry in report.audit_log if not entry.within_bound]
    return PropertyVerdict(
        passed=not violations,
        checked=len(report.audit_log),
        failures=len(violations),
        detail="joins must satisfy l_f(v) <= (1+theta) l_i*",
    )


def verify_structural_properties(
    report: RunReport, oracle: TriangleSet
) -> StructuralVerdict:
    """Check edge replication, single counting and wedge coverage.

    Raises:
        InstrumentationError: If the run was not instrumented.
    """
    if not report.instrumented:
        raise InstrumentationError(
            "structural checks need a run with instrumentation enabled"
        )
    if report.algorithm is Algorithm.TRIFLY:
        return StructuralVerdict(
            replication=_check_replication(report),
            single_counter=None,
            designated_worker=None,
            assignment_bound=None,
        )
    return StructuralVerdict(
        replication=_check_replication(report),
        single_counter=_check_single_counter(report, oracle),
        designated_worker=_check_designated_worker(report, oracle),
        assignment_bound=(
            _check_assignment_bound(report)
            if report.algorithm is Algorithm.COCOS_OPT
            else None
        ),
    )
