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
Tracing, metrics and trace-correlated logging for the estimators.

Providers are created lazily on first use. Spans and metrics are only
exported when ``OTEL_EXPORTER_OTLP_ENDPOINT`` is set (or, for spans,
``TRIANGLE_STREAM_TRACE_CONSOLE=true``); otherwise they stay in process.
"""

import logging
import os
import threading
from typing import Any, NamedTuple, Optional

from opentelemetry import metrics, trace
from opentelemetry.instrumentation.logging import LoggingInstrumentor
from opentelemetry.sdk.metrics import MeterProvider
from opentelemetry.sdk.metrics.export import PeriodicExportingMetricReader
from opentelemetry.sdk.resources import Resource
from opentelemetry.sdk.trace import TracerProvider
from opentelemetry.sdk.trace.export import (
    BatchSpanProcessor,
    ConsoleSpanExporter,
    SimpleSpanProcessor,
)
from opentelemetry.semconv.attributes.error_attributes import ERROR_TYPE
from opentelemetry.semconv.resource import ResourceAttributes
from opentelemetry.semconv.trace import SpanAttributes
from opentelemetry.trace import Status, StatusCode

METRIC_EXPORT_INTERVAL_MS = 30_000

LOG_FORMAT = (
    "%(asctime)s %(levelname)s %(name)s "
    "[trace_id=%(otelTraceID)s span_id=%(otelSpanID)s] %(message)s"
)


class PipelineAttributes:
    """Span attribute names for the estimation pipeline and its drivers."""

    ALGORITHM = "triangle_stream.algorithm"
    WORKERS = "triangle_stream.workers"
    BUDGET = "triangle_stream.budget"
    THETA = "triangle_stream.theta"
    SEED = "triangle_stream.seed"
    AGGREGATION = "triangle_stream.aggregation"
    EXECUTION = "triangle_stream.execution"
    INSTRUMENTATION = "triangle_stream.instrumentation"

    STREAM_EDGES = "triangle_stream.stream.edges"
    STREAM_NODES = "triangle_stream.stream.nodes"
    STREAM_SOURCE = "triangle_stream.stream.source"

    EDGES_LUCKY = "triangle_stream.edges.lucky"
    EDGES_UNLUCKY = "triangle_stream.edges.unlucky"
    MESSAGES_SENT = "triangle_stream.messages.sent"
    GLOBAL_ESTIMATE = "triangle_stream.estimate.global"

    ORACLE_TRIANGLES = "triangle_stream.oracle.triangles"
    EXPERIMENT_KIND = "triangle_stream.experiment.kind"
    EXPERIMENT_TRIALS = "triangle_stream.experiment.trials"

    CACHE_OPERATION = "cache.operation"
    CACHE_KEY = "cache.key"
    CACHE_BACKEND = "cache.backend"


class InstrumentSpec(NamedTuple):
    kind: str
    unit: str
    description: str


RUN_INSTRUMENTS = {
    "triangle_stream.edges.processed": InstrumentSpec(
        "counter", "{edge}", "Edges consumed from the stream by the master"
    ),
    "triangle_stream.messages.sent": InstrumentSpec(
        "counter", "{message}", "Messages sent on all pipeline channels"
    ),
    "triangle_stream.edges.lucky": InstrumentSpec(
        "counter", "{edge}", "Edges unicast because both endpoints share a worker"
    ),
    "triangle_stream.edges.unlucky": InstrumentSpec(
        "counter", "{edge}", "Edges broadcast because endpoints map apart"
    ),
    "triangle_stream.run.duration": InstrumentSpec(
        "histogram", "s", "Processing time of a pipeline run, excluding stream waits"
    ),
}


class TelemetryConfig:
    """Process-wide tracer, meter and logger for triangle-stream."""

    def __init__(self):
        self.service_name = os.getenv("SERVICE_NAME", "triangle-stream")
        self.service_instance_id = os.getenv("SERVICE_INSTANCE_ID", "local")
        self.otlp_endpoint = os.getenv("OTEL_EXPORTER_OTLP_ENDPOINT")
        self.console_traces = (
            os.getenv("TRIANGLE_STREAM_TRACE_CONSOLE", "false").lower() == "true"
        )
        level_name = os.getenv("TRIANGLE_STREAM_LOG_LEVEL", "INFO").upper()
        self.log_level = getattr(logging, level_name, logging.INFO)

        self._tracer: Optional[trace.Tracer] = None
        self._meter: Optional[metrics.Meter] = None
        self._logger: Optional[logging.Logger] = None
        self._instruments: dict[str, Any] = {}
        self._instruments_lock = threading.Lock()
        self._initialized = False

    def _resource(self) -> Resource:
        return Resource.create(
            {
                ResourceAttributes.SERVICE_NAME: self.service_name,
                ResourceAttributes.SERVICE_INSTANCE_ID: self.service_instance_id,
                ResourceAttributes.DEPLOYMENT_ENVIRONMENT: os.getenv(
                    "DEPLOYMENT_ENVIRONMENT", "development"
                ),
                "service.namespace": "graph-streams",
                "service.type": "estimator",
                "process.pid": os.getpid(),
                "host.name": os.getenv("HOSTNAME", "localhost"),
            }
        )

    def initialize(self) -> None:
        """Install the SDK providers and the logging bridge once."""
        if self._initialized:
            return
        resource = self._resource()
        self._tracer = self._build_tracer(resource)
        self._meter = self._build_meter(resource)
        self._logger = self._build_logger()
        self._initialized = True

    def _build_tracer(self, resource: Resource) -> trace.Tracer:
        provider = TracerProvider(resource=resource)
        if self.otlp_endpoint:
            from opentelemetry.exporter.otlp.proto.grpc.trace_exporter import (
                OTLPSpanExporter,
            )

            exporter = OTLPSpanExporter(endpoint=self.otlp_endpoint)
            provider.add_span_processor(BatchSpanProcessor(exporter))
        if self.console_traces:
            provider.add_span_processor(SimpleSpanProcessor(ConsoleSpanExporter()))
        trace.set_tracer_provider(provider)
        return trace.get_tracer("triangle_stream")

    def _build_meter(self, resource: Resource) -> metrics.Meter:
        readers = []
        if self.otlp_endpoint:
            from opentelemetry.exporter.otlp.proto.grpc.metric_exporter import (
                OTLPMetricExporter,
            )

            readers.append(
                PeriodicExportingMetricReader(
                    exporter=OTLPMetricExporter(endpoint=self.otlp_endpoint),
                    export_interval_millis=METRIC_EXPORT_INTERVAL_MS,
                )
            )
        metrics.set_meter_provider(
            MeterProvider(resource=resource, metric_readers=readers)
        )
        return metrics.get_meter("triangle_stream")

    def _build_logger(self) -> logging.Logger:
        # injects otelTraceID / otelSpanID into every record
        LoggingInstrumentor().instrument(
            set_logging_format=True, log_level=self.log_level
        )
        logger = logging.getLogger(self.service_name)
        logger.setLevel(self.log_level)
        formatter = logging.Formatter(LOG_FORMAT)
        for handler in logger.handlers:
            handler.setFormatter(formatter)
        return logger

    @property
    def tracer(self) -> trace.Tracer:
        self.initialize()
        return self._tracer

    @property
    def meter(self) -> metrics.Meter:
        self.initialize()
        return self._meter

    @property
    def logger(self) -> logging.Logger:
        self.initialize()
        if self._logger is None:
            raise RuntimeError("telemetry logger failed to initialize")
        return self._logger

    def instrument(self, name: str) -> Any:
        """The run instrument called ``name``, created on first use."""
        meter = self.meter
        with self._instruments_lock:
            if name not in self._instruments:
                spec = RUN_INSTRUMENTS[name]
                factory = getattr(meter, f"create_{spec.kind}")
                self._instruments[name] = factory(
                    name, unit=spec.unit, description=spec.description
                )
            return self._instruments[name]


telemetry = TelemetryConfig()


def get_tracer() -> trace.Tracer:
    return telemetry.tracer


def get_logger() -> logging.Logger:
    """The service logger; records carry the active trace and span ids."""
    return telemetry.logger


def set_span_error(span: trace.Span, error: Exception) -> None:
    """Mark ``span`` failed and attach ``error`` as an exception event."""
    span.set_status(Status(StatusCode.ERROR, str(error)))
    span.record_exception(error)


def add_span_attributes(span: trace.Span, **attributes) -> None:
    """Set every attribute that is not ``None``; other non-primitives become strings."""
    for key, value in attributes.items():
        if value is None:
            continue
        if not isinstance(value, (str, int, float, bool)):
            value = str(value)
        span.set_attribute(key, value)


def add_enhanced_error_attributes(
    span: trace.Span, error: Exception, **context
) -> None:
    """Record ``error`` on ``span`` with a semantic ``error.type``.

    Each non-``None`` keyword lands as an ``error.context.<key>`` attribute,
    e.g. the command that failed or how many edges were processed.
    """
    span.set_attribute(ERROR_TYPE, _get_semantic_error_type(error))
    span.set_attribute(SpanAttributes.EXCEPTION_MESSAGE, str(error))
    for key, value in context.items():
        if value is not None:
            span.set_attribute(f"error.context.{key}", str(value))
    set_span_error(span, error)


# most specific first; lookup walks the exception's MRO
SEMANTIC_ERROR_TYPES: dict[type[BaseException], str] = {
    TimeoutError: "timeout",
    PermissionError: "permission_denied",
    FileNotFoundError: "not_found",
    IsADirectoryError: "invalid_argument",
    InterruptedError: "cancelled",
    OSError: "system_error",
    ValueError: "invalid_argument",
    TypeError: "invalid_argument",
    KeyError: "not_found",
    IndexError: "out_of_range",
    MemoryError: "resource_exhausted",
    NotImplementedError: "unimplemented",
    RuntimeError: "internal",
}


def _get_semantic_error_type(error: Exception) -> str:
    """Semantic ``error.type`` for ``error``.

    Domain errors are classified by the built-in exception they extend, so
    ``EdgeListFormatError`` reports as ``invalid_argument``; anything else
    reports its class name.
    """
    for klass in type(error).__mro__:
        if klass in SEMANTIC_ERROR_TYPES:
            return SEMANTIC_ERROR_TYPES[klass]
    return type(error).__name__


def record_run_metrics(
    algorithm: str,
    edges: int,
    messages: int,
    lucky: int,
    unlucky: int,
    duration_seconds: float,
) -> None:
    """Add one pipeline run to the run counters and duration histogram."""
    attributes = {PipelineAttributes.ALGORITHM: algorithm}
    for name, value in (
        ("triangle_stream.edges.processed", edges),
        ("triangle_stream.messages.sent", messages),
        ("triangle_stream.edges.lucky", lucky),
        ("triangle_stream.edges.unlucky", unlucky),
    ):
        telemetry.instrument(name).add(value, attributes)
    telemetry.instrument("triangle_stream.run.duration").record(
        duration_seconds, attributes
    )
