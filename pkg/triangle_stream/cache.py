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
Memoization of exact oracle results across experiment configurations.

An experiment grid evaluates the same stream under many ``(algorithm, k,
budget)`` settings; the ground truth for that stream only has to be
computed once. Entries are keyed by the stream fingerprint. Set
``TRIANGLE_STREAM_CACHE_ENABLED=false`` to always recompute.
"""

import os
import threading
import time
from abc import ABC, abstractmethod
from collections import OrderedDict
from typing import Any, Callable, Dict, Optional, TypeVar

from opentelemetry.semconv.trace import SpanAttributes

from .telemetry import (
    PipelineAttributes,
    add_span_attributes,
    get_logger,
    get_tracer,
    set_span_error,
)

tracer = get_tracer()
logger = get_logger()

T = TypeVar("T")

DEFAULT_MAX_ENTRIES = 8


class CacheBackend(ABC):
    """Storage for oracle results, addressed by string keys."""

    @abstractmethod
    def get(self, key: str) -> Optional[Any]:
        """The live entry for ``key``, or ``None``."""

    @abstractmethod
    def set(self, key: str, value: Any, ttl: Optional[float] = None) -> bool:
        """Store ``value``; ``ttl`` is seconds until it goes stale."""

    @abstractmethod
    def delete(self, key: str) -> bool:
        """Drop ``key``; ``False`` when it was absent."""

    @abstractmethod
    def clear(self) -> bool: ...

    @abstractmethod
    def health_check(self) -> Dict[str, Any]: ...


class InMemoryCache(CacheBackend):
    """LRU-bounded in-process store; entries without a TTL never expire.

    ``max_entries <= 0`` turns every ``set`` into a no-op.
    """

    def __init__(
        self,
        max_entries: int = DEFAULT_MAX_ENTRIES,
        default_ttl: Optional[float] = None,
    ):
        self.max_entries = max_entries
        self.default_ttl = default_ttl
        self.cache: OrderedDict[str, tuple[Any, Optional[float]]] = OrderedDict()
        self._lock = threading.Lock()

    @staticmethod
    def _stale(expires_at: Optional[float], now: float) -> bool:
        return expires_at is not None and expires_at <= now

    def get(self, key: str) -> Optional[Any]:
        with self._lock:
            if key not in self.cache:
                return None
            value, expires_at = self.cache[key]
            if self._stale(expires_at, time.monotonic()):
                del self.cache[key]
                return None
            self.cache.move_to_end(key)
            return value

    def set(self, key: str, value: Any, ttl: Optional[float] = None) -> bool:
        if self.max_entries <= 0:
            return False
        lifetime = self.default_ttl if ttl is None else ttl
        expires_at = None if lifetime is None else time.monotonic() + lifetime
        with self._lock:
            self.cache[key] = (value, expires_at)
            self.cache.move_to_end(key)
            while len(self.cache) > self.max_entries:
                self.cache.popitem(last=False)
        return True

    def delete(self, key: str) -> bool:
        with self._lock:
            return self.cache.pop(key, None) is not None

    def clear(self) -> bool:
        with self._lock:
            self.cache.clear()
        return True

    def health_check(self) -> Dict[str, Any]:
        """Purge stale entries and report occupancy."""
        now = time.monotonic()
        with self._lock:
            stale = [k for k, (_, exp) in self.cache.items() if self._stale(exp, now)]
            for key in stale:
                del self.cache[key]
            entries = len(self.cache)

        return {
            "status": "healthy",
            "backend": "in_memory",
            "entries": entries,
            "max_entries": self.max_entries,
            "expired_cleaned": len(stale),
        }


class CacheManager:
    """Traced memoization in front of a ``CacheBackend``.

    Backend failures are logged on the span and never reach the caller.
    """

    def __init__(self, backend: CacheBackend):
        self.backend = backend

    @staticmethod
    def _generate_cache_key(operation: str, fingerprint: str, **kwargs) -> str:
        """``operation:fp:<fingerprint>`` followed by sorted non-``None`` kwargs."""
        parts = [operation, f"fp:{fingerprint}"]
        parts.extend(
            f"{name}:{value}"
            for name, value in sorted(kwargs.items())
            if value is not None
        )
        return ":".join(parts)

    def _annotate(self, span, function: str, operation: str, key: str) -> None:
        add_span_attributes(
            span,
            **{
                SpanAttributes.CODE_FUNCTION: function,
                PipelineAttributes.CACHE_OPERATION: operation,
                PipelineAttributes.CACHE_KEY: key,
                PipelineAttributes.CACHE_BACKEND: type(self.backend).__name__,
            },
        )

    def get_or_set(
        self,
        operation: str,
        fingerprint: str,
        compute: Callable[[], T],
        ttl: Optional[float] = None,
        **kwargs,
    ) -> T:
        """The stored result for this stream, computing and storing it on a miss."""
        key = self._generate_cache_key(operation, fingerprint, **kwargs)
        context = {"operation": operation, "cache_key": key}

        with tracer.start_as_current_span("cache.get_or_set") as span:
            self._annotate(span, "get_or_set", operation, key)

            try:
                stored = self.backend.get(key)
            except Exception as e:
                set_span_error(span, e)
                logger.error(
                    "Oracle cache read failed, recomputing",
                    exc_info=True,
                    extra=context,
                )
                return compute()

            if stored is not None:
                span.add_event("cache_hit", {PipelineAttributes.CACHE_KEY: key})
                logger.debug("Oracle result reused", extra=context)
                return stored

            span.add_event("cache_miss", {PipelineAttributes.CACHE_KEY: key})
            result = compute()

            try:
                stored_ok = self.backend.set(key, result, ttl)
            except Exception as e:
                set_span_error(span, e)
                logger.warning("Oracle result not stored", exc_info=True, extra=context)
                return result

            span.add_event(
                "cache_store",
                {PipelineAttributes.CACHE_KEY: key, "cache.success": stored_ok},
            )
            return result

    def invalidate(self, operation: str, fingerprint: str, **kwargs) -> bool:
        """Forget one stored result; ``False`` if absent or the backend fails."""
        key = self._generate_cache_key(operation, fingerprint, **kwargs)

        with tracer.start_as_current_span("cache.invalidate") as span:
            self._annotate(span, "invalidate", operation, key)
            try:
                removed = self.backend.delete(key)
            except Exception as e:
                set_span_error(span, e)
                logger.error(
                    "Oracle cache eviction failed",
                    exc_info=True,
                    extra={"cache_key": key},
                )
                return False
            span.add_event(
                "cache_evict",
                {PipelineAttributes.CACHE_KEY: key, "cache.success": removed},
            )
            return removed

    def health_check(self) -> Dict[str, Any]:
        return self.backend.health_check()


def create_cache_manager() -> CacheManager:
    """Build the manager from ``TRIANGLE_STREAM_CACHE_*`` variables."""
    enabled = os.getenv("TRIANGLE_STREAM_CACHE_ENABLED", "true").lower() == "true"
    if not enabled:
        logger.info("Oracle caching is disabled")
        return CacheManager(InMemoryCache(max_entries=0))

    max_entries = int(
        os.getenv("TRIANGLE_STREAM_CACHE_MAX_ENTRIES", str(DEFAULT_MAX_ENTRIES))
    )
    raw_ttl = os.getenv("TRIANGLE_STREAM_CACHE_TTL")
    default_ttl = float(raw_ttl) if raw_ttl else None
    logger.debug(
        "Oracle cache enabled",
        extra={"max_entries": max_entries, "default_ttl": default_ttl},
    )
    return CacheManager(InMemoryCache(max_entries=max_entries, default_ttl=default_ttl))


cache_manager = create_cache_manager()
