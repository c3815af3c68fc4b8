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

import os
from unittest.mock import MagicMock, patch

import pytest

from triangle_stream.cache import CacheManager, InMemoryCache, create_cache_manager


class TestInMemoryCache:
    """Test in-memory cache implementation."""

    @pytest.fixture
    def cache(self):
        return InMemoryCache(max_entries=3, default_ttl=1)

    def test_set_and_get(self, cache):
        """Test basic set and get operations."""
        assert cache.set("test_key", "test_value") is True
        assert cache.get("test_key") == "test_value"

    def test_get_nonexistent_key(self, cache):
        """Test getting a non-existent key returns None."""
        assert cache.get("nonexistent") is None

    def test_ttl_expiration(self, cache):
        """Test that keys expire after TTL."""
        with patch("triangle_stream.cache.time.monotonic") as mock_time:
            mock_time.return_value = 1000.0
            cache.set("expire_key", "expire_value", ttl=0.1)
            assert cache.get("expire_key") == "expire_value"

            mock_time.return_value = 1000.2
            assert cache.get("expire_key") is None

    def test_no_ttl_never_expires(self):
        """Entries without a TTL survive any amount of time."""
        cache = InMemoryCache()
        with patch("triangle_stream.cache.time.monotonic") as mock_time:
            mock_time.return_value = 0.0
            cache.set("key", 1)
            mock_time.return_value = 1e9
            assert cache.get("key") == 1

    def test_lru_eviction(self, cache):
        """The least recently used entry goes when the cache is full."""
        cache.set("a", 1)
        cache.set("b", 2)
        cache.set("c", 3)
        cache.get("a")
        cache.set("d", 4)
        assert cache.get("b") is None
        assert cache.get("a") == 1
        assert cache.get("d") == 4

    def test_disabled_cache_stores_nothing(self):
        """A zero-capacity cache refuses every entry."""
        cache = InMemoryCache(max_entries=0)
        assert cache.set("key", "value") is False
        assert cache.get("key") is None

    def test_delete(self, cache):
        """Test key deletion."""
        cache.set("delete_key", "delete_value")
        assert cache.delete("delete_key") is True
        assert cache.get("delete_key") is None
        assert cache.delete("delete_key") is False

    def test_clear(self, cache):
        """Test clearing all cache entries."""
        cache.set("key1", "value1")
        cache.set("key2", "value2")
        assert cache.clear() is True
        assert cache.get("key1") is None
        assert cache.get("key2") is None

    def test_health_check(self, cache):
        """Test health check functionality."""
        with patch("triangle_stream.cache.time.monotonic") as mock_time:
            mock_time.return_value = 1000.0
            cache.set("health1", "value1", ttl=60)
            cache.set("health2", "value2", ttl=0.1)

            mock_time.return_value = 1000.2
            health = cache.health_check()

        assert health["status"] == "healthy"
        assert health["backend"] == "in_memory"
        assert health["entries"] == 1
        assert health["expired_cleaned"] == 1


class TestCacheManager:
    """Test cache manager functionality."""

    @pytest.fixture
    def cache_manager(self):
        return CacheManager(InMemoryCache())

    def test_get_or_set_cache_miss(self, cache_manager):
        """Test get_or_set computes on a miss and stores the result."""
        compute = MagicMock(return_value={"triangles": 4})
        result = cache_manager.get_or_set("exact_count", "abc123", compute)
        assert result == {"triangles": 4}
        compute.assert_called_once()

    def test_get_or_set_cache_hit(self, cache_manager):
        """Test get_or_set skips computation on a hit."""
        compute = MagicMock(return_value=42)
        cache_manager.get_or_set("exact_count", "abc123", compute)
        cache_manager.get_or_set("exact_count", "abc123", compute)
        compute.assert_called_once()

    def test_cache_key_generation(self):
        """Keys are stable and ignore keyword order and None values."""
        first = CacheManager._generate_cache_key("pairs", "fp1", b=2, a=1, c=None)
        second = CacheManager._generate_cache_key("pairs", "fp1", a=1, b=2)
        assert first == second == "pairs:fp:fp1:a:1:b:2"

    def test_distinct_fingerprints_do_not_collide(self, cache_manager):
        """Different streams get different entries."""
        assert cache_manager.get_or_set("exact_count", "one", lambda: 1) == 1
        assert cache_manager.get_or_set("exact_count", "two", lambda: 2) == 2

    def test_invalidate(self, cache_manager):
        """Test cache invalidation forces recomputation."""
        compute = MagicMock(return_value="value")
        cache_manager.get_or_set("exact_count", "fp", compute)
        assert cache_manager.invalidate("exact_count", "fp") is True
        cache_manager.get_or_set("exact_count", "fp", compute)
        assert compute.call_count == 2

    def test_failing_backend_degrades_to_compute(self):
        """A broken backend never breaks the caller."""
        backend = MagicMock()
        backend.get.side_effect = RuntimeError("backend down")
        manager = CacheManager(backend)
        assert manager.get_or_set("exact_count", "fp", lambda: "computed") == "computed"

    def test_failing_set_still_returns_result(self):
        """A failed write still hands back the computed value."""
        backend = MagicMock()
        backend.get.return_value = None
        backend.set.side_effect = RuntimeError("full")
        manager = CacheManager(backend)
        assert manager.get_or_set("exact_count", "fp", lambda: 7) == 7

    def test_health_check_delegates(self, cache_manager):
        assert cache_manager.health_check()["backend"] == "in_memory"


class TestCacheManagerCreation:
    """Test cache manager creation from environment."""

    def test_create_cache_manager_disabled(self):
        """Disabled caching uses a zero-capacity backend."""
        with patch.dict(os.environ, {"TRIANGLE_STREAM_CACHE_ENABLED": "false"}):
            manager = create_cache_manager()
        assert isinstance(manager.backend, InMemoryCache)
        assert manager.backend.max_entries == 0

    def test_create_cache_manager_memory(self):
        """Capacity and TTL come from the environment."""
        env = {
            "TRIANGLE_STREAM_CACHE_ENABLED": "true",
            "TRIANGLE_STREAM_CACHE_MAX_ENTRIES": "3",
            "TRIANGLE_STREAM_CACHE_TTL": "60",
        }
        with patch.dict(os.environ, env):
            manager = create_cache_manager()
        assert manager.backend.max_entries == 3
        assert manager.backend.default_ttl == 60.0
