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

import pytest

from triangle_stream.stream_ingest import as_stream, gen_random_graph

SLOW_TESTS = os.getenv("TRIANGLE_STREAM_SLOW_TESTS", "0") == "1"


def pytest_collection_modifyitems(config, items):
    if SLOW_TESTS:
        return
    skip_slow = pytest.mark.skip(reason="set TRIANGLE_STREAM_SLOW_TESTS=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def single_triangle():
    return as_stream([(1, 2), (2, 3), (1, 3)])


@pytest.fixture
def k4_stream():
    return as_stream([(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)])


@pytest.fixture
def bowtie_stream():
    """Two triangles sharing node 3."""
    return as_stream([(1, 2), (2, 3), (1, 3), (3, 4), (4, 5), (3, 5)])


@pytest.fixture
def small_random_stream():
    return gen_random_graph(60, 400, seed=7)


@pytest.fixture
def edge_list_file(tmp_path):
    path = tmp_path / "graph.txt"
    path.write_text(
        "# comment\n% another comment\n1 2\n2\t3\n1,3\n3 3\n2 1\n\n3 4 0.5 99\n",
        encoding="utf-8",
    )
    return path
