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

from collections import Counter
from itertools import permutations

import pytest

from triangle_stream.seeding import derive_seed
from triangle_stream.stream_ingest import (
    Edge,
    EdgeListFormatError,
    GraphStream,
    StreamSizeError,
    as_stream,
    gen_random_graph,
    iter_edge_list,
    parse_edge_list,
    renumber_nodes,
    shuffle_stream,
    write_edge_list,
)


class TestEdge:
    """Canonical undirected edges."""

    def test_orders_endpoints(self):
        assert Edge.of(5, 2) == Edge(2, 5)
        assert Edge.of(2, 5) == Edge(2, 5)

    def test_rejects_self_loop(self):
        with pytest.raises(ValueError):
            Edge.of(3, 3)


class TestParseEdgeList:
    """Loading edge-list files."""

    def test_drops_duplicates_and_self_loops(self, tmp_path):
        path = tmp_path / "g.txt"
        path.write_text("1 2\n2 1\n3 3\n1 3\n", encoding="utf-8")
        stream = parse_edge_list(path)
        assert stream.edges == [Edge(1, 2), Edge(1, 3)]

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("", encoding="utf-8")
        assert len(parse_edge_list(path)) == 0

    def test_keeps_file_order(self, tmp_path):
        path = tmp_path / "tri.txt"
        path.write_text("1 2\n2 3\n1 3\n", encoding="utf-8")
        assert parse_edge_list(path).edges == [Edge(1, 2), Edge(2, 3), Edge(1, 3)]

    def test_comments_mixed_delimiters_and_extra_columns(self, edge_list_file):
        stream = parse_edge_list(edge_list_file)
        assert stream.edges == [Edge(1, 2), Edge(2, 3), Edge(1, 3), Edge(3, 4)]

    def test_explicit_delimiter(self, tmp_path):
        path = tmp_path / "g.csv"
        path.write_text("1;2\n2;3\n", encoding="utf-8")
        assert parse_edge_list(path, delimiter=";").edges == [Edge(1, 2), Edge(2, 3)]

    def test_malformed_line_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("1 2\n2 x\n", encoding="utf-8")
        with pytest.raises(EdgeListFormatError) as excinfo:
            parse_edge_list(path)
        assert excinfo.value.line_number == 2

    def test_single_field_line(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("# header\n7\n", encoding="utf-8")
        with pytest.raises(EdgeListFormatError) as excinfo:
            parse_edge_list(path)
        assert excinfo.value.line_number == 2

    def test_negative_id(self, tmp_path):
        path = tmp_path / "neg.txt"
        path.write_text("1 -2\n", encoding="utf-8")
        with pytest.raises(EdgeListFormatError):
            parse_edge_list(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            parse_edge_list(tmp_path / "missing.txt")

    def test_format_error_is_a_value_error(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("a b\n", encoding="utf-8")
        with pytest.raises(ValueError):
            parse_edge_list(path)


class TestIterEdgeList:
    """Lazy reading without deduplication."""

    def test_keeps_duplicates_drops_loops(self, tmp_path):
        path = tmp_path / "g.txt"
        path.write_text("1 2\n2 1\n3 3\n", encoding="utf-8")
        assert list(iter_edge_list(path)) == [Edge(1, 2), Edge(1, 2)]


class TestWriteEdgeList:
    """Persisting streams."""

    def test_written_file_parses_back_in_order(self, tmp_path, bowtie_stream):
        path = tmp_path / "out.txt"
        write_edge_list(bowtie_stream, path)
        assert parse_edge_list(path).edges == bowtie_stream.edges


class TestShuffleStream:
    """Seeded random permutations."""

    def test_single_edge(self):
        stream = as_stream([(1, 2)])
        assert shuffle_stream(stream, 7).edges == [Edge(1, 2)]

    def test_deterministic(self, small_random_stream):
        first = shuffle_stream(small_random_stream, 11)
        second = shuffle_stream(small_random_stream, 11)
        assert first.edges == second.edges

    def test_same_multiset(self, small_random_stream):
        shuffled = shuffle_stream(small_random_stream, 3)
        assert Counter(shuffled.edges) == Counter(small_random_stream.edges)

    def test_orders_are_uniform(self):
        stream = as_stream([(1, 2), (2, 3), (3, 4)])
        trials = 10_000
        counts = Counter(
            tuple(shuffle_stream(stream, derive_seed(99, i)).edges)
            for i in range(trials)
        )
        assert len(counts) == 6
        for order in permutations(stream.edges):
            assert abs(counts[order] / trials - 1 / 6) <= 0.02


class TestGenRandomGraph:
    """Erdos-Renyi G(n, m) streams."""

    def test_only_possible_edge(self):
        assert gen_random_graph(2, 1, seed=5).edges == [Edge(0, 1)]

    def test_complete_graph(self):
        stream = gen_random_graph(4, 6, seed=123)
        expected = {Edge(a, b) for a in range(4) for b in range(a + 1, 4)}
        assert set(stream.edges) == expected
        assert len(stream) == 6

    def test_distinct_edges_without_loops(self):
        stream = gen_random_graph(1000, 5000, seed=1)
        assert len(stream) == 5000
        assert len(set(stream.edges)) == 5000
        assert all(u < v for u, v in stream.edges)
        assert all(0 <= u and v < 1000 for u, v in stream.edges)

    def test_deterministic(self):
        first = gen_random_graph(200, 500, 42)
        assert first.edges == gen_random_graph(200, 500, 42).edges

    def test_too_many_edges(self):
        with pytest.raises(StreamSizeError):
            gen_random_graph(4, 7, seed=0)

    def test_zero_edges(self):
        assert len(gen_random_graph(10, 0, seed=0)) == 0


class TestGraphStream:
    """Stream helpers."""

    def test_arrivals_are_one_based(self, single_triangle):
        assert [t for t, _ in single_triangle.arrivals()] == [1, 2, 3]

    def test_nodes(self, bowtie_stream):
        assert bowtie_stream.nodes() == {1, 2, 3, 4, 5}

    def test_fingerprint_depends_on_order(self, single_triangle):
        reordered = GraphStream(edges=list(reversed(single_triangle.edges)))
        assert single_triangle.fingerprint() != reordered.fingerprint()
        same = as_stream([(1, 2), (2, 3), (1, 3)])
        assert single_triangle.fingerprint() == same.fingerprint()

    def test_renumber_nodes(self):
        stream, mapping = renumber_nodes(as_stream([(10, 30), (30, 20)]))
        assert mapping == {10: 0, 30: 1, 20: 2}
        assert stream.edges == [Edge(0, 1), Edge(1, 2)]
