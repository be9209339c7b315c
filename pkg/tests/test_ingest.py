"""
Test suite for the ingest module - edge lists to edge-end sequences

Tests covering:
- Parsing with comments, timestamps and stable tie ordering
- Parse errors with line numbers
- Self-loop and duplicate handling
- Flattening edges into ends
- Train/test splits at edge boundaries
- Order forgetting with hidden truth
- The binary end-sequence cache
- Chunked reading of integer-labeled files
"""

import gzip
import io
import shutil
import sys
import tempfile
import unittest
from pathlib import Path

import numpy as np

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from bntlgraph.core import EdgeEndSequence
from bntlgraph.errors import DataError, InsufficientDataError, ParameterError, ParseError
from bntlgraph.ingest import (
    IngestOptions,
    ends_from_edges,
    forget_order,
    load_ends,
    parse_edge_list,
    read_cache,
    split_train_test,
    write_cache,
)


class TestParseEdgeList(unittest.TestCase):
    """Test cases for parse_edge_list"""

    def test_stable_timestamp_order(self) -> None:
        """Test ties keep input order: (2,3), (1,3), (1,2)"""
        edges = parse_edge_list(["1 2 10\n", "2 3 5\n", "1 3 5\n"])
        self.assertEqual(list(zip(edges.src, edges.dst)), [("2", "3"), ("1", "3"), ("1", "2")])
        self.assertEqual(edges.timestamps.tolist(), [5.0, 5.0, 10.0])

    def test_comments_skipped(self) -> None:
        """Test header and comment lines are ignored and counted"""
        edges = parse_edge_list(io.StringIO("# header\n\n1 2 3\n# more\n2 3 4\n"))
        self.assertEqual(len(edges), 2)
        self.assertEqual(edges.counts["comments"], 3)
        self.assertEqual(edges.counts["lines"], 5)

    def test_without_timestamps(self) -> None:
        """Test two-column files keep file order"""
        edges = parse_edge_list(["b a\n", "a c\n"])
        self.assertIsNone(edges.timestamps)
        self.assertEqual(edges.src.tolist(), ["b", "a"])

    def test_too_few_fields(self) -> None:
        """Test a one-field line reports its line number"""
        with self.assertRaises(ParseError) as ctx:
            parse_edge_list(["1 2 3\n", "# c\n", "7\n"])
        self.assertEqual(ctx.exception.details["line"], 3)
        self.assertEqual(ctx.exception.reason, "too_few_fields")

    def test_bad_timestamp(self) -> None:
        """Test a non-numeric timestamp is a parse error"""
        with self.assertRaises(ParseError) as ctx:
            parse_edge_list(["1 2 3\n", "1 3 soon\n"])
        self.assertEqual(ctx.exception.reason, "bad_timestamp")
        self.assertEqual(ctx.exception.details["line"], 2)

    def test_required_timestamp_missing(self) -> None:
        """Test timestamps='required' rejects two-column lines"""
        with self.assertRaises(ParseError):
            parse_edge_list(["1 2\n"], IngestOptions(timestamps="required"))

    def test_ignored_timestamps(self) -> None:
        """Test timestamps='none' keeps file order even with a third column"""
        edges = parse_edge_list(["1 2 10\n", "2 3 5\n"], IngestOptions(timestamps="none"))
        self.assertEqual(edges.src.tolist(), ["1", "2"])

    def test_self_loops_and_duplicates(self) -> None:
        """Test self-loops and duplicates are kept unless asked otherwise"""
        lines = ["1 1 1\n", "1 2 2\n", "1 2 2\n"]
        kept = parse_edge_list(lines)
        self.assertEqual(len(kept), 3)
        self.assertEqual(kept.counts["self_loops"], 1)
        options = IngestOptions(drop_self_loops=True, drop_duplicates=True)
        dropped = parse_edge_list(lines, options)
        self.assertEqual(len(dropped), 1)
        self.assertEqual(dropped.counts["dropped"], 2)
        self.assertEqual(dropped.counts["duplicates"], 1)

    def test_invalid_options(self) -> None:
        """Test unknown option values are rejected"""
        with self.assertRaises(ParameterError):
            IngestOptions(end_order="dst-first")
        with self.assertRaises(ParameterError):
            IngestOptions(timestamps="sometimes")

    def test_options_from_config(self) -> None:
        """Test overrides win over the config section"""
        options = IngestOptions.from_config({"ingest": {"drop_self_loops": True}}, end_order="random")
        self.assertTrue(options.drop_self_loops)
        self.assertEqual(options.end_order, "random")


class TestEndsFromEdges(unittest.TestCase):
    """Test cases for ends_from_edges"""

    def test_two_edges(self) -> None:
        """Test edges (a,b),(a,c) give Z=(1,2,1,3)"""
        ends, label_map = ends_from_edges(parse_edge_list(["a b\n", "a c\n"]))
        self.assertEqual(ends.ends.tolist(), [1, 2, 1, 3])
        self.assertEqual(label_map, {1: "a", 2: "b", 3: "c"})

    def test_self_loop(self) -> None:
        """Test a self-loop (a,a) gives Z=(1,1)"""
        ends, _ = ends_from_edges(parse_edge_list(["a a\n"]))
        self.assertEqual(ends.ends.tolist(), [1, 1])

    def test_degree_sum(self) -> None:
        """Test the sequence has two ends per edge"""
        edges = parse_edge_list(["1 2 1\n", "2 3 2\n", "3 1 3\n", "4 1 4\n"])
        ends, _ = ends_from_edges(edges)
        self.assertEqual(ends.n, 2 * len(edges))

    def test_random_end_order_is_seeded(self) -> None:
        """Test the random end order is reproducible and keeps edge pairs"""
        edges = parse_edge_list([f"{i} {i + 100}\n" for i in range(50)])
        first, map_first = ends_from_edges(edges, "random", rng=5)
        second, _ = ends_from_edges(edges, "random", rng=5)
        self.assertEqual(first, second)
        labels = [map_first[v] for v in first.ends.tolist()]
        pairs = {frozenset(labels[i:i + 2]) for i in range(0, len(labels), 2)}
        self.assertEqual(pairs, {frozenset((str(i), str(i + 100))) for i in range(50)})

    def test_empty_edge_list(self) -> None:
        """Test an empty edge list has no sequence"""
        with self.assertRaises(InsufficientDataError):
            ends_from_edges(parse_edge_list(["# nothing\n"]))


class TestSplitTrainTest(unittest.TestCase):
    """Test cases for split_train_test"""

    def setUp(self) -> None:
        self.ends = EdgeEndSequence([1, 2, 1, 3, 2, 3, 4, 1, 2, 5, 1, 1, 3, 6, 2, 1, 7, 4, 6, 8])

    def test_eighty_percent(self) -> None:
        """Test 10 edges at 0.8 give 16 train ends and 4 test ends"""
        train, test = split_train_test(self.ends, 0.8)
        self.assertEqual(train.n, 16)
        self.assertEqual(test.size, 4)

    def test_test_keeps_global_ids(self) -> None:
        """Test vertices first seen in the test part keep ids above K_train"""
        train, test = split_train_test(self.ends, 0.8)
        self.assertEqual(train.num_vertices, 6)
        self.assertEqual(test.tolist(), [7, 4, 6, 8])

    def test_degenerate_split(self) -> None:
        """Test a split leaving an empty part is rejected"""
        with self.assertRaises(InsufficientDataError):
            split_train_test(self.ends, 0.05)
        with self.assertRaises(ParameterError):
            split_train_test(self.ends, 1.0)


class TestForgetOrder(unittest.TestCase):
    """Test cases for forget_order"""

    def test_hidden_truth(self) -> None:
        """Test Z=(1,2,1,3,2) keeps degrees {2,2,1} and T=(1,2,4)"""
        hidden = forget_order(EdgeEndSequence([1, 2, 1, 3, 2]), rng=3)
        self.assertEqual(sorted(hidden.observation.degrees.tolist()), [1, 2, 2])
        self.assertEqual(hidden.times.times.tolist(), [1, 2, 4])
        self.assertEqual(hidden.observation.degrees[hidden.sigma].tolist(), [2, 2, 1])
        self.assertEqual(hidden.observation.labels, (1, 2, 3))

    def test_seeded_shuffle(self) -> None:
        """Test the presentation order is reproducible under a fixed seed"""
        ends = EdgeEndSequence(list(range(1, 41)) + [3, 7, 7, 1])
        first = forget_order(ends, rng=11)
        second = forget_order(ends, rng=11)
        self.assertEqual(first.sigma.tolist(), second.sigma.tolist())
        self.assertEqual(first.vertex_index.tolist(), first.sigma.tolist())


class TestFiles(unittest.TestCase):
    """Test cases for file input and the cache"""

    def setUp(self) -> None:
        self.temp_dir = Path(tempfile.mkdtemp())

    def tearDown(self) -> None:
        shutil.rmtree(self.temp_dir)

    def test_gzip_input(self) -> None:
        """Test .gz edge lists are decompressed"""
        path = self.temp_dir / "edges.txt.gz"
        with gzip.open(path, "wt", encoding="utf-8") as handle:
            handle.write("# SNAP\n1 2 5\n2 3 6\n")
        ends, counts = load_ends(path)
        self.assertEqual(ends.ends.tolist(), [1, 2, 2, 3])
        self.assertEqual(counts["edges"], 2)

    def test_cache_round_trip(self) -> None:
        """Test a cached sequence reads back unchanged"""
        ends = EdgeEndSequence([1, 2, 1, 3, 2, 2, 4])
        path = self.temp_dir / "ends.bntl"
        write_cache(path, ends)
        self.assertEqual(read_cache(path), ends)
        loaded, counts = load_ends(path)
        self.assertEqual(loaded, ends)
        self.assertEqual(counts, {})

    def test_cache_bad_magic(self) -> None:
        """Test a file without the cache magic is rejected"""
        path = self.temp_dir / "junk.bntl"
        path.write_bytes(b"NOPE" + bytes(18))
        with self.assertRaises(DataError):
            read_cache(path)

    def test_cache_truncated(self) -> None:
        """Test a truncated cache is rejected"""
        path = self.temp_dir / "ends.bntl"
        write_cache(path, EdgeEndSequence([1, 2, 1, 3]))
        path.write_bytes(path.read_bytes()[:-8])
        with self.assertRaises(DataError):
            read_cache(path)

    def test_deterministic_pipeline(self) -> None:
        """Test the same bytes and options give the same sequence"""
        path = self.temp_dir / "edges.txt"
        path.write_text("1 2 3\n2 3 3\n4 1 1\n", encoding="utf-8")
        first, _ = load_ends(path)
        second, _ = load_ends(path)
        self.assertEqual(first, second)
        self.assertEqual(first.ends.tolist(), [1, 2, 2, 3, 3, 4])
        self.assertTrue(np.all(np.bincount(first.ends)[1:] >= 1))



class TestIntegerReader(unittest.TestCase):
    """Test cases for the chunked reader of integer-labeled files"""

    LINES = [
        "# from a SNAP export\n",
        "10 20 7\n",
        "20 30 3\n",
        "\n",
        "10 10 4\n",
        "30 40 3\n",
        "# trailing note\n",
        "20 30 3\n",
        "40 10 9\n",
        "50 20 1\n",
    ]

    def setUp(self) -> None:
        self.temp_dir = Path(tempfile.mkdtemp())
        self.path = self.temp_dir / "edges.txt"
        self.path.write_text("".join(self.LINES), encoding="utf-8")

    def tearDown(self) -> None:
        shutil.rmtree(self.temp_dir)

    def test_chunks_match_line_parser(self) -> None:
        """Test a file read in chunks of 3 rows agrees with the line parser"""
        for drop in (False, True):
            options = IngestOptions(chunk_size=3, drop_self_loops=drop, drop_duplicates=drop)
            chunked = parse_edge_list(self.path, options)
            lines = parse_edge_list(self.LINES, options)
            self.assertEqual(chunked.src.dtype, np.int64)
            self.assertEqual(chunked.src.tolist(), [int(u) for u in lines.src])
            self.assertEqual(chunked.dst.tolist(), [int(v) for v in lines.dst])
            self.assertEqual(chunked.timestamps.tolist(), lines.timestamps.tolist())
            self.assertEqual(chunked.counts, lines.counts)

    def test_first_appearance_ids(self) -> None:
        """Test integer labels are renumbered by first appearance"""
        ends, label_map = ends_from_edges(parse_edge_list(self.path, IngestOptions(chunk_size=2)))
        self.assertEqual(ends.ends.tolist()[:6], [1, 2, 2, 3, 3, 4])
        self.assertEqual(label_map[1], 50)
        self.assertEqual(label_map[2], 20)
        self.assertEqual(set(label_map.values()), {10, 20, 30, 40, 50})

    def test_string_labels_fall_back(self) -> None:
        """Test a file with a non-integer label is read as strings"""
        path = self.temp_dir / "named.txt"
        path.write_text("1 2 1\nalice 2 2\n", encoding="utf-8")
        edges = parse_edge_list(path, IngestOptions(chunk_size=1))
        self.assertEqual(edges.src.tolist(), ["1", "alice"])

    def test_ragged_columns_fall_back(self) -> None:
        """Test a third column after a two-column first line is not a timestamp"""
        path = self.temp_dir / "ragged.txt"
        path.write_text("1 2\n2 3 8\n", encoding="utf-8")
        edges = parse_edge_list(path, IngestOptions(chunk_size=1))
        self.assertIsNone(edges.timestamps)
        self.assertEqual([str(u) for u in edges.src], ["1", "2"])

    def test_bad_line_in_file(self) -> None:
        """Test a malformed line in a file reports its line number"""
        path = self.temp_dir / "broken.txt"
        path.write_text("1 2 1\n2 3 2\n# c\n4\n", encoding="utf-8")
        with self.assertRaises(ParseError) as ctx:
            parse_edge_list(path, IngestOptions(chunk_size=2))
        self.assertEqual(ctx.exception.details["line"], 4)

    def test_gzip_chunks(self) -> None:
        """Test gzip files go through the chunked reader"""
        path = self.temp_dir / "edges.txt.gz"
        with gzip.open(path, "wt", encoding="utf-8") as handle:
            handle.write("".join(self.LINES))
        edges = parse_edge_list(path, IngestOptions(chunk_size=4))
        self.assertEqual(edges.src.dtype, np.int64)
        self.assertEqual(len(edges), 7)

    def test_chunk_size_validated(self) -> None:
        """Test a zero chunk size is rejected"""
        with self.assertRaises(ParameterError):
            IngestOptions(chunk_size=0)


if __name__ == "__main__":
    unittest.main()
