"""
Ingest Module - Temporal edge lists to edge-end sequences

Reads whitespace-separated "src dst [timestamp]" edge lists (plain or
gzip), orders edges by timestamp with input order breaking ties, flattens
them into edge ends, splits train/test prefixes and hides arrival order for
unlabeled-graph experiments. Also reads and writes a compact binary cache of
end sequences.
"""

import gzip
import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Hashable, Iterable, Iterator, List, Optional, TextIO, Tuple, Union

import numpy as np
import pandas as pd

from .core import (
    ArrivalTimes,
    EdgeEndSequence,
    UnlabeledObservation,
    as_generator,
    degrees_from_ends,
)
from .errors import DataError, InsufficientDataError, ParameterError, ParseError


logger = logging.getLogger(__name__)

CACHE_MAGIC = b"BNTL"
CACHE_VERSION = 1
_CACHE_HEADER = struct.Struct("<4sHQQ")

END_ORDERS = ("src-first", "random")
TIMESTAMP_MODES = ("auto", "required", "none")
_TIME_MODES = {"required": True, "none": False}


@dataclass
class IngestOptions:
    """
    Edge-list reading options.

    Attributes:
        timestamps: "auto" (use a third column when present), "required" or "none"
        end_order: Order of the two ends of an edge, "src-first" or "random"
        drop_self_loops: Discard edges (u, u)
        drop_duplicates: Discard repeated (src, dst, timestamp) lines
        comment_prefix: Lines starting with this are skipped
        chunk_size: Rows per chunk when reading integer-labeled files
    """

    timestamps: str = "auto"
    end_order: str = "src-first"
    drop_self_loops: bool = False
    drop_duplicates: bool = False
    comment_prefix: str = "#"
    chunk_size: int = 1_000_000

    def __post_init__(self) -> None:
        if self.chunk_size < 1:
            raise ParameterError("invalid_ingest_option", f"chunk_size must be positive, got {self.chunk_size}")
        if self.timestamps not in TIMESTAMP_MODES:
            raise ParameterError("invalid_ingest_option", f"Unknown timestamp mode '{self.timestamps}'")
        if self.end_order not in END_ORDERS:
            raise ParameterError("invalid_ingest_option", f"Unknown end order '{self.end_order}'")

    @classmethod
    def from_config(cls, config: Dict[str, Any], **overrides: Any) -> "IngestOptions":
        section = dict(config.get("ingest", {}))
        section.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**{k: v for k, v in section.items() if k in cls.__dataclass_fields__})


@dataclass
class EdgeList:
    """
    Parsed edges in timestamp order.

    Attributes:
        src: Source labels (int64 when every label is an integer, else object)
        dst: Destination labels, same dtype as ``src``
        timestamps: Timestamps (None when the file has none)
        counts: Line and edge counts gathered while parsing
    """

    src: np.ndarray
    dst: np.ndarray
    timestamps: Optional[np.ndarray]
    counts: Dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.src.size)

    @property
    def num_vertices(self) -> int:
        return int(pd.unique(np.concatenate((self.src, self.dst))).size)


def _open_text(source: Union[str, Path, TextIO]) -> Tuple[TextIO, bool]:
    if hasattr(source, "read"):
        return source, False
    path = Path(source)
    if path.suffix == ".gz":
        return gzip.open(path, "rt", encoding="utf-8"), True
    return open(path, "r", encoding="utf-8"), True


def _new_counts() -> Dict[str, int]:
    return {"lines": 0, "comments": 0, "edges_read": 0, "self_loops": 0, "duplicates": 0, "dropped": 0}


def _data_lines(stream: Iterable[str], options: IngestOptions, counts: Dict[str, int]) -> Iterator[Tuple[int, List[str]]]:
    """Yield (line number, fields) of edge lines, counting lines and comments."""
    for line_number, line in enumerate(stream, start=1):
        counts["lines"] += 1
        text = line.strip()
        if not text or text.startswith(options.comment_prefix):
            counts["comments"] += 1
            continue
        fields = text.split()
        if len(fields) < 2:
            raise ParseError("too_few_fields", f"Line {line_number}: expected 'src dst [timestamp]'", line=line_number)
        yield line_number, fields


def _timestamp(fields: List[str], line_number: int, has_time: bool) -> float:
    if not has_time:
        return 0.0
    if len(fields) < 3:
        raise ParseError("missing_timestamp", f"Line {line_number}: missing timestamp", line=line_number)
    try:
        stamp = float(fields[2])
    except ValueError:
        raise ParseError(
            "bad_timestamp", f"Line {line_number}: timestamp '{fields[2]}' is not numeric", line=line_number
        ) from None
    if math.isnan(stamp):
        raise ParseError("bad_timestamp", f"Line {line_number}: timestamp is NaN", line=line_number)
    return stamp


def _is_integer_label(label: str) -> bool:
    return label.lstrip("+-").isdigit()


def _order_edges(
    src: np.ndarray, dst: np.ndarray, stamps: np.ndarray, has_time: bool, counts: Dict[str, int]
) -> EdgeList:
    timestamps = None
    if has_time:
        order = np.argsort(stamps, kind="stable")
        if np.any(order != np.arange(order.size)):
            src, dst, stamps = src[order], dst[order], stamps[order]
        timestamps = stamps
    counts["edges"] = int(src.size)
    logger.info(
        f"Parsed {counts['edges']} edges from {counts['lines']} lines "
        f"({counts['self_loops']} self-loops, {counts['dropped']} dropped)"
    )
    return EdgeList(src=src, dst=dst, timestamps=timestamps, counts=counts)


def _scan_file(path: Path, options: IngestOptions) -> Tuple[Dict[str, int], bool, bool]:
    """
    First pass over a file: validate every line and decide the column layout.

    Returns:
        (counts, has timestamps, every label is an integer)
    """
    counts = _new_counts()
    has_time: Optional[bool] = _TIME_MODES.get(options.timestamps)
    integer_labels = True
    stream, _ = _open_text(path)
    with stream:
        for line_number, fields in _data_lines(stream, options, counts):
            if has_time is None:
                has_time = len(fields) >= 3
            _timestamp(fields, line_number, has_time)
            if integer_labels and not (_is_integer_label(fields[0]) and _is_integer_label(fields[1])):
                integer_labels = False
            counts["edges_read"] += 1
    return counts, bool(has_time), integer_labels


def _read_integer_edges(
    path: Path, options: IngestOptions, counts: Dict[str, int], has_time: bool
) -> Optional[EdgeList]:
    """
    Second pass for integer-labeled files: chunked ``pandas.read_csv`` into
    int64 arrays. Returns None when the file does not fit that layout.
    """
    columns = [0, 1, 2] if has_time else [0, 1]
    dtypes = {0: np.int64, 1: np.int64, 2: np.float64}
    src_parts: List[np.ndarray] = []
    dst_parts: List[np.ndarray] = []
    time_parts: List[np.ndarray] = []
    try:
        reader = pd.read_csv(
            path,
            sep=r"\s+",
            header=None,
            usecols=columns,
            dtype={column: dtypes[column] for column in columns},
            comment=options.comment_prefix,
            chunksize=options.chunk_size,
            compression="infer",
        )
        with reader:
            for chunk in reader:
                src = chunk[0].to_numpy(dtype=np.int64)
                dst = chunk[1].to_numpy(dtype=np.int64)
                stamps = chunk[2].to_numpy(dtype=np.float64) if has_time else np.zeros(src.size)
                loops = src == dst
                counts["self_loops"] += int(loops.sum())
                if options.drop_self_loops and loops.any():
                    counts["dropped"] += int(loops.sum())
                    src, dst, stamps = src[~loops], dst[~loops], stamps[~loops]
                src_parts.append(src)
                dst_parts.append(dst)
                time_parts.append(stamps)
    except (ValueError, OverflowError, pd.errors.ParserError) as e:
        logger.debug(f"{path}: integer reader declined ({e}); using the line parser")
        return None

    src = np.concatenate(src_parts) if src_parts else np.empty(0, dtype=np.int64)
    dst = np.concatenate(dst_parts) if dst_parts else np.empty(0, dtype=np.int64)
    stamps = np.concatenate(time_parts) if time_parts else np.empty(0)
    if options.drop_duplicates and src.size:
        repeated = pd.DataFrame({"src": src, "dst": dst, "t": stamps}).duplicated().to_numpy()
        counts["duplicates"] += int(repeated.sum())
        counts["dropped"] += int(repeated.sum())
        src, dst, stamps = src[~repeated], dst[~repeated], stamps[~repeated]
    logger.debug(f"Read {src.size} integer-labeled edges from {path} in chunks of {options.chunk_size}")
    return _order_edges(src, dst, stamps, has_time, counts)


def _parse_lines(stream: Iterable[str], options: IngestOptions) -> EdgeList:
    """Line-by-line parser for arbitrary string labels."""
    src: List[str] = []
    dst: List[str] = []
    stamps: List[float] = []
    counts = _new_counts()
    has_time: Optional[bool] = _TIME_MODES.get(options.timestamps)
    seen = set() if options.drop_duplicates else None

    for line_number, fields in _data_lines(stream, options, counts):
        if has_time is None:
            has_time = len(fields) >= 3
        stamp = _timestamp(fields, line_number, has_time)
        counts["edges_read"] += 1
        u, v = fields[0], fields[1]
        if u == v:
            counts["self_loops"] += 1
            if options.drop_self_loops:
                counts["dropped"] += 1
                continue
        if seen is not None:
            key = (u, v, stamp)
            if key in seen:
                counts["duplicates"] += 1
                counts["dropped"] += 1
                continue
            seen.add(key)
        src.append(u)
        dst.append(v)
        stamps.append(stamp)

    return _order_edges(
        np.array(src, dtype=object),
        np.array(dst, dtype=object),
        np.asarray(stamps, dtype=np.float64),
        bool(has_time),
        counts,
    )


def parse_edge_list(
    source: Union[str, Path, TextIO, Iterable[str]],
    options: Optional[IngestOptions] = None,
) -> EdgeList:
    """
    Parse a temporal edge list.

    Files are read in two passes: a streaming scan that validates every line
    and counts comments, then a chunked integer reader when every label is an
    integer. Other labels, streams and iterables go through the line parser.

    Args:
        source: Path (".gz" is decompressed), open text stream or iterable of lines
        options: Parsing options

    Returns:
        EdgeList sorted by timestamp (stable for ties)

    Raises:
        ParseError: A line has too few fields or a non-numeric timestamp
    """
    options = options or IngestOptions()
    if isinstance(source, (str, Path)):
        path = Path(source)
        counts, has_time, integer_labels = _scan_file(path, options)
        if integer_labels and counts["edges_read"] and len(options.comment_prefix) == 1:
            edges = _read_integer_edges(path, options, counts, has_time)
            if edges is not None:
                return edges
        stream, _ = _open_text(path)
        with stream:
            return _parse_lines(stream, options)
    return _parse_lines(source, options)


def ends_from_edges(
    edges: EdgeList,
    end_order: str = "src-first",
    rng: Union[np.random.Generator, int, None] = None,
) -> Tuple[EdgeEndSequence, Dict[int, Hashable]]:
    """
    Flatten ordered edges into an arrival-labeled end sequence.

    Args:
        edges: Ordered edges
        end_order: "src-first" emits (u, v); "random" flips each edge w.p. 1/2
        rng: Generator or seed for the random end order

    Returns:
        (EdgeEndSequence of length 2·#edges, map from vertex id to label)
    """
    if end_order not in END_ORDERS:
        raise ParameterError("invalid_ingest_option", f"Unknown end order '{end_order}'")
    if len(edges) == 0:
        raise InsufficientDataError("no_edges", "The edge list is empty")
    ends = np.empty(2 * len(edges), dtype=np.result_type(edges.src, edges.dst))
    ends[0::2] = edges.src
    ends[1::2] = edges.dst
    if end_order == "random":
        generator, _ = as_generator(rng)
        flip = np.flatnonzero(generator.random(len(edges)) < 0.5)
        ends[2 * flip], ends[2 * flip + 1] = ends[2 * flip + 1], ends[2 * flip].copy()
    # factorize numbers labels by first appearance
    codes, uniques = pd.factorize(ends)
    return EdgeEndSequence(codes.astype(np.int64) + 1), dict(enumerate(uniques.tolist(), start=1))


def split_train_test(ends: EdgeEndSequence, fraction: float) -> Tuple[EdgeEndSequence, np.ndarray]:
    """
    Split at an edge boundary: the first ``fraction`` of the edges train.

    Args:
        ends: Full end sequence (two ends per edge)
        fraction: Train share in (0, 1)

    Returns:
        (train sequence, test ends keeping the full sequence's vertex ids)
    """
    if not 0.0 < fraction < 1.0:
        raise ParameterError("invalid_split", f"Split fraction must lie in (0, 1), got {fraction}")
    num_edges = ends.n // 2
    train_edges = int(math.floor(fraction * num_edges + 1e-9))
    if train_edges < 1 or train_edges >= num_edges:
        raise InsufficientDataError(
            "degenerate_split", f"Splitting {num_edges} edges at {fraction} leaves an empty part", edges=num_edges
        )
    cut = 2 * train_edges
    return ends.prefix(cut), ends.ends[cut:].copy()


@dataclass(frozen=True)
class HiddenOrder:
    """
    An order-forgotten observation with the truth kept aside.

    Attributes:
        observation: Degrees with fresh labels, shuffled
        sigma: Arrival position -> observation index
        times: True arrival times
    """

    observation: UnlabeledObservation
    sigma: np.ndarray
    times: ArrivalTimes

    @property
    def vertex_index(self) -> np.ndarray:
        """Observation index of each arrival-labeled vertex (same as sigma)."""
        return self.sigma


def forget_order(ends: EdgeEndSequence, rng: Union[np.random.Generator, int, None] = None) -> HiddenOrder:
    """
    Hide the arrival order of a sequence.

    Args:
        ends: Arrival-labeled sequence
        rng: Generator or seed for the presentation shuffle

    Returns:
        HiddenOrder with observation labels 1..K in presentation order
    """
    generator, _ = as_generator(rng)
    degrees, times = degrees_from_ends(ends)
    presented = generator.permutation(degrees.K)
    sigma = np.empty(degrees.K, dtype=np.int64)
    sigma[presented] = np.arange(degrees.K)
    observation = UnlabeledObservation(degrees.degrees[presented], tuple(range(1, degrees.K + 1)))
    return HiddenOrder(observation=observation, sigma=sigma, times=times)


def write_cache(path: Union[str, Path], ends: EdgeEndSequence) -> None:
    """
    Write the binary cache: magic, uint16 version, uint64 n, uint64 K, then
    the delta-encoded ends as little-endian int64.
    """
    deltas = np.diff(ends.ends, prepend=0).astype("<i8")
    with open(path, "wb") as handle:
        handle.write(_CACHE_HEADER.pack(CACHE_MAGIC, CACHE_VERSION, ends.n, ends.num_vertices))
        handle.write(deltas.tobytes())
    logger.debug(f"Wrote cache {path} (n={ends.n})")


def read_cache(path: Union[str, Path]) -> EdgeEndSequence:
    """Read a cache written by ``write_cache``."""
    with open(path, "rb") as handle:
        header = handle.read(_CACHE_HEADER.size)
        if len(header) != _CACHE_HEADER.size:
            raise DataError("bad_cache", f"{path}: truncated header")
        magic, version, n, K = _CACHE_HEADER.unpack(header)
        if magic != CACHE_MAGIC:
            raise DataError("bad_cache", f"{path}: not a bntlgraph cache")
        if version != CACHE_VERSION:
            raise DataError("bad_cache", f"{path}: unsupported cache version {version}", version=version)
        deltas = np.frombuffer(handle.read(), dtype="<i8")
    if deltas.size != n:
        raise DataError("bad_cache", f"{path}: expected {n} ends, found {deltas.size}")
    ends = EdgeEndSequence(np.cumsum(deltas))
    if ends.num_vertices != K:
        raise DataError("bad_cache", f"{path}: vertex count mismatch")
    return ends


def load_ends(
    path: Union[str, Path],
    options: Optional[IngestOptions] = None,
    rng: Union[np.random.Generator, int, None] = None,
) -> Tuple[EdgeEndSequence, Dict[str, int]]:
    """
    Load an end sequence from a cache (".bntl") or an edge list.

    Returns:
        (EdgeEndSequence, parse counts; empty for caches)
    """
    options = options or IngestOptions()
    if Path(path).suffix == ".bntl":
        return read_cache(path), {}
    edges = parse_edge_list(path, options)
    ends, _ = ends_from_edges(edges, options.end_order, rng)
    return ends, edges.counts
