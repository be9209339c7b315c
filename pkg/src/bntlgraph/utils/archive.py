"""
Archive Module - Reading and writing Gibbs sample archives

A chain archive is stored as four files sharing a prefix:
  <prefix>.csv          one row per collected sample (scalar fields)
  <prefix>_states.txt   per-sample arrival times and permutation, compactly coded
  <prefix>_trace.csv    log joint after every iteration
  <prefix>_meta.json    observation and run metadata

Arrival times are coded as run-length interarrivals ("3*1 2 5" is 1,1,1,2,5)
and permutations as index ranges ("4-7,0,2-3").
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from ..core import ArrivalFamily
from ..gibbs import SampleArchive


logger = logging.getLogger(__name__)

_EMPTY = "-"


def encode_interarrivals(times: np.ndarray) -> str:
    """Run-length code the interarrivals of T (T_1 = 1 is implied)."""
    deltas = np.diff(np.asarray(times, dtype=np.int64))
    if deltas.size == 0:
        return _EMPTY
    starts = np.flatnonzero(np.concatenate(([True], deltas[1:] != deltas[:-1])))
    lengths = np.diff(np.append(starts, deltas.size))
    tokens = [
        f"{count}*{deltas[start]}" if count > 1 else str(deltas[start])
        for start, count in zip(starts, lengths)
    ]
    return " ".join(tokens)


def decode_interarrivals(text: str) -> np.ndarray:
    """Inverse of ``encode_interarrivals``; returns the arrival times."""
    deltas: List[int] = []
    if text.strip() != _EMPTY:
        for token in text.split():
            count, _, delta = token.rpartition("*")
            deltas.extend([int(delta)] * (int(count) if count else 1))
    return np.cumsum(np.array([1] + deltas, dtype=np.int64))


def encode_permutation(sigma: np.ndarray) -> str:
    """Range-code a permutation of 0..K-1."""
    sigma = np.asarray(sigma, dtype=np.int64)
    breaks = np.flatnonzero(np.diff(sigma) != 1) + 1
    tokens = []
    for run in np.split(sigma, breaks):
        tokens.append(str(run[0]) if run.size == 1 else f"{run[0]}-{run[-1]}")
    return ",".join(tokens)


def decode_permutation(text: str) -> np.ndarray:
    """Inverse of ``encode_permutation``."""
    values: List[int] = []
    for token in text.split(","):
        first, sep, last = token.partition("-")
        if sep:
            values.extend(range(int(first), int(last) + 1))
        else:
            values.append(int(first))
    return np.array(values, dtype=np.int64)


def _paths(directory: Union[str, Path], prefix: str) -> Dict[str, Path]:
    base = Path(directory)
    return {
        "samples": base / f"{prefix}.csv",
        "states": base / f"{prefix}_states.txt",
        "trace": base / f"{prefix}_trace.csv",
        "meta": base / f"{prefix}_meta.json",
    }


def samples_frame(archive: SampleArchive, reference: Optional[np.ndarray] = None) -> pd.DataFrame:
    """
    Scalar sample table: iteration, alpha, arrival parameters, log_joint,
    s_stat and the log L1 statistic against ``reference``.
    """
    frame = pd.DataFrame({"iteration": archive.iterations, "alpha": archive.alpha})
    params = pd.DataFrame(archive.params)
    for column in params.columns:
        frame[column] = params[column].to_numpy()
    frame["log_joint"] = archive.log_joint
    frame["s_stat"] = archive.s_stat
    frame["log_l1"] = archive.l1_statistic(reference)
    return frame


def write_archive(
    archive: SampleArchive,
    directory: Union[str, Path],
    prefix: str = "chain_0",
    reference: Optional[np.ndarray] = None,
) -> Dict[str, Path]:
    """
    Write a chain archive.

    Args:
        archive: Samples of one chain
        directory: Output directory (created if needed)
        prefix: File name prefix
        reference: Reference ordered degrees for the L1 statistic

    Returns:
        Map from file role to path
    """
    paths = _paths(directory, prefix)
    paths["samples"].parent.mkdir(parents=True, exist_ok=True)

    samples_frame(archive, reference).to_csv(paths["samples"], index=False)
    with open(paths["states"], "w", encoding="utf-8") as handle:
        for iteration, times, sigma, psi in zip(archive.iterations, archive.times, archive.sigma, archive.psi):
            psi_text = _EMPTY if psi is None else " ".join(repr(float(x)) for x in psi)
            handle.write(f"{iteration}\t{encode_interarrivals(times)}\t{encode_permutation(sigma)}\t{psi_text}\n")
    pd.DataFrame({"log_joint": archive.log_joint_trace}).to_csv(paths["trace"], index=False)

    meta = {
        "family": archive.family.value,
        "labels": list(archive.labels),
        "observed_degrees": archive.observed_degrees.tolist(),
        "initial_sigma": archive.initial_sigma.tolist(),
        "seed": archive.seed,
        "runtime": archive.runtime,
        "samples": len(archive),
    }
    with open(paths["meta"], "w", encoding="utf-8") as handle:
        json.dump(meta, handle, indent=2, default=str)

    logger.info(f"Wrote {len(archive)} samples to {paths['samples']}")
    return paths


def read_archive(directory: Union[str, Path], prefix: str = "chain_0") -> SampleArchive:
    """Read an archive written by ``write_archive``."""
    paths = _paths(directory, prefix)
    with open(paths["meta"], "r", encoding="utf-8") as handle:
        meta: Dict[str, Any] = json.load(handle)

    archive = SampleArchive(
        family=ArrivalFamily(meta["family"]),
        labels=tuple(meta["labels"]),
        observed_degrees=np.asarray(meta["observed_degrees"], dtype=np.int64),
        initial_sigma=np.asarray(meta["initial_sigma"], dtype=np.int64),
        seed=meta.get("seed"),
        runtime=float(meta.get("runtime", 0.0)),
    )

    frame = pd.read_csv(paths["samples"])
    fixed = {"iteration", "alpha", "log_joint", "s_stat", "log_l1"}
    param_columns = [c for c in frame.columns if c not in fixed]
    archive.iterations = frame["iteration"].astype(int).tolist()
    archive.alpha = frame["alpha"].astype(float).tolist()
    archive.params = [
        {column: float(row[column]) for column in param_columns} for _, row in frame.iterrows()
    ]
    archive.log_joint = frame["log_joint"].astype(float).tolist()
    archive.s_stat = frame["s_stat"].astype(float).tolist()

    with open(paths["states"], "r", encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            _, times_text, sigma_text, psi_text = line.rstrip("\n").split("\t")
            archive.times.append(decode_interarrivals(times_text))
            archive.sigma.append(decode_permutation(sigma_text))
            archive.psi.append(None if psi_text == _EMPTY else np.array([float(x) for x in psi_text.split()]))

    if paths["trace"].exists():
        archive.log_joint_trace = pd.read_csv(paths["trace"])["log_joint"].astype(float).tolist()
    logger.debug(f"Read {len(archive)} samples from {paths['samples']}")
    return archive
