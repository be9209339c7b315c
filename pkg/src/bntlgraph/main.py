"""
Command-line entry point - bntlgraph
Ties ingestion, generation, fitting, Gibbs sampling and diagnostics into
reproducible batch runs.

Commands:
- generate:  sample a synthetic BNTL graph (edge list, cache, truth record)
- mle:       maximum-likelihood (or MAP) fits with optional predictive split
- gibbs:     posterior sampling over unknown arrival order
- summarize: degree histogram, arrival curve and dataset counts as CSV

Every command writes run_manifest.json next to its outputs. Errors are
reported as one JSON line on stderr; exit codes are 0 (success), 2 (usage or
parameter), 3 (data) and 4 (numeric).
"""

import argparse
import copy
import hashlib
import json
import logging
import platform
import sys
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, NoReturn, Optional, Sequence

import numpy as np
import pandas as pd
from rapidfuzz import fuzz, process

from . import __version__
from .config_manager import ConfigManager
from .core import ArrivalFamily, BNTLModel, EdgeEndSequence, degrees_from_ends, make_arrivals
from .diagnostics import (
    arrival_curve,
    degree_histogram,
    ess_estimate,
    log_l1_distance,
    mean_interarrival,
    predictive_loglik,
)
from .errors import BNTLError, DataError, InsufficientDataError, ParameterError
from .generate import sample_predictive, sample_stick
from .gibbs import ChainConfig, ChainResult, GibbsSampler, SampleArchive, run_chains
from .ingest import IngestOptions, forget_order, load_ends, split_train_test, write_cache
from .mle import MLEOptions, fit_map, fit_model
from .priors import AlphaPrior, ArrivalPriors
from .utils.archive import read_archive, write_archive
from .utils.logger import setup_logging


logger = logging.getLogger(__name__)

FAMILY_ALIASES = {
    "geom": "geometric",
    "shifted-poisson": "poisson",
    "coupled": "coupled-pyp",
    "uncoupled-pyp": "pyp",
    "pitman-yor": "pyp",
}
FAMILY_MATCH_THRESHOLD = 70.0
MANIFEST_NAME = "run_manifest.json"
MANIFEST_LIBRARIES = ("numpy", "scipy", "pandas", "jsonschema", "colorlog", "rapidfuzz")
SHUFFLE_STREAM = 0x53485546


def resolve_family(name: str) -> ArrivalFamily:
    """
    Map a typed family name to an ArrivalFamily, forgiving small typos.

    Args:
        name: Name as given on the command line

    Returns:
        ArrivalFamily

    Raises:
        ParameterError: Nothing close enough matches
    """
    key = name.strip().lower().replace("_", "-")
    key = FAMILY_ALIASES.get(key, key)
    choices = [family.value for family in ArrivalFamily]
    if key in choices:
        return ArrivalFamily(key)

    match = process.extractOne(
        key, choices + list(FAMILY_ALIASES), scorer=fuzz.ratio, score_cutoff=FAMILY_MATCH_THRESHOLD
    )
    if match is None:
        raise ParameterError("unknown_family", f"Unknown arrival family '{name}'", choices=choices)
    value = FAMILY_ALIASES.get(match[0], match[0])
    logger.warning(f"Interpreting family '{name}' as '{value}' (score={match[1]:.0f})")
    return ArrivalFamily(value)


def parse_params(items: Optional[Sequence[str]]) -> Dict[str, float]:
    """Parse "key=value[,key=value]" items into floats."""
    params: Dict[str, float] = {}
    for item in items or []:
        for pair in item.split(","):
            if not pair.strip():
                continue
            key, sep, value = pair.partition("=")
            if not sep:
                raise ParameterError("bad_param", f"Expected key=value, got '{pair}'")
            try:
                params[key.strip()] = float(value)
            except ValueError:
                raise ParameterError("bad_param", f"Value of '{key.strip()}' is not a number: '{value}'") from None
    return params


def resolve_seed(seed: Optional[int]) -> int:
    """The given seed, or fresh entropy recorded so the run can be repeated."""
    if seed is not None:
        return int(seed)
    return int(np.random.SeedSequence().entropy % (2 ** 63))


def file_digest(path: Path) -> str:
    """SHA-256 of a file."""
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def write_manifest(
    out_dir: Path,
    command: str,
    args: argparse.Namespace,
    seed: int,
    inputs: Sequence[Path] = (),
    config: Optional[ConfigManager] = None,
) -> Path:
    """
    Write run_manifest.json: versions, effective flags, input digests, seed.

    Args:
        out_dir: Output directory
        command: Command name
        args: Parsed flags
        seed: Seed used by the run
        inputs: Input files to digest
        config: Effective configuration

    Returns:
        Path of the manifest
    """
    versions: Dict[str, Optional[str]] = {"bntlgraph": __version__, "python": platform.python_version()}
    for name in MANIFEST_LIBRARIES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = None

    flags = {key: value for key, value in vars(args).items() if key != "handler"}
    manifest = {
        "command": command,
        "versions": versions,
        "flags": json.loads(json.dumps(flags, default=str)),
        "inputs": {str(path): file_digest(Path(path)) for path in inputs},
        "seed": seed,
        "config": None if config is None else config.config,
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / MANIFEST_NAME
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
    logger.debug(f"Wrote {path}")
    return path


def _write_json(path: Path, payload: Dict[str, Any]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2)


def flag_overrides(args: argparse.Namespace, config: ConfigManager) -> Dict[str, Any]:
    """
    Dot-path configuration values set by command-line flags.

    Switches that are off and flags that were not given map to None, which
    leaves the configured value in place.
    """
    def flag(name: str) -> Any:
        return getattr(args, name, None)

    def switch(name: str) -> Optional[bool]:
        return True if getattr(args, name, False) else None

    burn_in = flag("burnin")
    iterations = flag("iters")
    if burn_in is None and iterations is not None and iterations <= config.get("chain.burn_in", 0):
        burn_in = iterations // 5
        logger.warning(f"Configured burn-in exceeds --iters; using {burn_in}")
    return {
        "logging.level": flag("log_level"),
        "logging.file": flag("log_file"),
        "ingest.end_order": flag("end_order"),
        "ingest.drop_self_loops": switch("drop_self_loops"),
        "ingest.drop_duplicates": switch("drop_duplicates"),
        "generate.sampler": flag("sampler"),
        "chain.iterations": iterations,
        "chain.burn_in": burn_in,
        "chain.thin": flag("thin"),
        "chain.chains": flag("chains"),
        "chain.debug_checks": switch("debug_checks"),
    }


def _ingest_options(config: ConfigManager) -> IngestOptions:
    return IngestOptions.from_config(config.config)


# ---- generate ----------------------------------------------------------------


def cmd_generate(args: argparse.Namespace, config: ConfigManager, seed: int) -> int:
    """Sample a synthetic graph and write edges.txt, ends.bntl and truth.json."""
    family = resolve_family(args.model)
    params = parse_params(args.params)
    for name in ("alpha", "beta", "lam", "theta", "tau"):
        if getattr(args, name) is not None:
            params[name] = getattr(args, name)
    alpha = params.pop("alpha", 0.5)
    model = BNTLModel(alpha, make_arrivals(family, **params))
    if args.edges < 1:
        raise ParameterError("length_out_of_range", f"--edges must be positive, got {args.edges}")
    n = 2 * args.edges

    sampler = config.get("generate.sampler", "predictive")
    rng = np.random.default_rng(seed)
    if sampler == "stick":
        trace = sample_stick(model, n, rng)
    else:
        trace = sample_predictive(model, n, rng, use_index=n > config.get("generate.fenwick_threshold", 20000))

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    pairs = trace.ends.ends.reshape(-1, 2)
    table = np.column_stack((pairs, np.arange(1, args.edges + 1, dtype=np.int64)))
    header = (
        f"bntlgraph {__version__} generate: family={family.value} alpha={alpha} "
        f"params={json.dumps(model.arrivals.params(), sort_keys=True)} edges={args.edges} seed={seed}\n"
        "src dst timestamp"
    )
    np.savetxt(out_dir / "edges.txt", table, fmt="%d", header=header, comments="# ")
    write_cache(out_dir / "ends.bntl", trace.ends)
    truth = {
        "family": family.value,
        "alpha": alpha,
        "params": model.arrivals.params(),
        "n": n,
        "edges": args.edges,
        "K": trace.times.K,
        "times": trace.times.times.tolist(),
        "sigma": list(range(trace.times.K)),
        "psi": None if trace.psi is None else trace.psi.psi.tolist(),
        "sampler": sampler,
        "seed": seed,
    }
    _write_json(out_dir / "truth.json", truth)
    write_manifest(out_dir, "generate", args, seed, config=config)
    logger.info(f"Generated {args.edges} edges ({trace.times.K} vertices) into {out_dir}")
    return 0


# ---- mle ----------------------------------------------------------------------


def _fit(ends: EdgeEndSequence, family: ArrivalFamily, use_map: bool, options: MLEOptions, config: ConfigManager):
    if use_map:
        priors = config.get("priors", {})
        return fit_map(
            ends,
            family,
            AlphaPrior.from_config(priors.get("alpha", {})),
            ArrivalPriors.from_config(priors),
            options,
        )
    return fit_model(ends, family, options)


def cmd_mle(args: argparse.Namespace, config: ConfigManager, seed: int) -> int:
    """Fit each requested family; optionally score a held-out suffix."""
    options = MLEOptions.from_config(config.config)
    ends, counts = load_ends(args.input, _ingest_options(config), np.random.default_rng(seed))
    families = [resolve_family(name) for name in args.family] if args.family else list(ArrivalFamily)

    results: Dict[str, Any] = {
        "input": str(args.input),
        "n": ends.n,
        "edges": ends.n // 2,
        "K": ends.num_vertices,
        "ingest_counts": counts,
        "estimator": "map" if args.map else "mle",
        "fits": [],
    }
    if args.split is not None:
        train, test = split_train_test(ends, args.split)
        results["split"] = {"fraction": args.split, "train_ends": train.n, "test_ends": int(test.size)}

    for family in families:
        fitted = _fit(ends, family, args.map, options, config)
        entry = fitted.to_dict()
        logger.info(f"{family.value}: {fitted.model.params()} log-lik={fitted.log_likelihood:.3f}")
        if args.split is not None:
            train_fit = _fit(train, family, args.map, options, config)
            entry["predictive"] = {
                "params": train_fit.model.params(),
                "log_likelihood": predictive_loglik(train_fit.model, train, test, mode="mle"),
            }
        results["fits"].append(entry)

    out_path = Path(args.out)
    _write_json(out_path, results)
    write_manifest(out_path.parent, "mle", args, seed, inputs=[Path(args.input)], config=config)
    logger.info(f"Wrote {out_path}")
    return 0


# ---- gibbs --------------------------------------------------------------------


def _ess_entry(trace: Sequence[float]) -> Optional[Dict[str, Any]]:
    try:
        estimate = ess_estimate(trace)
    except InsufficientDataError:
        return None
    return {"ess": estimate.ess, "factor": estimate.factor, "length": estimate.length, "flag": estimate.flag}


def _truth_errors(
    archive: SampleArchive,
    truth: Dict[str, Any],
    true_degrees: np.ndarray,
    true_times: np.ndarray,
) -> Dict[str, Any]:
    means = archive.posterior_means()
    errors: Dict[str, Any] = {}
    if "alpha" in truth:
        errors["alpha_abs_error"] = abs(means["alpha"] - float(truth["alpha"]))
    if ArrivalFamily(truth.get("family", archive.family.value)) is archive.family:
        for key, value in truth.get("params", {}).items():
            if key in means:
                errors[f"{key}_abs_error"] = abs(means[key] - float(value))
    l1 = [np.exp(log_l1_distance(archive.ordered_degrees(i), true_degrees)) for i in range(len(archive))]
    errors["degree_l1_mean"] = float(np.mean(l1))
    gaps = [np.abs(times - true_times).mean() for times in archive.times]
    errors["arrival_time_abs_error_mean"] = float(np.mean(gaps))
    return errors


def _chain_summary(
    archive: SampleArchive,
    reference: Optional[np.ndarray],
    truth: Optional[Dict[str, Any]],
    true_degrees: np.ndarray,
    true_times: np.ndarray,
    predictive: Optional[Dict[str, Any]],
) -> Dict[str, Any]:
    entry: Dict[str, Any] = {
        "samples": len(archive),
        "runtime_seconds": archive.runtime,
        "posterior_means": archive.posterior_means(),
    }
    if len(archive):
        entry["ess"] = {
            "log_l1": _ess_entry(archive.l1_statistic(reference)),
            "alpha": _ess_entry(archive.alpha),
        }
    if truth is not None and len(archive):
        entry["errors"] = _truth_errors(archive, truth, true_degrees, true_times)
    if predictive is not None and len(archive):
        entry["predictive_log_likelihood"] = predictive_loglik(
            archive, predictive["train"], predictive["test"], predictive["mode"], predictive["vertex_index"]
        )
    return entry


def _resume_chains(
    out_dir: Path,
    observation,
    family: ArrivalFamily,
    config: ChainConfig,
    chains: int,
) -> List[ChainResult]:
    results = []
    for chain in range(chains):
        prefix = f"chain_{chain}"
        checkpoint_path = out_dir / f"{prefix}_checkpoint.json"
        if not checkpoint_path.exists():
            raise DataError("missing_checkpoint", f"No checkpoint at {checkpoint_path}")
        with open(checkpoint_path, "r", encoding="utf-8") as handle:
            snapshot = json.load(handle)
        archive = read_archive(out_dir, prefix)
        if not np.array_equal(archive.observed_degrees, observation.degrees):
            raise DataError("resume_mismatch", f"{prefix} was run on a different observation")
        sampler = GibbsSampler(observation, family, config)
        sampler.restore(snapshot, archive)
        sampler.run()
        results.append(ChainResult(sampler.archive, sampler.checkpoint()))
    return results


def cmd_gibbs(args: argparse.Namespace, config: ConfigManager, seed: int) -> int:
    """Sample the posterior over (σ, T, α, φ) for an order-forgotten graph."""
    family = resolve_family(args.family)
    ends, _ = load_ends(args.input, _ingest_options(config), np.random.default_rng(seed))
    test = None
    train = ends
    if args.split is not None:
        train, test = split_train_test(ends, args.split)

    hidden = forget_order(train, np.random.default_rng([SHUFFLE_STREAM, seed]))
    true_degrees, true_times = degrees_from_ends(train)
    truth = None
    if args.truth:
        with open(args.truth, "r", encoding="utf-8") as handle:
            truth = json.load(handle)
    reference = true_degrees.degrees if truth is not None else None

    chain_config = ChainConfig.from_config(config.config, seed=seed)
    chains = config.get("chain.chains", 1)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.resume:
        results = _resume_chains(out_dir, hidden.observation, family, chain_config, chains)
    else:
        results = run_chains(hidden.observation, family, chain_config, chains, seed=seed)

    predictive = None
    if test is not None:
        predictive = {"train": train, "test": test, "mode": args.predictive_mode, "vertex_index": hidden.vertex_index}

    summary: Dict[str, Any] = {
        "family": family.value,
        "input": str(args.input),
        "n": train.n,
        "K": hidden.observation.K,
        "iterations": chain_config.iterations,
        "burn_in": chain_config.burn_in,
        "thin": chain_config.thin,
        "chains": [],
    }
    for chain, result in enumerate(results):
        prefix = f"chain_{chain}"
        write_archive(result.archive, out_dir, prefix, reference)
        _write_json(out_dir / f"{prefix}_checkpoint.json", result.checkpoint)
        summary["chains"].append(
            _chain_summary(result.archive, reference, truth, true_degrees.degrees, true_times.times, predictive)
        )

    if len(results) > 1:
        pooled = copy.deepcopy(results[0].archive)
        for result in results[1:]:
            pooled.extend(result.archive)
        pooled.runtime = max(result.archive.runtime for result in results)
        summary["pooled"] = _chain_summary(pooled, reference, truth, true_degrees.degrees, true_times.times, predictive)

    _write_json(out_dir / "summary.json", summary)
    config.save(out_dir / "config.json")
    inputs = [Path(args.input)] + ([Path(args.truth)] if args.truth else [])
    write_manifest(out_dir, "gibbs", args, seed, inputs=inputs, config=config)
    logger.info(f"Gibbs run finished; outputs in {out_dir}")
    return 0


# ---- summarize ----------------------------------------------------------------


def cmd_summarize(args: argparse.Namespace, config: ConfigManager, seed: int) -> int:
    """Write degree histogram, arrival curve and a dataset counts table."""
    ends, counts = load_ends(args.input, _ingest_options(config), np.random.default_rng(seed))
    degrees, times = degrees_from_ends(ends)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    degree_histogram(degrees).to_csv(out_dir / "degree_histogram.csv", index=False)
    arrival_curve(times, ends.n).to_csv(out_dir / "arrival_curve.csv", index=False)
    row = {
        "dataset": Path(args.input).name,
        "vertices": degrees.K,
        "edges": ends.n // 2,
        "ends": ends.n,
        "max_degree": int(degrees.degrees.max()),
        "mean_interarrival": mean_interarrival(times) if times.K >= 2 else None,
    }
    row.update({key: counts[key] for key in ("self_loops", "duplicates", "dropped") if key in counts})
    table = pd.DataFrame([row])
    table.to_csv(out_dir / "counts.csv", index=False)
    print(table.to_string(index=False))
    write_manifest(out_dir, "summarize", args, seed, inputs=[Path(args.input)], config=config)
    return 0


# ---- argument parsing ---------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Run configuration (.json or .toml)")
    parser.add_argument("--seed", type=int, help="Random seed (fresh entropy when omitted)")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"])
    parser.add_argument("--log-file", help="Rotating log file")


def _add_ingest(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--in", dest="input", required=True, help="Edge list (.txt/.gz) or end cache (.bntl)")
    parser.add_argument("--end-order", choices=["src-first", "random"], help="Order of the two ends of an edge")
    parser.add_argument("--drop-self-loops", action="store_true", help="Discard edges (u, u)")
    parser.add_argument("--drop-duplicates", action="store_true", help="Discard repeated edge lines")


class JsonArgumentParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors are reported as one JSON line, exit code 2."""

    def error(self, message: str) -> NoReturn:
        payload = {"error": "UsageError", "reason": "usage", "message": f"{self.prog}: {message}", "details": {}}
        print(json.dumps(payload), file=sys.stderr)
        self.exit(2)


def build_parser() -> argparse.ArgumentParser:
    """Command-line parser with one subcommand per workflow."""
    parser = JsonArgumentParser(
        prog="bntlgraph",
        description="Sampling, Gibbs inference and maximum likelihood for BNTL graph models",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=JsonArgumentParser)

    generate = commands.add_parser("generate", help="Sample a synthetic graph")
    _add_common(generate)
    generate.add_argument("--model", required=True, help="Arrival family: geometric, poisson, pyp, coupled-pyp")
    generate.add_argument("--params", action="append", help="Parameters as key=value[,key=value]")
    generate.add_argument("--alpha", type=float, help="Discount α (default 0.5)")
    generate.add_argument("--beta", type=float, help="Geometric β")
    generate.add_argument("--lam", type=float, help="Shifted Poisson λ")
    generate.add_argument("--theta", type=float, help="PYP θ")
    generate.add_argument("--tau", type=float, help="Uncoupled PYP τ")
    generate.add_argument("--edges", type=int, required=True, help="Number of edges")
    generate.add_argument("--sampler", choices=["predictive", "stick"], help="Sampling representation")
    generate.add_argument("--out", default="generated", help="Output directory")
    generate.set_defaults(handler=cmd_generate)

    mle = commands.add_parser("mle", help="Maximum-likelihood fits")
    _add_common(mle)
    _add_ingest(mle)
    mle.add_argument("--family", action="append", help="Arrival family (repeatable; default: all)")
    mle.add_argument("--split", type=float, help="Train fraction for the predictive log-likelihood")
    mle.add_argument("--map", action="store_true", help="MAP estimates under the configured priors")
    mle.add_argument("--out", default="mle.json", help="Output JSON file")
    mle.set_defaults(handler=cmd_mle)

    gibbs = commands.add_parser("gibbs", help="Gibbs sampling with unknown arrival order")
    _add_common(gibbs)
    _add_ingest(gibbs)
    gibbs.add_argument("--family", required=True, help="Arrival family")
    gibbs.add_argument("--iters", type=int, help="Total iterations")
    gibbs.add_argument("--burnin", type=int, help="Burn-in iterations")
    gibbs.add_argument("--thin", type=int, help="Thinning interval")
    gibbs.add_argument("--chains", type=int, help="Independent chains run in parallel")
    gibbs.add_argument("--split", type=float, help="Train fraction; the rest is scored")
    gibbs.add_argument(
        "--predictive-mode", choices=["posterior", "posterior-mean"], default="posterior",
        help="How samples are combined for the predictive log-likelihood",
    )
    gibbs.add_argument("--truth", help="truth.json from generate, for error metrics")
    gibbs.add_argument("--resume", action="store_true", help="Continue the chains saved in --out-dir")
    gibbs.add_argument("--debug-checks", action="store_true", help="Verify state invariants after every update")
    gibbs.add_argument("--out-dir", default="gibbs_run", help="Output directory")
    gibbs.set_defaults(handler=cmd_gibbs)

    summarize = commands.add_parser("summarize", help="Dataset summaries as CSV")
    _add_common(summarize)
    _add_ingest(summarize)
    summarize.add_argument("--out-dir", "--plots-dir", dest="out_dir", default="summary", help="Output directory")
    summarize.set_defaults(handler=cmd_summarize)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Entry point for the bntlgraph command line.

    Args:
        argv: Arguments (default: sys.argv[1:])

    Returns:
        Exit code
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        config = ConfigManager(args.config)
        config.apply_overrides(flag_overrides(args, config))
        setup_logging(
            log_level=config.get("logging.level", "INFO"),
            log_file=config.get("logging.file"),
            console_output=config.get("logging.console", True),
        )
        seed = resolve_seed(args.seed)
        logger.info(f"bntlgraph {__version__}: {args.command} (seed={seed})")
        return args.handler(args, config, seed)

    except BNTLError as e:
        print(json.dumps(e.to_dict()), file=sys.stderr)
        logger.error(f"{type(e).__name__} [{e.reason}]: {e}")
        return e.exit_code

    except Exception as e:
        print(json.dumps({"error": type(e).__name__, "reason": "internal", "message": str(e), "details": {}}),
              file=sys.stderr)
        logger.error(f"Fatal error: {e}", exc_info=True)
        return 4


if __name__ == "__main__":
    sys.exit(main())
