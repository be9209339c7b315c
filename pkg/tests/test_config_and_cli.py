"""
Test suite for ConfigManager and the command line

Tests covering:
- Defaults, file loading and schema validation
- Dot-path get/set and overrides
- Family name resolution
- generate, mle, gibbs and summarize end to end
- Exit codes and JSON error lines, usage errors included
- Flag overrides recorded in the saved configuration
"""

import io
import json
import shutil
import sys
import tempfile
import unittest
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path

import pandas as pd

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from bntlgraph.config_manager import ConfigManager
from bntlgraph.core import ArrivalFamily
from bntlgraph.errors import ParameterError
from bntlgraph.main import main, parse_params, resolve_family


def run_cli(*argv):
    """Run the command line, returning (exit code, JSON error line or None)."""
    stderr = io.StringIO()
    with redirect_stderr(stderr), redirect_stdout(io.StringIO()):
        code = main([str(arg) for arg in argv])
    error = None
    for line in stderr.getvalue().splitlines():
        if line.startswith("{"):
            error = json.loads(line)
            break
    return code, error


class TestConfigManager(unittest.TestCase):
    """Test cases for ConfigManager"""

    def setUp(self) -> None:
        self.temp_dir = Path(tempfile.mkdtemp())

    def tearDown(self) -> None:
        shutil.rmtree(self.temp_dir)

    def test_defaults_validate(self) -> None:
        """Test the built-in defaults pass the schema"""
        config = ConfigManager()
        self.assertIsNone(config.config_path)
        self.assertEqual(config.get("chain.iterations"), 125000)
        self.assertEqual(config.get("ingest.end_order"), "src-first")

    def test_missing_file(self) -> None:
        """Test a missing config file is a parameter error"""
        with self.assertRaises(ParameterError) as ctx:
            ConfigManager(self.temp_dir / "absent.toml")
        self.assertEqual(ctx.exception.reason, "config_not_found")

    def test_toml_merges_over_defaults(self) -> None:
        """Test a TOML file overrides only the keys it names"""
        path = self.temp_dir / "run.toml"
        path.write_text("[chain]\niterations = 500\nburn_in = 100\n\n[priors.alpha]\nhigh = 0.9\n", encoding="utf-8")
        config = ConfigManager(path)
        self.assertEqual(config.get("chain.iterations"), 500)
        self.assertEqual(config.get("chain.thin"), 10)
        self.assertEqual(config.get("priors.alpha.high"), 0.9)
        self.assertEqual(config.get("priors.alpha.low"), -100.0)

    def test_json_invalid_value(self) -> None:
        """Test a schema violation names the offending key"""
        path = self.temp_dir / "run.json"
        path.write_text(json.dumps({"chain": {"thin": 0}}), encoding="utf-8")
        with self.assertRaises(ParameterError) as ctx:
            ConfigManager(path)
        self.assertEqual(ctx.exception.reason, "invalid_config")
        self.assertEqual(ctx.exception.details["key"], "chain.thin")

    def test_unknown_key(self) -> None:
        """Test unknown keys are rejected"""
        path = self.temp_dir / "run.json"
        path.write_text(json.dumps({"chain": {"iteratoins": 10}}), encoding="utf-8")
        with self.assertRaises(ParameterError):
            ConfigManager(path)

    def test_set_and_get(self) -> None:
        """Test dot-path access and validation on set"""
        config = ConfigManager()
        config.set("mle.grid_points", 50)
        self.assertEqual(config.get("mle.grid_points"), 50)
        self.assertEqual(config.get("mle.nothing", "fallback"), "fallback")
        with self.assertRaises(ParameterError):
            config.set("logging.level", "LOUD")

    def test_overrides_skip_none(self) -> None:
        """Test None overrides leave the file value in place"""
        config = ConfigManager()
        config.apply_overrides({"chain.thin": 4, "chain.burn_in": None})
        self.assertEqual(config.get("chain.thin"), 4)
        self.assertEqual(config.get("chain.burn_in"), 25000)

    def test_save(self) -> None:
        """Test the effective configuration is saved as JSON"""
        path = ConfigManager().save(self.temp_dir / "out" / "config.json")
        with open(path, "r", encoding="utf-8") as handle:
            self.assertEqual(json.load(handle)["generate"]["sampler"], "predictive")


class TestCommandHelpers(unittest.TestCase):
    """Test cases for family resolution and parameter parsing"""

    def test_exact_and_alias(self) -> None:
        """Test canonical names and aliases"""
        self.assertIs(resolve_family("geometric"), ArrivalFamily.GEOMETRIC)
        self.assertIs(resolve_family("Coupled"), ArrivalFamily.COUPLED_PYP)
        self.assertIs(resolve_family("pitman_yor"), ArrivalFamily.PYP)

    def test_typo(self) -> None:
        """Test a small typo still resolves"""
        self.assertIs(resolve_family("geometirc"), ArrivalFamily.GEOMETRIC)

    def test_unknown(self) -> None:
        """Test a far-off name is rejected"""
        with self.assertRaises(ParameterError):
            resolve_family("lognormal-mixture")

    def test_parse_params(self) -> None:
        """Test key=value lists"""
        self.assertEqual(parse_params(["alpha=0.3,beta=0.1", "theta=2"]), {"alpha": 0.3, "beta": 0.1, "theta": 2.0})
        with self.assertRaises(ParameterError):
            parse_params(["beta"])
        with self.assertRaises(ParameterError):
            parse_params(["beta=big"])


class TestCommandLine(unittest.TestCase):
    """End-to-end tests of the command line"""

    def setUp(self) -> None:
        self.temp_dir = Path(tempfile.mkdtemp())
        self.generated = self.temp_dir / "generated"
        code, _ = run_cli(
            "generate", "--model", "geometric", "--alpha", "0.3", "--beta", "0.2",
            "--edges", "40", "--seed", "7", "--out", self.generated, "--log-level", "WARNING",
        )
        self.assertEqual(code, 0)

    def tearDown(self) -> None:
        shutil.rmtree(self.temp_dir)

    def test_generate_outputs(self) -> None:
        """Test generate writes the edge list, cache, truth and manifest"""
        for name in ("edges.txt", "ends.bntl", "truth.json", "run_manifest.json"):
            self.assertTrue((self.generated / name).exists(), name)
        with open(self.generated / "truth.json", "r", encoding="utf-8") as handle:
            truth = json.load(handle)
        self.assertEqual(truth["n"], 80)
        self.assertEqual(truth["params"], {"beta": 0.2})
        self.assertEqual(truth["times"][0], 1)
        with open(self.generated / "run_manifest.json", "r", encoding="utf-8") as handle:
            self.assertEqual(json.load(handle)["seed"], 7)

    def test_generate_is_reproducible(self) -> None:
        """Test the same seed writes byte-identical outputs"""
        again = self.temp_dir / "again"
        run_cli(
            "generate", "--model", "geometric", "--alpha", "0.3", "--beta", "0.2",
            "--edges", "40", "--seed", "7", "--out", again, "--log-level", "WARNING",
        )
        for name in ("edges.txt", "ends.bntl"):
            self.assertEqual((again / name).read_bytes(), (self.generated / name).read_bytes())

    def test_edge_list_matches_cache(self) -> None:
        """Test re-ingesting the written edge list gives the cached sequence"""
        summary_txt = self.temp_dir / "from_txt"
        summary_bin = self.temp_dir / "from_cache"
        self.assertEqual(run_cli("summarize", "--in", self.generated / "edges.txt", "--out-dir", summary_txt)[0], 0)
        self.assertEqual(run_cli("summarize", "--in", self.generated / "ends.bntl", "--out-dir", summary_bin)[0], 0)
        txt = pd.read_csv(summary_txt / "degree_histogram.csv")
        cached = pd.read_csv(summary_bin / "degree_histogram.csv")
        pd.testing.assert_frame_equal(txt, cached)
        counts = pd.read_csv(summary_txt / "counts.csv")
        self.assertEqual(int(counts["edges"].iloc[0]), 40)
        self.assertTrue((summary_txt / "arrival_curve.csv").exists())

    def test_mle_with_split(self) -> None:
        """Test mle fits every requested family and scores the held-out part"""
        out = self.temp_dir / "mle" / "fit.json"
        code, _ = run_cli(
            "mle", "--in", self.generated / "ends.bntl", "--family", "geometric", "--family", "pyp",
            "--split", "0.8", "--out", out, "--seed", "1",
        )
        self.assertEqual(code, 0)
        with open(out, "r", encoding="utf-8") as handle:
            result = json.load(handle)
        self.assertEqual([fit["family"] for fit in result["fits"]], ["geometric", "pyp"])
        self.assertEqual(result["split"]["test_ends"], 16)
        for fit in result["fits"]:
            self.assertLess(fit["predictive"]["log_likelihood"], 0.0)
        self.assertTrue((out.parent / "run_manifest.json").exists())

    def test_gibbs_and_resume(self) -> None:
        """Test a short Gibbs run writes its archive and resumes from its checkpoint"""
        out_dir = self.temp_dir / "gibbs"
        common = [
            "gibbs", "--in", self.generated / "ends.bntl", "--family", "geometric",
            "--burnin", "10", "--thin", "5", "--seed", "3", "--out-dir", out_dir,
            "--truth", self.generated / "truth.json", "--log-level", "WARNING",
        ]
        self.assertEqual(run_cli(*common, "--iters", "40")[0], 0)
        with open(out_dir / "summary.json", "r", encoding="utf-8") as handle:
            first = json.load(handle)
        self.assertEqual(len(first["chains"]), 1)
        self.assertIn("errors", first["chains"][0])
        for name in ("chain_0.csv", "chain_0_states.txt", "chain_0_checkpoint.json", "config.json"):
            self.assertTrue((out_dir / name).exists(), name)

        self.assertEqual(run_cli(*common, "--iters", "80", "--resume")[0], 0)
        with open(out_dir / "summary.json", "r", encoding="utf-8") as handle:
            resumed = json.load(handle)
        self.assertGreater(resumed["chains"][0]["samples"], first["chains"][0]["samples"])
        trace = pd.read_csv(out_dir / "chain_0_trace.csv")
        self.assertEqual(len(trace), 80)

    def test_gibbs_predictive(self) -> None:
        """Test a split Gibbs run reports a predictive log-likelihood"""
        out_dir = self.temp_dir / "gibbs_split"
        code, _ = run_cli(
            "gibbs", "--in", self.generated / "ends.bntl", "--family", "pyp", "--iters", "30",
            "--burnin", "10", "--thin", "5", "--split", "0.75", "--seed", "4", "--out-dir", out_dir,
        )
        self.assertEqual(code, 0)
        with open(out_dir / "summary.json", "r", encoding="utf-8") as handle:
            summary = json.load(handle)
        self.assertLess(summary["chains"][0]["predictive_log_likelihood"], 0.0)

    def test_flags_reach_saved_config(self) -> None:
        """Test flag values are written to config.json and the manifest config"""
        out_dir = self.temp_dir / "gibbs_flags"
        code, _ = run_cli(
            "gibbs", "--in", self.generated / "ends.bntl", "--family", "geometric", "--iters", "24",
            "--thin", "3", "--end-order", "random", "--debug-checks", "--seed", "5", "--out-dir", out_dir,
            "--log-level", "WARNING",
        )
        self.assertEqual(code, 0)
        with open(out_dir / "config.json", "r", encoding="utf-8") as handle:
            saved = json.load(handle)
        self.assertEqual(saved["chain"]["iterations"], 24)
        self.assertEqual(saved["chain"]["burn_in"], 4)
        self.assertEqual(saved["chain"]["thin"], 3)
        self.assertTrue(saved["chain"]["debug_checks"])
        self.assertEqual(saved["ingest"]["end_order"], "random")
        self.assertEqual(saved["logging"]["level"], "WARNING")
        with open(out_dir / "run_manifest.json", "r", encoding="utf-8") as handle:
            self.assertEqual(json.load(handle)["config"], saved)
        with open(out_dir / "summary.json", "r", encoding="utf-8") as handle:
            summary = json.load(handle)
        self.assertEqual((summary["iterations"], summary["burn_in"], summary["thin"]), (24, 4, 3))


class TestExitCodes(unittest.TestCase):
    """Test cases for error reporting"""

    def setUp(self) -> None:
        self.temp_dir = Path(tempfile.mkdtemp())

    def tearDown(self) -> None:
        shutil.rmtree(self.temp_dir)

    def test_usage_error(self) -> None:
        """Test a missing required flag exits with 2 and a JSON usage line"""
        code, error = run_cli("generate", "--model", "geometric")
        self.assertEqual(code, 2)
        self.assertEqual(error["error"], "UsageError")
        self.assertEqual(error["reason"], "usage")
        self.assertIn("--edges", error["message"])
        self.assertEqual(error["details"], {})

    def test_unknown_command(self) -> None:
        """Test an unknown subcommand is a JSON usage error"""
        code, error = run_cli("plot")
        self.assertEqual(code, 2)
        self.assertEqual(error["reason"], "usage")

    def test_flag_rejected_by_schema(self) -> None:
        """Test a flag value the configuration schema rejects exits with 2"""
        path = self.temp_dir / "edges.txt"
        path.write_text("1 2 1\n2 3 2\n", encoding="utf-8")
        code, error = run_cli(
            "gibbs", "--in", path, "--family", "geometric", "--iters", "0", "--out-dir", self.temp_dir / "g",
        )
        self.assertEqual(code, 2)
        self.assertEqual(error["reason"], "invalid_config")

    def test_parameter_error(self) -> None:
        """Test an out-of-range parameter exits with 2 and a JSON line"""
        code, error = run_cli(
            "generate", "--model", "geometric", "--beta", "1.5", "--edges", "5", "--out", self.temp_dir / "g",
        )
        self.assertEqual(code, 2)
        self.assertEqual(error["error"], "ParameterError")

    def test_unknown_family(self) -> None:
        """Test an unresolvable family exits with 2"""
        code, error = run_cli("generate", "--model", "zzzz", "--edges", "5", "--out", self.temp_dir / "g")
        self.assertEqual(code, 2)
        self.assertEqual(error["reason"], "unknown_family")

    def test_data_error(self) -> None:
        """Test a malformed edge list exits with 3 and reports the line"""
        path = self.temp_dir / "bad.txt"
        path.write_text("1 2 3\n4\n", encoding="utf-8")
        code, error = run_cli("summarize", "--in", path, "--out-dir", self.temp_dir / "s")
        self.assertEqual(code, 3)
        self.assertEqual(error["reason"], "too_few_fields")
        self.assertEqual(error["details"]["line"], 2)


if __name__ == "__main__":
    unittest.main()
