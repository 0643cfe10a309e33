"""
Tests for the command-line surface: output formats, exit codes and error reporting.
"""
import json
import math
from pathlib import Path

import pytest

from app.cli import EXIT_FAILURES, EXIT_INPUT, EXIT_OK, build_parser, run_cli

SAMPLES = Path(__file__).resolve().parents[1] / "samples"


# ============================================================================
# Helper Functions
# ============================================================================

def run_json(capsys, *argv):
    """Run a command and parse its JSON stdout"""
    code = run_cli(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out)


def sample(name: str) -> str:
    return str(SAMPLES / name)


# ============================================================================
# State commands
# ============================================================================

class TestStateCommands:
    """Commands on state problem files"""

    def test_pexcl_orthogonal_states(self, capsys):
        code, payload = run_json(capsys, "pexcl", "--file", sample("orth.json"))
        assert code == EXIT_OK
        assert payload["value"] == pytest.approx(0.0, abs=1e-12)
        assert payload["method"] == "spectral"

    def test_pexcl_identical_states(self, capsys):
        code, payload = run_json(capsys, "pexcl", "--file", sample("identical.json"))
        assert code == EXIT_OK
        assert payload["value"] == pytest.approx(0.25, abs=1e-9)

    def test_divergence(self, capsys):
        code, payload = run_json(capsys, "divergence", "--file", sample("plus_zero.json"),
                                 "--kind", "umegaki")
        assert code == EXIT_OK
        assert payload["value"] == math.inf

    def test_divergence_pair_out_of_range(self, capsys):
        code = run_cli(["divergence", "--file", sample("orth.json"), "--kind", "umegaki", "--pair", "0", "5"])
        assert code == EXIT_INPUT
        assert "pair" in capsys.readouterr().err

    def test_exponent(self, capsys):
        code, payload = run_json(capsys, "exponent", "--file", sample("plus_zero.json"), "--n-max", "2")
        assert code == EXIT_OK
        assert [row["n"] for row in payload["exponents"]] == [1, 2]
        assert payload["exponents"][0]["exponent"] == pytest.approx(1.921, abs=1e-3)

    def test_chernoff(self, capsys):
        code, payload = run_json(capsys, "chernoff", "--file", sample("mixed_three.json"))
        assert code == EXIT_OK
        assert payload["value"] >= 0.0
        assert sum(payload["weights"]) == pytest.approx(1.0)

    def test_sandwiched_radius_needs_alpha(self, capsys):
        code = run_cli(["radius", "--file", sample("mixed_three.json"), "--kind", "sandwiched"])
        assert code == EXIT_INPUT
        assert "alpha" in capsys.readouterr().err

    def test_sandwiched_radius(self, capsys):
        code, payload = run_json(capsys, "radius", "--file", sample("identical.json"),
                                 "--kind", "sandwiched", "--alpha", "2")
        assert code == EXIT_OK
        assert payload["value"] == pytest.approx(0.0, abs=1e-8)
        assert payload["converse_bound"] == pytest.approx(2.0 * math.log(4.0), abs=1e-7)

    def test_csv_output(self, capsys):
        code = run_cli(["--out", "csv", "pexcl", "--file", sample("orth.json")])
        lines = capsys.readouterr().out.splitlines()
        assert code == EXIT_OK
        assert lines[0] == "field,value"
        assert lines[1].startswith("value,")


# ============================================================================
# Channel commands
# ============================================================================

class TestChannelCommands:
    """Commands on channel problem files"""

    def test_channel_bound(self, capsys):
        code, payload = run_json(capsys, "channel-bound", "--file", sample("identity_depolarizing.json"),
                                 "--restarts", "1")
        assert code == EXIT_OK
        assert payload["radius"] == pytest.approx(math.log(4.0), abs=1e-6)
        assert payload["oneshot_label"] == "heuristic feasible value"

    def test_channel_bound_needs_channels(self, capsys):
        code = run_cli(["channel-bound", "--file", sample("orth.json")])
        assert code == EXIT_INPUT
        assert "channels" in capsys.readouterr().err


# ============================================================================
# Generators and verification
# ============================================================================

class TestRandomAndVerify:
    """Problem generation and suite runs"""

    def test_random_writes_a_parseable_file(self, capsys, tmp_path):
        target = tmp_path / "random.json"
        code, payload = run_json(capsys, "random", "--seed", "5", "--r", "3", "--d", "2", "--output", str(target))
        assert code == EXIT_OK
        assert payload["r"] == 3
        code, again = run_json(capsys, "pexcl", "--file", str(target))
        assert code == EXIT_OK
        assert 0.0 <= again["value"] <= 1.0

    def test_verify_small_run(self, capsys, tmp_path):
        code = run_cli(["verify", "--suite", "oneshot", "--trials", "3", "--seed", "1",
                        "--report-dir", str(tmp_path)])
        captured = capsys.readouterr()
        assert code == EXIT_OK
        assert json.loads(captured.out)["summary"]["failures"] == 0
        assert "0 failures" in captured.err
        assert (tmp_path / "oneshot-seed1.json").exists()

    def test_verify_trials_default_to_the_suite(self):
        args = build_parser().parse_args(["verify", "--suite", "channel"])
        assert args.trials is None

    def test_verify_reports_failures(self, capsys):
        code = run_cli(["--quiet", "verify", "--suite", "oneshot", "--trials", "2", "--tol=-1e9"])
        captured = capsys.readouterr()
        assert code == EXIT_FAILURES
        assert "records over" not in captured.err


# ============================================================================
# Errors and usage
# ============================================================================

class TestErrors:
    """Input and usage errors exit with code 2"""

    def test_invalid_problem_names_field(self, capsys):
        code = run_cli(["radius", "--file", sample("bad.json")])
        assert code == EXIT_INPUT
        assert "matrices.0.0.1" in capsys.readouterr().err

    def test_missing_file(self, capsys):
        code = run_cli(["pexcl", "--file", sample("does_not_exist.json")])
        assert code == EXIT_INPUT
        assert capsys.readouterr().err.startswith("error:")

    def test_usage_error(self, capsys):
        assert run_cli(["radius"]) == EXIT_INPUT

    def test_unknown_command(self, capsys):
        assert run_cli(["frobnicate"]) == EXIT_INPUT

    def test_version(self, capsys):
        assert run_cli(["--version"]) == EXIT_OK
