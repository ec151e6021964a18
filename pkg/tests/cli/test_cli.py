"""
Test script for the flat config format and the command-line interface
"""

import contextlib
import io
import os
import sys
import tempfile
from pathlib import Path

project_root = Path(__file__).parent.parent.parent
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

from tests.helpers import run_tests, tiny_config_text
from app.cli.config_loader import config_hash, dump_config, load_config, parse_config_text
from app.cli.main import main, resolve_out
from app.cli.models.experiment_config import DefenseSection, ExperimentConfig


def _call(argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        try:
            code = main(argv)
        except SystemExit as e:
            code = e.code
    return code, out.getvalue(), err.getvalue()


def _expect_value_error(text: str, fragment: str):
    try:
        parse_config_text(text)
    except ValueError as e:
        assert fragment in str(e), str(e)
        return
    raise AssertionError(f"{text!r} accepted")


def test_dump_and_parse_agree():
    config = parse_config_text(tiny_config_text(**{"train.lambda": 0.2, "attack.kind": "warped"}))
    text = dump_config(config)
    again = parse_config_text(text)
    assert again == config
    assert dump_config(again) == text
    assert config_hash(again) == config_hash(config)
    assert config_hash(ExperimentConfig()) != config_hash(config)


def test_lambda_alias_and_comments():
    config = parse_config_text("# sweep cell\ntrain.lambda = 0.3   # strength\n\ntrain.levels = [\"s3\"]\n")
    assert config.train.lam == 0.3 and config.train.method == "sl-mmdr"
    assert "train.lambda = 0.3" in dump_config(config)
    assert parse_config_text("attack.kind = blended").attack.kind == "blended"


def test_hash_inside_a_value_is_kept():
    config = parse_config_text("output_dir = runs/a#b\n#seed = 9\nseed = 4\t# master\n")
    assert config.output_dir == "runs/a#b"
    assert config.seed == 4
    assert parse_config_text("output_dir = runs/c  # scratch\n").output_dir == "runs/c"


def test_config_errors_name_the_line():
    _expect_value_error("seed = 1\nnot a pair\n", "line 2")
    _expect_value_error("seed = 1\nseed = 2\n", "given twice")
    _expect_value_error("attack.ratio = 2\n", "Invalid configuration")
    _expect_value_error("attack.target = 12\n", "Invalid configuration")
    _expect_value_error("dataset.height = 12\n", "Invalid configuration")


def test_default_pool_covers_every_detection_cell():
    defense = DefenseSection()
    assert defense.largest_cell_population == 333  # N=500, r'=0.5 needs 333 benign rows
    assert defense.candidate_pool_size == 400
    assert DefenseSection(pool_size=350).candidate_pool_size == 350
    _expect_value_error("defense.pool_size = 320\n", "cannot fill the grid")
    config = parse_config_text('defense.grid = [[10, 1.0]]\ndefense.pool_size = 10\n')
    assert config.defense.candidate_pool_size == 10


def test_load_config_defaults_and_missing_file():
    assert load_config(None) == ExperimentConfig()
    try:
        load_config("/nonexistent/blab.cfg")
    except FileNotFoundError:
        return
    raise AssertionError("missing config accepted")


def test_resolve_out_precedence():
    previous = os.environ.pop("BLAB_OUT", None)
    try:
        assert resolve_out(None, None) == Path("runs")
        os.environ["BLAB_OUT"] = "/tmp/env-out"
        assert resolve_out(None, None) == Path("/tmp/env-out")
        assert resolve_out(None, "cfg-out") == Path("cfg-out")
        assert resolve_out("cli-out", "cfg-out") == Path("cli-out")
    finally:
        os.environ.pop("BLAB_OUT", None)
        if previous is not None:
            os.environ["BLAB_OUT"] = previous


def test_unknown_subcommand_and_bad_seed():
    assert _call(["frobnicate"])[0] == 2
    assert _call(["train", "--seed", "-1"])[0] == 2
    assert _call(["sweep", "--jobs", "0"])[0] == 2


def test_missing_config_file_is_an_error():
    code, _, err = _call(["train", "--config", "/nonexistent/blab.cfg", "--out", "/tmp/unused"])
    assert code == 1 and err.startswith("Error: Config file not found")


def test_eval_without_checkpoint_is_an_error():
    with tempfile.TemporaryDirectory() as tmp:
        config_path = Path(tmp) / "tiny.cfg"
        config_path.write_text(tiny_config_text(), encoding="utf-8")
        code, _, err = _call(["eval", "--config", str(config_path), "--out", str(Path(tmp) / "run")])
        assert code == 1 and "Checkpoint not found" in err


def test_train_then_eval_reuses_run_config():
    with tempfile.TemporaryDirectory() as tmp:
        config_path = Path(tmp) / "tiny.cfg"
        config_path.write_text(tiny_config_text(), encoding="utf-8")
        run_dir = Path(tmp) / "run"
        code, out, _ = _call(["train", "--config", str(config_path), "--out", str(run_dir), "--seed", "3"])
        assert code == 0 and out.startswith("BA=")
        code, out, err = _call(["eval", "--out", str(run_dir)])
        assert code == 0, err
        assert "BA=" in out
        assert load_config(run_dir / "config.txt").seed == 3


def main_suite() -> bool:
    return run_tests("CLI Test Suite", [
        test_dump_and_parse_agree,
        test_lambda_alias_and_comments,
        test_hash_inside_a_value_is_kept,
        test_config_errors_name_the_line,
        test_default_pool_covers_every_detection_cell,
        test_load_config_defaults_and_missing_file,
        test_resolve_out_precedence,
        test_unknown_subcommand_and_bad_seed,
        test_missing_config_file_is_an_error,
        test_eval_without_checkpoint_is_an_error,
        test_train_then_eval_reuses_run_config,
    ])


if __name__ == "__main__":
    sys.exit(0 if main_suite() else 1)
