import json

import numpy as np
import pytest

from ptychomg import io
from ptychomg.cli import main


def test_hierarchy_check(capsys):
    assert main(["hierarchy-check", "--n", "32", "--pairs", "10"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 6 and "FAIL" not in out


def test_simulate_reconstruct_metrics_report(tmp_path, capsys):
    stack, truth = tmp_path / "s.ptyf", tmp_path / "t.ptyf"
    assert main(["simulate", "--n", "32", "--noise-levels", "0.05", "--output", str(stack),
                 "--truth-output", str(truth)]) == 0
    assert io.load_stack(stack).num_patterns == 9
    out = tmp_path / "run"
    assert main(["reconstruct", "--n", "32", "--solver", "lbfgs", "--budget", "8", "--data", str(stack),
                 "--output-dir", str(out)]) == 0
    assert main(["metrics", "--field", str(out / "lbfgs_data_field.ptyf"), "--truth", str(truth), "--json"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    values = json.loads(lines[-1])
    assert 0 < values["rel_err"] and -1 <= values["phase_ssim"] <= 1
    assert main(["report", "--run-dir", str(out)]) == 0
    assert "lbfgs_data" in capsys.readouterr().out


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": 32, "solver": "pie", "budget": 50, "noise_levels": [0.0, 0.1]}))
    assert main(["reconstruct", "--config", str(cfg), "--budget", "3", "--noise-levels", "0"]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert len(out) == 1 and "solver=pie" in out[0] and "evals=3" in out[0]


def test_exit_codes(tmp_path, capsys):
    assert main(["reconstruct", "--n", "48"]) == 1
    assert main(["reconstruct", "--n", "64", "--depth", "5"]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    assert main(["reconstruct", "--config", str(bad)]) == 1
    assert main(["metrics", "--field", str(tmp_path / "missing"), "--truth", str(tmp_path / "x")]) == 2
    (tmp_path / "junk.ptyf").write_bytes(b"nope")
    assert main(["metrics", "--field", str(tmp_path / "junk.ptyf"), "--truth", str(tmp_path / "junk.ptyf")]) == 2
    nan = tmp_path / "nan.ptyf"
    io.save_field(nan, np.full((16, 16), np.nan))
    ok = tmp_path / "ok.ptyf"
    io.save_field(ok, np.ones((16, 16)))
    assert main(["metrics", "--field", str(nan), "--truth", str(ok)]) == 3
    with pytest.raises(SystemExit):
        main(["reconstruct", "--solver", "sgd"])
