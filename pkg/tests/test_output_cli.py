import csv
import json

import numpy as np
import pytest

from besovreg.checks import CHECK_DEFAULTS, run_check
from besovreg.cli import RATE_DEFAULTS, main, selftest
from besovreg.errors import ConfigurationError
from besovreg.output import RATE_COLUMNS, emit_outputs, load_manifest, spec_from_manifest, to_jsonable
from besovreg.studies import RateStudyResult, RateStudySpec, run_rate_study

SMALL = dict(grid=tuple(np.logspace(-1.5, -0.5, 5).tolist()), levels=9)


def test_to_jsonable():
    out = to_jsonable({"a": np.float64(np.nan), "b": np.arange(3), "c": (np.bool_(True), np.int64(4)), 1: None})
    assert out == {"a": None, "b": [0, 1, 2], "c": [True, 4], "1": None}
    with pytest.raises(TypeError):
        to_jsonable(object())


def test_empty_result_gives_header_only_csv(tmp_path):
    spec = RateStudySpec(**SMALL)
    empty = RateStudyResult(spec, [], float("nan"), float("nan"), 0.5, 0.1, False, False, 0, "err_besov")
    csv_path, json_path = emit_outputs(empty, tmp_path)
    assert csv_path.read_bytes() == (",".join(RATE_COLUMNS) + "\r\n").encode()
    m = load_manifest(json_path)
    assert m["verdict"]["slope"] is None and m["verdict"]["passed"] is False


def test_outputs_are_reproducible_and_round_trip(tmp_path):
    spec = RateStudySpec(**SMALL)
    a = emit_outputs(run_rate_study(spec), tmp_path / "a")
    b = emit_outputs(run_rate_study(spec), tmp_path / "b")
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes()
    assert spec_from_manifest(a[1]) == spec
    with open(a[0], newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 5 and float(rows[0]["noise_level"]) == spec.grid[0]
    assert rows[0]["converged"] == "true"


def test_unwritable_directory_names_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    res = run_check("vsc", {"levels": 6, "points": 5})
    with pytest.raises(OSError, match=str(blocker)):
        emit_outputs(res, blocker / "sub")


def test_check_parameters_validated():
    with pytest.raises(ConfigurationError):
        run_check("vsc", {"colour": 1})
    with pytest.raises(ConfigurationError):
        run_check("nope")
    assert set(CHECK_DEFAULTS) == {"sparsity", "converse", "vsc", "lower-bound"}


def test_default_grids_are_valid():
    for kind, params in RATE_DEFAULTS.items():
        RateStudySpec(kind=kind, **params)


def test_selftest_passes():
    rows = selftest()
    assert rows and all(ok for _, ok, _ in rows)
    assert main(["selftest"]) == 0


def test_cli_rate_success_and_reproducible(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"grid": list(SMALL["grid"]), "slope_tolerance": 1.0}))
    for d in ("x", "y"):
        assert main(["rate", "--config", str(cfg), "--levels", "9", "--seed", "3", "--out-dir", str(tmp_path / d)]) == 0
    out = capsys.readouterr().out
    assert "PASS  rate" in out
    for name in ("deterministic.csv", "deterministic.json"):
        assert (tmp_path / "x" / name).read_bytes() == (tmp_path / "y" / name).read_bytes()
    spec = spec_from_manifest(tmp_path / "x" / "deterministic.json")
    assert spec.signal_seed == spec.noise_seed == 3


def test_cli_failed_verdict_exit_one(tmp_path):
    cfg = tmp_path / "cfg.json"
    # an oversized parameter flattens the error curve
    cfg.write_text(json.dumps({"grid": list(SMALL["grid"]), "alpha_scale": 1e3}))
    assert main(["rate", "--config", str(cfg), "--levels", "9", "--out-dir", str(tmp_path)]) == 1


@pytest.mark.parametrize(
    "argv",
    [
        ["rate", "--levels", "6"],
        ["stat", "--wavelet", "coif3"],
        ["vsc", "--config", "/nonexistent/cfg.json"],
    ],
)
def test_cli_configuration_errors_exit_two(argv, tmp_path, capsys):
    assert main(argv + ["--out-dir", str(tmp_path)]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_cli_bad_config_contents(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["vsc", "--config", str(bad), "--out-dir", str(tmp_path)]) == 2
    bad.write_text("[1, 2]")
    assert main(["vsc", "--config", str(bad), "--out-dir", str(tmp_path)]) == 2
    bad.write_text(json.dumps({"kind": "exact"}))
    assert main(["rate", "--config", str(bad), "--out-dir", str(tmp_path)]) == 2


def test_cli_check_subcommand(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"points": 10}))
    assert main(["vsc", "--config", str(cfg), "--levels", "8", "--out-dir", str(tmp_path)]) == 0
    m = load_manifest(tmp_path / "vsc.json")
    assert m["kind"] == "vsc" and m["verdict"]["violations"] == 0
