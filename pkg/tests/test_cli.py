import argparse
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from trizone import imageio
from trizone.backends import BackendEndpoint, HttpBackend
from trizone.cli import build_parser, main
from trizone.config import mock_backends, mock_config
from trizone.maskcore import RgbImage

GOLDEN = Path(__file__).parent / "fixtures" / "trizone_cli"


def gray(path):
    return np.array(Image.open(path))


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_every_option_has_help():
    parser = build_parser()
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    assert set(subparsers.choices) == {
        "route", "construct", "validate", "trizone", "adjust-mask", "train-toy", "eval-acc", "ssim", "serve-mock"
    }
    for name, sub in subparsers.choices.items():
        for action in sub._actions:
            if isinstance(action, argparse._HelpAction):
                continue
            assert action.help, f"{name}: {action.dest} has no help text"


def test_route(capsys):
    assert run_cli(capsys, "route", "--pc", "upper/short", "--pg", "dress/long")[1].strip() == "CROSSVTON round2"
    assert run_cli(capsys, "route", "--pc", "lower/long", "--pg", "upper/short")[1].strip() == "NA"
    code, out, _ = run_cli(capsys, "route", "--pc", "skirt-long", "--pg", "dress/long", "--json")
    assert json.loads(out) == {"pc": "lower/long", "pg": "dress/long", "method": "CROSSVTON", "round": 2}
    code, out, _ = run_cli(capsys, "route", "--table", "--json")
    assert len(out.splitlines()) == 36


def test_route_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["route", "--pc", "hat/short", "--pg", "upper/short"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["route", "--pc", "upper/short"])
    assert exc.value.code == 2


def test_construct_and_validate(capsys, tmp_path):
    code, out, _ = run_cli(capsys, "construct", "--mock", "--seed", "7", "--out", tmp_path)
    assert code == 0
    summary = json.loads(out)
    assert summary["written"] == {"round1": 40, "round2": 16}
    assert summary["validation"] == {"round1": 0, "round2": 0}
    assert json.loads((tmp_path / "validation.json").read_text())["round1"]["violations"] == []
    code, out, _ = run_cli(capsys, "validate", tmp_path / "manifest_round1.jsonl")
    assert code == 0 and "40 records, 0 violations" in out
    (tmp_path / "records").joinpath(sorted(p.name for p in (tmp_path / "records").iterdir())[0], "m3g.png").write_bytes(b"x")
    code, out, _ = run_cli(capsys, "validate", tmp_path / "manifest_round1.jsonl")
    assert code == 1 and "[mask]" in out


def test_construct_round2_needs_trained_backends(capsys, tmp_path):
    cfg = mock_config().with_overrides(backends=mock_backends(round1_trained=False))
    (tmp_path / "c.json").write_text(json.dumps(cfg.to_dict()))
    code, _, err = run_cli(capsys, "construct", "--config", tmp_path / "c.json", "--round", "2", "--out", tmp_path / "o")
    assert code == 7 and "round-1-trained" in err


def test_construct_without_backends(capsys, tmp_path):
    code, _, err = run_cli(capsys, "construct", "--out", tmp_path)
    assert code == 2 and "--mock" in err


@pytest.mark.parametrize("round_, extra, expected", [
    (1, ["--gen", GOLDEN / "gen.png"], "expected_round1.png"),
    (2, ["--pred", GOLDEN / "pred.png"], "expected_round2_union-first.png"),
    (2, ["--pred", GOLDEN / "pred.png", "--precedence", "intersect-first"], "expected_round2_intersect-first.png"),
])
def test_trizone_golden(capsys, tmp_path, round_, extra, expected):
    out = tmp_path / "m3g.png"
    code, stdout, _ = run_cli(
        capsys, "trizone", "--round", round_, "--parsing", GOLDEN / "parsing.png", "--garment-class", "dress",
        "--fg", GOLDEN / "fg.png", "--out", out, *extra,
    )
    assert code == 0
    assert np.array_equal(gray(out), gray(GOLDEN / expected))
    zones = json.loads(stdout)["zones"]
    assert sum(zones.values()) == 16 * 12


def test_trizone_error_codes(capsys, tmp_path):
    base = ["trizone", "--round", "1", "--parsing", GOLDEN / "parsing.png", "--fg", GOLDEN / "fg.png", "--out", tmp_path / "o.png"]
    code, _, err = run_cli(capsys, *base, "--garment-class", "shoes", "--gen", GOLDEN / "gen.png")
    assert code == 3 and "shoes" in err
    Image.fromarray(np.zeros((5, 5), np.uint8)).save(tmp_path / "small.png")
    code, _, _ = run_cli(capsys, *base, "--garment-class", "dress", "--gen", tmp_path / "small.png")
    assert code == 4
    (tmp_path / "bad.png").write_bytes(b"nope")
    code, _, _ = run_cli(capsys, *base, "--garment-class", "dress", "--gen", tmp_path / "bad.png")
    assert code == 10


def test_adjust_mask(capsys, tmp_path):
    gen = np.zeros((10, 6), np.uint8)
    gen[2:8, 1:5] = 255
    Image.fromarray(gen).save(tmp_path / "gen.png")
    code, out, _ = run_cli(
        capsys, "adjust-mask", "--mode", "shrink-up", "--gen", tmp_path / "gen.png", "--min-frac", "0.5",
        "--max-frac", "0.5", "--out", tmp_path / "a.png", "--residual-out", tmp_path / "r.png",
    )
    assert code == 0
    assert json.loads(out) == {"out": str(tmp_path / "a.png"), "shift": 3, "adjusted": 12, "residual": 12}
    assert (gray(tmp_path / "a.png")[5:] == 0).all()
    code, _, _ = run_cli(capsys, "adjust-mask", "--mode", "shrink-up", "--gen", tmp_path / "gen.png",
                         "--min-frac", "0.9", "--max-frac", "0.1", "--out", tmp_path / "x.png")
    assert code == 2
    with pytest.raises(SystemExit):
        main(["adjust-mask", "--mode", "stretch-down", "--gen", str(tmp_path / "gen.png"), "--out", str(tmp_path / "y.png")])


def test_eval_acc_scripted(capsys, tmp_path):
    script = tmp_path / "replies.txt"
    script.write_text("reasonable\nReasonable.\nit is reasonable\nunreasonable\n")
    code, out, _ = run_cli(capsys, "eval-acc", "--mock-judge", script, "--out", tmp_path / "r")
    assert code == 0 and "acc        0.7500" in out
    assert json.loads((tmp_path / "r" / "acc_report.json").read_text())["acc"] == 0.75


def test_eval_acc_cases_file(capsys, tmp_path):
    img = RgbImage.from_array(np.full((4, 4, 3), 9, np.uint8))
    for name in ("m", "g", "r"):
        imageio.write_rgb(tmp_path / f"{name}.png", img)
    (tmp_path / "cases.jsonl").write_text(
        json.dumps({"id": "x", "model": "m.png", "garment": "g.png", "result": "r.png", "pg": "dress/long", "pc": "upper/short"}) + "\n"
    )
    (tmp_path / "s.txt").write_text("x\tunreasonable\n")
    code, out, _ = run_cli(capsys, "eval-acc", "--cases", tmp_path / "cases.jsonl", "--mock-judge", tmp_path / "s.txt")
    assert code == 0 and "acc        0.0000" in out and "dress/long->upper/short" in out
    (tmp_path / "bad.jsonl").write_text('{"id": "x"}\n')
    assert run_cli(capsys, "eval-acc", "--cases", tmp_path / "bad.jsonl")[0] == 10


def test_ssim_cli(capsys, tmp_path, rng):
    img = RgbImage.from_array(rng.integers(0, 256, (9, 9, 3), dtype=np.uint8))
    imageio.write_rgb(tmp_path / "a.png", img)
    code, out, _ = run_cli(capsys, "ssim", tmp_path / "a.png", tmp_path / "a.png")
    assert code == 0 and float(out) == 1.0


def test_train_toy_zero_steps(capsys, tmp_path):
    code, out, _ = run_cli(capsys, "train-toy", "--mock-data", "12", "--size", "8", "--steps", "0", "--out", tmp_path)
    assert code == 0
    summary = json.loads(out)
    assert summary["stage1_reduction"] is None and summary["stage1_initial_loss"] > 0
    assert (tmp_path / "stage1.params").exists() and (tmp_path / "summary.json").exists()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "trizone", "route", "--pc", "dress/short", "--pg", "lower/long"],
                          capture_output=True, text=True, check=True)
    assert proc.stdout.strip() == "IDM_S round1"


def test_serve_mock_subprocess():
    proc = subprocess.Popen([sys.executable, "-m", "trizone", "serve-mock", "--port", "0"], stdout=subprocess.PIPE, text=True)
    try:
        line = proc.stdout.readline()
        url = line.strip().rsplit(" ", 1)[-1]
        assert url.startswith("http://127.0.0.1:")
        client = HttpBackend(BackendEndpoint(url, timeout=5))
        lm = client.parse_human(RgbImage.from_array(np.full((4, 4, 3), 232, np.uint8)))
        assert lm.labels.shape == (4, 4)
    finally:
        proc.terminate()
        proc.wait(timeout=5)
