import importlib.util
import json
from pathlib import Path

BENCH = Path(__file__).resolve().parents[1] / "bench" / "benchmark.py"


def load():
    spec = importlib.util.spec_from_file_location("benchmark", BENCH)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def test_benchmark_runs_and_writes_json(tmp_path, capsys):
    out = tmp_path / "bench.json"
    assert load().main(["--size", "24", "--repeat", "1", "--number", "1", "--json", str(out)]) == 0
    data = json.loads(out.read_text())
    assert set(data["seconds"]) == {"pack", "unpack", "bit_or", "bit_andnot", "popcount", "stretch_columns", "ssim_mean"}
    assert "microseconds per call" in capsys.readouterr().out
