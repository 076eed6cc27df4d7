"""Acceptance criteria, one test each.

Every criterion prints a single ``PASS``/``FAIL`` line (also collected into the
pytest terminal summary). Run alone with ``pytest tests/test_acceptance.py -s``.
"""

import contextlib
import json
import math
import shutil
import threading
import time
from pathlib import Path

import numpy as np
import pytest

import conftest
import oracles
from trizone.backends import ScriptedJudge
from trizone.cli import main as cli_main
from trizone.config import build_capabilities, mock_config
from trizone.evalkit import EvalCase, acc_qwen_prompt, evaluate_acc, ssim
from trizone.flowtoy import (
    AttentionParams,
    DenoiserConfig,
    OracleDenoiser,
    ToyDenoiser,
    TrainConfig,
    build_toy_dataset,
    flow_loss,
    interpolate,
    kv_concat_attention,
    sample_batch,
    softmax,
    train_toy_two_stage,
)
from trizone.flowtoy.gradcheck import max_relative_error, numeric_grads
from trizone.maskadjust import ShiftMode, ShiftPolicy, shrink_up, stretch_down
from trizone.maskcore import ALL_SPECS, BinaryMask, Category, GarmentSpec, ImageGrid, LabelMap, RgbImage, assemble_trizone
from trizone.pipeline import build_plan, bundled_corpus_path, load_corpus, manifest_path, run, validate_manifest
from trizone.routing import Method, route
from trizone.zonealgebra import Precedence, imagination_zone_round1, imagination_zone_round2

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = Path(__file__).parent / "fixtures"


@contextlib.contextmanager
def criterion(number: int, title: str, budget_s: float | None = None):
    start = time.perf_counter()
    try:
        yield
        elapsed = time.perf_counter() - start
        if budget_s is not None:
            assert elapsed < budget_s, f"took {elapsed:.2f}s, budget {budget_s}s"
    except BaseException as exc:
        line = f"FAIL  C{number} {title} ({time.perf_counter() - start:.2f}s): {exc.__class__.__name__}: {exc}"
        print(line)
        conftest.ACCEPTANCE_RESULTS.append(line)
        raise
    line = f"PASS  C{number} {title} ({elapsed:.2f}s)"
    print(line)
    conftest.ACCEPTANCE_RESULTS.append(line)


def test_c1_routing_golden():
    with criterion(1, "routing table reproduces all 36 cells", budget_s=1.0):
        data = json.loads((FIXTURES / "routing_table.json").read_text())
        cells = 0
        for pg, row in data["rows"].items():
            for pc, cell in zip(data["columns"], row):
                assert route(GarmentSpec.parse(pc), GarmentSpec.parse(pg)).method.value == cell, (pg, pc)
                cells += 1
        assert cells == 36
        crossvton = {(pg, pc) for pg in ALL_SPECS for pc in ALL_SPECS if route(pc, pg).method is Method.CROSSVTON}
        na = {(pg, pc) for pg in ALL_SPECS for pc in ALL_SPECS if route(pc, pg).method is Method.NA}
        assert crossvton == {
            (pg, pc) for pg in ALL_SPECS for pc in ALL_SPECS
            if pg.category is Category.DRESS and pc.category in (Category.UPPER, Category.LOWER)
        }
        assert na == {
            (pg, pc) for pg in ALL_SPECS for pc in ALL_SPECS
            if {pg.category, pc.category} == {Category.UPPER, Category.LOWER}
        }


def test_c2_zone_algebra_oracle():
    with criterion(2, "zone algebra equals per-pixel oracle on 2x10^4 random 16x16 cases", budget_s=10.0):
        rng = np.random.default_rng(2)
        n = 10_000
        M = BinaryMask.from_array
        full = BinaryMask.full(ImageGrid(16, 16))
        for i in range(n):
            gen, fg, tryon, tryon_p, imagi_p = rng.random((5, 16, 16)) < rng.uniform(0.1, 0.9, (5, 1, 1))
            g, f, t = oracles.to_lists(gen), oracles.to_lists(fg), oracles.to_lists(tryon)

            got1 = imagination_zone_round1(M(gen), M(fg), M(tryon))
            assert got1.to_array().tolist() == oracles.imagi_round1(g, f, t)

            union_first = i % 2 == 0
            precedence = Precedence.UNION_FIRST if union_first else Precedence.INTERSECT_FIRST
            got2 = imagination_zone_round2(M(tryon_p), M(imagi_p), M(fg), M(tryon), precedence)
            want2 = oracles.imagi_round2(oracles.to_lists(tryon_p), oracles.to_lists(imagi_p), f, t, union_first)
            assert got2.to_array().tolist() == want2

            for imagi in (got1, got2):
                tz = assemble_trizone(M(tryon), imagi)
                zt, zr, zi = tz.split()
                assert zt.isdisjoint(zr) and zt.isdisjoint(zi) and zr.isdisjoint(zi)
                assert (zt | zr | zi) == full


def test_c3_mask_adjustment_properties():
    with criterion(3, "shrink partitions, stretch superset+monotone (500 cases each), fixed seed stable"):
        rng = np.random.default_rng(3)
        M = BinaryMask.from_array
        palette = {0: "background", 1: "head", 2: "torso", 3: "arms", 4: "upper_leg", 5: "lower_leg"}
        stretch = ShiftPolicy(ShiftMode.STRETCH_DOWN, "upper_leg")
        done = 0
        while done < 500:
            gen = M(rng.random((16, 16)) < rng.uniform(0.05, 0.8))
            if gen.is_empty():
                continue
            out = shrink_up(gen, ShiftPolicy(ShiftMode.SHRINK_UP, seed=int(rng.integers(2**63))))
            assert (out.adjusted | out.residual) == gen
            assert out.adjusted.isdisjoint(out.residual)
            done += 1
        for _ in range(500):
            a = rng.random((16, 16)) < rng.uniform(0.05, 0.8)
            smaller = a & (rng.random((16, 16)) < 0.7)
            dp = LabelMap.from_array(rng.integers(0, 6, (16, 16)).astype(np.uint8), palette)
            big = stretch_down(M(a), dp, stretch).adjusted
            small = stretch_down(M(smaller), dp, stretch).adjusted
            assert M(a).issubset(big)
            assert small.issubset(big)
        gen = M(rng.random((16, 16)) < 0.5)
        policy = ShiftPolicy(ShiftMode.SHRINK_UP, seed=12345)
        first, second = shrink_up(gen, policy), shrink_up(gen, policy)
        assert first.adjusted.words.tobytes() == second.adjusted.words.tobytes()
        assert first.residual.words.tobytes() == second.residual.words.tobytes()


def _digest(out: Path) -> list[bytes]:
    return [manifest_path(out, r).read_bytes() for r in (1, 2)]


def test_c4_pipeline_determinism_and_gt_principle(tmp_path, capsys):
    with criterion(4, "construct --mock --seed 7 deterministic; faults caught exactly; resume equals full run", budget_s=60.0):
        a, b = tmp_path / "a", tmp_path / "b"
        assert cli_main(["construct", "--mock", "--seed", "7", "--out", str(a)]) == 0
        assert cli_main(["construct", "--mock", "--seed", "7", "--out", str(b)]) == 0
        capsys.readouterr()
        assert _digest(a) == _digest(b)
        for r in (1, 2):
            assert validate_manifest(manifest_path(a, r)).ok

        # Fault injection: 2 swapped provenance records + 3 corrupted masks.
        c = tmp_path / "c"
        shutil.copytree(a, c)
        path = manifest_path(c, 1)
        lines = path.read_text().splitlines()
        records = [json.loads(x) for x in lines[1:]]
        for rec in records[0:2]:
            rec["p_c_provenance"], rec["p_g_provenance"] = rec["p_g_provenance"], rec["p_c_provenance"]
        for rec in records[5:8]:
            (c / rec["m3g"]).write_bytes(b"corrupted")
        path.write_text("\n".join([lines[0]] + [json.dumps(r) for r in records]) + "\n")
        report = validate_manifest(path)
        assert report.counts() == {"provenance": 2, "mask": 3}, report.counts()

        # Interrupt mid-stream, then resume.
        config = mock_config(seed=7)
        plan = build_plan(load_corpus(bundled_corpus_path()))
        d = tmp_path / "d"
        cancel = threading.Event()
        seen = []

        def stop(rec):
            seen.append(rec)
            if len(seen) == 17:
                cancel.set()

        partial = run(plan, build_capabilities(config), config, d, cancel=cancel, on_record=stop)
        assert partial.cancelled
        torn = manifest_path(d, 1)
        torn.write_bytes(torn.read_bytes() + b'{"id":"smoke0')  # simulate a crash mid-write
        run(plan, build_capabilities(config), config, d, resume=True)
        assert _digest(d) == _digest(a)


TOY = DenoiserConfig(latent_dim=4, context_dim=3, garment_dim=5, hidden=6, attn_dim=3)


def _toy_batch(rng):
    z0s = [rng.normal(size=(3, TOY.latent_dim)) for _ in range(3)]
    conds = [rng.normal(size=(3, TOY.context_dim)) for _ in range(3)]
    garments = [rng.normal(size=(2, TOY.garment_dim)) for _ in range(3)]
    return sample_batch(rng, z0s, conds, garments)


def test_c5_flow_objective_numerics():
    with criterion(5, "interpolation endpoints exact; gradients within 1e-4 on 3 seeds; oracle loss 0"):
        rng = np.random.default_rng(5)
        z0, eps = rng.normal(size=(4, 4)), rng.normal(size=(4, 4))
        assert np.array_equal(interpolate(z0, eps, 0.0), z0)
        assert np.array_equal(interpolate(z0, eps, 1.0), eps)
        worst = 0.0
        for seed in (0, 1, 2):
            srng = np.random.default_rng(seed)
            model = ToyDenoiser.init(TOY, srng)
            batch = _toy_batch(srng)
            _, analytic = flow_loss(model, batch)
            numeric = numeric_grads(lambda: flow_loss(model, batch)[0], model.params)
            errors = max_relative_error(analytic, numeric)
            assert set(errors) == set(model.params)
            worst = max(worst, max(errors.values()))
        assert worst < 1e-4, worst
        batch = _toy_batch(rng)
        assert flow_loss(OracleDenoiser(batch), batch)[0] == 0.0


def test_c6_attention_fusion():
    with criterion(6, "K/V-concat attention: hand example to 1e-10, weights sum to 1, empty garment = self-attention"):
        one = lambda v: np.array([[v]])  # noqa: E731
        params = AttentionParams(one(1.0), one(0.5), one(3.0), one(1.0), one(-1.0), one(2.0))
        out, weights = kv_concat_attention([[1.0]], [[2.0]], params, return_weights=True)
        w_g = 1.0 / (1.0 + math.exp(-1.5))  # softmax over scores (0.5, 2.0)
        assert abs(out.array[0, 0] - 2.0 * ((1.0 - w_g) * 3.0 - 2.0 * w_g)) < 1e-10
        rng = np.random.default_rng(6)
        for _ in range(50):
            p = AttentionParams.init(5, 4, 3, 3, 5, rng)
            n, m = int(rng.integers(1, 6)), int(rng.integers(0, 6))
            _, w = kv_concat_attention(rng.normal(size=(n, 5)), rng.normal(size=(m, 4)), p, return_weights=True)
            assert np.allclose(w.sum(axis=1), 1.0, atol=1e-12)
        x = rng.normal(size=(4, 5))
        plain = softmax((x @ p.wq) @ (x @ p.wk).T / math.sqrt(3)) @ (x @ p.wv) @ p.wo
        assert np.allclose(kv_concat_attention(x, np.zeros((0, 4)), p).array, plain, atol=1e-12)


# Frozen from the first verified run (seed 0, 200 mock quadruplets at 16x16, 300 + 300 steps).
GOLDEN_TRAINING = {
    "n_train": 180,
    "n_heldout": 20,
    "stage1_initial_loss": 1.014901527702516,
    "stage1_final_loss": 0.182595061734354,
    "stage1_accuracy": 0.90390625,
    "majority_baseline": 0.80625,
    "stage2_initial_loss": 976.6091321243042,
    "stage2_final_loss": 442.29498801199014,
}


def test_c7_toy_two_stage_training(tmp_path):
    with criterion(7, "toy training: stage-1 loss -50% in 300 steps, held-out accuracy > 1/3, golden values", budget_s=120.0):
        samples = build_toy_dataset(tmp_path / "data", n=200, seed=0, size=16)
        assert len(samples) == 200
        report, _, _ = train_toy_two_stage(samples, TrainConfig(seed=0, stage1_steps=300, stage2_steps=300), tmp_path)
        summary = report.summary()
        assert len(report.stage1_loss) == 301
        assert report.stage1_reduction >= 0.5, report.stage1_reduction
        assert report.stage1_accuracy > 1.0 / 3.0
        for key, value in GOLDEN_TRAINING.items():
            assert summary[key] == pytest.approx(value, rel=1e-9), key


def test_c8_evaluation_protocol():
    with criterion(8, "judge prompt byte-exact; scripted [R,R,R,U] gives 0.75; SSIM identity and reference match"):
        assert acc_qwen_prompt().encode("utf-8") == (FIXTURES / "acc_qwen_prompt.txt").read_bytes()
        rng = np.random.default_rng(8)
        spec = GarmentSpec.parse("dress/long"), GarmentSpec.parse("upper/short")
        img = lambda: RgbImage.from_array(rng.integers(0, 256, (8, 8, 3), dtype=np.uint8))  # noqa: E731
        cases = [EvalCase(f"c{i}", img(), img(), img(), spec) for i in range(4)]
        judge = ScriptedJudge({"c0": "reasonable", "c1": "reasonable", "c2": "reasonable", "c3": "unreasonable"})
        assert evaluate_acc(cases, judge).acc == 0.75
        x = img()
        assert ssim(x, x) == 1.0
        for _ in range(5):
            a = rng.integers(0, 256, (12, 12, 3), dtype=np.uint8)
            b = rng.integers(0, 256, (12, 12, 3), dtype=np.uint8)
            ref = oracles.ssim_reference(oracles.luma(a.tolist()), oracles.luma(b.tolist()))
            assert abs(ssim(RgbImage.from_array(a), RgbImage.from_array(b)) - ref) < 1e-6


def test_c9_non_reproducibility_statement():
    with criterion(9, "README states the full-scale benchmark numbers are not reproduced"):
        readme = (ROOT / "README.md").read_text(encoding="utf-8")
        section = readme.split("## Scope and non-reproducibility", 1)
        assert len(section) == 2, "README lacks the non-reproducibility section"
        body = section[1].split("\n## ", 1)[0]
        for needle in ("not reproducible", "FID 2.7515", "69.11", "SD3"):
            assert needle in body, needle


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
