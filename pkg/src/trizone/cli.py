"""Command-line entry point: ``trizone <subcommand> ...``.

Exit codes: 0 ok, 1 run-level failure, 2 usage or configuration error,
3 unknown class, 4 grid mismatch, 5 overlapping zones, 6 empty mask,
7 routing or stage gating, 8 backend failure, 9 empty dataset or divergence,
10 malformed file.
"""

from __future__ import annotations

import argparse
import json
import logging
import signal
import sys
import threading
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, config as cfgmod, evalkit, flowtoy, imageio, pipeline, routing
from .backends import BackendEndpoint, HttpBackend, MockBackend, ScriptedJudge
from .backends.base import MaskKind, TryOnRequest
from .backends.mockworld import random_color, render_garment, render_person
from .backends.server import make_server
from .errors import ConfigError, FormatError, TrizoneError
from .maskadjust import DEFAULT_SHRINK_RANGE, DEFAULT_STRETCH_PART, ShiftMode, ShiftPolicy, adjust
from .maskcore import ALL_SPECS, GarmentSpec, ImageGrid, foreground_mask
from .zonealgebra import Precedence, build_trizone_gt, imagination_zone_round1, imagination_zone_round2, tryon_zone

log = logging.getLogger("trizone")


def _spec(token: str) -> GarmentSpec:
    try:
        return GarmentSpec.parse(token)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=False))


# route


def cmd_route(args) -> int:
    if args.corpus:
        plan = pipeline.build_plan(pipeline.load_corpus(args.corpus))
        for line in routing.plan_lines(plan):
            print(line)
        return 0
    if args.table:
        if args.json:
            for pg, pc, d in routing.all_cells():
                print(json.dumps({"pg": str(pg), "pc": str(pc), "method": d.method.value, "round": int(d.round)}))
        else:
            print(routing.format_table())
        return 0
    if args.pc is None or args.pg is None:
        args.parser.error("route needs --pc and --pg (or --table / --corpus)")
    decision = routing.route(args.pc, args.pg)
    if args.json:
        print(json.dumps({"pc": str(args.pc), "pg": str(args.pg), "method": decision.method.value, "round": int(decision.round)}))
    else:
        print(decision.method.value if decision.method is routing.Method.NA else str(decision))
    return 0


# construct


def _run_config(args) -> cfgmod.RunConfig:
    config = cfgmod.load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.workers is not None:
        changes["workers"] = args.workers
    if args.failure_threshold is not None:
        changes["failure_threshold"] = args.failure_threshold
    if args.precedence is not None:
        changes["precedence"] = Precedence(args.precedence)
    if args.mock:
        changes["backends"] = cfgmod.mock_backends()
    config = replace(config, **changes) if changes else config
    if not config.backends:
        raise ConfigError("no backends configured; pass --config or --mock")
    return config


def cmd_construct(args) -> int:
    config = _run_config(args)
    caps = cfgmod.build_capabilities(config)
    corpus = args.corpus or pipeline.bundled_corpus_path()
    plan = pipeline.build_plan(pipeline.load_corpus(corpus))
    rounds = (1, 2) if args.round == "all" else (int(args.round),)
    cancel = threading.Event()

    def on_signal(signum, frame):
        log.warning("signal %d: finishing in-flight records, then stopping", signum)
        cancel.set()

    previous = {s: signal.signal(s, on_signal) for s in (signal.SIGINT, signal.SIGTERM)}
    try:
        report = pipeline.run(plan, caps, config, args.out, rounds=rounds, resume=args.resume, cancel=cancel)
    finally:
        for s, h in previous.items():
            signal.signal(s, h)
    summary = report.summary()
    validation = {}
    for r, path in sorted(report.manifests.items()):
        v = pipeline.validate_manifest(path)
        validation[f"round{r}"] = {"records": v.records, "violations": [str(x) for x in v.violations]}
    (Path(args.out) / "validation.json").write_text(json.dumps(validation, indent=2) + "\n", encoding="utf-8")
    summary["validation"] = {k: len(v["violations"]) for k, v in validation.items()}
    _emit(summary)
    if report.cancelled:
        print("interrupted; rerun with --resume to continue", file=sys.stderr)
        return 1
    if report.exceeded:
        print(f"failure ratio {report.failure_ratio:.3f} exceeds threshold {report.threshold}", file=sys.stderr)
        return 1
    return 0


def cmd_validate(args) -> int:
    report = pipeline.validate_manifest(args.manifest)
    for v in report.violations:
        print(v)
    print(f"{report.records} records, {len(report.violations)} violations")
    return 0 if report.ok else 1


# mask tools


def _fg(args):
    if args.fg is not None:
        return imageio.read_mask(args.fg)
    return foreground_mask(imageio.read_label_map(args.fg_parsing))


def cmd_trizone(args) -> int:
    pm_g = imageio.read_label_map(args.parsing)
    tryon = tryon_zone(pm_g, args.garment_class)
    fg = _fg(args)
    if args.round == 1:
        if args.gen is None:
            args.parser.error("trizone --round 1 needs --gen")
        imagi = imagination_zone_round1(imageio.read_mask(args.gen), fg, tryon)
    else:
        if args.pred is None:
            args.parser.error("trizone --round 2 needs --pred")
        tryon_p, _, imagi_p = imageio.read_trizone(args.pred).split()
        imagi = imagination_zone_round2(tryon_p, imagi_p, fg, tryon, Precedence(args.precedence))
    mask = build_trizone_gt(tryon, imagi)
    imageio.write_trizone(args.out, mask)
    _emit({"out": str(args.out), "zones": pipeline.zone_counts(mask)})
    return 0


def cmd_adjust_mask(args) -> int:
    gen = imageio.read_mask(args.gen)
    policy = ShiftPolicy(ShiftMode(args.mode), args.part, (args.min_frac, args.max_frac), args.seed)
    densepose = imageio.read_label_map(args.densepose) if args.densepose else None
    if policy.mode is ShiftMode.STRETCH_DOWN and densepose is None:
        args.parser.error("stretch-down needs --densepose")
    result = adjust(gen, policy, densepose)
    imageio.write_mask(args.out, result.adjusted)
    if args.residual_out:
        imageio.write_mask(args.residual_out, result.residual)
    _emit({"out": str(args.out), "shift": result.shift, "adjusted": result.adjusted.count(), "residual": result.residual.count()})
    return 0


def cmd_ssim(args) -> int:
    value = evalkit.ssim(imageio.read_rgb(args.a), imageio.read_rgb(args.b), window=args.window)
    print(repr(value))
    return 0


# training


def cmd_train_toy(args) -> int:
    out = Path(args.out)
    if args.manifest:
        quads = []
        for m in args.manifest:
            quads.extend(pipeline.iter_quadruplets(m))
        samples = flowtoy.samples_from_quadruplets(quads)
    else:
        samples = flowtoy.build_toy_dataset(out / "data", n=args.mock_data, seed=args.seed, size=args.size)
    s1 = args.stage1_steps if args.stage1_steps is not None else args.steps
    s2 = args.stage2_steps if args.stage2_steps is not None else args.steps
    config = flowtoy.TrainConfig(seed=args.seed, stage1_steps=s1, stage2_steps=s2)
    report, _, _ = flowtoy.train_toy_two_stage(samples, config, out)
    _emit(report.summary())
    return 0


# evaluation


def _read_script(path: str) -> list[tuple[str | None, str]]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"cannot read judge script {path}: {exc.strerror}") from exc
    out = []
    for line in text.splitlines():
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if "\t" in line:
            cid, reply = line.split("\t", 1)
            out.append((cid.strip(), reply))
        else:
            out.append((None, line))
    return out


def _load_cases(path: str) -> list[evalkit.EvalCase]:
    base = Path(path).parent
    cases = []
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            cases.append(
                evalkit.EvalCase(
                    str(obj["id"]),
                    imageio.read_rgb(base / obj["model"]),
                    imageio.read_rgb(base / obj["garment"]),
                    imageio.read_rgb(base / obj["result"]),
                    (GarmentSpec.parse(obj["pg"]), GarmentSpec.parse(obj["pc"])),
                )
            )
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise FormatError(f"{path}:{n}: bad case line ({exc})") from None
    return cases


def demo_cases(n: int, seed: int = 0, size: int = 24) -> list[evalkit.EvalCase]:
    """Procedural cases: a person, a garment, and the mock mask-free try-on result."""
    grid = ImageGrid(size, size)
    rng = np.random.default_rng(seed)
    tryon = MockBackend("demo-tryon")
    cases = []
    for i in range(n):
        pg = ALL_SPECS[int(rng.integers(len(ALL_SPECS)))]
        pc = ALL_SPECS[int(rng.integers(len(ALL_SPECS)))]
        person = render_person(grid, pg, int(rng.integers(2**31)))
        garment = render_garment(grid, pc, random_color(rng))
        result = tryon.tryon(TryOnRequest(person.image, garment, None, MaskKind.NONE))
        cases.append(evalkit.EvalCase(f"case{i:04d}", person.image, garment, result, (pg, pc)))
    return cases


def cmd_eval_acc(args) -> int:
    script = _read_script(args.mock_judge) if args.mock_judge else None
    if args.cases:
        cases = _load_cases(args.cases)
    else:
        cases = demo_cases(args.n if args.n is not None else (len(script) if script else 8), args.seed)
    if script is not None:
        replies = {}
        for i, (cid, reply) in enumerate(script):
            if cid is None:
                if i >= len(cases):
                    raise FormatError("judge script has more replies than there are cases")
                cid = cases[i].id
            replies[cid] = reply
        judge = ScriptedJudge(replies)
    elif args.judge_url:
        judge = HttpBackend(BackendEndpoint(args.judge_url, timeout=args.timeout))
    else:
        judge = MockBackend("judge")
    report = evalkit.evaluate_acc(cases, judge, workers=args.workers, resize_height=args.resize_height)
    if args.out:
        report.write(args.out)
    print(report.to_text(), end="")
    return 0


def cmd_serve_mock(args) -> int:
    server = make_server(MockBackend("served", args.seed), args.host, args.port)
    host, port = server.server_address[:2]
    print(f"serving mock backends on http://{host}:{port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trizone", description="Tri-zone mask priors and quadruplet construction toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}", help="print the version and exit")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("route", help="show the construction method for a garment pair")
    p.add_argument("--pc", type=_spec, help="garment of the constructed input image, e.g. upper/long or skirt-long")
    p.add_argument("--pg", type=_spec, help="garment of the real ground-truth image")
    p.add_argument("--table", action="store_true", help="print all 36 cells of the routing table")
    p.add_argument("--corpus", help="print the job plan (JSON lines) for a corpus file")
    p.add_argument("--json", action="store_true", help="emit one JSON record per line")
    p.set_defaults(func=cmd_route, parser=p)

    p = sub.add_parser("construct", help="build quadruplet manifests")
    p.add_argument("--config", help="JSON run configuration (seed, policies, backend table)")
    p.add_argument("--mock", action="store_true", help="use deterministic mock backends for every capability")
    p.add_argument("--corpus", help="corpus JSONL file (default: the bundled smoke corpus)")
    p.add_argument("--out", default="trizone-out", help="output directory (default: %(default)s)")
    p.add_argument("--round", choices=("1", "2", "all"), default="all", help="construction round(s) to run (default: %(default)s)")
    p.add_argument("--seed", type=int, help="run seed (overrides the config)")
    p.add_argument("--workers", type=int, help="worker threads (overrides the config)")
    p.add_argument("--failure-threshold", type=float, help="maximum tolerated failure ratio (default 0.10)")
    p.add_argument("--precedence", choices=[x.value for x in Precedence], help="grouping of the round-2 imagination formula")
    p.add_argument("--resume", action="store_true", help="continue an interrupted run, skipping completed records")
    p.set_defaults(func=cmd_construct, parser=p)

    p = sub.add_parser("validate", help="check a manifest and its files")
    p.add_argument("manifest", help="manifest_round{1,2}.jsonl file")
    p.set_defaults(func=cmd_validate, parser=p)

    p = sub.add_parser("trizone", help="assemble a ground-truth tri-zone mask from mask files")
    p.add_argument("--round", type=int, choices=(1, 2), required=True, help="which imagination formula to use")
    p.add_argument("--parsing", required=True, help="ground-truth parsing map PNG (palette sidecar next to it)")
    p.add_argument("--garment-class", required=True, help="parsing class of the ground-truth garment, e.g. dress")
    p.add_argument("--gen", help="round 1: binary generation-region mask PNG")
    p.add_argument("--pred", help="round 2: predicted tri-zone mask PNG")
    fg = p.add_mutually_exclusive_group(required=True)
    fg.add_argument("--fg", help="foreground mask PNG of the constructed image")
    fg.add_argument("--fg-parsing", help="parsing map PNG of the constructed image (foreground = non-background)")
    p.add_argument("--precedence", choices=[x.value for x in Precedence], default=Precedence.UNION_FIRST.value, help="round 2 grouping (default: %(default)s)")
    p.add_argument("--out", required=True, help="output tri-zone PNG (values 0 recon, 1 imagination, 2 try-on)")
    p.set_defaults(func=cmd_trizone, parser=p)

    p = sub.add_parser("adjust-mask", help="stretch or shrink the lower boundary of a mask")
    p.add_argument("--mode", choices=[m.value for m in ShiftMode], required=True, help="adjustment strategy")
    p.add_argument("--gen", required=True, help="binary generation-region mask PNG")
    p.add_argument("--densepose", help="DensePose label map PNG (required for stretch-down)")
    p.add_argument("--part", default=DEFAULT_STRETCH_PART, help="DensePose part to stretch to (default: %(default)s)")
    p.add_argument("--min-frac", type=float, default=DEFAULT_SHRINK_RANGE[0], help="smallest shrink fraction of the box height (default: %(default)s)")
    p.add_argument("--max-frac", type=float, default=DEFAULT_SHRINK_RANGE[1], help="largest shrink fraction of the box height (default: %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="seed of the shrink draw (default: %(default)s)")
    p.add_argument("--out", required=True, help="output adjusted mask PNG")
    p.add_argument("--residual-out", help="also write the shrink residual mask PNG")
    p.set_defaults(func=cmd_adjust_mask, parser=p)

    p = sub.add_parser("train-toy", help="train the toy two-stage model")
    p.add_argument("--manifest", action="append", help="manifest to train on (repeatable); default: build a mock dataset")
    p.add_argument("--mock-data", type=int, default=200, help="size of the generated mock dataset (default: %(default)s)")
    p.add_argument("--size", type=int, default=16, help="side of the generated mock images (default: %(default)s)")
    p.add_argument("--steps", type=int, default=300, help="steps for both stages (default: %(default)s)")
    p.add_argument("--stage1-steps", type=int, help="override the stage-1 step count")
    p.add_argument("--stage2-steps", type=int, help="override the stage-2 step count")
    p.add_argument("--seed", type=int, default=0, help="training seed (default: %(default)s)")
    p.add_argument("--out", default="trizone-train", help="output directory (default: %(default)s)")
    p.set_defaults(func=cmd_train_toy, parser=p)

    p = sub.add_parser("eval-acc", help="judge triptychs and report accuracy")
    p.add_argument("--cases", help="cases JSONL: id, model, garment, result, pg, pc (default: procedural demo cases)")
    p.add_argument("--n", type=int, help="number of demo cases (default: script length or 8)")
    p.add_argument("--seed", type=int, default=0, help="seed of the demo cases (default: %(default)s)")
    judge = p.add_mutually_exclusive_group()
    judge.add_argument("--mock-judge", help="script of judge replies, one per line, optionally 'id<TAB>reply'")
    judge.add_argument("--judge-url", help="base URL of a remote judge server")
    p.add_argument("--timeout", type=float, default=60.0, help="remote judge timeout in seconds (default: %(default)s)")
    p.add_argument("--workers", type=int, default=4, help="concurrent judge requests (default: %(default)s)")
    p.add_argument("--resize-height", type=int, help="resize panels to this height before splicing")
    p.add_argument("--out", help="directory for acc_report.json and acc_report.txt")
    p.set_defaults(func=cmd_eval_acc, parser=p)

    p = sub.add_parser("ssim", help="structural similarity of two images")
    p.add_argument("a", help="first PNG")
    p.add_argument("b", help="second PNG")
    p.add_argument("--window", type=int, default=evalkit.SSIM_WINDOW, help="window side (default: %(default)s)")
    p.set_defaults(func=cmd_ssim, parser=p)

    p = sub.add_parser("serve-mock", help="serve the mock backends over HTTP")
    p.add_argument("--host", default="127.0.0.1", help="bind address (default: %(default)s)")
    p.add_argument("--port", type=int, default=8765, help="port (default: %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="mock seed (default: %(default)s)")
    p.set_defaults(func=cmd_serve_mock, parser=p)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except TrizoneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
