"""Two-round quadruplet construction, manifests and manifest validation.

Round 1 builds synthetic inputs with an off-the-shelf binary-mask try-on model
(plus lower-boundary adjustment for size-mismatched pairs). Round 2 consumes
models trained on round-1 data to build the dress-to-any direction.

Every persisted record pairs a synthetic input image (``p_c``) with a real
target image (``p_g``); the writer refuses anything else.

On-disk layout of a run directory::

    manifest_round1.jsonl
    manifest_round2.jsonl
    provenance.jsonl          backend call log (latency; not deterministic)
    records/<id>/p_c.png p_g.png g_g.png m3g.png
"""

from __future__ import annotations

import collections
import enum
import hashlib
import json
import logging
import threading
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Iterator

import numpy as np

from . import imageio
from .backends import Capabilities, MaskKind, Provenance, TryOnRequest
from .backends.mockworld import GARMENT_CLASS, random_color, render_garment, render_person
from .config import ROUND2_BACKENDS, RunConfig
from .errors import (
    BackendError,
    ConfigError,
    FormatError,
    RoutingError,
    StageGatingError,
)
from .maskadjust import ShiftMode, ShiftPolicy, adjust
from .maskcore import (
    ALL_SPECS,
    BinaryMask,
    GarmentSpec,
    ImageGrid,
    LabelMap,
    Length,
    RgbImage,
    TriZoneMask,
    Zone,
    extract_class_mask,
    extract_parts_mask,
    foreground_mask,
)
from .routing import Job, Method, Plan, Round, enumerate_plan, route
from .zonealgebra import build_trizone_gt, imagination_zone_round1, imagination_zone_round2, tryon_zone

log = logging.getLogger(__name__)

MANIFEST_FORMAT = "trizone-manifest"
MANIFEST_VERSION = 1
PROVENANCE_LOG = "provenance.jsonl"
RECORD_FILES = ("p_c", "p_g", "g_g", "m3g")
RECORD_FIELDS = (
    "id",
    "round",
    "method",
    "pc_spec",
    "pg_spec",
    "p_c",
    "p_g",
    "g_g",
    "m3g",
    "p_c_provenance",
    "p_g_provenance",
    "seed",
    "status",
    "zones",
    "failure",
)


class ImageProvenance(str, enum.Enum):
    REAL = "Real"
    SYNTHETIC = "Synthetic"


class Status(str, enum.Enum):
    OK = "Ok"
    DEGENERATE = "Degenerate"
    BACKEND_FAILED = "BackendFailed"


def manifest_path(out_dir: str | Path, round_: int) -> Path:
    return Path(out_dir) / f"manifest_round{int(round_)}.jsonl"


def record_seed(run_seed: int, record_id: str) -> int:
    """64-bit per-record seed, independent of scheduling order."""
    digest = hashlib.sha256(f"{run_seed}:{record_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


# corpus


@dataclass(frozen=True)
class RecordInputs:
    p_g: RgbImage
    g_g: RgbImage
    g_c: RgbImage
    m2: BinaryMask | None = None  # optional precomputed generation region


@dataclass(frozen=True)
class CorpusEntry:
    """One (pc, pg) pair; images come from files or from the procedural mock world."""

    id: str
    pc: GarmentSpec
    pg: GarmentSpec
    p_g: Path | None = None
    g_g: Path | None = None
    g_c: Path | None = None
    m2: Path | None = None
    figure_seed: int | None = None
    grid: ImageGrid | None = None

    @property
    def procedural(self) -> bool:
        return self.figure_seed is not None

    def load(self) -> RecordInputs:
        if self.procedural:
            return materialize(self.pc, self.pg, self.figure_seed, self.grid)
        m2 = imageio.read_mask(self.m2) if self.m2 is not None else None
        return RecordInputs(imageio.read_rgb(self.p_g), imageio.read_rgb(self.g_g), imageio.read_rgb(self.g_c), m2)


def materialize(pc: GarmentSpec, pg: GarmentSpec, figure_seed: int, grid: ImageGrid) -> RecordInputs:
    """Procedural inputs: a person wearing ``pg``, that garment, and a ``pc`` garment."""
    person = render_person(grid, pg, figure_seed)
    _, worn_rgb = person.outfit[GARMENT_CLASS[pg.category]]
    g_c_rgb = random_color(np.random.default_rng([figure_seed, 2]))
    return RecordInputs(person.image, render_garment(grid, pg, worn_rgb), render_garment(grid, pc, g_c_rgb))


_ENTRY_KEYS = {"id", "pc", "pg", "p_g", "g_g", "g_c", "m2", "figure_seed", "grid"}


def parse_corpus_line(obj: dict, base_dir: Path) -> CorpusEntry:
    if not isinstance(obj, dict):
        raise FormatError("corpus line must be an object")
    extra = set(obj) - _ENTRY_KEYS
    if extra:
        raise FormatError(f"unknown corpus fields {sorted(extra)}")
    try:
        rid, pc, pg = str(obj["id"]), GarmentSpec.parse(obj["pc"]), GarmentSpec.parse(obj["pg"])
    except KeyError as exc:
        raise FormatError(f"corpus line is missing {exc}") from None
    except (ValueError, AttributeError) as exc:
        raise FormatError(str(exc)) from None
    if not rid or "/" in rid or "\\" in rid or rid.startswith("."):
        raise FormatError(f"record id {rid!r} is not a safe file name")
    if "figure_seed" in obj:
        w, h = obj.get("grid", (24, 24))
        return CorpusEntry(rid, pc, pg, figure_seed=int(obj["figure_seed"]), grid=ImageGrid(int(w), int(h)))
    try:
        paths = {k: base_dir / obj[k] for k in ("p_g", "g_g", "g_c")}
    except KeyError as exc:
        raise FormatError(f"corpus line {rid!r} needs figure_seed or image paths; missing {exc}") from None
    m2 = base_dir / obj["m2"] if obj.get("m2") else None
    return CorpusEntry(rid, pc, pg, m2=m2, **paths)


def load_corpus(path: str | Path) -> list[CorpusEntry]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"cannot read corpus {path}: {exc.strerror}") from exc
    entries, seen = [], set()
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        try:
            entry = parse_corpus_line(json.loads(line), path.parent)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}:{n}: not JSON ({exc.msg})") from None
        except FormatError as exc:
            raise FormatError(f"{path}:{n}: {exc}") from None
        if entry.id in seen:
            raise FormatError(f"{path}:{n}: duplicate id {entry.id!r}")
        seen.add(entry.id)
        entries.append(entry)
    return entries


def bundled_corpus_path() -> Path:
    return Path(str(resources.files("trizone") / "data" / "smoke_corpus.jsonl"))


def procedural_corpus(n: int, grid: ImageGrid, seed: int = 0, routable_only: bool = True) -> list[CorpusEntry]:
    """``n`` random procedural pairs (only constructible ones by default)."""
    rng = np.random.default_rng(seed)
    cells = [(pc, pg) for pg in ALL_SPECS for pc in ALL_SPECS if not routable_only or route(pc, pg).method is not Method.NA]
    out = []
    for i in range(n):
        pc, pg = cells[int(rng.integers(len(cells)))]
        out.append(CorpusEntry(f"toy{i:05d}", pc, pg, figure_seed=int(rng.integers(2**31)), grid=grid))
    return out


def build_plan(entries: Iterable[CorpusEntry]) -> Plan:
    return enumerate_plan((e.pc, e.pg, e) for e in entries)


# construction


@dataclass(frozen=True)
class Construction:
    """Result of building one record, before persistence."""

    status: Status
    p_g: RgbImage
    g_g: RgbImage
    p_c: RgbImage | None = None
    m3g: TriZoneMask | None = None
    failure: str | None = None


def shift_mode(pc: GarmentSpec, pg: GarmentSpec) -> ShiftMode:
    """Which lower-boundary adjustment builds a ``pc`` image from a ``pg`` image.

    Same category: stretch when going short to long, shrink otherwise.
    Across categories (a short dress built from a bottom) the region is shrunk.
    """
    if pc.category is pg.category and pc.length is Length.LONG and pg.length is Length.SHORT:
        return ShiftMode.STRETCH_DOWN
    return ShiftMode.SHRINK_UP


def dilate(mask: BinaryMask, steps: int) -> BinaryMask:
    """4-neighbourhood dilation, ``steps`` times."""
    bits = mask.to_array()
    for _ in range(steps):
        grown = bits.copy()
        grown[1:] |= bits[:-1]
        grown[:-1] |= bits[1:]
        grown[:, 1:] |= bits[:, :-1]
        grown[:, :-1] |= bits[:, 1:]
        bits = grown
    return BinaryMask.from_array(bits)


def generation_region(
    pm_g: LabelMap,
    densepose: LabelMap | None,
    pc: GarmentSpec,
    pg: GarmentSpec,
    config: RunConfig,
    provided: BinaryMask | None = None,
) -> BinaryMask:
    """Binary try-on mask for round 1.

    The garment being replaced (optionally dilated by ``config.m2_margin``),
    widened by the body parts the new garment occupies when it changes category.
    A provided mask replaces the parse-derived part.
    """
    if provided is not None:
        gen = provided
    else:
        gen = dilate(extract_class_mask(pm_g, config.garment_classes[pg.category.value]), config.m2_margin)
    if pc.category is not pg.category:
        if densepose is None:
            raise ValueError("cross-category generation regions need a densepose map")
        gen = gen | extract_parts_mask(densepose, config.category_parts[str(pc)])
    return gen


def _check_route(pc: GarmentSpec, pg: GarmentSpec, expected: Round) -> Method:
    decision = route(pc, pg)
    if decision.round is not expected:
        raise RoutingError(f"pair pc={pc} pg={pg} routes to {decision}, not {expected.label}")
    return decision.method


def check_stage_gating(caps: Capabilities) -> None:
    missing = [name for name in ROUND2_BACKENDS if name not in caps.round1_trained]
    if missing:
        raise StageGatingError(f"round 2 needs round-1-trained backends; not declared trained: {', '.join(missing)}")


def construct_round1_record(
    inputs: RecordInputs,
    pc: GarmentSpec,
    pg: GarmentSpec,
    caps: Capabilities,
    config: RunConfig = RunConfig(),
    seed: int = 0,
    key: str = "record",
) -> Construction:
    method = _check_route(pc, pg, Round.ROUND1)
    parse, idm = caps.require("parse"), caps.require("idm")
    pm_g = parse.parse_human(inputs.p_g, key=f"{key}/parse-g")
    tryon_g = tryon_zone(pm_g, config.garment_classes[pg.category.value])
    mode = shift_mode(pc, pg) if method is Method.IDM_S else None
    needs_dp = pc.category is not pg.category or mode is ShiftMode.STRETCH_DOWN
    dp_g = caps.require("densepose").densepose(inputs.p_g, key=f"{key}/densepose-g") if needs_dp else None
    gen = generation_region(pm_g, dp_g, pc, pg, config, inputs.m2)
    if gen.is_empty():
        return Construction(Status.DEGENERATE, inputs.p_g, inputs.g_g, failure="empty generation region")

    residual = BinaryMask.empty(gen.grid)
    if mode is not None:
        policy = ShiftPolicy(mode, config.stretch_parts[pc.category.value], config.shrink_fraction_range, seed)
        adjusted = adjust(gen, policy, dp_g)
        gen, residual = adjusted.adjusted, adjusted.residual

    p_c = idm.tryon(TryOnRequest(inputs.p_g, inputs.g_c, gen, MaskKind.BINARY), key=f"{key}/tryon")
    if not residual.is_empty():
        p_c = caps.require("inpaint").inpaint(p_c, residual, key=f"{key}/inpaint")

    fg_c = foreground_mask(parse.parse_human(p_c, key=f"{key}/parse-c"))
    # Every pixel regenerated during construction counts as generated,
    # including the inpainted residual of a shrink.
    imagi = imagination_zone_round1(gen | residual, fg_c, tryon_g)
    m3g = build_trizone_gt(tryon_g, imagi)
    status = Status.DEGENERATE if tryon_g.is_empty() else Status.OK
    return Construction(status, inputs.p_g, inputs.g_g, p_c, m3g, "empty try-on zone" if tryon_g.is_empty() else None)


def construct_round2_record(
    inputs: RecordInputs,
    pc: GarmentSpec,
    pg: GarmentSpec,
    caps: Capabilities,
    config: RunConfig = RunConfig(),
    seed: int = 0,
    key: str = "record",
) -> Construction:
    _check_route(pc, pg, Round.ROUND2)
    check_stage_gating(caps)
    parse = caps.require("parse")
    m3p = caps.require("trizone").predict_trizone(inputs.p_g, inputs.g_c, key=f"{key}/trizone")
    tryon_p, _, imagi_p = m3p.split()
    pm_g2 = parse.parse_human(inputs.p_g, key=f"{key}/parse-g")
    tryon_g = tryon_zone(pm_g2, config.garment_classes[pg.category.value])

    if (tryon_p | imagi_p).is_empty():
        # Nothing predicted to change: no synthetic input can be built.
        m3g = build_trizone_gt(tryon_g, BinaryMask.empty(tryon_g.grid))
        return Construction(Status.DEGENERATE, inputs.p_g, inputs.g_g, None, m3g, "empty tri-zone prediction")

    req = TryOnRequest(inputs.p_g, inputs.g_c, m3p, MaskKind.TRIZONE)
    p_c = caps.require("crossvton").tryon(req, key=f"{key}/tryon")
    fg_c = foreground_mask(parse.parse_human(p_c, key=f"{key}/parse-c"))
    imagi = imagination_zone_round2(tryon_p, imagi_p, fg_c, tryon_g, config.precedence)
    m3g = build_trizone_gt(tryon_g, imagi)
    status = Status.DEGENERATE if tryon_g.is_empty() else Status.OK
    return Construction(status, inputs.p_g, inputs.g_g, p_c, m3g, "empty try-on zone" if tryon_g.is_empty() else None)


# records and manifests


@dataclass(frozen=True)
class QuadrupletRecord:
    id: str
    round: int
    method: str
    pc_spec: str
    pg_spec: str
    p_c: str | None
    p_g: str | None
    g_g: str | None
    m3g: str | None
    p_c_provenance: str
    p_g_provenance: str
    seed: int
    status: str
    zones: dict | None
    failure: str | None

    def to_line(self) -> str:
        return json.dumps({k: getattr(self, k) for k in RECORD_FIELDS}, separators=(",", ":"), ensure_ascii=False)

    @classmethod
    def from_dict(cls, data: dict) -> "QuadrupletRecord":
        missing = [k for k in RECORD_FIELDS if k not in data]
        if missing:
            raise FormatError(f"record is missing fields {missing}")
        return cls(**{k: data[k] for k in RECORD_FIELDS})


def assert_gt_principle(record: QuadrupletRecord) -> None:
    if record.p_g_provenance != ImageProvenance.REAL.value or record.p_c_provenance != ImageProvenance.SYNTHETIC.value:
        raise AssertionError(
            f"record {record.id}: p_g must be Real and p_c Synthetic, got "
            f"p_g={record.p_g_provenance} p_c={record.p_c_provenance}"
        )


def zone_counts(mask: TriZoneMask) -> dict[str, int]:
    hist = mask.histogram()
    return {"tryon": hist[Zone.TRYON], "recon": hist[Zone.RECON], "imagi": hist[Zone.IMAGI]}


def persist(out_dir: Path, job: Job, round_: Round, seed: int, built: Construction) -> QuadrupletRecord:
    """Write a record's images under ``records/<id>/`` and return its manifest entry."""
    entry: CorpusEntry = job.payload
    rel = Path("records") / entry.id
    (out_dir / rel).mkdir(parents=True, exist_ok=True)
    refs: dict[str, str | None] = {}
    for name, writer, value in (
        ("p_c", imageio.write_rgb, built.p_c),
        ("p_g", imageio.write_rgb, built.p_g),
        ("g_g", imageio.write_rgb, built.g_g),
        ("m3g", imageio.write_trizone, built.m3g),
    ):
        if value is None:
            refs[name] = None
            continue
        writer(out_dir / rel / f"{name}.png", value)
        refs[name] = (rel / f"{name}.png").as_posix()
    return QuadrupletRecord(
        id=entry.id,
        round=int(round_),
        method=job.decision.method.value,
        pc_spec=str(job.pc),
        pg_spec=str(job.pg),
        p_c_provenance=ImageProvenance.SYNTHETIC.value,
        p_g_provenance=ImageProvenance.REAL.value,
        seed=seed,
        status=built.status.value,
        zones=zone_counts(built.m3g) if built.m3g is not None else None,
        failure=built.failure,
        **refs,
    )


def _header(round_: int, fingerprint: str) -> dict:
    return {"kind": "header", "format": MANIFEST_FORMAT, "version": MANIFEST_VERSION, "round": int(round_), "config_fingerprint": fingerprint}


def _dump(obj: dict) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def read_manifest(path: str | Path) -> tuple[dict, list[QuadrupletRecord]]:
    """Strictly parse a manifest; any malformed line is a :class:`FormatError`."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise FormatError(f"cannot read manifest {path}: {exc.strerror}") from exc
    if not lines:
        raise FormatError(f"{path}: empty manifest")
    try:
        header = json.loads(lines[0])
        records = [QuadrupletRecord.from_dict(json.loads(line)) for line in lines[1:]]
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: malformed line ({exc.msg})") from None
    if not isinstance(header, dict) or header.get("kind") != "header" or header.get("format") != MANIFEST_FORMAT:
        raise FormatError(f"{path}: first line is not a manifest header")
    return header, records


def _recover(path: Path) -> tuple[dict | None, list[str]]:
    """Header and completed record ids of a possibly interrupted manifest.

    A trailing partial or undecodable line is cut off the file.
    """
    data = path.read_bytes()
    keep = data[: data.rfind(b"\n") + 1]
    lines = keep.decode("utf-8", errors="replace").splitlines()
    good: list[dict] = []
    for line in lines:
        try:
            good.append(json.loads(line))
        except json.JSONDecodeError:
            break
    size = sum(len(line.encode("utf-8")) + 1 for line in lines[: len(good)])
    if size != len(data):
        with open(path, "r+b") as fh:
            fh.truncate(size)
    if not good or good[0].get("kind") != "header":
        return None, []
    return good[0], [rec.get("id") for rec in good[1:]]


class ManifestWriter:
    """Single serialization point for one round's manifest."""

    def __init__(self, path: Path, round_: int, fingerprint: str, resume: bool = False):
        self.path = path
        self.completed: set[str] = set()
        header = None
        if resume and path.exists():
            header, ids = _recover(path)
            if header is not None and header.get("config_fingerprint") != fingerprint:
                raise ConfigError(f"{path} was written with a different configuration; cannot resume")
            self.completed = set(ids)
        if header is None:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(_dump(_header(round_, fingerprint)) + "\n", encoding="utf-8")
        self._fh = open(path, "a", encoding="utf-8", newline="\n")

    def write(self, record: QuadrupletRecord) -> None:
        assert_gt_principle(record)
        self._fh.write(record.to_line() + "\n")
        self._fh.flush()
        self.completed.add(record.id)

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "ManifestWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


# running


@dataclass
class RunReport:
    out_dir: Path
    threshold: float
    manifests: dict[int, Path] = field(default_factory=dict)
    written: dict[int, int] = field(default_factory=dict)
    resumed: dict[int, int] = field(default_factory=dict)
    statuses: collections.Counter = field(default_factory=collections.Counter)
    failures: list[tuple[str, str]] = field(default_factory=list)  # (id, "Kind: message")
    warnings: list[str] = field(default_factory=list)
    aborted: bool = False
    cancelled: bool = False

    @property
    def attempted(self) -> int:
        return sum(self.written.values())

    @property
    def failure_ratio(self) -> float:
        return len(self.failures) / self.attempted if self.attempted else 0.0

    @property
    def exceeded(self) -> bool:
        return self.failure_ratio > self.threshold

    def summary(self) -> dict:
        return {
            "manifests": {f"round{r}": str(p) for r, p in sorted(self.manifests.items())},
            "written": {f"round{r}": n for r, n in sorted(self.written.items())},
            "resumed": {f"round{r}": n for r, n in sorted(self.resumed.items())},
            "status": dict(sorted(self.statuses.items())),
            "failures": len(self.failures),
            "failure_ratio": round(self.failure_ratio, 6),
            "threshold": self.threshold,
            "warnings": len(self.warnings),
            "aborted": self.aborted,
            "cancelled": self.cancelled,
        }


class _ProvenanceLog:
    def __init__(self, path: Path, append: bool):
        self._fh = open(path, "a" if append else "w", encoding="utf-8")
        self._lock = threading.Lock()
        self.current = threading.local()

    def hook(self, prov: Provenance) -> None:
        line = _dump(
            {
                "id": getattr(self.current, "id", None),
                "capability": prov.capability,
                "kind": prov.kind,
                "endpoint": prov.endpoint,
                "latency_s": round(prov.latency_s, 6),
                "attempts": prov.attempts,
            }
        )
        with self._lock:
            self._fh.write(line + "\n")

    def close(self) -> None:
        self._fh.close()


def _backends(caps: Capabilities):
    seen = []
    for name in ("idm", "inpaint", "parse", "densepose", "trizone", "crossvton", "judge"):
        backend = getattr(caps, name)
        if backend is not None and all(backend is not b for b in seen):
            seen.append(backend)
    return seen


def run(
    plan: Plan,
    caps: Capabilities,
    config: RunConfig,
    out_dir: str | Path,
    rounds: Iterable[int] = (1, 2),
    resume: bool = False,
    cancel: threading.Event | None = None,
    trace: list | None = None,
    on_record: Callable[[QuadrupletRecord], None] | None = None,
) -> RunReport:
    """Execute a plan: every round-1 job finishes before any round-2 job starts.

    Records are built by a pool of ``config.workers`` threads and written in
    plan order. With ``resume`` the ids already present in a manifest are
    skipped. If the failure ratio exceeds the threshold after round 1, round 2
    is not started. ``trace`` receives ``(event, round, id)`` tuples.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rounds = sorted({int(r) for r in rounds})
    if any(r not in (1, 2) for r in rounds):
        raise ConfigError(f"rounds must be 1 and/or 2, got {rounds}")
    if 2 in rounds:
        check_stage_gating(caps)
    report = RunReport(out, config.failure_threshold)
    for job in plan.rejected:
        msg = f"rejected pc={job.pc} pg={job.pg}: no construction route"
        report.warnings.append(msg)
        log.warning(msg)

    provlog = _ProvenanceLog(out / PROVENANCE_LOG, append=resume)
    hooked = _backends(caps)
    saved = [b.on_result for b in hooked]
    for b in hooked:
        b.on_result = provlog.hook
    trace_lock = threading.Lock()

    def note(event: str, round_: int, rid: str) -> None:
        if trace is not None:
            with trace_lock:
                trace.append((event, round_, rid))

    fingerprint = config.fingerprint()
    try:
        for r in rounds:
            jobs = plan.round1 if r == 1 else plan.round2
            path = manifest_path(out, r)
            report.manifests[r] = path
            with ManifestWriter(path, r, fingerprint, resume) as writer:
                report.resumed[r] = len(writer.completed)
                todo = [j for j in jobs if j.payload.id not in writer.completed]
                work = _make_worker(Round(r), caps, config, out, provlog, note)
                report.written[r] = 0
                for record in _ordered(work, todo, config.workers, cancel):
                    writer.write(record)
                    report.written[r] += 1
                    report.statuses[record.status] += 1
                    if record.status == Status.BACKEND_FAILED.value:
                        report.failures.append((record.id, record.failure or ""))
                    if on_record is not None:
                        on_record(record)
            if cancel is not None and cancel.is_set():
                report.cancelled = True
                break
            if r == 1 and report.exceeded and 2 in rounds:
                report.aborted = True
                log.error("failure ratio %.3f exceeds %.3f; round 2 not started", report.failure_ratio, report.threshold)
                break
    finally:
        for b, hook in zip(hooked, saved):
            b.on_result = hook
        provlog.close()
    return report


def _make_worker(round_: Round, caps, config, out: Path, provlog: _ProvenanceLog, note):
    construct = construct_round1_record if round_ is Round.ROUND1 else construct_round2_record

    def work(job: Job) -> QuadrupletRecord:
        entry: CorpusEntry = job.payload
        seed = record_seed(config.seed, entry.id)
        note("start", int(round_), entry.id)
        provlog.current.id = entry.id
        inputs = entry.load()
        try:
            built = construct(inputs, job.pc, job.pg, caps, config, seed, key=entry.id)
        except BackendError as exc:
            built = Construction(Status.BACKEND_FAILED, inputs.p_g, inputs.g_g, failure=f"{exc.kind}: {exc}")
        finally:
            provlog.current.id = None
        record = persist(out, job, round_, seed, built)
        note("end", int(round_), entry.id)
        return record

    return work


def _ordered(work, jobs: list[Job], workers: int, cancel: threading.Event | None) -> Iterator[QuadrupletRecord]:
    """Run ``work`` over ``jobs`` concurrently, yielding results in job order."""
    window: collections.deque[Future] = collections.deque()
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="trizone") as pool:
        for job in jobs:
            if cancel is not None and cancel.is_set():
                break
            window.append(pool.submit(work, job))
            while len(window) > 2 * workers:
                yield window.popleft().result()
        while window:
            yield window.popleft().result()


# validation


@dataclass(frozen=True)
class Violation:
    line: int
    record_id: str | None
    kind: str
    detail: str

    def __str__(self) -> str:
        rid = self.record_id if self.record_id is not None else "-"
        return f"line {self.line} [{self.kind}] {rid}: {self.detail}"


@dataclass
class ValidationReport:
    path: Path
    records: int = 0
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def counts(self) -> dict[str, int]:
        return dict(collections.Counter(v.kind for v in self.violations))


_ROUND_METHODS = {1: {Method.IDM.value, Method.IDM_S.value}, 2: {Method.CROSSVTON.value}}
_STATUSES = {s.value for s in Status}


def validate_manifest(path: str | Path) -> ValidationReport:
    """Check a manifest and its files; never raises for content problems.

    At most one violation per kind is reported for each record; the image
    checks (missing file, undecodable mask, grid) report the first problem only.
    """
    path = Path(path)
    report = ValidationReport(path)
    base = path.parent
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        report.violations.append(Violation(0, None, "format", f"unreadable manifest: {exc}"))
        return report

    def add(line: int, rid, kind: str, detail: str) -> None:
        report.violations.append(Violation(line, rid, kind, detail))

    header = None
    if lines:
        try:
            header = json.loads(lines[0])
        except json.JSONDecodeError:
            header = None
    if not isinstance(header, dict) or header.get("kind") != "header" or header.get("round") not in (1, 2):
        add(1, None, "header", "missing or malformed manifest header")
        round_ = None
    else:
        round_ = header["round"]

    seen: set[str] = set()
    for n, line in enumerate(lines[1:], 2):
        try:
            rec = QuadrupletRecord.from_dict(json.loads(line))
        except (json.JSONDecodeError, FormatError, TypeError, AttributeError) as exc:
            add(n, None, "format", str(exc))
            continue
        report.records += 1
        rid = rec.id
        if rid in seen:
            add(n, rid, "duplicate-id", "id already used earlier in the manifest")
        seen.add(rid)
        if round_ is not None and (rec.round != round_ or rec.method not in _ROUND_METHODS[round_]):
            add(n, rid, "round", f"method {rec.method} / round {rec.round} in a round-{round_} manifest")
        else:
            try:
                expected = route(GarmentSpec.parse(rec.pc_spec), GarmentSpec.parse(rec.pg_spec)).method.value
            except ValueError as exc:
                add(n, rid, "routing", str(exc))
            else:
                if expected != rec.method:
                    add(n, rid, "routing", f"pair routes to {expected}, record says {rec.method}")
        if rec.p_g_provenance != ImageProvenance.REAL.value or rec.p_c_provenance != ImageProvenance.SYNTHETIC.value:
            add(n, rid, "provenance", f"p_g={rec.p_g_provenance} p_c={rec.p_c_provenance}")
        if rec.status not in _STATUSES:
            add(n, rid, "status", f"unknown status {rec.status!r}")
        problem = _check_files(base, rec)
        if problem is not None:
            add(n, rid, *problem)
    return report


def _check_files(base: Path, rec: QuadrupletRecord) -> tuple[str, str] | None:
    required = {"p_g", "g_g"} | ({"p_c", "m3g"} if rec.status == Status.OK.value else set())
    rasters = {}
    for name in RECORD_FILES:
        ref = getattr(rec, name)
        if ref is None:
            if name in required:
                return "missing-file", f"{name} is null in an {rec.status} record"
            continue
        target = base / ref
        if not target.is_file():
            return ("mask" if name == "m3g" else "missing-file"), f"{name} file {ref} does not exist"
        try:
            rasters[name] = imageio.read_trizone(target) if name == "m3g" else imageio.read_rgb(target)
        except FormatError as exc:
            return ("mask" if name == "m3g" else "missing-file"), f"{name}: {exc}"
    grids = {name: r.grid for name, r in rasters.items()}
    if len(set(grids.values())) > 1:
        return "grid", ", ".join(f"{k}={v.width}x{v.height}" for k, v in grids.items())
    if "m3g" in rasters and rec.zones is not None and zone_counts(rasters["m3g"]) != rec.zones:
        return "mask", f"zone counts {zone_counts(rasters['m3g'])} differ from recorded {rec.zones}"
    return None


def iter_quadruplets(manifest: str | Path, statuses=(Status.OK,)) -> Iterator[tuple[QuadrupletRecord, RgbImage, RgbImage, RgbImage, TriZoneMask]]:
    """Load ``(record, p_c, p_g, g_g, m3g)`` for records with the given statuses."""
    manifest = Path(manifest)
    _, records = read_manifest(manifest)
    wanted = {Status(s).value for s in statuses}
    base = manifest.parent
    for rec in records:
        if rec.status not in wanted:
            continue
        yield (
            rec,
            imageio.read_rgb(base / rec.p_c),
            imageio.read_rgb(base / rec.p_g),
            imageio.read_rgb(base / rec.g_g),
            imageio.read_trizone(base / rec.m3g),
        )
