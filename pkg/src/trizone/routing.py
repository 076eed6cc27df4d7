"""Construction-method routing for (constructed-image, ground-truth) garment pairs.

The table below is transcribed cell by cell: rows are the ground-truth garment
(``pg``), columns the garment on the constructed image (``pc``). Merged cells
of the source table are expanded to every cell they span.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple

from .maskcore import ALL_SPECS, Category, GarmentSpec, Length


class Method(str, enum.Enum):
    IDM = "IDM"
    IDM_S = "IDM_S"
    CROSSVTON = "CROSSVTON"
    NA = "NA"


class Round(enum.IntEnum):
    NONE = 0
    ROUND1 = 1
    ROUND2 = 2

    @property
    def label(self) -> str:
        return "none" if self is Round.NONE else f"round{int(self)}"


@dataclass(frozen=True)
class RoutingDecision:
    method: Method
    round: Round

    def __post_init__(self) -> None:
        expected = {
            Method.CROSSVTON: Round.ROUND2,
            Method.NA: Round.NONE,
        }.get(self.method, Round.ROUND1)
        if self.round is not expected:
            raise ValueError(f"{self.method.value} must run in {expected.label}, not {self.round.label}")

    @classmethod
    def of(cls, method: Method) -> "RoutingDecision":
        if method is Method.CROSSVTON:
            return cls(method, Round.ROUND2)
        if method is Method.NA:
            return cls(method, Round.NONE)
        return cls(method, Round.ROUND1)

    def __str__(self) -> str:
        return f"{self.method.value} {self.round.label}"


_COLUMNS = ("upper/short", "upper/long", "dress/short", "dress/long", "lower/short", "lower/long")

# fmt: off
_TABLE_ROWS = {
    #               U/S          U/L          D/S          D/L          L/S          L/L
    "upper/short": ("IDM",       "IDM_S",     "IDM",       "IDM",       "NA",        "NA"),
    "upper/long":  ("IDM_S",     "IDM",       "IDM",       "IDM",       "NA",        "NA"),
    "dress/short": ("CROSSVTON", "CROSSVTON", "IDM",       "IDM_S",     "CROSSVTON", "CROSSVTON"),
    "dress/long":  ("CROSSVTON", "CROSSVTON", "IDM_S",     "IDM",       "CROSSVTON", "CROSSVTON"),
    "lower/short": ("NA",        "NA",        "IDM_S",     "IDM",       "IDM",       "IDM"),
    "lower/long":  ("NA",        "NA",        "IDM_S",     "IDM",       "IDM",       "IDM"),
}
# fmt: on

TABLE: dict[tuple[GarmentSpec, GarmentSpec], Method] = {
    (GarmentSpec.parse(pg), GarmentSpec.parse(pc)): Method(cell)
    for pg, row in _TABLE_ROWS.items()
    for pc, cell in zip(_COLUMNS, row)
}


def route(pc: GarmentSpec, pg: GarmentSpec) -> RoutingDecision:
    """Method and round for building a ``pc``-wearing image from a ``pg``-wearing one."""
    return RoutingDecision.of(TABLE[(pg, pc)])


class Job(NamedTuple):
    pc: GarmentSpec
    pg: GarmentSpec
    decision: RoutingDecision
    payload: object = None


@dataclass
class Plan:
    round1: list[Job]
    round2: list[Job]
    rejected: list[Job]

    def __len__(self) -> int:
        return len(self.round1) + len(self.round2) + len(self.rejected)

    def counts(self) -> dict[str, int]:
        out = {m.value: 0 for m in Method}
        for job in self.jobs():
            out[job.decision.method.value] += 1
        return out

    def jobs(self) -> Iterator[Job]:
        yield from self.round1
        yield from self.round2
        yield from self.rejected


def enumerate_plan(pairs: Iterable[tuple[GarmentSpec, GarmentSpec] | tuple[GarmentSpec, GarmentSpec, object]]) -> Plan:
    """Group ``(pc, pg[, payload])`` pairs by round, keeping input order within groups."""
    plan = Plan([], [], [])
    for pair in pairs:
        pc, pg, *rest = pair
        job = Job(pc, pg, route(pc, pg), rest[0] if rest else None)
        {Round.ROUND1: plan.round1, Round.ROUND2: plan.round2, Round.NONE: plan.rejected}[
            job.decision.round
        ].append(job)
    return plan


def all_cells() -> list[tuple[GarmentSpec, GarmentSpec, RoutingDecision]]:
    """Every (pg, pc) cell in table order."""
    return [(pg, pc, route(pc, pg)) for pg in ALL_SPECS for pc in ALL_SPECS]


def plan_lines(plan: Plan) -> list[str]:
    """Line-delimited export: one JSON object per pair, in group order."""
    return [
        json.dumps(
            {"pc": str(job.pc), "pg": str(job.pg), "method": job.decision.method.value, "round": int(job.decision.round)},
            separators=(",", ":"),
        )
        for job in plan.jobs()
    ]


def format_table() -> str:
    width = 12
    header = "pg \\ pc".ljust(width) + "".join(c.ljust(width) for c in _COLUMNS)
    lines = [header]
    for pg in ALL_SPECS:
        cells = [route(pc, pg).method.value for pc in ALL_SPECS]
        lines.append(str(pg).ljust(width) + "".join(c.ljust(width) for c in cells))
    return "\n".join(lines)


__all__ = [
    "Category",
    "Length",
    "Method",
    "Round",
    "RoutingDecision",
    "route",
    "enumerate_plan",
    "Plan",
    "Job",
    "all_cells",
    "plan_lines",
    "format_table",
    "TABLE",
]
