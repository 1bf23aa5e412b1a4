"""Append-only event log: one structured record per line.

Every run-affecting occurrence is logged with its control-tick index and
simulated time, so a log fully determines what a client would have seen
(replay) and what the plots show.  Serialization is canonical (sorted
keys) so identical runs produce byte-identical logs.

Record payloads by kind:

    llm_query           step, prompt
    llm_action          verb, object_id (null for a hold), result
    correction_start    confidence
    correction_end      matched ("verb object_id" or null)
    semantic_correction verb, object_id, label
    pick                object_id
    place               object_id, location_id
    confidence_sample   c_lin, c_rot, resample_rate, pose[7], twist[6],
                        held_robot, held_human, objects{id: pose[7]},
                        commanded, in_flight   (one per estimator tick)
    estimate_sample     attractor[7], dynamics[6]
    wrench_sample       command[6], human[6]   (force then torque)
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

EVENT_KINDS = (
    "llm_query",
    "llm_action",
    "correction_start",
    "correction_end",
    "semantic_correction",
    "pick",
    "place",
    "confidence_sample",
    "estimate_sample",
    "wrench_sample",
)


@dataclass(frozen=True)
class EventRecord:
    tick: int  # control-tick index
    time: float  # simulated seconds
    kind: str
    data: dict

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")

    def to_json(self) -> str:
        return json.dumps(
            {"tick": self.tick, "time": self.time, "kind": self.kind, "data": self.data},
            sort_keys=True,
            separators=(",", ":"),
        )

    @staticmethod
    def from_json(line: str) -> "EventRecord":
        obj = json.loads(line)
        return EventRecord(obj["tick"], obj["time"], obj["kind"], obj["data"])


class EventLog:
    def __init__(self):
        self.records: list[EventRecord] = []

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def append(self, record: EventRecord) -> None:
        if self.records and record.tick < self.records[-1].tick:
            raise ValueError("event ticks must be non-decreasing")
        self.records.append(record)

    def emit(self, tick: int, time: float, kind: str, **data) -> None:
        self.append(EventRecord(tick, time, kind, data))

    def by_kind(self, kind: str) -> list[EventRecord]:
        return [r for r in self.records if r.kind == kind]

    def to_jsonl(self) -> str:
        return "".join(r.to_json() + "\n" for r in self.records)

    def digest(self) -> str:
        return hashlib.sha256(self.to_jsonl().encode()).hexdigest()

    def write(self, path) -> None:
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")

    @staticmethod
    def read(path) -> "EventLog":
        log = EventLog()
        text = Path(path).read_text(encoding="utf-8")
        for line in text.splitlines():
            if line.strip():
                log.append(EventRecord.from_json(line))
        return log
