"""Wire protocol: one self-describing JSON object per text frame.

Server -> client: state_snapshot, particle_cloud, transcript_delta, event,
and error frames.  Client -> server: apply_wrench, set_pause, reset.  Every
message carries a per-direction monotonically increasing `seq`.

Snapshots are derived from the run's confidence samples by a single shared
rule (`snapshot_indices`), which is what makes a replayed log reproduce
exactly the frames a live session would have broadcast.
"""

from __future__ import annotations

import json
import math

import numpy as np

SERVER_TYPES = ("state_snapshot", "particle_cloud", "transcript_delta", "event", "error")
CLIENT_TYPES = ("apply_wrench", "set_pause", "reset")


class WireError(ValueError):
    """Malformed frame; the server answers with an error frame and drops it."""


def encode(msg_type: str, seq: int, payload: dict) -> str:
    if msg_type not in SERVER_TYPES + CLIENT_TYPES:
        raise WireError(f"unknown message type {msg_type!r}")
    return json.dumps(
        {"type": msg_type, "seq": seq, **payload}, sort_keys=True, separators=(",", ":")
    )


def decode(text: str) -> dict:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise WireError(f"not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise WireError("frame must be a JSON object")
    msg_type = obj.get("type")
    if msg_type not in SERVER_TYPES + CLIENT_TYPES:
        raise WireError(f"unknown message type {msg_type!r}")
    seq = obj.get("seq")
    if not isinstance(seq, int) or seq < 0:
        raise WireError("seq must be a non-negative integer")
    return obj


def _vec(raw, n: int, name: str) -> list[float]:
    if not isinstance(raw, (list, tuple)) or len(raw) != n:
        raise WireError(f"{name} must be a {n}-vector")
    try:
        vals = [float(v) for v in raw]
    except (TypeError, ValueError) as exc:
        raise WireError(f"{name} must be numeric") from exc
    if not all(math.isfinite(v) for v in vals):
        raise WireError(f"{name} must be finite")
    return vals


def parse_wrench_command(obj: dict, clamp: float) -> tuple[np.ndarray, np.ndarray]:
    """Validate an apply_wrench frame and clamp its magnitudes server-side."""
    force = np.array(_vec(obj.get("force", [0, 0, 0]), 3, "force"))
    torque = np.array(_vec(obj.get("torque", [0, 0, 0]), 3, "torque"))
    fn = float(np.linalg.norm(force))
    tn = float(np.linalg.norm(torque))
    if fn > clamp:
        force *= clamp / fn
    if tn > clamp:
        torque *= clamp / tn
    return force, torque


def snapshot_payload(sample: dict, time: float, tick: int) -> dict:
    """state_snapshot payload from one confidence_sample record's data."""
    return {
        "tick": tick,
        "time": time,
        "pose": sample["pose"],
        "twist": sample["twist"],
        "held": {"robot": sample["held_robot"], "human": sample["held_human"]},
        "objects": sample["objects"],
        "c_lin": sample["c_lin"],
        "c_rot": sample["c_rot"],
        "resample_rate": sample["resample_rate"],
        "commanded": sample["commanded"],
        "in_flight_llm": sample["in_flight"],
    }


def snapshot_indices(sample_times: list[float], rate: float, end_time: float) -> list[int]:
    """Which sample backs each broadcast slot at the given rate.

    Slot k (time k/rate) carries the latest sample with time <= k/rate;
    slots before the first sample are skipped.  Both the live server and
    the replayer use this rule, so their frame sequences are identical.
    """
    out = []
    if not sample_times:
        return out
    idx = 0
    k = 0
    while True:
        t = k / rate
        if t > end_time:
            break
        while idx + 1 < len(sample_times) and sample_times[idx + 1] <= t:
            idx += 1
        if sample_times[idx] <= t:
            out.append(idx)
        k += 1
    return out


def replay_frames(records, snapshot_rate: float = 30.0) -> list[str]:
    """Reconstruct the state_snapshot frame sequence a live run broadcast.

    `records` is an EventLog-like iterable; only confidence_sample records
    feed snapshots.
    """
    samples = [r for r in records if r.kind == "confidence_sample"]
    if not samples:
        return []
    times = [r.time for r in samples]
    frames = []
    for seq, idx in enumerate(snapshot_indices(times, snapshot_rate, times[-1])):
        r = samples[idx]
        frames.append(encode("state_snapshot", seq, snapshot_payload(r.data, r.time, r.tick)))
    return frames
