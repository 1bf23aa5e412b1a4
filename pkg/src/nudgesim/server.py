"""Real-time session server: one simulation, many websocket clients.

All state mutation happens on the simulation's tick loop; client messages
only fill an input box that is read at tick boundaries (zero-order hold
for wrenches, summed over clients with a per-client clamp).  Broadcasts
never block the simulation: snapshots and particle clouds are latest-wins
per client, while events and transcript deltas are queued reliably.
"""

from __future__ import annotations

import asyncio
import contextlib
from dataclasses import dataclass, field

import websockets

from .controller import Wrench
from .events import EventLog
from .scenario import Scenario
from .sim import Simulation
from .wire import WireError, decode, encode, parse_wrench_command, snapshot_payload

EVENT_BROADCAST_KINDS = (
    "llm_query",
    "llm_action",
    "correction_start",
    "correction_end",
    "semantic_correction",
    "pick",
    "place",
)


class BindFailure(OSError):
    pass


@dataclass(eq=False)
class _Client:
    ws: object
    seq: int = 0
    wrench: Wrench = field(default_factory=Wrench.zero)
    latest: dict = field(default_factory=dict)  # type -> payload (latest wins)
    reliable: list = field(default_factory=list)  # [(type, payload)]
    wakeup: asyncio.Event = field(default_factory=asyncio.Event)

    def push_latest(self, msg_type: str, payload: dict) -> None:
        self.latest[msg_type] = payload
        self.wakeup.set()

    def push_reliable(self, msg_type: str, payload: dict) -> None:
        self.reliable.append((msg_type, payload))
        self.wakeup.set()


class SessionServer:
    """Owns a Simulation and serves it over the wire protocol."""

    def __init__(
        self,
        scenario: Scenario,
        host: str = "127.0.0.1",
        port: int = 8765,
        snapshot_rate: float = 30.0,
        cloud_rate: float = 10.0,
        realtime_factor: float = 1.0,
    ):
        self.scenario = scenario
        self.host = host
        self.port = port
        self.snapshot_rate = snapshot_rate
        self.cloud_rate = cloud_rate
        self.realtime_factor = realtime_factor
        self.sim = Simulation(scenario)
        self.clients: set[_Client] = set()
        self.paused = False
        self._reset_requested = False
        self.finished = asyncio.Event()
        self._bound = asyncio.Event()
        self._next_snapshot_slot = 0
        self._next_cloud_slot = 0
        self._samples: list = []
        self._sample_ptr = 0
        self._rendered_transcript: list[dict] = []
        self._event_history: list[dict] = []
        self._event_cursor = 0

    # -- client IO -------------------------------------------------------

    def _total_wrench(self) -> Wrench:
        total = Wrench.zero()
        for client in self.clients:
            total = total + client.wrench
        return total

    async def _handle_client(self, ws) -> None:
        client = _Client(ws=ws)
        self.clients.add(client)
        # resync a (re)connecting client: full transcript and past events
        for payload in self._event_history:
            client.push_reliable("event", payload)
        for rendered in self._rendered_transcript:
            client.push_reliable("transcript_delta", rendered)
        sender = asyncio.create_task(self._sender(client))
        try:
            async for text in ws:
                try:
                    msg = decode(text)
                    if msg["type"] == "apply_wrench":
                        force, torque = parse_wrench_command(
                            msg, self.scenario.human.wrench_clamp
                        )
                        client.wrench = Wrench(force, torque)
                    elif msg["type"] == "set_pause":
                        self.paused = bool(msg.get("paused", True))
                    elif msg["type"] == "reset":
                        self._reset_requested = True
                    else:
                        raise WireError(f"clients cannot send {msg['type']!r}")
                except WireError as exc:
                    client.push_reliable("error", {"message": str(exc)})
        finally:
            self.clients.discard(client)
            sender.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await sender

    async def _sender(self, client: _Client) -> None:
        while True:
            await client.wakeup.wait()
            client.wakeup.clear()
            reliable, client.reliable = client.reliable, []
            latest, client.latest = client.latest, {}
            for msg_type, payload in reliable:
                await client.ws.send(encode(msg_type, client.seq, payload))
                client.seq += 1
            for msg_type in ("state_snapshot", "particle_cloud"):
                if msg_type in latest:
                    await client.ws.send(encode(msg_type, client.seq, latest[msg_type]))
                    client.seq += 1

    # -- broadcast -------------------------------------------------------

    def _broadcast_latest(self, msg_type: str, payload: dict) -> None:
        for client in self.clients:
            client.push_latest(msg_type, payload)

    def _broadcast_reliable(self, msg_type: str, payload: dict) -> None:
        for client in self.clients:
            client.push_reliable(msg_type, payload)

    def _pump_outputs(self) -> None:
        """Derive frames from sim state; called after each tick batch."""
        log = self.sim.log
        while self._event_cursor < len(log.records):
            rec = log.records[self._event_cursor]
            self._event_cursor += 1
            if rec.kind == "confidence_sample":
                self._samples.append(rec)
            elif rec.kind in EVENT_BROADCAST_KINDS:
                payload = {"tick": rec.tick, "time": rec.time, "kind": rec.kind, "data": rec.data}
                if rec.kind == "llm_query":
                    payload = {**payload, "data": {"step": rec.data.get("step")}}
                self._event_history.append(payload)
                self._broadcast_reliable("event", payload)

        # each slot carries the latest sample at or before its time, and
        # slots end at the last sample: the exact rule replay applies
        # offline, so live and replayed frame sequences coincide
        while self._samples:
            slot_time = self._next_snapshot_slot / self.snapshot_rate
            if slot_time > self._samples[-1].time:
                break
            while (
                self._sample_ptr + 1 < len(self._samples)
                and self._samples[self._sample_ptr + 1].time <= slot_time
            ):
                self._sample_ptr += 1
            rec = self._samples[self._sample_ptr]
            if rec.time <= slot_time:
                self._broadcast_latest(
                    "state_snapshot", snapshot_payload(rec.data, rec.time, rec.tick)
                )
            self._next_snapshot_slot += 1

        while True:
            slot_time = self._next_cloud_slot / self.cloud_rate
            if slot_time > self.sim.time:
                break
            self._broadcast_latest(
                "particle_cloud", {"time": self.sim.time, "particles": self.sim.belief.cloud_snapshot()}
            )
            self._next_cloud_slot += 1

        entries = self.sim.transcript.entries
        for i, entry in enumerate(entries):
            rendered = {
                "index": i,
                "step": entry.step,
                "user_prompt": entry.user_prompt,
                "raw_response": entry.raw_response,
                "proposed": (
                    {"verb": entry.proposed.verb, "object_id": entry.proposed.object_id}
                    if entry.proposed
                    else None
                ),
                "reasoning": entry.reasoning,
                "execution_result": entry.execution_result,
                "correction": (
                    {"verb": entry.correction.verb, "object_id": entry.correction.object_id}
                    if entry.correction
                    else None
                ),
                "correction_text": entry.correction_text,
            }
            if i >= len(self._rendered_transcript):
                self._rendered_transcript.append(rendered)
                self._broadcast_reliable("transcript_delta", rendered)
            elif self._rendered_transcript[i] != rendered:
                self._rendered_transcript[i] = rendered
                self._broadcast_reliable("transcript_delta", rendered)

    # -- main loop -------------------------------------------------------

    def _do_reset(self) -> None:
        self.sim = Simulation(self.scenario)
        self._next_snapshot_slot = 0
        self._next_cloud_slot = 0
        self._samples = []
        self._sample_ptr = 0
        self._rendered_transcript = []
        self._event_history = []
        self._event_cursor = 0

    async def _tick_loop(self) -> None:
        total = int(round(self.scenario.duration * self.sim.cfg.control_rate))
        loop = asyncio.get_running_loop()
        dt_wall = self.sim.cfg.dt_control / self.realtime_factor
        anchor = loop.time()
        anchor_tick = 0
        while self.sim.tick < total:
            if self._reset_requested:
                self._reset_requested = False
                self._do_reset()
                total = int(round(self.scenario.duration * self.sim.cfg.control_rate))
                anchor = loop.time()
                anchor_tick = 0
            if self.paused:
                await asyncio.sleep(0.02)
                anchor = loop.time()
                anchor_tick = self.sim.tick
                continue
            target = anchor_tick + int((loop.time() - anchor) / dt_wall)
            steps = min(target, total) - self.sim.tick
            if steps <= 0:
                await asyncio.sleep(dt_wall)
                continue
            for _ in range(steps):
                self.sim.human.set_interactive_wrench(self._total_wrench())
                self.sim.step()
            self._pump_outputs()
            await asyncio.sleep(0)
        self.finished.set()

    async def serve(self) -> EventLog:
        """Run the session to completion; returns the final event log."""
        try:
            server = await websockets.serve(self._handle_client, self.host, self.port)
        except OSError as exc:
            raise BindFailure(f"cannot bind {self.host}:{self.port}: {exc}") from exc
        if self.port == 0:
            self.port = server.sockets[0].getsockname()[1]
        self._bound.set()
        try:
            await self._tick_loop()
        finally:
            server.close()
            await server.wait_closed()
        return self.sim.log


def serve_session(scenario: Scenario, host: str = "127.0.0.1", port: int = 8765, **kwargs) -> EventLog:
    """Blocking entry point for the CLI."""
    server = SessionServer(scenario, host, port, **kwargs)
    return asyncio.run(server.serve())
