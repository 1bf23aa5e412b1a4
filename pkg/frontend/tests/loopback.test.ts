// End-to-end loopback: a live simulator session served by the Python CLI,
// this client's real networking / view model / drag pipeline pushing the
// end effector to the stove, and the resulting correction appearing in
// the transcript panel.
//
// The drag is a synthesized pointer gesture: grab the effector marker,
// then track a point past the stove so the drag vector stays proportional
// to (stove - effector), i.e. the same clamped pull a human would apply.

import { spawn, ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, dirname } from "node:path";
import { fileURLToPath } from "node:url";
import WebSocket from "ws";
import { afterAll, describe, expect, it } from "vitest";

import { DragController } from "../src/drag";
import { SessionLink } from "../src/net";
import { fitViewport, renderTranscript, worldToScreen, Viewport } from "../src/render";
import { ViewModel } from "../src/viewmodel";

const here = dirname(fileURLToPath(import.meta.url));
const scenario = join(here, "fixtures", "loopback.json");
const REALTIME = 4.0;
const STOVE_ATTR: [number, number] = [0.5, 0.2]; // stove move target (x, y)

let child: ChildProcess | null = null;

afterAll(() => {
  child?.kill("SIGKILL");
});

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

async function startServer(logPath: string, port: number): Promise<ChildProcess> {
  const proc = spawn(
    "python3",
    [
      "-m",
      "nudgesim.cli",
      "run",
      "--scenario",
      scenario,
      "--bind",
      `127.0.0.1:${port}`,
      "--realtime-factor",
      String(REALTIME),
      "--log",
      logPath,
    ],
    { stdio: ["ignore", "pipe", "pipe"] }
  );
  // wait until the port accepts a websocket
  for (let attempt = 0; attempt < 100; attempt++) {
    if (proc.exitCode !== null) throw new Error(`server exited early (${proc.exitCode})`);
    const ok = await new Promise<boolean>((resolve) => {
      const probe = new WebSocket(`ws://127.0.0.1:${port}`);
      probe.onopen = () => {
        probe.close();
        resolve(true);
      };
      probe.onerror = () => resolve(false);
    });
    if (ok) return proc;
    await sleep(100);
  }
  throw new Error("server never came up");
}

interface SessionResult {
  log: { kind: string; time: number; data: Record<string, any> }[];
  panel: HTMLElement;
  panelLatencyMs: number | null;
  wrenchesSent: number;
}

async function runSession(): Promise<SessionResult> {
  const port = 8800 + Math.floor(Math.random() * 800);
  const dir = mkdtempSync(join(tmpdir(), "nudgesim-loopback-"));
  const logPath = join(dir, "loopback.jsonl");
  child = await startServer(logPath, port);
  const exited = new Promise<void>((resolve) => child!.once("exit", () => resolve()));

  const view = new ViewModel();
  const panel = document.createElement("div");
  let correctionEventAt: number | null = null;
  let panelLatencyMs: number | null = null;

  const link = new SessionLink(`ws://127.0.0.1:${port}`, view, () => {
    renderTranscript(panel, view);
    if (correctionEventAt === null) {
      if (view.events.some((e) => e.kind === "semantic_correction")) {
        correctionEventAt = performance.now();
      }
    }
    if (
      correctionEventAt !== null &&
      panelLatencyMs === null &&
      (panel.textContent ?? "").includes("pushing it to")
    ) {
      panelLatencyMs = performance.now() - correctionEventAt;
    }
  }, { socketFactory: (url) => new WebSocket(url) as unknown as globalThis.WebSocket });
  link.connect();

  // wait for the first snapshot, then let the model's move command land
  for (let i = 0; i < 100 && view.snapshot === null; i++) await sleep(50);
  expect(view.snapshot).not.toBeNull();
  await sleep(1500 / REALTIME);

  let viewport: Viewport = fitViewport(view.snapshot!, 720, 540);
  const eePx = (): [number, number] | null => {
    if (!view.snapshot) return null;
    viewport = fitViewport(view.snapshot, 720, 540);
    return worldToScreen(viewport, view.snapshot.pose[0], view.snapshot.pose[1]);
  };

  let wrenchesSent = 0;
  const drag = new DragController(
    (force, torque) => {
      wrenchesSent++;
      link.sendWrench(force, torque);
    },
    () => viewport.pxPerMeter,
    eePx,
    { gainNewtonPerMeter: 50.0, maxForce: 20.0, sendHz: 30, grabRadiusPx: 24 }
  );

  // grab the marker and drag for 0.5 s, tracking a point beyond the stove
  const grab = eePx()!;
  expect(drag.down({ offsetX: grab[0], offsetY: grab[1] })).toBe(true);
  const dragStart = performance.now();
  while (performance.now() - dragStart < 500) {
    const ee = eePx();
    if (ee) {
      const stovePx = worldToScreen(viewport, STOVE_ATTR[0], STOVE_ATTR[1]);
      // anchor + 6x the separation: a 300 N/m pull saturating at the cap
      const target: [number, number] = [
        drag.state.anchorPx[0] + 6 * (stovePx[0] - ee[0]),
        drag.state.anchorPx[1] + 6 * (stovePx[1] - ee[1]),
      ];
      drag.move({ offsetX: target[0], offsetY: target[1] });
    }
    await sleep(25);
  }
  drag.up();

  // let the episode resolve and the run finish
  await exited;
  link.close();

  const log = readFileSync(logPath, "utf-8")
    .split("\n")
    .filter((line) => line.trim())
    .map((line) => JSON.parse(line));
  return { log, panel, panelLatencyMs, wrenchesSent };
}

describe("loopback against a live session", () => {
  it("drag reaches the simulation, is clamped, and yields a transcript correction", async () => {
    // wall timing can starve a run; allow one retry before failing
    let result = await runSession();
    const corrected = () =>
      result.log.some((r) => r.kind === "semantic_correction");
    if (!corrected()) {
      child?.kill("SIGKILL");
      result = await runSession();
    }

    // the client actually streamed wrenches (~30 Hz for 0.5 s, plus release)
    expect(result.wrenchesSent).toBeGreaterThanOrEqual(10);

    const human = result.log
      .filter((r) => r.kind === "wrench_sample")
      .map((r) => r.data.human as number[])
      .filter((h) => Math.hypot(h[0], h[1], h[2]) > 0.5);
    expect(human.length).toBeGreaterThan(5);

    // direction: the pull points from the effector toward the stove, which
    // from the counter is dominantly +y in the world frame
    const early = human.slice(0, 5);
    for (const h of early) {
      expect(h[1]).toBeGreaterThan(0);
      expect(Math.abs(h[1])).toBeGreaterThan(Math.abs(h[0]));
    }

    // magnitude: clamped at the 20 N cap, never beyond, and saturating
    const norms = human.map((h) => Math.hypot(h[0], h[1], h[2]));
    expect(Math.max(...norms)).toBeLessThanOrEqual(20.0 + 1e-6);
    expect(Math.max(...norms)).toBeGreaterThan(19.0);

    // the correction round-tripped: server event plus transcript entry
    expect(result.log.some((r) => r.kind === "semantic_correction")).toBe(true);
    expect(result.panel.textContent).toContain("pushing it to: 'on the stove'");
    expect(result.panelLatencyMs).not.toBeNull();
    expect(result.panelLatencyMs!).toBeLessThan(2000);
  }, 60_000);
});
