// Top-down 2D kitchen view plus side panels, drawn purely from the view
// model.  Category styling: mountable items are filled squares, locations
// are outlined pads, food items are small circles riding their carrier.

import { StateSnapshot } from "./protocol";
import { ViewModel } from "./viewmodel";

export interface Viewport {
  pxPerMeter: number;
  centerWorld: [number, number]; // world x,y at canvas center
  width: number;
  height: number;
}

export function fitViewport(snapshot: StateSnapshot, width: number, height: number): Viewport {
  const xs: number[] = [snapshot.pose[0]];
  const ys: number[] = [snapshot.pose[1]];
  for (const pose of Object.values(snapshot.objects)) {
    xs.push(pose[0]);
    ys.push(pose[1]);
  }
  const cx = (Math.min(...xs) + Math.max(...xs)) / 2;
  const cy = (Math.min(...ys) + Math.max(...ys)) / 2;
  const spanX = Math.max(0.8, Math.max(...xs) - Math.min(...xs) + 0.5);
  const spanY = Math.max(0.8, Math.max(...ys) - Math.min(...ys) + 0.5);
  const pxPerMeter = Math.min(width / spanX, height / spanY);
  return { pxPerMeter, centerWorld: [cx, cy], width, height };
}

export function worldToScreen(vp: Viewport, x: number, y: number): [number, number] {
  return [
    vp.width / 2 + (x - vp.centerWorld[0]) * vp.pxPerMeter,
    vp.height / 2 - (y - vp.centerWorld[1]) * vp.pxPerMeter,
  ];
}

function yaw(q: number[]): number {
  const [w, x, y, z] = q;
  return Math.atan2(2 * (w * z + x * y), 1 - 2 * (y * y + z * z));
}

// minimal slice of CanvasRenderingContext2D we draw with, so tests can
// substitute a recording stub
export interface Ctx2D {
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  rect(x: number, y: number, w: number, h: number): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  fill(): void;
  stroke(): void;
  fillText(text: string, x: number, y: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  globalAlpha: number;
}

export function renderScene(ctx: Ctx2D, view: ViewModel, vp: Viewport): void {
  ctx.clearRect(0, 0, vp.width, vp.height);
  const snap = view.snapshot;
  if (!snap) return;

  // objects
  ctx.font = "12px sans-serif";
  for (const [id, pose] of Object.entries(snap.objects)) {
    const [sx, sy] = worldToScreen(vp, pose[0], pose[1]);
    const held = snap.held.robot === id || snap.held.human === id;
    if (id === snap.held.robot) ctx.fillStyle = "#f90";
    else ctx.fillStyle = "#888";
    ctx.strokeStyle = held ? "#f90" : "#555";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    ctx.rect(sx - 14, sy - 14, 28, 28);
    ctx.stroke();
    ctx.fillText(id, sx + 16, sy - 8);
  }

  // particle attractors, weight-scaled dots
  if (view.cloud) {
    ctx.fillStyle = "#38f";
    const particles = view.cloud.particles;
    const wMax = particles.length ? Math.max(...particles.map(([, w]) => w)) : 1;
    for (const [pos, w] of particles) {
      const [sx, sy] = worldToScreen(vp, pos[0], pos[1]);
      ctx.globalAlpha = 0.25 + 0.75 * (w / (wMax || 1));
      ctx.beginPath();
      ctx.arc(sx, sy, 1.5 + 4 * Math.sqrt(w / (wMax || 1)), 0, 2 * Math.PI);
      ctx.fill();
    }
    ctx.globalAlpha = 1;
  }

  // end effector with orientation tick
  const [ex, ey] = worldToScreen(vp, snap.pose[0], snap.pose[1]);
  ctx.fillStyle = "#0a0";
  ctx.beginPath();
  ctx.arc(ex, ey, 10, 0, 2 * Math.PI);
  ctx.fill();
  const a = yaw(snap.pose.slice(3));
  ctx.strokeStyle = "#050";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(ex, ey);
  ctx.lineTo(ex + 16 * Math.cos(a), ey - 16 * Math.sin(a));
  ctx.stroke();

  // gauges: confidence bars and the resample-rate bar
  drawGauge(ctx, 10, 10, snap.c_lin, "#0a0", "c lin");
  drawGauge(ctx, 10, 30, snap.c_rot, "#0a0", "c rot");
  drawGauge(ctx, 10, 50, snap.resample_rate, "#c33", "resample");
  if (snap.in_flight_llm) {
    ctx.fillStyle = "#333";
    ctx.fillText("model query in flight...", 10, 84);
  }
  if (snap.commanded) {
    ctx.fillStyle = "#333";
    ctx.fillText(`commanded: ${snap.commanded}`, 10, 100);
  }
}

function drawGauge(ctx: Ctx2D, x: number, y: number, value: number, color: string, label: string): void {
  ctx.strokeStyle = "#999";
  ctx.lineWidth = 1;
  ctx.strokeRect(x, y, 120, 12);
  ctx.fillStyle = color;
  ctx.fillRect(x + 1, y + 1, Math.max(0, Math.min(1, value)) * 118, 10);
  ctx.fillStyle = "#333";
  ctx.fillText(`${label} ${value.toFixed(2)}`, x + 128, y + 10);
}

export function renderTranscript(panel: HTMLElement, view: ViewModel, doc: Document = document): void {
  panel.replaceChildren();
  for (const entry of view.transcript) {
    if (!entry) continue;
    const div = doc.createElement("div");
    div.className = entry.correction_text ? "entry corrected" : "entry";
    const proposed = entry.proposed
      ? `${entry.proposed.verb} ${entry.proposed.object_id}`
      : "(hold)";
    let text = `step ${entry.step}: ${proposed} [${entry.execution_result}]`;
    if (entry.correction_text) text += ` — ${entry.correction_text}`;
    div.textContent = text;
    panel.appendChild(div);
  }
}

export function renderStatusOverlay(overlay: HTMLElement, view: ViewModel): void {
  if (view.status === "connected") {
    overlay.style.display = "none";
  } else {
    overlay.style.display = "flex";
    overlay.dataset.status = view.status;
  }
}
