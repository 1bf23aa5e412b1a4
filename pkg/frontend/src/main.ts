import { DragController, DEFAULT_DRAG } from "./drag";
import { fitViewport, renderScene, renderStatusOverlay, renderTranscript, worldToScreen, Viewport } from "./render";
import { SessionLink } from "./net";
import { ViewModel } from "./viewmodel";
import "./style.css";

const params = new URLSearchParams(window.location.search);
const server = params.get("server") ?? `ws://${window.location.hostname || "127.0.0.1"}:8765`;

const canvas = document.getElementById("scene") as HTMLCanvasElement;
const panel = document.getElementById("transcript") as HTMLDivElement;
const overlay = document.getElementById("overlay") as HTMLDivElement;
const reconnectBtn = document.getElementById("reconnect") as HTMLButtonElement;

const view = new ViewModel();
let viewport: Viewport | null = null;
let dirty = true;

const link = new SessionLink(server, view, () => {
  dirty = true;
}, { reconnectDelayMs: 2000 });

const drag = new DragController(
  (force, torque) => link.sendWrench(force, torque),
  () => viewport?.pxPerMeter ?? 250,
  () => {
    if (!view.snapshot || !viewport) return null;
    return worldToScreen(viewport, view.snapshot.pose[0], view.snapshot.pose[1]);
  },
  DEFAULT_DRAG
);
drag.attach(canvas);
reconnectBtn.addEventListener("click", () => link.connect());

function frame(): void {
  if (dirty) {
    dirty = false;
    if (view.snapshot) {
      viewport = fitViewport(view.snapshot, canvas.width, canvas.height);
      const ctx = canvas.getContext("2d");
      if (ctx) renderScene(ctx, view, viewport);
    }
    renderTranscript(panel, view);
    renderStatusOverlay(overlay, view);
  }
  requestAnimationFrame(frame);
}

link.connect();
requestAnimationFrame(frame);
