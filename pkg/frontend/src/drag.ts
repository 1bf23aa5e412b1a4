// Drag-to-wrench: grab the end-effector marker and pull it.
//
// The drag vector (screen px) maps through the view scale to a world
// displacement, scaled by a stiffness-like gain into a force; holding
// Shift steers the vertical screen axis into world z instead of y.
// Messages go out at most at the configured rate; pointer-up and window
// blur always emit an immediate zero wrench so no phantom force lingers.

export interface DragConfig {
  gainNewtonPerMeter: number; // force per meter of world-space drag
  maxForce: number; // N, clamp before sending
  sendHz: number;
  grabRadiusPx: number;
}

export const DEFAULT_DRAG: DragConfig = {
  gainNewtonPerMeter: 50.0,
  maxForce: 20.0,
  sendHz: 30,
  grabRadiusPx: 24,
};

export interface DragState {
  active: boolean;
  anchorPx: [number, number];
  currentPx: [number, number];
  zMode: boolean;
}

export function dragForce(
  state: DragState,
  pxPerMeter: number,
  cfg: DragConfig
): [number, number, number] {
  if (!state.active) return [0, 0, 0];
  const dxPx = state.currentPx[0] - state.anchorPx[0];
  const dyPx = state.currentPx[1] - state.anchorPx[1];
  // screen y grows downward; world y grows up-screen
  const dxW = dxPx / pxPerMeter;
  const dyW = -dyPx / pxPerMeter;
  let force: [number, number, number];
  if (state.zMode) {
    force = [dxW * cfg.gainNewtonPerMeter, 0, dyW * cfg.gainNewtonPerMeter];
  } else {
    force = [dxW * cfg.gainNewtonPerMeter, dyW * cfg.gainNewtonPerMeter, 0];
  }
  const norm = Math.hypot(force[0], force[1], force[2]);
  if (norm > cfg.maxForce) {
    const s = cfg.maxForce / norm;
    force = [force[0] * s, force[1] * s, force[2] * s];
  }
  return force;
}

export type WrenchSink = (force: number[], torque: number[]) => void;

export class DragController {
  state: DragState = { active: false, anchorPx: [0, 0], currentPx: [0, 0], zMode: false };
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private sink: WrenchSink,
    private pxPerMeter: () => number,
    private eePx: () => [number, number] | null,
    private cfg: DragConfig = DEFAULT_DRAG
  ) {}

  attach(canvas: HTMLElement, win: Window = window): void {
    canvas.addEventListener("pointerdown", (e) => this.down(e as PointerEvent));
    canvas.addEventListener("pointermove", (e) => this.move(e as PointerEvent));
    canvas.addEventListener("pointerup", () => this.up());
    canvas.addEventListener("pointercancel", () => this.up());
    win.addEventListener("blur", () => this.up());
  }

  down(e: { offsetX: number; offsetY: number; shiftKey?: boolean }): boolean {
    const ee = this.eePx();
    if (ee === null) return false;
    const dist = Math.hypot(e.offsetX - ee[0], e.offsetY - ee[1]);
    if (dist > this.cfg.grabRadiusPx) return false;
    this.state = {
      active: true,
      anchorPx: [e.offsetX, e.offsetY],
      currentPx: [e.offsetX, e.offsetY],
      zMode: Boolean(e.shiftKey),
    };
    this.timer = setInterval(() => this.emit(), 1000 / this.cfg.sendHz);
    this.emit();
    return true;
  }

  move(e: { offsetX: number; offsetY: number; shiftKey?: boolean }): void {
    if (!this.state.active) return;
    this.state.currentPx = [e.offsetX, e.offsetY];
    this.state.zMode = Boolean(e.shiftKey);
  }

  up(): void {
    if (!this.state.active) return;
    this.state.active = false;
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
    this.sink([0, 0, 0], [0, 0, 0]); // release always zeroes immediately
  }

  private emit(): void {
    if (!this.state.active) return;
    this.sink(dragForce(this.state, this.pxPerMeter(), this.cfg) as number[], [0, 0, 0]);
  }
}
