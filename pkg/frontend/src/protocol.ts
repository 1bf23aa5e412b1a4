// Wire protocol frames, mirroring the server's JSON-per-text-frame format.

export interface StateSnapshot {
  type: "state_snapshot";
  seq: number;
  tick: number;
  time: number;
  pose: number[]; // px py pz qw qx qy qz
  twist: number[]; // vx vy vz wx wy wz
  held: { robot: string | null; human: string | null };
  objects: Record<string, number[]>;
  c_lin: number;
  c_rot: number;
  resample_rate: number;
  commanded: string | null;
  in_flight_llm: boolean;
}

export interface ParticleCloud {
  type: "particle_cloud";
  seq: number;
  time: number;
  particles: [number[], number][]; // [position, weight]
}

export interface TranscriptDelta {
  type: "transcript_delta";
  seq: number;
  index: number;
  step: number;
  user_prompt: string;
  raw_response: string;
  proposed: { verb: string; object_id: string } | null;
  reasoning: string;
  execution_result: string;
  correction: { verb: string; object_id: string } | null;
  correction_text: string | null;
}

export interface EventFrame {
  type: "event";
  seq: number;
  tick: number;
  time: number;
  kind: string;
  data: Record<string, unknown>;
}

export interface ErrorFrame {
  type: "error";
  seq: number;
  message: string;
}

export type ServerFrame = StateSnapshot | ParticleCloud | TranscriptDelta | EventFrame | ErrorFrame;

const SERVER_TYPES = new Set([
  "state_snapshot",
  "particle_cloud",
  "transcript_delta",
  "event",
  "error",
]);

export function decodeFrame(text: string): ServerFrame | null {
  let obj: unknown;
  try {
    obj = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof obj !== "object" || obj === null) return null;
  const frame = obj as { type?: string; seq?: number };
  if (!frame.type || !SERVER_TYPES.has(frame.type)) return null;
  if (typeof frame.seq !== "number" || frame.seq < 0) return null;
  return frame as ServerFrame;
}

export function encodeWrench(seq: number, force: number[], torque: number[]): string {
  return JSON.stringify({ type: "apply_wrench", seq, force, torque });
}

export function encodePause(seq: number, paused: boolean): string {
  return JSON.stringify({ type: "set_pause", seq, paused });
}

export function encodeReset(seq: number): string {
  return JSON.stringify({ type: "reset", seq });
}
