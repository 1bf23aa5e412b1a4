// The single rendering source of truth: everything on screen comes from
// received frames, never from local extrapolation.

import {
  decodeFrame,
  ParticleCloud,
  ServerFrame,
  StateSnapshot,
  TranscriptDelta,
} from "./protocol";

export type ConnectionStatus = "connecting" | "connected" | "disconnected";

export class ViewModel {
  snapshot: StateSnapshot | null = null;
  cloud: ParticleCloud | null = null;
  transcript: TranscriptDelta[] = [];
  events: { kind: string; time: number }[] = [];
  status: ConnectionStatus = "connecting";
  lastError = "";
  private lastSnapshotSeq = -1;
  private lastCloudSeq = -1;

  // stale frames (out-of-order seq for latest-wins types) are discarded
  applyText(text: string): ServerFrame | null {
    const frame = decodeFrame(text);
    if (frame === null) return null;
    return this.apply(frame);
  }

  apply(frame: ServerFrame): ServerFrame | null {
    switch (frame.type) {
      case "state_snapshot":
        if (frame.seq <= this.lastSnapshotSeq) return null;
        this.lastSnapshotSeq = frame.seq;
        this.snapshot = frame;
        return frame;
      case "particle_cloud":
        if (frame.seq <= this.lastCloudSeq) return null;
        this.lastCloudSeq = frame.seq;
        this.cloud = frame;
        return frame;
      case "transcript_delta":
        this.transcript[frame.index] = frame;
        return frame;
      case "event":
        this.events.push({ kind: frame.kind, time: frame.time });
        if (this.events.length > 200) this.events.shift();
        return frame;
      case "error":
        this.lastError = frame.message;
        return frame;
    }
  }

  setStatus(status: ConnectionStatus): void {
    this.status = status;
    if (status !== "connected") {
      // a reconnect rebuilds the view from fresh frames; seq counters reset
      // because the new connection numbers its frames from zero
      this.lastSnapshotSeq = -1;
      this.lastCloudSeq = -1;
    }
  }

  corrections(): TranscriptDelta[] {
    return this.transcript.filter((e) => e && e.correction_text);
  }
}
