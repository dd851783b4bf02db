/** Connection handling and outbound rate capping.
 *
 * TargetPublisher implements send-on-change with at most one message per
 * animation frame; while disconnected it queues a single pending message and
 * drops older ones (the HUD shows the drop indicator).
 */

import { encodeTarget, Quat, Vec3 } from './protocol.js';

export class TargetPublisher {
  private dirty: { pos: Vec3; quat: Quat } | null = null;
  private queuedWhileDown: string | null = null;
  dropped = 0;

  markDirty(pos: Vec3, quat: Quat): void {
    this.dirty = { pos: [...pos] as Vec3, quat: [...quat] as Quat };
  }

  /** Once per animation frame: the message to send, or null when the gizmo
   * has not moved since the last flush. */
  flush(connected: boolean): string | null {
    if (this.dirty === null) {
      if (connected && this.queuedWhileDown !== null) {
        const msg = this.queuedWhileDown;
        this.queuedWhileDown = null;
        return msg;
      }
      return null;
    }
    const msg = encodeTarget(this.dirty.pos, this.dirty.quat);
    this.dirty = null;
    if (!connected) {
      if (this.queuedWhileDown !== null) this.dropped += 1;
      this.queuedWhileDown = msg; // keep only the newest
      return null;
    }
    return msg;
  }
}

export interface TeleopClientHooks {
  onRaw: (raw: string) => void;
  onStatus: (status: 'connecting' | 'open' | 'closed') => void;
}

export class TeleopClient {
  private ws: WebSocket | null = null;
  connected = false;

  constructor(private url: string, private hooks: TeleopClientHooks) {}

  connect(): void {
    this.hooks.onStatus('connecting');
    this.ws = new WebSocket(this.url);
    this.ws.onopen = () => {
      this.connected = true;
      this.hooks.onStatus('open');
    };
    this.ws.onmessage = (ev: MessageEvent) => this.hooks.onRaw(String(ev.data));
    this.ws.onclose = () => {
      this.connected = false;
      this.hooks.onStatus('closed');
    };
    this.ws.onerror = () => {
      this.connected = false;
      this.hooks.onStatus('closed');
    };
  }

  send(message: string): void {
    if (this.ws && this.connected) this.ws.send(message);
  }
}
