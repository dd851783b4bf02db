/** Client session view: the latest server state plus presentation-side
 * bookkeeping (connection status, optional clearance smoothing, collision
 * flash). Rendering reads only the latest frame; nothing interpolates stale
 * physics, and with smoothing disabled every displayed number matches the
 * wire payload exactly. */

import type { StatePayload } from './protocol.js';

export type ConnectionStatus = 'connecting' | 'open' | 'closed';
export type InputMode = 'drag' | 'nudge';

export interface UiSessionView {
  latest: StatePayload | null;
  connection: ConnectionStatus;
  inputMode: InputMode;
  smoothingWindow: number; // 1 = disabled
  phiHistory: number[];
  lastError: string | null;
  collisionFlashTick: number | null; // tick at which episodes last incremented
  prevEpisodes: number;
  paused: boolean;
}

export function createView(): UiSessionView {
  return {
    latest: null,
    connection: 'connecting',
    inputMode: 'drag',
    smoothingWindow: 1,
    phiHistory: [],
    lastError: null,
    collisionFlashTick: null,
    prevEpisodes: 0,
    paused: false,
  };
}

export function applyState(view: UiSessionView, payload: StatePayload): UiSessionView {
  if (payload.episodes > view.prevEpisodes) {
    view.collisionFlashTick = payload.tick;
  }
  view.prevEpisodes = payload.episodes;
  view.paused = payload.status === 'paused';
  view.latest = payload;
  if (payload.phi_min !== null) {
    view.phiHistory.push(payload.phi_min);
    const cap = Math.max(view.smoothingWindow, 64);
    if (view.phiHistory.length > cap) {
      view.phiHistory.splice(0, view.phiHistory.length - cap);
    }
  }
  return view;
}

export function applyError(view: UiSessionView, code: string, msg: string): UiSessionView {
  view.lastError = `${code}: ${msg}`;
  return view;
}

/** Displayed minimum clearance: raw wire value unless smoothing is on. */
export function displayedPhiMin(view: UiSessionView): number | null {
  const latest = view.latest;
  if (latest === null || latest.phi_min === null) return null;
  if (view.smoothingWindow <= 1) return latest.phi_min;
  const n = Math.min(view.smoothingWindow, view.phiHistory.length);
  if (n === 0) return latest.phi_min;
  const tail = view.phiHistory.slice(-n);
  return tail.reduce((a, b) => a + b, 0) / n;
}

/** True while the red collision flash should be shown (a few ticks). */
export function collisionFlashActive(view: UiSessionView, flashTicks = 30): boolean {
  return (
    view.collisionFlashTick !== null &&
    view.latest !== null &&
    view.latest.tick - view.collisionFlashTick < flashTicks
  );
}
