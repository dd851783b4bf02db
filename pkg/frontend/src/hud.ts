/** HUD content: plain strings derived from the session view. With smoothing
 * disabled the numeric fields reproduce the wire payload exactly (the e2e
 * test asserts equality against the raw frames). */

import { collisionFlashActive, displayedPhiMin, UiSessionView } from './state.js';

export interface HudValues {
  solver: string;
  status: string;
  alpha: number | null;
  phiMin: number | null;
  episodes: number | null;
  stepMs: number | null;
  tick: number | null;
  flash: boolean;
  connection: string;
  paused: boolean;
  error: string | null;
}

export function hudValues(view: UiSessionView): HudValues {
  const s = view.latest;
  return {
    solver: s ? s.solver : '-',
    status: s ? s.status : '-',
    alpha: s ? s.alpha : null,
    phiMin: displayedPhiMin(view),
    episodes: s ? s.episodes : null,
    stepMs: s ? s.step_ms : null,
    tick: s ? s.tick : null,
    flash: collisionFlashActive(view),
    connection: view.connection,
    paused: view.paused,
    error: view.lastError,
  };
}

function fmt(x: number | null, digits: number): string {
  return x === null ? 'n/a' : x.toFixed(digits);
}

export function hudLines(view: UiSessionView): string[] {
  const v = hudValues(view);
  const lines = [
    `solver ${v.solver}   alpha ${fmt(v.alpha, 3)}   tick ${v.tick ?? '-'}`,
    `clearance ${fmt(v.phiMin, 4)} m   episodes ${v.episodes ?? '-'}`,
    `solve ${fmt(v.stepMs, 2)} ms   status ${v.status}`,
    `link ${v.connection}${v.paused ? '   [paused]' : ''}`,
  ];
  if (v.flash) lines.push('!! collision episode !!');
  if (v.error) lines.push(`error: ${v.error}`);
  return lines;
}
