/** Offline mode: load a per-tick rollout CSV written by the harness and
 * scrub through it as if it were a live stream. Column order is the
 * documented stable one: tick, t, q0..qn, ee pose, target pose, phi_min,
 * per-obstacle phi, alpha, status, accepted, step_ms. */

import type { StatePayload } from './protocol.js';

export function parseRolloutCsv(text: string): StatePayload[] {
  const lines = text.trim().split(/\r?\n/);
  if (lines.length < 2) throw new Error('empty rollout CSV');
  const header = lines[0].split(',');
  const col = (name: string) => {
    const idx = header.indexOf(name);
    if (idx < 0) throw new Error(`rollout CSV missing column ${name}`);
    return idx;
  };
  const qCols: number[] = [];
  for (let i = 0; header.includes(`q${i}`); i++) qCols.push(col(`q${i}`));
  const phiCols: number[] = [];
  for (let o = 0; header.includes(`phi${o}`); o++) phiCols.push(col(`phi${o}`));

  const ee = [col('ee_x'), col('ee_y'), col('ee_z'), col('ee_qw'), col('ee_qx'), col('ee_qy'), col('ee_qz')];
  const tgt = [col('tgt_x'), col('tgt_y'), col('tgt_z'), col('tgt_qw'), col('tgt_qx'), col('tgt_qy'), col('tgt_qz')];
  const iTick = col('tick');
  const iT = col('t');
  const iPhiMin = col('phi_min');
  const iAlpha = col('alpha');
  const iStatus = col('status');
  const iStep = col('step_ms');

  const frames: StatePayload[] = [];
  let episodes = 0;
  let wasBelow = false;
  for (const line of lines.slice(1)) {
    const cells = line.split(',');
    const phiMin = parseFloat(cells[iPhiMin]);
    const finitePhi = Number.isFinite(phiMin);
    if (finitePhi && phiMin < 0 && !wasBelow) episodes += 1;
    wasBelow = finitePhi && phiMin < 0;
    frames.push({
      tick: parseInt(cells[iTick], 10),
      t: parseFloat(cells[iT]),
      q: qCols.map((i) => parseFloat(cells[i])),
      ee: {
        pos: [parseFloat(cells[ee[0]]), parseFloat(cells[ee[1]]), parseFloat(cells[ee[2]])],
        quat: [
          parseFloat(cells[ee[3]]), parseFloat(cells[ee[4]]),
          parseFloat(cells[ee[5]]), parseFloat(cells[ee[6]]),
        ],
      },
      target: {
        pos: [parseFloat(cells[tgt[0]]), parseFloat(cells[tgt[1]]), parseFloat(cells[tgt[2]])],
        quat: [
          parseFloat(cells[tgt[3]]), parseFloat(cells[tgt[4]]),
          parseFloat(cells[tgt[5]]), parseFloat(cells[tgt[6]]),
        ],
      },
      alpha: parseFloat(cells[iAlpha]),
      phi: phiCols.map((i) => parseFloat(cells[i])).filter((x) => Number.isFinite(x)),
      phi_min: finitePhi ? phiMin : null,
      solver: 'N',
      status: cells[iStatus],
      episodes,
      step_ms: parseFloat(cells[iStep]),
      obstacles: [],
    });
  }
  return frames;
}

export class Scrubber {
  frames: StatePayload[];
  index = 0;

  constructor(frames: StatePayload[]) {
    if (frames.length === 0) throw new Error('no frames to scrub');
    this.frames = frames;
  }

  seekFraction(f: number): StatePayload {
    const clamped = Math.min(1, Math.max(0, f));
    this.index = Math.min(this.frames.length - 1, Math.round(clamped * (this.frames.length - 1)));
    return this.frames[this.index];
  }

  step(delta: number): StatePayload {
    this.index = Math.min(this.frames.length - 1, Math.max(0, this.index + delta));
    return this.frames[this.index];
  }

  current(): StatePayload {
    return this.frames[this.index];
  }
}
