/** Wire protocol: versioned JSON frames over a WebSocket.
 *
 * Server frames are either per-tick "state" payloads or "error" replies.
 * Client frames set the target pose, solver kind, arbitration, scene,
 * or pause state. All numbers are finite doubles; quaternions are wxyz and
 * unit-norm on the wire (encodeTarget normalizes before sending).
 */

export const PROTOCOL_VERSION = 1;

export type Vec3 = [number, number, number];
export type Quat = [number, number, number, number]; // w, x, y, z

export interface PoseWire {
  pos: Vec3;
  quat: Quat;
}

export interface ObstacleWire {
  p0: Vec3;
  p1: Vec3;
  r: number;
}

export interface StatePayload {
  tick: number;
  t: number;
  q: number[];
  ee: PoseWire;
  target: PoseWire;
  alpha: number;
  phi: number[];
  phi_min: number | null;
  solver: 'N' | 'P' | 'B';
  status: string;
  episodes: number;
  step_ms: number;
  obstacles: ObstacleWire[];
}

export interface ErrorPayload {
  code: string;
  msg: string;
}

export type ServerFrame =
  | { v: 1; type: 'state'; payload: StatePayload }
  | { v: 1; type: 'error'; payload: ErrorPayload };

export class ProtocolError extends Error {}

function expectNumbers(value: unknown, length: number, where: string): number[] {
  if (!Array.isArray(value) || value.length !== length || !value.every((x) => Number.isFinite(x))) {
    throw new ProtocolError(`${where}: expected ${length} finite numbers`);
  }
  return value as number[];
}

function expectPose(value: unknown, where: string): PoseWire {
  const obj = value as Record<string, unknown>;
  if (typeof obj !== 'object' || obj === null) throw new ProtocolError(`${where}: not an object`);
  return {
    pos: expectNumbers(obj.pos, 3, `${where}.pos`) as Vec3,
    quat: expectNumbers(obj.quat, 4, `${where}.quat`) as Quat,
  };
}

export function decodeServerFrame(raw: string): ServerFrame {
  let parsed: unknown;
  try {
    parsed = JSON.parse(raw);
  } catch (err) {
    throw new ProtocolError(`malformed JSON: ${(err as Error).message}`);
  }
  const frame = parsed as Record<string, unknown>;
  if (frame.v !== PROTOCOL_VERSION) throw new ProtocolError(`unsupported protocol ${frame.v}`);
  if (frame.type === 'error') {
    const p = frame.payload as Record<string, unknown>;
    if (typeof p?.code !== 'string') throw new ProtocolError('error frame without code');
    return { v: 1, type: 'error', payload: { code: p.code, msg: String(p.msg ?? '') } };
  }
  if (frame.type !== 'state') throw new ProtocolError(`unknown frame type ${frame.type}`);
  const p = frame.payload as Record<string, unknown>;
  const q = p.q as unknown[];
  if (!Array.isArray(q) || !q.every((x) => Number.isFinite(x))) {
    throw new ProtocolError('state.q: expected finite numbers');
  }
  const phi = (p.phi ?? []) as unknown[];
  if (!Array.isArray(phi) || !phi.every((x) => Number.isFinite(x))) {
    throw new ProtocolError('state.phi: expected finite numbers');
  }
  const obstaclesRaw = (p.obstacles ?? []) as unknown[];
  const obstacles = obstaclesRaw.map((o, i) => {
    const ob = o as Record<string, unknown>;
    return {
      p0: expectNumbers(ob.p0, 3, `obstacles[${i}].p0`) as Vec3,
      p1: expectNumbers(ob.p1, 3, `obstacles[${i}].p1`) as Vec3,
      r: ob.r as number,
    };
  });
  const phiMin = p.phi_min;
  if (phiMin !== null && !Number.isFinite(phiMin)) {
    throw new ProtocolError('state.phi_min: expected finite number or null');
  }
  return {
    v: 1,
    type: 'state',
    payload: {
      tick: p.tick as number,
      t: p.t as number,
      q: q as number[],
      ee: expectPose(p.ee, 'state.ee'),
      target: expectPose(p.target, 'state.target'),
      alpha: p.alpha as number,
      phi: phi as number[],
      phi_min: phiMin as number | null,
      solver: p.solver as 'N' | 'P' | 'B',
      status: String(p.status),
      episodes: p.episodes as number,
      step_ms: p.step_ms as number,
      obstacles,
    },
  };
}

function envelope(type: string, payload: unknown): string {
  return JSON.stringify({ v: PROTOCOL_VERSION, type, payload });
}

export function normalizeQuat(quat: Quat): Quat {
  const n = Math.hypot(quat[0], quat[1], quat[2], quat[3]);
  if (!(n > 1e-12)) throw new ProtocolError('zero quaternion');
  return [quat[0] / n, quat[1] / n, quat[2] / n, quat[3] / n];
}

export function encodeTarget(pos: Vec3, quat: Quat): string {
  if (!pos.every((x) => Number.isFinite(x))) throw new ProtocolError('non-finite target');
  return envelope('target', { pos, quat: normalizeQuat(quat) });
}

export function encodeSetSolver(kind: 'N' | 'P' | 'B'): string {
  return envelope('set_solver', { kind });
}

export function encodeSetAlpha(
  mode: 'fixed' | 'sigmoid',
  opts: { value?: number; p?: number; s?: number; b?: number } = {},
): string {
  return envelope('set_alpha', { mode, ...opts });
}

export function encodeSetScene(kind: string, seed: number): string {
  return envelope('set_scene', { kind, seed });
}

export function encodePause(): string {
  return envelope('pause', {});
}

export function encodeResume(): string {
  return envelope('resume', {});
}
