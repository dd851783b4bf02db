/** Geometry of the bundled 7-DoF arm (mirrors the server's arm7.yaml) and a
 * minimal forward kinematics used purely for rendering: the wire carries the
 * joint vector, and link capsules are placed client-side. */

import type { Quat, Vec3 } from './protocol.js';

export interface JointDef {
  axis: Vec3;
  offset: Vec3;
}

export interface ColliderDef {
  link: number;
  p0: Vec3;
  p1: Vec3;
  radius: number;
}

export const ARM7_JOINTS: JointDef[] = [
  { axis: [0, 0, 1], offset: [0, 0, 0.15] },
  { axis: [0, 1, 0], offset: [0, 0, 0.1] },
  { axis: [0, 0, 1], offset: [0, 0, 0.2] },
  { axis: [0, 1, 0], offset: [0, 0, 0.2] },
  { axis: [0, 0, 1], offset: [0, 0, 0.2] },
  { axis: [0, 1, 0], offset: [0, 0, 0.15] },
  { axis: [0, 0, 1], offset: [0, 0, 0.1] },
];

export const ARM7_COLLIDERS: ColliderDef[] = [
  { link: 0, p0: [0, 0, 0], p1: [0, 0, 0.1], radius: 0.06 },
  { link: 1, p0: [0, 0, 0], p1: [0, 0, 0.2], radius: 0.06 },
  { link: 2, p0: [0, 0, 0], p1: [0, 0, 0.2], radius: 0.055 },
  { link: 3, p0: [0, 0, 0], p1: [0, 0, 0.2], radius: 0.055 },
  { link: 4, p0: [0, 0, 0], p1: [0, 0, 0.15], radius: 0.05 },
  { link: 5, p0: [0, 0, 0], p1: [0, 0, 0.1], radius: 0.05 },
  { link: 6, p0: [0, 0, 0], p1: [0, 0, 0.06], radius: 0.045 },
  { link: 6, p0: [0, 0, 0.06], p1: [0, 0, 0.16], radius: 0.04 },
];

export const ARM7_EE_OFFSET: Vec3 = [0, 0, 0.1];

function quatMul(a: Quat, b: Quat): Quat {
  const [aw, ax, ay, az] = a;
  const [bw, bx, by, bz] = b;
  return [
    aw * bw - ax * bx - ay * by - az * bz,
    aw * bx + ax * bw + ay * bz - az * by,
    aw * by - ax * bz + ay * bw + az * bx,
    aw * bz + ax * by - ay * bx + az * bw,
  ];
}

function quatRotate(q: Quat, v: Vec3): Vec3 {
  const [w, x, y, z] = q;
  const uvx = y * v[2] - z * v[1];
  const uvy = z * v[0] - x * v[2];
  const uvz = x * v[1] - y * v[0];
  const uuvx = y * uvz - z * uvy;
  const uuvy = z * uvx - x * uvz;
  const uuvz = x * uvy - y * uvx;
  return [
    v[0] + 2 * (w * uvx + uuvx),
    v[1] + 2 * (w * uvy + uuvy),
    v[2] + 2 * (w * uvz + uuvz),
  ];
}

function axisAngle(axis: Vec3, angle: number): Quat {
  const h = angle / 2;
  const s = Math.sin(h);
  return [Math.cos(h), axis[0] * s, axis[1] * s, axis[2] * s];
}

export interface LinkFrame {
  position: Vec3;
  quaternion: Quat;
}

/** World frames of every link at configuration q (all joints revolute). */
export function forwardKinematics(q: number[]): LinkFrame[] {
  let p: Vec3 = [0, 0, 0];
  let rot: Quat = [1, 0, 0, 0];
  const frames: LinkFrame[] = [];
  for (let i = 0; i < ARM7_JOINTS.length; i++) {
    const joint = ARM7_JOINTS[i];
    const off = quatRotate(rot, joint.offset);
    p = [p[0] + off[0], p[1] + off[1], p[2] + off[2]];
    rot = quatMul(rot, axisAngle(joint.axis, q[i]));
    frames.push({ position: p, quaternion: rot });
  }
  return frames;
}

export interface CapsuleSegment {
  p0: Vec3;
  p1: Vec3;
  radius: number;
}

/** World-frame collider capsules at configuration q. */
export function linkCapsules(q: number[]): CapsuleSegment[] {
  const frames = forwardKinematics(q);
  return ARM7_COLLIDERS.map((c) => {
    const f = frames[c.link];
    const a = quatRotate(f.quaternion, c.p0);
    const b = quatRotate(f.quaternion, c.p1);
    return {
      p0: [f.position[0] + a[0], f.position[1] + a[1], f.position[2] + a[2]],
      p1: [f.position[0] + b[0], f.position[1] + b[1], f.position[2] + b[2]],
      radius: c.radius,
    };
  });
}

/** End-effector pose at q (for cross-checking against the wire value). */
export function endEffector(q: number[]): LinkFrame {
  const frames = forwardKinematics(q);
  const last = frames[frames.length - 1];
  const off = quatRotate(last.quaternion, ARM7_EE_OFFSET);
  return {
    position: [
      last.position[0] + off[0],
      last.position[1] + off[1],
      last.position[2] + off[2],
    ],
    quaternion: last.quaternion,
  };
}
