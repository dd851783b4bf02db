/** Target-pose input: a drag gizmo (translate/rotate handles) plus keyboard
 * nudging. Both paths go through the TargetPublisher so the wire never sees
 * more than one target message per animation frame. */

import * as THREE from 'three';
import { TransformControls } from 'three/addons/controls/TransformControls.js';

import { TargetPublisher } from './net.js';
import type { Quat, Vec3 } from './protocol.js';

export function anchorPose(anchor: THREE.Object3D): { pos: Vec3; quat: Quat } {
  const p = anchor.position;
  const q = anchor.quaternion; // three uses xyzw internally
  return { pos: [p.x, p.y, p.z], quat: [q.w, q.x, q.y, q.z] };
}

export class TargetGizmo {
  readonly controls: TransformControls;
  dragging = false;

  constructor(
    camera: THREE.Camera,
    dom: HTMLElement,
    private anchor: THREE.Object3D,
    private publisher: TargetPublisher,
    onDragStateChange: (dragging: boolean) => void = () => {},
  ) {
    this.controls = new TransformControls(camera, dom);
    this.controls.attach(anchor);
    this.controls.setSize(0.8);
    this.controls.addEventListener('dragging-changed', (ev: { value: unknown }) => {
      this.dragging = Boolean(ev.value);
      onDragStateChange(this.dragging);
    });
    this.controls.addEventListener('objectChange', () => this.publish());
  }

  setMode(mode: 'translate' | 'rotate'): void {
    this.controls.setMode(mode);
  }

  publish(): void {
    const { pos, quat } = anchorPose(this.anchor);
    this.publisher.markDirty(pos, quat);
  }

  /** Keyboard nudge fallback (input mode "nudge"). */
  nudge(dx: number, dy: number, dz: number): void {
    this.anchor.position.x += dx;
    this.anchor.position.y += dy;
    this.anchor.position.z += dz;
    this.publish();
  }
}
