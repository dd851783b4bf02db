/** three.js scene graph for the arm, obstacles, target gizmo anchor, and
 * ghost markers. Owns no renderer: main.ts drives WebGL, tests drive the
 * graph headlessly. Meshes are pooled and updated in place each frame. */

import * as THREE from 'three';

import { linkCapsules } from './arm7.js';
import { clearanceColor } from './colors.js';
import type { StatePayload, Vec3 } from './protocol.js';

const ARM_COLOR = 0xb03a3a; // links drawn red per the collider convention
const EE_COLOR = 0x3a6fb0;
const TARGET_COLOR = 0x9b59b6;

function capsuleMesh(radius: number, length: number, color: number): THREE.Mesh {
  const geo = new THREE.CapsuleGeometry(radius, length, 6, 12);
  const mat = new THREE.MeshStandardMaterial({ color, roughness: 0.6 });
  return new THREE.Mesh(geo, mat);
}

/** Place a capsule mesh so its axis spans p0 -> p1 (CapsuleGeometry's axis
 * is local +Y of unit length `length`). */
export function placeCapsule(mesh: THREE.Mesh, p0: Vec3, p1: Vec3): void {
  const a = new THREE.Vector3(...p0);
  const b = new THREE.Vector3(...p1);
  const mid = a.clone().add(b).multiplyScalar(0.5);
  const dir = b.clone().sub(a);
  const len = dir.length();
  mesh.position.copy(mid);
  if (len > 1e-9) {
    mesh.quaternion.setFromUnitVectors(new THREE.Vector3(0, 1, 0), dir.normalize());
  } else {
    mesh.quaternion.identity();
  }
}

export class SceneView {
  readonly root = new THREE.Group();
  readonly targetAnchor = new THREE.Object3D(); // TransformControls attach here
  epsilon: number;
  private armMeshes: THREE.Mesh[] = [];
  private obstacleMeshes: THREE.Mesh[] = [];
  private eeMarker: THREE.Mesh;
  private targetGhost: THREE.Mesh;
  private obstacleGroup = new THREE.Group();
  private armGroup = new THREE.Group();
  private lastCapsuleCount = -1;

  constructor(epsilon = 0.03) {
    this.epsilon = epsilon;
    this.root.add(this.armGroup);
    this.root.add(this.obstacleGroup);
    this.eeMarker = new THREE.Mesh(
      new THREE.SphereGeometry(0.02, 12, 12),
      new THREE.MeshStandardMaterial({ color: EE_COLOR }),
    );
    // ghost shows the commanded (blended, pre-filter) target vs achieved ee
    this.targetGhost = new THREE.Mesh(
      new THREE.SphereGeometry(0.02, 12, 12),
      new THREE.MeshStandardMaterial({ color: TARGET_COLOR, transparent: true, opacity: 0.55 }),
    );
    this.root.add(this.eeMarker);
    this.root.add(this.targetGhost);
    this.root.add(this.targetAnchor);
  }

  private syncArmPool(count: number, radii: number[], lengths: number[]): void {
    if (count === this.lastCapsuleCount) return;
    for (const m of this.armMeshes) this.armGroup.remove(m);
    this.armMeshes = [];
    for (let i = 0; i < count; i++) {
      const mesh = capsuleMesh(radii[i], lengths[i], ARM_COLOR);
      this.armMeshes.push(mesh);
      this.armGroup.add(mesh);
    }
    this.lastCapsuleCount = count;
  }

  /** Apply one state payload; returns the number of scene objects updated. */
  update(state: StatePayload): number {
    const caps = linkCapsules(state.q);
    this.syncArmPool(
      caps.length,
      caps.map((c) => c.radius),
      caps.map((c) => Math.hypot(
        c.p1[0] - c.p0[0], c.p1[1] - c.p0[1], c.p1[2] - c.p0[2],
      )),
    );
    caps.forEach((c, i) => placeCapsule(this.armMeshes[i], c.p0, c.p1));

    // obstacle pool resizes lazily to the wire geometry
    while (this.obstacleMeshes.length > state.obstacles.length) {
      const mesh = this.obstacleMeshes.pop()!;
      this.obstacleGroup.remove(mesh);
    }
    while (this.obstacleMeshes.length < state.obstacles.length) {
      const o = state.obstacles[this.obstacleMeshes.length];
      const len = Math.hypot(o.p1[0] - o.p0[0], o.p1[1] - o.p0[1], o.p1[2] - o.p0[2]);
      const mesh = capsuleMesh(o.r, len, 0x888888);
      this.obstacleMeshes.push(mesh);
      this.obstacleGroup.add(mesh);
    }
    state.obstacles.forEach((o, i) => {
      const mesh = this.obstacleMeshes[i];
      placeCapsule(mesh, o.p0, o.p1);
      const phi = state.phi[i];
      const color = clearanceColor(phi ?? Infinity, this.epsilon);
      (mesh.material as THREE.MeshStandardMaterial).color.setHex(color);
    });

    this.eeMarker.position.set(...state.ee.pos);
    this.targetGhost.position.set(...state.target.pos);
    return caps.length + state.obstacles.length + 2;
  }

  /** Color snapshot used by tests: hex color per obstacle. */
  obstacleColors(): number[] {
    return this.obstacleMeshes.map((m) => (m.material as THREE.MeshStandardMaterial).color.getHex());
  }
}
