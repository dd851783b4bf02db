/** Browser entry point: renderer, camera, controls, HUD, wire hookup. */

import * as THREE from 'three';
import { OrbitControls } from 'three/addons/controls/OrbitControls.js';

import { TargetGizmo } from './gizmo.js';
import { hudLines } from './hud.js';
import { TargetPublisher, TeleopClient } from './net.js';
import { parseRolloutCsv, Scrubber } from './offline.js';
import {
  decodeServerFrame,
  encodePause,
  encodeResume,
  encodeSetAlpha,
  encodeSetScene,
  encodeSetSolver,
} from './protocol.js';
import { SceneView } from './render.js';
import { applyError, applyState, createView } from './state.js';

const view = createView();
const sceneView = new SceneView();

const renderer = new THREE.WebGLRenderer({ antialias: true });
renderer.setSize(window.innerWidth, window.innerHeight);
document.body.appendChild(renderer.domElement);

const scene = new THREE.Scene();
scene.background = new THREE.Color(0x14161a);
scene.add(new THREE.AmbientLight(0xffffff, 0.55));
const sun = new THREE.DirectionalLight(0xffffff, 1.2);
sun.position.set(1.5, 1.0, 2.5);
scene.add(sun);
scene.add(new THREE.GridHelper(2, 20, 0x333a44, 0x22262e).rotateX(Math.PI / 2));
scene.add(sceneView.root);

// z-up world to match the robot convention
const camera = new THREE.PerspectiveCamera(55, window.innerWidth / window.innerHeight, 0.01, 20);
camera.up.set(0, 0, 1);
camera.position.set(1.2, -1.0, 1.1);

const orbit = new OrbitControls(camera, renderer.domElement);
orbit.target.set(0.2, 0, 0.8);

const hud = document.getElementById('hud') as HTMLPreElement;
const banner = document.getElementById('banner') as HTMLDivElement;

const publisher = new TargetPublisher();
sceneView.targetAnchor.position.set(0.2, 0, 0.95);
const gizmo = new TargetGizmo(
  camera,
  renderer.domElement,
  sceneView.targetAnchor,
  publisher,
  (dragging) => (orbit.enabled = !dragging),
);
scene.add(gizmo.controls); // TransformControls is an Object3D in three 0.160

let offline: Scrubber | null = null;

const params = new URLSearchParams(window.location.search);
const wsUrl = params.get('ws') ?? 'ws://127.0.0.1:8765';
const client = new TeleopClient(wsUrl, {
  onRaw: (raw) => {
    try {
      const frame = decodeServerFrame(raw);
      if (frame.type === 'state') {
        applyState(view, frame.payload);
        banner.style.display = 'none';
      } else {
        applyError(view, frame.payload.code, frame.payload.msg);
      }
    } catch (err) {
      // malformed frame: freeze last-good render, show the warning banner
      banner.textContent = `malformed frame: ${(err as Error).message}`;
      banner.style.display = 'block';
    }
  },
  onStatus: (status) => {
    view.connection = status;
  },
});
client.connect();

// -- controls ----------------------------------------------------------------

function bindButton(id: string, handler: () => void): void {
  document.getElementById(id)?.addEventListener('click', handler);
}

for (const kind of ['N', 'P', 'B'] as const) {
  bindButton(`solver-${kind}`, () => client.send(encodeSetSolver(kind)));
}
bindButton('mode-translate', () => gizmo.setMode('translate'));
bindButton('mode-rotate', () => gizmo.setMode('rotate'));
bindButton('pause', () => client.send(encodePause()));
bindButton('resume', () => client.send(encodeResume()));
bindButton('scene-clutter', () => client.send(encodeSetScene('clutter', 0)));
bindButton('scene-dynamic', () => client.send(encodeSetScene('dynamic', 0)));

const alphaSlider = document.getElementById('alpha') as HTMLInputElement | null;
alphaSlider?.addEventListener('change', () =>
  client.send(encodeSetAlpha('fixed', { value: parseFloat(alphaSlider.value) })),
);
bindButton('alpha-sigmoid', () => client.send(encodeSetAlpha('sigmoid')));

document.addEventListener('keydown', (ev) => {
  const step = 0.01;
  const moves: Record<string, [number, number, number]> = {
    ArrowLeft: [0, step, 0],
    ArrowRight: [0, -step, 0],
    ArrowUp: [step, 0, 0],
    ArrowDown: [-step, 0, 0],
    PageUp: [0, 0, step],
    PageDown: [0, 0, -step],
  };
  const mv = moves[ev.key];
  if (mv) {
    view.inputMode = 'nudge';
    gizmo.nudge(...mv);
  }
});

const fileInput = document.getElementById('csv') as HTMLInputElement | null;
fileInput?.addEventListener('change', async () => {
  const file = fileInput.files?.[0];
  if (!file) return;
  offline = new Scrubber(parseRolloutCsv(await file.text()));
  (document.getElementById('scrub') as HTMLInputElement).style.display = 'block';
});
const scrub = document.getElementById('scrub') as HTMLInputElement | null;
scrub?.addEventListener('input', () => {
  if (offline) applyState(view, offline.seekFraction(parseFloat(scrub.value)));
});

// -- frame loop ----------------------------------------------------------------

function animate(): void {
  requestAnimationFrame(animate);
  const outbound = publisher.flush(client.connected);
  if (outbound) client.send(outbound);
  if (view.latest) sceneView.update(view.latest);
  hud.textContent = hudLines(view).join('\n');
  hud.style.color = view.latest && view.latest.phi_min !== null && view.latest.phi_min < 0
    ? '#ff6659' : '#d7e0ea';
  orbit.update();
  renderer.render(scene, camera);
}

window.addEventListener('resize', () => {
  camera.aspect = window.innerWidth / window.innerHeight;
  camera.updateProjectionMatrix();
  renderer.setSize(window.innerWidth, window.innerHeight);
});

animate();
