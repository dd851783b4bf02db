import { readFileSync } from 'node:fs';
import { join } from 'node:path';

import { describe, expect, it } from 'vitest';

import { endEffector, linkCapsules } from '../src/arm7.js';

interface FkCase {
  q: number[];
  capsules: { p0: number[]; p1: number[] }[];
  ee_pos: number[];
}

const cases: FkCase[] = JSON.parse(
  readFileSync(join(__dirname, 'fixtures', 'fk_cases.json'), 'utf-8'),
);

describe('client-side forward kinematics', () => {
  it('matches the server kinematics on recorded configurations', () => {
    for (const c of cases) {
      const caps = linkCapsules(c.q);
      expect(caps).toHaveLength(c.capsules.length);
      for (let i = 0; i < caps.length; i++) {
        for (let k = 0; k < 3; k++) {
          expect(Math.abs(caps[i].p0[k] - c.capsules[i].p0[k])).toBeLessThan(1e-9);
          expect(Math.abs(caps[i].p1[k] - c.capsules[i].p1[k])).toBeLessThan(1e-9);
        }
      }
      const ee = endEffector(c.q);
      for (let k = 0; k < 3; k++) {
        expect(Math.abs(ee.position[k] - c.ee_pos[k])).toBeLessThan(1e-9);
      }
    }
  });

  it('zero configuration stacks straight up to 1.2 m', () => {
    const ee = endEffector([0, 0, 0, 0, 0, 0, 0]);
    expect(ee.position[0]).toBeCloseTo(0, 12);
    expect(ee.position[1]).toBeCloseTo(0, 12);
    expect(ee.position[2]).toBeCloseTo(1.2, 12);
  });
});
