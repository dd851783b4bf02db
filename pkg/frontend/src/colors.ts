/** Clearance-to-color mapping shared by obstacle meshes and HUD accents:
 * red below the safety margin, amber within twice the margin, green above. */

export const RED = 0xe0493c;
export const AMBER = 0xe0a13c;
export const GREEN = 0x4caf50;

export function clearanceColor(phi: number, epsilon: number): number {
  if (phi < epsilon) return RED;
  if (phi < 2 * epsilon) return AMBER;
  return GREEN;
}
