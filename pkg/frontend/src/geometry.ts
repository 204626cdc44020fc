/**
 * The triangle pad: base corner A bottom-left, base corner B bottom-right,
 * the live reference R at the top apex. Pixel coordinates map to the
 * engine's (alpha, tau) by inverting that layout, clamping any pointer
 * position (inside the pad or not) into the triangle.
 */

export interface PadGeometry {
  left: number;    // pad bounds in pixels
  top: number;
  width: number;
  height: number;
}

export interface TrianglePos {
  alpha: number;
  tau: number;
}

function clamp01(x: number): number {
  if (Number.isNaN(x)) return 0;
  return x < 0 ? 0 : x > 1 ? 1 : x;
}

/**
 * Map a pixel point to (alpha, tau).
 *
 * tau runs 0 at the base (bottom) to 1 at the apex (top). At height tau the
 * triangle's horizontal span shrinks to (1 - tau) * width, centred; alpha is
 * the position across that span. At the apex the span is zero and alpha is
 * undefined, so the previous alpha is retained — leaving the apex restores
 * the old base mix.
 */
export function padToPosition(
  xPx: number,
  yPx: number,
  geometry: PadGeometry,
  previousAlpha: number,
): TrianglePos {
  const yNorm = (yPx - geometry.top) / geometry.height;
  const tau = clamp01(1 - yNorm);
  const rowWidth = (1 - tau) * geometry.width;
  if (rowWidth <= 0) {
    return { alpha: clamp01(previousAlpha), tau };
  }
  const rowLeft = geometry.left + (geometry.width - rowWidth) / 2;
  const alpha = clamp01((xPx - rowLeft) / rowWidth);
  return { alpha, tau };
}

/** Pixel position of a (alpha, tau) point, for drawing the playback dot. */
export function positionToPad(
  pos: TrianglePos,
  geometry: PadGeometry,
): { x: number; y: number } {
  const rowWidth = (1 - pos.tau) * geometry.width;
  const rowLeft = geometry.left + (geometry.width - rowWidth) / 2;
  return {
    x: rowLeft + pos.alpha * rowWidth,
    y: geometry.top + (1 - pos.tau) * geometry.height,
  };
}

export function triangleCorners(geometry: PadGeometry): {
  a: { x: number; y: number };
  b: { x: number; y: number };
  r: { x: number; y: number };
} {
  return {
    a: { x: geometry.left, y: geometry.top + geometry.height },
    b: { x: geometry.left + geometry.width, y: geometry.top + geometry.height },
    r: { x: geometry.left + geometry.width / 2, y: geometry.top },
  };
}
