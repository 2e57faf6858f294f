/**
 * Viewport math for the visual space explorer.
 *
 * A viewport is a world-space center, a zoom scale (pixels per world
 * unit), and a cosmetic rotation. All functions are pure so pan/zoom/
 * rotate behavior is unit-testable without a canvas.
 */

export interface Viewport {
  cx: number;
  cy: number;
  scale: number;
  rotation: number; // radians, counter-clockwise
}

export interface WorldRect {
  xMin: number;
  xMax: number;
  yMin: number;
  yMax: number;
}

export interface ScreenPoint {
  x: number;
  y: number;
}

export function worldToScreen(
  v: Viewport, wx: number, wy: number, width: number, height: number,
): ScreenPoint {
  const dx = wx - v.cx;
  const dy = wy - v.cy;
  const cos = Math.cos(v.rotation);
  const sin = Math.sin(v.rotation);
  const rx = dx * cos - dy * sin;
  const ry = dx * sin + dy * cos;
  return { x: width / 2 + rx * v.scale, y: height / 2 - ry * v.scale };
}

export function screenToWorld(
  v: Viewport, sx: number, sy: number, width: number, height: number,
): ScreenPoint {
  const rx = (sx - width / 2) / v.scale;
  const ry = (height / 2 - sy) / v.scale;
  const cos = Math.cos(-v.rotation);
  const sin = Math.sin(-v.rotation);
  return { x: v.cx + rx * cos - ry * sin, y: v.cy + rx * sin + ry * cos };
}

/** Zoom by a factor keeping the world point under the cursor fixed. */
export function zoomAt(
  v: Viewport, sx: number, sy: number, factor: number, width: number, height: number,
): Viewport {
  const anchor = screenToWorld(v, sx, sy, width, height);
  const scale = clampScale(v.scale * factor);
  const zoomed = { ...v, scale };
  const moved = worldToScreen(zoomed, anchor.x, anchor.y, width, height);
  return panBy(zoomed, sx - moved.x, sy - moved.y);
}

/** Pan by a screen-space delta (e.g. a mouse drag). */
export function panBy(v: Viewport, dxPix: number, dyPix: number): Viewport {
  const cos = Math.cos(-v.rotation);
  const sin = Math.sin(-v.rotation);
  const rx = dxPix / v.scale;
  const ry = -dyPix / v.scale;
  return { ...v, cx: v.cx - (rx * cos - ry * sin), cy: v.cy - (rx * sin + ry * cos) };
}

/** Cosmetic 2D rotation of the view; the server never sees it. */
export function rotateBy(v: Viewport, dRadians: number): Viewport {
  return { ...v, rotation: v.rotation + dRadians };
}

/** Axis-aligned world rectangle covering the (possibly rotated) screen. */
export function visibleWorldRect(v: Viewport, width: number, height: number): WorldRect {
  const corners = [
    screenToWorld(v, 0, 0, width, height),
    screenToWorld(v, width, 0, width, height),
    screenToWorld(v, 0, height, width, height),
    screenToWorld(v, width, height, width, height),
  ];
  const xs = corners.map((c) => c.x);
  const ys = corners.map((c) => c.y);
  return {
    xMin: Math.min(...xs),
    xMax: Math.max(...xs),
    yMin: Math.min(...ys),
    yMax: Math.max(...ys),
  };
}

/** Initial viewport framing the given bounds with 10% padding. */
export function fitBounds(bounds: WorldRect, width: number, height: number): Viewport {
  const spanX = Math.max(bounds.xMax - bounds.xMin, 1e-9);
  const spanY = Math.max(bounds.yMax - bounds.yMin, 1e-9);
  const scale = 0.9 * Math.min(width / spanX, height / spanY);
  return {
    cx: (bounds.xMin + bounds.xMax) / 2,
    cy: (bounds.yMin + bounds.yMax) / 2,
    scale: clampScale(scale),
    rotation: 0,
  };
}

export function centerOn(v: Viewport, wx: number, wy: number): Viewport {
  return { ...v, cx: wx, cy: wy };
}

function clampScale(scale: number): number {
  return Math.min(Math.max(scale, 1e-6), 1e9);
}
