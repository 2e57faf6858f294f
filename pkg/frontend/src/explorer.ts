/**
 * Visual space explorer: a canvas scatter of the style map.
 *
 * Rendering is split in two: computeRenderList() turns state into screen
 * points (pure, covered by tests), draw() paints that list. The backdrop
 * comes from /map slices colored by epoch percentile; the current result
 * is overlaid colored by fashionability rank; the query item gets a ring.
 */

import { MapPoint, Neighbor } from "./api.js";
import { colorForPercentile, colorForRank } from "./color.js";
import {
  Viewport, WorldRect, fitBounds, panBy, rotateBy, screenToWorld,
  visibleWorldRect, worldToScreen, zoomAt,
} from "./transform.js";

export interface RenderPoint {
  itemId: string;
  x: number;
  y: number;
  radius: number;
  color: string;
  kind: "backdrop" | "result" | "query";
}

export interface ExplorerCallbacks {
  onViewportSettled: (rect: WorldRect) => void;
  onPointClicked: (itemId: string) => void;
}

const RESULT_RADIUS = 6;
const BACKDROP_RADIUS = 2.5;
const CLICK_TOLERANCE = 8;

export class Explorer {
  viewport: Viewport;
  backdrop: MapPoint[] = [];
  results: Neighbor[] = [];
  queryItem: { id: string; x: number; y: number } | null = null;
  selectedId: string | null = null;

  private dragging = false;
  private lastDrag: { x: number; y: number } | null = null;
  private moved = false;

  constructor(
    private canvas: HTMLCanvasElement,
    bounds: WorldRect,
    private callbacks: ExplorerCallbacks,
    private settleDebounceMs = 200,
  ) {
    this.viewport = fitBounds(bounds, canvas.width, canvas.height);
    this.bindEvents();
  }

  get width(): number {
    return this.canvas.width;
  }

  get height(): number {
    return this.canvas.height;
  }

  visibleRect(): WorldRect {
    return visibleWorldRect(this.viewport, this.width, this.height);
  }

  setBackdrop(points: MapPoint[]): void {
    this.backdrop = points;
    this.draw();
  }

  setResults(queryItem: { id: string; x: number; y: number } | null,
             neighbors: Neighbor[]): void {
    this.queryItem = queryItem;
    this.results = neighbors;
    if (queryItem) {
      this.viewport = { ...this.viewport, cx: queryItem.x, cy: queryItem.y };
    }
    this.draw();
    this.scheduleSettle();
  }

  computeRenderList(): RenderPoint[] {
    const out: RenderPoint[] = [];
    const resultIds = new Set(this.results.map((n) => n.item_id));
    for (const p of this.backdrop) {
      if (resultIds.has(p.item_id) || p.item_id === this.queryItem?.id) continue;
      const s = worldToScreen(this.viewport, p.x, p.y, this.width, this.height);
      out.push({
        itemId: p.item_id, x: s.x, y: s.y,
        radius: BACKDROP_RADIUS,
        color: colorForPercentile(p.fash_percentile),
        kind: "backdrop",
      });
    }
    const m = this.results.length;
    for (const n of this.results) {
      const s = worldToScreen(this.viewport, n.x, n.y, this.width, this.height);
      out.push({
        itemId: n.item_id, x: s.x, y: s.y,
        radius: RESULT_RADIUS,
        color: colorForRank(n.fash_rank, m),
        kind: "result",
      });
    }
    if (this.queryItem) {
      const s = worldToScreen(
        this.viewport, this.queryItem.x, this.queryItem.y, this.width, this.height,
      );
      out.push({
        itemId: this.queryItem.id, x: s.x, y: s.y,
        radius: RESULT_RADIUS + 2, color: "#222", kind: "query",
      });
    }
    return out;
  }

  draw(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return; // headless test environment
    ctx.clearRect(0, 0, this.width, this.height);
    for (const p of this.computeRenderList()) {
      ctx.beginPath();
      ctx.arc(p.x, p.y, p.radius, 0, 2 * Math.PI);
      if (p.kind === "query") {
        ctx.lineWidth = 3;
        ctx.strokeStyle = p.color;
        ctx.stroke();
      } else {
        ctx.fillStyle = p.color;
        ctx.globalAlpha = p.kind === "backdrop" ? 0.55 : 0.95;
        ctx.fill();
        ctx.globalAlpha = 1;
        if (p.itemId === this.selectedId) {
          ctx.lineWidth = 2;
          ctx.strokeStyle = "#111";
          ctx.stroke();
        }
      }
    }
  }

  /** Nearest rendered point within tolerance, results before backdrop. */
  hitTest(sx: number, sy: number): string | null {
    let best: { id: string; d: number; kind: string } | null = null;
    for (const p of this.computeRenderList()) {
      const d = Math.hypot(p.x - sx, p.y - sy);
      if (d > p.radius + CLICK_TOLERANCE) continue;
      const rank = p.kind === "backdrop" ? 1 : 0;
      const bestRank = best ? (best.kind === "backdrop" ? 1 : 0) : 2;
      if (!best || rank < bestRank || (rank === bestRank && d < best.d)) {
        best = { id: p.itemId, d, kind: p.kind };
      }
    }
    return best?.id ?? null;
  }

  zoom(sx: number, sy: number, factor: number): void {
    this.viewport = zoomAt(this.viewport, sx, sy, factor, this.width, this.height);
    this.draw();
    this.scheduleSettle();
  }

  pan(dxPix: number, dyPix: number): void {
    this.viewport = panBy(this.viewport, dxPix, dyPix);
    this.draw();
    this.scheduleSettle();
  }

  rotate(dRadians: number): void {
    // cosmetic: spins the transform only, no server involvement
    this.viewport = rotateBy(this.viewport, dRadians);
    this.draw();
  }

  private settleTimer: ReturnType<typeof setTimeout> | undefined;

  private scheduleSettle(): void {
    if (this.settleTimer !== undefined) clearTimeout(this.settleTimer);
    this.settleTimer = setTimeout(() => {
      this.settleTimer = undefined;
      this.callbacks.onViewportSettled(this.visibleRect());
    }, this.settleDebounceMs);
  }

  private bindEvents(): void {
    this.canvas.addEventListener("wheel", (ev) => {
      ev.preventDefault();
      const rect = this.canvas.getBoundingClientRect();
      const factor = ev.deltaY < 0 ? 1.15 : 1 / 1.15;
      this.zoom(ev.clientX - rect.left, ev.clientY - rect.top, factor);
    });
    this.canvas.addEventListener("mousedown", (ev) => {
      this.dragging = true;
      this.moved = false;
      this.lastDrag = { x: ev.clientX, y: ev.clientY };
    });
    window.addEventListener("mousemove", (ev) => {
      if (!this.dragging || !this.lastDrag) return;
      const dx = ev.clientX - this.lastDrag.x;
      const dy = ev.clientY - this.lastDrag.y;
      if (Math.hypot(dx, dy) > 2) this.moved = true;
      this.lastDrag = { x: ev.clientX, y: ev.clientY };
      this.pan(dx, dy);
    });
    window.addEventListener("mouseup", () => {
      this.dragging = false;
      this.lastDrag = null;
    });
    this.canvas.addEventListener("click", (ev) => {
      if (this.moved) return; // end of a drag, not a click
      const rect = this.canvas.getBoundingClientRect();
      const hit = this.hitTest(ev.clientX - rect.left, ev.clientY - rect.top);
      if (hit) {
        this.selectedId = hit;
        this.draw();
        this.callbacks.onPointClicked(hit);
      }
    });
  }
}
