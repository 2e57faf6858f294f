/**
 * Fashion trend exhibitor: one point per epoch, connected, epoch labels on
 * the x axis, raw score on y with the epoch percentile shown on hover via
 * the point title list returned from layout().
 */

import { TrendPoint } from "./api.js";

export interface TrendLayoutPoint {
  epoch: string;
  x: number;
  y: number;
  score: number;
  percentile: number;
}

export function layoutTrend(
  points: TrendPoint[], width: number, height: number, pad = 28,
): TrendLayoutPoint[] {
  if (points.length === 0) return [];
  const scores = points.map((p) => p.score);
  const lo = Math.min(...scores);
  const hi = Math.max(...scores);
  const span = hi - lo || 1;
  const innerW = width - 2 * pad;
  const innerH = height - 2 * pad;
  const step = points.length > 1 ? innerW / (points.length - 1) : 0;
  return points.map((p, i) => ({
    epoch: p.epoch,
    x: pad + (points.length > 1 ? i * step : innerW / 2),
    y: pad + innerH * (1 - (p.score - lo) / span),
    score: p.score,
    percentile: p.percentile,
  }));
}

export class TrendChart {
  private points: TrendPoint[] = [];

  constructor(private canvas: HTMLCanvasElement, private labelEl: HTMLElement) {}

  setSeries(itemId: string, points: TrendPoint[]): void {
    this.points = points;
    this.labelEl.textContent = itemId ? `trend for ${itemId}` : "";
    this.draw();
  }

  layout(): TrendLayoutPoint[] {
    return layoutTrend(this.points, this.canvas.width, this.canvas.height);
  }

  draw(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const { width, height } = this.canvas;
    ctx.clearRect(0, 0, width, height);
    const pts = this.layout();
    if (pts.length === 0) return;
    ctx.strokeStyle = "#888";
    ctx.beginPath();
    ctx.moveTo(20, height - 24);
    ctx.lineTo(width - 8, height - 24);
    ctx.stroke();
    ctx.strokeStyle = "#c2452d";
    ctx.lineWidth = 2;
    ctx.beginPath();
    pts.forEach((p, i) => (i === 0 ? ctx.moveTo(p.x, p.y) : ctx.lineTo(p.x, p.y)));
    ctx.stroke();
    ctx.fillStyle = "#c2452d";
    ctx.font = "10px sans-serif";
    ctx.textAlign = "center";
    for (const p of pts) {
      ctx.beginPath();
      ctx.arc(p.x, p.y, 3.5, 0, 2 * Math.PI);
      ctx.fill();
      ctx.fillStyle = "#444";
      ctx.fillText(p.epoch, p.x, height - 10);
      ctx.fillStyle = "#c2452d";
    }
  }
}
