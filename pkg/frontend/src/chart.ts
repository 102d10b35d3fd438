// Profile chart over distance (one line per learning iteration, with legend)
// and intervention-rate bars per lap. Series assembly is pure; rendering
// targets a minimal 2D-context surface so it stays testable off-browser.

import type { LapRates, ProfileSeries } from "./state.js";

export const SERIES_COLORS = [
  "#8c8c8c",
  "#1f77b4",
  "#2ca02c",
  "#d62728",
  "#9467bd",
  "#ff7f0e",
  "#17becf",
  "#bcbd22",
];

export interface ChartSeries {
  label: string;
  color: string;
  points: [number, number][];
}

export function assembleSeries(profiles: ProfileSeries[]): ChartSeries[] {
  return [...profiles]
    .sort((a, b) => a.iteration - b.iteration)
    .map((p) => ({
      label: `iteration ${p.iteration}`,
      color: SERIES_COLORS[p.iteration % SERIES_COLORS.length] ?? "#000",
      points: p.points,
    }));
}

export interface Surface2D {
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
}

export function chartBounds(series: ChartSeries[]): { dMax: number; vMax: number } {
  let dMax = 1;
  let vMax = 10;
  for (const s of series) {
    for (const [d, v] of s.points) {
      if (d > dMax) dMax = d;
      if (v > vMax) vMax = v;
    }
  }
  return { dMax, vMax: vMax * 1.08 };
}

export function drawProfileChart(
  ctx: Surface2D,
  series: ChartSeries[],
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  if (!series.length) return;
  const { dMax, vMax } = chartBounds(series);
  const pad = 28;
  const sx = (d: number) => pad + (d / dMax) * (width - 2 * pad);
  const sy = (v: number) => height - pad - (v / vMax) * (height - 2 * pad);

  ctx.strokeStyle = "#ddd";
  ctx.lineWidth = 1;
  for (let g = 0; g <= 4; g++) {
    const v = (vMax * g) / 4;
    ctx.beginPath();
    ctx.moveTo(pad, sy(v));
    ctx.lineTo(width - pad, sy(v));
    ctx.stroke();
    ctx.fillStyle = "#888";
    ctx.font = "10px sans-serif";
    ctx.fillText(`${Math.round(v)} km/h`, 2, sy(v) - 2);
  }

  series.forEach((s, i) => {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = i === series.length - 1 ? 2.2 : 1.2;
    ctx.beginPath();
    s.points.forEach(([d, v], k) => {
      if (k === 0) ctx.moveTo(sx(d), sy(v));
      else ctx.lineTo(sx(d), sy(v));
    });
    ctx.stroke();
    ctx.fillStyle = s.color;
    ctx.fillRect(width - pad - 110, 8 + i * 14, 10, 10);
    ctx.fillStyle = "#333";
    ctx.font = "11px sans-serif";
    ctx.fillText(s.label, width - pad - 95, 17 + i * 14);
  });
}

export function drawIrBars(
  ctx: Surface2D,
  history: LapRates[],
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  if (!history.length) return;
  const pad = 24;
  const slot = (width - 2 * pad) / history.length;
  const bar = Math.min(slot * 0.22, 26);
  const keys: ["pedal_ir", "set_speed_ir", "combined_ir"] = [
    "pedal_ir",
    "set_speed_ir",
    "combined_ir",
  ];
  const colors = ["#d62728", "#1f77b4", "#555"];
  history.forEach((entry, i) => {
    keys.forEach((key, j) => {
      const frac = entry.rates[key];
      const h = frac * (height - 2 * pad);
      ctx.fillStyle = colors[j] ?? "#000";
      ctx.fillRect(pad + i * slot + j * bar, height - pad - h, bar - 2, h);
    });
    ctx.fillStyle = "#333";
    ctx.font = "11px sans-serif";
    ctx.fillText(`lap ${entry.lapId}`, pad + i * slot, height - 8);
  });
  ctx.fillStyle = "#888";
  ctx.font = "10px sans-serif";
  ctx.fillText("pedal / set-speed / combined IR", pad, 12);
}
