import { Metric, METRICS, SweepRow, SweepValidationError } from "./sweep.js";
import { escapeText, fmt, svgDocument, tag, ticks } from "./svg.js";

const SERIES_COLORS = ["#4c78a8", "#e45756", "#54a24b", "#f58518"];
const MARGIN = { left: 70, top: 20, right: 160, bottom: 50 };
const PLOT_W = 560;
const PLOT_H = 320;

interface Series {
  label: string;
  points: { x: number; y: number }[];
}

/** Mean of the metric per axis value, one series per dist_cache variant. */
export function seriesFor(rows: SweepRow[], metric: Metric): Series[] {
  if (!METRICS.includes(metric)) {
    throw new SweepValidationError(`unknown metric ${metric}`);
  }
  const groups = new Map<string, Map<number, number[]>>();
  for (const row of rows) {
    const value = row[metric];
    if (value === undefined) continue;
    const label =
      row.dist_cache === undefined
        ? "all runs"
        : row.dist_cache
          ? "dist cache on"
          : "dist cache off";
    const byX = groups.get(label) ?? new Map<number, number[]>();
    groups.set(label, byX);
    const bucket = byX.get(row.value) ?? [];
    bucket.push(value);
    byX.set(row.value, bucket);
  }
  const out: Series[] = [];
  for (const [label, byX] of [...groups.entries()].sort()) {
    const points = [...byX.entries()]
      .map(([x, ys]) => ({ x, y: ys.reduce((a, b) => a + b, 0) / ys.length }))
      .sort((a, b) => a.x - b.x);
    out.push({ label, points });
  }
  return out;
}

export function renderSweep(rows: SweepRow[], metric: Metric): string {
  const series = seriesFor(rows, metric);
  const points = series.flatMap((s) => s.points);
  if (points.length === 0) {
    throw new SweepValidationError(`no rows carry metric ${metric}`);
  }
  const axisName = rows[0].axis;
  const xs = points.map((p) => p.x);
  const ys = points.map((p) => p.y);
  const xLo = Math.min(...xs);
  const xHi = Math.max(...xs);
  const yLo = Math.min(0, ...ys);
  const yHi = Math.max(...ys) || 1;
  const sx = (x: number) =>
    MARGIN.left + (xHi > xLo ? ((x - xLo) / (xHi - xLo)) * PLOT_W : PLOT_W / 2);
  const sy = (y: number) => MARGIN.top + PLOT_H - ((y - yLo) / (yHi - yLo)) * PLOT_H;

  const width = MARGIN.left + PLOT_W + MARGIN.right;
  const height = MARGIN.top + PLOT_H + MARGIN.bottom;
  const body: string[] = [];
  body.push(tag("rect", { x: 0, y: 0, width, height, fill: "#ffffff" }));

  // gridlines and axis labels
  for (const y of ticks(yLo, yHi, 5)) {
    const py = sy(y);
    body.push(tag("line", {
      x1: MARGIN.left, y1: py, x2: MARGIN.left + PLOT_W, y2: py,
      stroke: "#eeeeee", "stroke-width": 1,
    }));
    body.push(tag("text", {
      x: MARGIN.left - 6, y: py + 4, "text-anchor": "end", "font-size": 11,
    }, escapeText(fmt(y))));
  }
  for (const x of ticks(xLo, xHi, Math.min(6, new Set(xs).size))) {
    const px = sx(x);
    body.push(tag("text", {
      x: px, y: MARGIN.top + PLOT_H + 18, "text-anchor": "middle", "font-size": 11,
    }, escapeText(fmt(x))));
  }
  body.push(tag("line", {
    x1: MARGIN.left, y1: MARGIN.top + PLOT_H, x2: MARGIN.left + PLOT_W, y2: MARGIN.top + PLOT_H,
    stroke: "#333333", "stroke-width": 1,
  }));
  body.push(tag("line", {
    x1: MARGIN.left, y1: MARGIN.top, x2: MARGIN.left, y2: MARGIN.top + PLOT_H,
    stroke: "#333333", "stroke-width": 1,
  }));
  body.push(tag("text", {
    x: MARGIN.left + PLOT_W / 2, y: height - 12, "text-anchor": "middle", "font-size": 12,
  }, escapeText(axisName)));
  body.push(tag("text", {
    x: 16, y: MARGIN.top + PLOT_H / 2,
    transform: `rotate(-90 16 ${fmt(MARGIN.top + PLOT_H / 2)})`,
    "text-anchor": "middle", "font-size": 12,
  }, escapeText(metric)));

  // one polyline + markers per series, plus a legend entry
  series.forEach((s, idx) => {
    const color = SERIES_COLORS[idx % SERIES_COLORS.length];
    if (s.points.length > 1) {
      const path = s.points.map((p) => `${fmt(sx(p.x))},${fmt(sy(p.y))}`).join(" ");
      body.push(tag("polyline", {
        points: path, fill: "none", stroke: color, "stroke-width": 2,
      }));
    }
    for (const p of s.points) {
      body.push(tag("circle", { cx: sx(p.x), cy: sy(p.y), r: 3.5, fill: color }));
    }
    const ly = MARGIN.top + 10 + idx * 18;
    body.push(tag("rect", {
      x: MARGIN.left + PLOT_W + 12, y: ly - 9, width: 12, height: 12, fill: color,
    }));
    body.push(tag("text", {
      x: MARGIN.left + PLOT_W + 30, y: ly + 2, "font-size": 11,
    }, escapeText(s.label)));
  });

  return svgDocument(width, height, body);
}
