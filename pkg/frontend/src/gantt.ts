import { TraceEvent } from "./trace.js";
import { escapeText, fmt, formatNs, svgDocument, tag, ticks } from "./svg.js";

/** Colors keyed by lane kind (digits stripped from the lane name). */
const LANE_COLORS: Record<string, string> = {
  cpu: "#4c78a8",
  gpu: "#f58518",
  up: "#54a24b",
  down: "#72b7b2",
  io: "#e45756",
};
const FALLBACK_COLOR = "#b279a2";

const MARGIN_LEFT = 150;
const MARGIN_TOP = 30;
const MARGIN_BOTTOM = 40;
const ROW_HEIGHT = 26;
const BAR_HEIGHT = 18;
const PLOT_WIDTH = 860;

export function laneColor(lane: string): string {
  const kind = lane.replace(/[0-9.]+$/, "");
  return LANE_COLORS[kind] ?? FALLBACK_COLOR;
}

/**
 * Render a per-lane timeline: one row per (node, lane), one box per
 * executed stage. Events must already be validated as non-overlapping.
 */
export function renderGantt(events: TraceEvent[]): string {
  const laneKeys = [...new Set(events.map((e) => `${e.node}/${e.lane}`))].sort(
    (a, b) => {
      const [nodeA, laneA] = a.split("/");
      const [nodeB, laneB] = b.split("/");
      return Number(nodeA) - Number(nodeB) || laneA.localeCompare(laneB);
    },
  );
  const rows = Math.max(laneKeys.length, 1);
  const height = MARGIN_TOP + rows * ROW_HEIGHT + MARGIN_BOTTOM;
  const width = MARGIN_LEFT + PLOT_WIDTH + 20;

  const t0 = events.length ? Math.min(...events.map((e) => e.start_ns)) : 0;
  const t1 = events.length ? Math.max(...events.map((e) => e.end_ns)) : 1;
  const span = Math.max(t1 - t0, 1);
  const x = (ns: number) => MARGIN_LEFT + ((ns - t0) / span) * PLOT_WIDTH;

  const body: string[] = [];
  body.push(tag("rect", { x: 0, y: 0, width, height, fill: "#ffffff" }));

  // row labels and separators
  laneKeys.forEach((key, row) => {
    const y = MARGIN_TOP + row * ROW_HEIGHT;
    body.push(
      tag(
        "text",
        { x: MARGIN_LEFT - 8, y: y + ROW_HEIGHT / 2 + 4, "text-anchor": "end", "font-size": 12 },
        escapeText(key),
      ),
    );
    body.push(
      tag("line", {
        x1: MARGIN_LEFT, y1: y + ROW_HEIGHT, x2: MARGIN_LEFT + PLOT_WIDTH, y2: y + ROW_HEIGHT,
        stroke: "#dddddd", "stroke-width": 1,
      }),
    );
  });

  // time axis
  const axisY = MARGIN_TOP + rows * ROW_HEIGHT;
  for (const t of ticks(t0, t1, 6)) {
    const tx = x(t);
    body.push(
      tag("line", { x1: tx, y1: MARGIN_TOP, x2: tx, y2: axisY, stroke: "#eeeeee", "stroke-width": 1 }),
    );
    body.push(
      tag(
        "text",
        { x: tx, y: axisY + 16, "text-anchor": "middle", "font-size": 11 },
        escapeText(formatNs(t - t0)),
      ),
    );
  }

  // one box per event
  const rowOf = new Map(laneKeys.map((key, row) => [key, row]));
  for (const event of events) {
    const row = rowOf.get(`${event.node}/${event.lane}`)!;
    const y = MARGIN_TOP + row * ROW_HEIGHT + (ROW_HEIGHT - BAR_HEIGHT) / 2;
    const x0 = x(event.start_ns);
    const barWidth = Math.max(x(event.end_ns) - x0, 0.5);
    const title = `${event.label} (${event.i},${event.j}) ${formatNs(event.end_ns - event.start_ns)}`;
    body.push(
      tag(
        "rect",
        {
          x: x0, y, width: barWidth, height: BAR_HEIGHT,
          fill: laneColor(event.lane), stroke: "#333333", "stroke-width": 0.5,
        },
        tag("title", {}, escapeText(title)),
      ),
    );
    if (barWidth > 40) {
      body.push(
        tag(
          "text",
          { x: x0 + 3, y: y + BAR_HEIGHT - 5, "font-size": 10, fill: "#ffffff" },
          escapeText(event.label),
        ),
      );
    }
  }

  if (events.length === 0) {
    body.push(
      tag(
        "text",
        { x: MARGIN_LEFT + PLOT_WIDTH / 2, y: MARGIN_TOP + ROW_HEIGHT / 2, "text-anchor": "middle", "font-size": 12, fill: "#888888" },
        "no events",
      ),
    );
  }
  return svgDocument(width, height, body);
}
