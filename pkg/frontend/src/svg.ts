/** Deterministic SVG building blocks (golden files depend on byte stability). */

export function fmt(x: number): string {
  const rounded = Math.round(x * 100) / 100;
  return Object.is(rounded, -0) ? "0" : String(rounded);
}

export function escapeText(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function tag(
  name: string,
  attrs: Record<string, string | number>,
  body?: string,
): string {
  const parts = Object.entries(attrs)
    .map(([key, value]) => `${key}="${typeof value === "number" ? fmt(value) : value}"`)
    .join(" ");
  const head = parts === "" ? name : `${name} ${parts}`;
  if (body === undefined) return `<${head}/>`;
  return `<${head}>${body}</${name}>`;
}

export function svgDocument(width: number, height: number, body: string[]): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" font-family="sans-serif">`,
    ...body,
    "</svg>",
    "",
  ].join("\n");
}

/** Human time label for a nanosecond quantity. */
export function formatNs(ns: number): string {
  if (ns >= 1e9) return `${fmt(ns / 1e9)}s`;
  if (ns >= 1e6) return `${fmt(ns / 1e6)}ms`;
  if (ns >= 1e3) return `${fmt(ns / 1e3)}us`;
  return `${fmt(ns)}ns`;
}

/** Evenly spaced axis ticks including both ends. */
export function ticks(lo: number, hi: number, count: number): number[] {
  if (hi <= lo) return [lo];
  const out: number[] = [];
  for (let k = 0; k < count; k++) {
    out.push(lo + ((hi - lo) * k) / (count - 1));
  }
  return out;
}
