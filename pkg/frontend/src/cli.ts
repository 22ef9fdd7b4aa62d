#!/usr/bin/env node
import { readFileSync, writeFileSync } from "fs";

import { renderGantt } from "./gantt.js";
import { renderSweep } from "./plot.js";
import { Metric, METRICS, parseSweep, SweepValidationError } from "./sweep.js";
import { parseTrace, TraceValidationError } from "./trace.js";

const USAGE = `usage:
  allpairs-viz gantt <trace.jsonl> <out.svg>
  allpairs-viz sweep <table.csv> --metric <${METRICS.join("|")}> <out.svg>`;

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  try {
    if (command === "gantt") {
      const [tracePath, outPath] = rest;
      if (!tracePath || !outPath) {
        console.error(USAGE);
        return 2;
      }
      const events = parseTrace(readFileSync(tracePath, "utf8"));
      writeFileSync(outPath, renderGantt(events));
      console.log(`wrote ${outPath} (${events.length} events)`);
      return 0;
    }
    if (command === "sweep") {
      const metricIdx = rest.indexOf("--metric");
      if (metricIdx === -1 || rest.length < 4) {
        console.error(USAGE);
        return 2;
      }
      const metric = rest[metricIdx + 1];
      const positional = rest.filter((_, k) => k !== metricIdx && k !== metricIdx + 1);
      const [tablePath, outPath] = positional;
      if (!tablePath || !outPath) {
        console.error(USAGE);
        return 2;
      }
      if (!METRICS.includes(metric as Metric)) {
        console.error(`error: unknown metric ${metric}; expected one of ${METRICS.join(", ")}`);
        return 2;
      }
      const rows = parseSweep(readFileSync(tablePath, "utf8"));
      writeFileSync(outPath, renderSweep(rows, metric as Metric));
      console.log(`wrote ${outPath} (${rows.length} rows)`);
      return 0;
    }
    console.error(USAGE);
    return 2;
  } catch (err) {
    if (err instanceof TraceValidationError || err instanceof SweepValidationError) {
      console.error(`error: ${err.message}`);
      return 1;
    }
    if (err instanceof Error && "code" in err && err.code === "ENOENT") {
      console.error(`error: ${err.message}`);
      return 1;
    }
    throw err;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
