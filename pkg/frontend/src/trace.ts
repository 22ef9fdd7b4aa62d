import { z } from "zod";

/** One executed stage from the runtime's JSONL trace file. */
export const traceEventSchema = z.object({
  node: z.number().int().nonnegative(),
  lane: z.string().min(1),
  label: z.string(),
  start_ns: z.number().int().nonnegative(),
  end_ns: z.number().int().nonnegative(),
  i: z.number().int(),
  j: z.number().int(),
});

export type TraceEvent = z.infer<typeof traceEventSchema>;

export class TraceValidationError extends Error {}

export function parseTrace(text: string): TraceEvent[] {
  const events: TraceEvent[] = [];
  const lines = text.split("\n");
  for (let idx = 0; idx < lines.length; idx++) {
    const line = lines[idx].trim();
    if (line === "") continue;
    let raw: unknown;
    try {
      raw = JSON.parse(line);
    } catch {
      throw new TraceValidationError(`line ${idx + 1}: not valid JSON`);
    }
    const parsed = traceEventSchema.safeParse(raw);
    if (!parsed.success) {
      throw new TraceValidationError(
        `line ${idx + 1}: ${parsed.error.issues.map((e) => e.message).join("; ")}`,
      );
    }
    if (parsed.data.end_ns < parsed.data.start_ns) {
      throw new TraceValidationError(`line ${idx + 1}: event ends before it starts`);
    }
    events.push(parsed.data);
  }
  assertLanesDisjoint(events);
  return events;
}

/** Lane rows are serial resources: two events on one lane must not overlap. */
export function assertLanesDisjoint(events: TraceEvent[]): void {
  const byLane = new Map<string, TraceEvent[]>();
  for (const event of events) {
    const key = `${event.node}/${event.lane}`;
    const row = byLane.get(key);
    if (row === undefined) byLane.set(key, [event]);
    else row.push(event);
  }
  for (const [key, row] of byLane) {
    row.sort((a, b) => a.start_ns - b.start_ns || a.end_ns - b.end_ns);
    for (let k = 1; k < row.length; k++) {
      if (row[k].start_ns < row[k - 1].end_ns) {
        throw new TraceValidationError(
          `lane ${key}: overlapping events at ${row[k - 1].start_ns}..${row[k - 1].end_ns} ` +
            `and ${row[k].start_ns}..${row[k].end_ns}`,
        );
      }
    }
  }
}
