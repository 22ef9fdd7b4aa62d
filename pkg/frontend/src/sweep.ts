import { z } from "zod";

/** One row of the runtime's sweep CSV (header row required). */
export const sweepRowSchema = z.object({
  axis: z.string().min(1),
  value: z.coerce.number(),
  seed: z.coerce.number().int(),
  dist_cache: z.coerce.number().int().optional(),
  n: z.coerce.number().int().optional(),
  p: z.coerce.number().int().optional(),
  makespan_s: z.coerce.number().optional(),
  loads: z.coerce.number().optional(),
  R: z.coerce.number().optional(),
  efficiency: z.coerce.number().optional(),
  io_rate_Bps: z.coerce.number().optional(),
  speedup: z.coerce.number().optional(),
});

export type SweepRow = z.infer<typeof sweepRowSchema>;

export const METRICS = ["R", "makespan_s", "efficiency", "io_rate_Bps", "speedup", "loads"] as const;
export type Metric = (typeof METRICS)[number];

export class SweepValidationError extends Error {}

/** Parse the sweep table. Fields never contain commas or quotes. */
export function parseSweep(text: string): SweepRow[] {
  const lines = text.split("\n").filter((line) => line.trim() !== "");
  if (lines.length === 0) {
    throw new SweepValidationError("empty sweep table");
  }
  const header = lines[0].split(",").map((cell) => cell.trim());
  const rows: SweepRow[] = [];
  for (let idx = 1; idx < lines.length; idx++) {
    const cells = lines[idx].split(",");
    if (cells.length !== header.length) {
      throw new SweepValidationError(
        `row ${idx + 1}: ${cells.length} cells, header has ${header.length}`,
      );
    }
    const record: Record<string, string> = {};
    header.forEach((name, col) => {
      const cell = cells[col].trim();
      if (cell !== "") record[name] = cell;
    });
    const parsed = sweepRowSchema.safeParse(record);
    if (!parsed.success) {
      throw new SweepValidationError(
        `row ${idx + 1}: ${parsed.error.issues.map((e) => e.message).join("; ")}`,
      );
    }
    rows.push(parsed.data);
  }
  return rows;
}
