/**
 * Export manifest: the exact request that produced a file set, recorded as
 * JSON next to the files so any export can be reproduced or audited.
 */

import fs from "node:fs";

import { z } from "zod";

export const manifestSchema = z.object({
  formatVersion: z.literal(1),
  model: z.string().min(1),
  serverModel: z.string().min(1).nullable(),
  dataset: z.string().min(1),
  datasetPath: z.string().min(1),
  split: z.string().min(1),
  maxItems: z.number().int().positive().nullable(),
  maxQueries: z.number().int().positive().nullable(),
  batchSize: z.number().int().positive(),
  normalize: z.boolean(),
  outputs: z.record(z.string()),
  stats: z.object({
    corpusEmitted: z.number().int().nonnegative(),
    queriesEmitted: z.number().int().nonnegative(),
    qrelsEmitted: z.number().int().nonnegative(),
    qrelsDropped: z.number().int().nonnegative(),
  }),
  failures: z.array(
    z.object({
      id: z.string(),
      stage: z.enum(["corpus", "queries"]),
      error: z.string(),
    }),
  ),
  partial: z.boolean(),
  createdAt: z.string(),
});

export type ExportManifest = z.infer<typeof manifestSchema>;

export function writeManifest(filePath: string, manifest: ExportManifest): void {
  manifestSchema.parse(manifest);
  fs.writeFileSync(filePath, JSON.stringify(manifest, null, 2) + "\n");
}

export function readManifest(filePath: string): ExportManifest {
  return manifestSchema.parse(JSON.parse(fs.readFileSync(filePath, "utf-8")));
}
