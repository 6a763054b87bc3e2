/** Zod schemas for every file the adapter reads or writes. */

import { z } from "zod";

export const ManifestSchema = z.object({
  schema_version: z.literal(1),
  checksum: z.string().regex(/^[0-9a-f]{16}$/),
  stage: z.number().int().nonnegative(),
  phase: z.enum(["warmup", "curriculum"]),
  fraction: z.number().gt(0).lte(1),
  direction: z.string(),
  cycles: z.number().int().positive(),
  tasks: z.array(z.number().int().nonnegative()),
  samples: z.array(z.number().int().nonnegative()).nonempty(),
  difficulty: z.record(z.string(), z.number()).nullable(),
});
export type Manifest = z.infer<typeof ManifestSchema>;

export const RunConfigSchema = z.object({
  schema_version: z.literal(1),
  checksum: z.string(),
  mode: z.enum(["dynamic", "fixed", "simple"]),
  scheduler: z.object({
    stages: z.number().int().positive(),
    cycles: z.number().int().min(2),
    warmup_cycles: z.number().int().positive(),
  }).passthrough(),
  trainer: z.object({
    learning_rate: z.number().positive(),
    batch_size: z.number().int().positive(),
    passes_per_cycle: z.number().int().positive().default(1),
    seed: z.number().int(),
  }),
}).passthrough();
export type RunConfig = z.infer<typeof RunConfigSchema>;

export const SampleSchema = z.object({
  sample_id: z.number().int().nonnegative(),
  features: z.array(z.number()).nonempty(),
  answer: z.array(z.number().int().nonnegative()).nonempty(),
  task_type: z.number().int().nonnegative(),
});
export type SampleRecord = z.infer<typeof SampleSchema>;

export const ReportHeaderSchema = z.object({
  schema_version: z.literal(1),
  checksum: z.string().regex(/^[0-9a-f]{16}$/),
  checksum_body: z.string().regex(/^[0-9a-f]{16}$/),
  iteration: z.number().int().nonnegative(),
  cycle: z.number().int().positive(),
  n: z.number().int().positive(),
});

export const ReportLineSchema = z.object({
  id: z.number().int().nonnegative(),
  task: z.number().int().nonnegative(),
  loss: z.number().nonnegative(),
});

export const DoneSchema = z.object({
  schema_version: z.literal(1),
  status: z.literal("complete"),
}).passthrough();
