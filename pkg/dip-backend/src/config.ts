import { z } from "zod";

// Architecture/training knobs.  upsample/activation/optimizer are fixed
// design choices; the literals exist so configs stating them are accepted
// and anything else is rejected.
const schema = z
  .object({
    depth: z.number().int().min(1).default(3),
    feature_channels: z.number().int().min(1).default(128),
    upsample: z.literal("bilinear").default("bilinear"),
    activation: z.literal("leaky_relu").default("leaky_relu"),
    optimizer: z.literal("adam").default("adam"),
    learning_rate: z.number().positive().default(0.001),
    epochs: z.number().int().min(1).default(3000),
    input_noise_channels: z.number().int().min(1).default(32),
    input_noise_scale: z.number().nonnegative().default(0.1),
    seed: z.number().int().default(0),
    restore_known: z.boolean().default(true),
    metrics_path: z.string().nullable().default(null),
  })
  .strict();

export type DipConfig = z.infer<typeof schema>;

export function parseConfig(text: string): DipConfig {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch (err) {
    throw new Error(`config is not valid JSON: ${(err as Error).message}`);
  }
  const result = schema.safeParse(doc);
  if (!result.success) {
    const issue = result.error.issues[0];
    const where = issue.path.length ? issue.path.join(".") : "config";
    throw new Error(`config: ${where}: ${issue.message}`);
  }
  return result.data;
}

export function defaultConfig(): DipConfig {
  return schema.parse({});
}
