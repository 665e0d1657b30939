import * as fs from "fs";
import * as tf from "@tensorflow/tfjs";
import yargs from "yargs";
import { DipConfig, parseConfig } from "./config";
import { readStack, writeStack } from "./dstk";
import { dipInpaint } from "./inpaint";
import { TrainingError } from "./train";

// Exit codes: 1 usage, 2 bad input data or config, 3 training failure.
// All diagnostics go to stderr; stdout stays silent.

function parseArgs(argv: string[]): { input: string; output: string; config: string } | null {
  try {
    const parsed = yargs(argv)
      .usage("dip-inpaint --input <in.dstk> --output <out.dstk> --config <cfg.json>")
      .option("input", { type: "string", demandOption: true, describe: "sparse input stack" })
      .option("output", { type: "string", demandOption: true, describe: "dense output stack" })
      .option("config", { type: "string", demandOption: true, describe: "JSON config file" })
      .strict()
      .exitProcess(false)
      .fail((msg, err) => {
        throw err ?? new Error(msg);
      })
      .parseSync();
    return { input: parsed.input, output: parsed.output, config: parsed.config };
  } catch (err) {
    console.error(`dip-inpaint: ${(err as Error).message}`);
    return null;
  }
}

export async function main(argv: string[]): Promise<number> {
  const args = parseArgs(argv);
  if (args === null) return 1;

  let cfg: DipConfig;
  let input;
  try {
    cfg = parseConfig(fs.readFileSync(args.config, "utf8"));
    input = readStack(args.input);
  } catch (err) {
    console.error(`dip-inpaint: ${(err as Error).message}`);
    return 2;
  }

  // The pure-JS kernels are deterministic for a fixed seed; the WebGL
  // backend is never available under Node anyway.  Prod mode skips per-op
  // debug checks without changing any arithmetic.
  tf.enableProdMode();
  tf.setBackend("cpu");
  await tf.ready();

  const logEvery = Math.max(1, Math.floor(cfg.epochs / 10));
  try {
    const { stack, metrics } = dipInpaint(input, cfg, (epoch, loss) => {
      if (epoch === 1 || epoch % logEvery === 0 || epoch === cfg.epochs) {
        console.error(`dip-inpaint: epoch ${epoch}/${cfg.epochs} loss ${loss.toExponential(4)}`);
      }
    });
    writeStack(args.output, stack);
    if (cfg.metrics_path !== null) {
      fs.writeFileSync(
        cfg.metrics_path,
        JSON.stringify({ initial_loss: metrics.initialLoss, final_loss: metrics.finalLoss }) + "\n",
      );
    }
  } catch (err) {
    console.error(`dip-inpaint: ${(err as Error).message}`);
    return err instanceof TrainingError ? 3 : 2;
  }
  return 0;
}
