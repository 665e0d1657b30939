import * as tf from "@tensorflow/tfjs";
import seedrandom from "seedrandom";
import { DipConfig } from "./config";
import { Stack } from "./dstk";
import { train, TrainingError, TrainMetrics } from "./train";
import { buildNetwork } from "./unet";

export interface InpaintResult {
  stack: Stack;
  metrics: TrainMetrics;
}

/**
 * Fills the NaN voxels of a sparse stack by fitting the network to the known
 * voxels and reading the full prediction back out.
 *
 * Values are normalized by the max absolute finite value; H and W are
 * reflect-padded to multiples of 2^depth; the noise input z is drawn once
 * (uniform in [0, input_noise_scale], seeded) and held fixed over all
 * epochs.  The output is de-normalized, cropped to the input dims, and with
 * restore_known the known voxels are overwritten with the observed values.
 */
export function dipInpaint(
  stack: Stack,
  cfg: DipConfig,
  onEpoch?: (epoch: number, loss: number) => void,
): InpaintResult {
  const { t, h, w, values } = stack;
  const n = values.length;
  const mask = new Uint8Array(n);
  let known = 0;
  let maxAbs = 0;
  for (let i = 0; i < n; i++) {
    const v = values[i];
    if (Number.isFinite(v)) {
      mask[i] = 1;
      known++;
      const a = Math.abs(v);
      if (a > maxAbs) maxAbs = a;
    }
  }
  if (known === 0) {
    throw new Error("input stack has no finite voxels");
  }
  const scale = maxAbs > 0 ? maxAbs : 1;
  const filled = new Float32Array(n);
  for (let i = 0; i < n; i++) {
    filled[i] = mask[i] ? values[i] / scale : 0;
  }

  const multiple = 1 << cfg.depth;
  const ph = (multiple - (h % multiple)) % multiple;
  const pw = (multiple - (w % multiple)) % multiple;
  if (ph >= h || pw >= w) {
    throw new Error(`dims ${h}x${w} too small to reflect-pad to multiples of ${multiple}`);
  }
  const hp = h + ph;
  const wp = w + pw;

  // channels-last layout with time frames as channels: [1, hp, wp, t]
  const [obs, maskBool] = tf.tidy(() => {
    const pads: Array<[number, number]> = [
      [0, 0],
      [0, ph],
      [0, pw],
    ];
    const obsPad = tf.mirrorPad(tf.tensor3d(filled, [t, h, w]), pads, "reflect");
    const maskPad = tf.mirrorPad(
      tf.tensor3d(new Float32Array(mask), [t, h, w]),
      pads,
      "reflect",
    );
    return [
      obsPad.transpose([1, 2, 0]).expandDims(0),
      tf.cast(maskPad.transpose([1, 2, 0]).expandDims(0), "bool"),
    ];
  });

  const rng = seedrandom(String(cfg.seed));
  const zData = new Float32Array(hp * wp * cfg.input_noise_channels);
  for (let i = 0; i < zData.length; i++) {
    zData[i] = rng() * cfg.input_noise_scale;
  }
  const z = tf.tensor4d(zData, [1, hp, wp, cfg.input_noise_channels]);

  const model = buildNetwork(cfg, t, hp, wp);
  try {
    const metrics = train(model, z, obs, maskBool, cfg, onEpoch);
    const pred = tf.tidy(() =>
      (model.predict(z) as tf.Tensor4D)
        .squeeze([0])
        .transpose([2, 0, 1])
        .slice([0, 0, 0], [t, h, w])
        .mul(scale),
    );
    const dense = new Float32Array(pred.dataSync() as Float32Array);
    pred.dispose();
    for (let i = 0; i < n; i++) {
      if (cfg.restore_known && mask[i]) {
        dense[i] = values[i];
        continue;
      }
      if (!Number.isFinite(dense[i])) {
        throw new TrainingError("non-finite value in network output");
      }
    }
    return { stack: { ...stack, values: dense }, metrics };
  } finally {
    model.dispose();
    z.dispose();
    obs.dispose();
    maskBool.dispose();
  }
}
