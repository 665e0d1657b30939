import * as tf from "@tensorflow/tfjs";
import { DipConfig } from "./config";

export interface TrainMetrics {
  initialLoss: number; // loss observed at epoch 1
  finalLoss: number; // loss observed at the last epoch
}

/** Optimization diverged or the network produced non-finite values. */
export class TrainingError extends Error {}

/**
 * Mean squared difference over known voxels only.  obs may hold NaN at
 * unknown voxels; those positions are excluded by the mask before any
 * arithmetic touches them.
 */
export function maskedLoss(pred: tf.Tensor, obs: tf.Tensor, mask: tf.Tensor): tf.Scalar {
  return tf.tidy(() => {
    const m = tf.cast(mask, "bool");
    const count = tf.sum(tf.cast(m, "float32"));
    if ((count.dataSync() as Float32Array)[0] === 0) {
      throw new Error("mask is empty: no known voxels");
    }
    const target = tf.where(m, obs, tf.zerosLike(obs));
    const diff = tf.mul(tf.sub(pred, target), tf.cast(m, "float32"));
    return tf.div(tf.sum(tf.square(diff)), count);
  });
}

/**
 * Adam on the masked loss for exactly cfg.epochs steps.  Aborts on a
 * non-finite loss, reporting the epoch at which it appeared.
 */
export function train(
  model: tf.LayersModel,
  z: tf.Tensor,
  obs: tf.Tensor,
  mask: tf.Tensor,
  cfg: DipConfig,
  onEpoch?: (epoch: number, loss: number) => void,
): TrainMetrics {
  const optimizer = tf.train.adam(cfg.learning_rate);
  // scope the update to this model's variables; .val is runtime-public
  const weights = model.trainableWeights.map(
    (v) => (v as unknown as { val: tf.Variable }).val,
  );
  let initialLoss = NaN;
  let finalLoss = NaN;
  try {
    for (let epoch = 1; epoch <= cfg.epochs; epoch++) {
      const cost = optimizer.minimize(
        () => maskedLoss(model.apply(z) as tf.Tensor, obs, mask),
        true,
        weights,
      )!;
      const loss = (cost.dataSync() as Float32Array)[0];
      cost.dispose();
      if (!Number.isFinite(loss)) {
        throw new TrainingError(`non-finite loss at epoch ${epoch}`);
      }
      if (epoch === 1) initialLoss = loss;
      finalLoss = loss;
      if (onEpoch) onEpoch(epoch, loss);
    }
  } finally {
    optimizer.dispose();
  }
  return { initialLoss, finalLoss };
}
