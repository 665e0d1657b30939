import * as tf from "@tensorflow/tfjs";
import { DipConfig } from "./config";
import { patchResizeBilinearGradient } from "./tfpatch";

/**
 * Encoder/decoder with cfg.depth pooling stages, a fixed channel width at
 * every depth, bilinear upsampling and skip connections; a linear 1x1 head
 * emits one output channel per time frame.  Input dims must be divisible by
 * 2^depth so pooled shapes align with the skips.
 *
 * Every kernel initializer is seeded from cfg.seed, so two builds with the
 * same config have identical initial parameters.
 */
export function buildNetwork(
  cfg: DipConfig,
  outChannels: number,
  height: number,
  width: number,
): tf.LayersModel {
  if (cfg.depth < 1) {
    throw new Error(`depth must be >= 1, got ${cfg.depth}`);
  }
  patchResizeBilinearGradient();
  const stride = 1 << cfg.depth;
  if (height % stride !== 0 || width % stride !== 0) {
    throw new Error(`input dims ${height}x${width} not divisible by ${stride}`);
  }

  let seedAt = cfg.seed * 1000;
  const conv = (x: tf.SymbolicTensor, kernel: number, filters: number, linear = false) => {
    const y = tf.layers
      .conv2d({
        filters,
        kernelSize: kernel,
        padding: "same",
        kernelInitializer: tf.initializers.glorotUniform({ seed: ++seedAt }),
      })
      .apply(x) as tf.SymbolicTensor;
    return linear ? y : (tf.layers.leakyReLU().apply(y) as tf.SymbolicTensor);
  };

  const input = tf.input({ shape: [height, width, cfg.input_noise_channels] });
  let x = input;
  const skips: tf.SymbolicTensor[] = [];
  for (let d = 0; d < cfg.depth; d++) {
    x = conv(x, 3, cfg.feature_channels);
    x = conv(x, 3, cfg.feature_channels);
    skips.push(x);
    x = tf.layers.maxPooling2d({ poolSize: 2 }).apply(x) as tf.SymbolicTensor;
  }
  x = conv(x, 3, cfg.feature_channels);
  x = conv(x, 3, cfg.feature_channels);
  for (let d = cfg.depth - 1; d >= 0; d--) {
    x = tf.layers
      .upSampling2d({ size: [2, 2], interpolation: "bilinear" })
      .apply(x) as tf.SymbolicTensor;
    x = tf.layers.concatenate().apply([x, skips[d]]) as tf.SymbolicTensor;
    x = conv(x, 3, cfg.feature_channels);
    x = conv(x, 3, cfg.feature_channels);
  }
  const out = conv(x, 1, outChannels, true);
  return tf.model({ inputs: input, outputs: out });
}
