import * as tf from "@tensorflow/tfjs";
import { beforeAll, describe, expect, it } from "vitest";
import { patchResizeBilinearGradient } from "../src/tfpatch";

beforeAll(async () => {
  tf.setBackend("cpu");
  await tf.ready();
});

describe("patchResizeBilinearGradient", () => {
  it("backprops through non-square bilinear resizes with the input shape", () => {
    patchResizeBilinearGradient();
    const x = tf.ones([1, 4, 12, 2]) as tf.Tensor4D;
    const g = tf.grad((v: tf.Tensor4D) => tf.sum(tf.image.resizeBilinear(v, [8, 24])))(x);
    expect(g.shape).toEqual([1, 4, 12, 2]);
    // bilinear weights per output pixel sum to 1, so the gradient of the
    // plain sum accumulates to the output element count
    const total = tf.sum(g).dataSync()[0];
    expect(total).toBeCloseTo(8 * 24 * 2, 3);
    x.dispose();
    g.dispose();
  });

  it("is idempotent", () => {
    patchResizeBilinearGradient();
    patchResizeBilinearGradient();
    expect((tf.getGradient("ResizeBilinear") as { patched?: boolean }).patched).toBe(true);
  });
});
