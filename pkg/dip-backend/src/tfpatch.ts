import * as tf from "@tensorflow/tfjs";

// The pure-JS ResizeBilinearGrad kernel fills its output row-major for the
// input's [batch, height, width, depth] layout but declares the shape with
// height and width transposed, so training any network that upsamples a
// non-square image aborts during backprop.  The payload is correct, so
// reshaping to the saved input's shape fixes it; once upstream declares the
// right shape the reshape degenerates to a no-op.
const KERNEL = "ResizeBilinear";

export function patchResizeBilinearGradient(): void {
  const original = tf.getGradient(KERNEL);
  if (original === undefined || (original as { patched?: boolean }).patched) {
    return;
  }
  tf.registerGradient({
    kernelName: KERNEL,
    inputsToSave: original.inputsToSave,
    outputsToSave: original.outputsToSave,
    saveAllInputs: original.saveAllInputs,
    gradFunc: (dy, saved, attrs) => {
      const images = saved[0];
      const grads = original.gradFunc(dy as tf.Tensor, saved, attrs) as {
        images: () => tf.Tensor;
      };
      return { images: () => tf.reshape(grads.images(), images.shape) };
    },
  } as tf.GradConfig);
  (tf.getGradient(KERNEL) as { patched?: boolean }).patched = true;
}
