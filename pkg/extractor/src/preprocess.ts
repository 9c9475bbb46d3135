/**
 * Input preprocessing: bilinear resize to the 224x224 network input size,
 * then the channel normalization each architecture family was trained with.
 *
 *  - vgg16 / vgg19: channels reordered RGB -> BGR, then per-channel means
 *    [103.939, 116.779, 123.68] subtracted (values stay in 0..255 scale).
 *  - densenet121: scaled to 0..1, then normalized with per-channel mean
 *    [0.485, 0.456, 0.406] and standard deviation [0.229, 0.224, 0.225].
 */

import * as tf from '@tensorflow/tfjs';
import type { RgbImage } from './png.js';
import type { ArchName } from './models.js';

export const INPUT_SIZE = 224;

const BGR_MEAN = [103.939, 116.779, 123.68];
const TORCH_MEAN = [0.485, 0.456, 0.406];
const TORCH_STD = [0.229, 0.224, 0.225];

/** Resize one decoded image and apply the architecture's normalization. */
export function preprocessImage(image: RgbImage, arch: ArchName): tf.Tensor3D {
  return tf.tidy(() => {
    let x = tf.tensor3d(image.data, [image.height, image.width, 3]);
    if (image.height !== INPUT_SIZE || image.width !== INPUT_SIZE) {
      x = tf.image.resizeBilinear(x, [INPUT_SIZE, INPUT_SIZE]);
    }
    if (arch === 'densenet121') {
      return x.div(255).sub(TORCH_MEAN).div(TORCH_STD);
    }
    // VGG variants: swap to BGR and subtract the dataset channel means.
    const [r, g, b] = tf.split(x, 3, 2);
    return tf.concat([b, g, r], 2).sub(BGR_MEAN);
  }) as tf.Tensor3D;
}

/** Stack preprocessed images into one NHWC batch tensor. */
export function makeBatch(images: RgbImage[], arch: ArchName): tf.Tensor4D {
  return tf.tidy(() => {
    const tensors = images.map((img) => preprocessImage(img, arch));
    return tf.stack(tensors) as tf.Tensor4D;
  });
}
