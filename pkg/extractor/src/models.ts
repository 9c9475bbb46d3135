/**
 * Convolutional trunks (no classifier head) for the three supported
 * architectures, with the standard layer naming so published weight dumps
 * can be mapped onto them by name.
 *
 * Output shapes on 224x224x3 input:
 *   vgg16       7x7x512   -> 25,088 features (14,714,688 parameters)
 *   vgg19       7x7x512   -> 25,088 features (20,024,384 parameters)
 *   densenet121 7x7x1024  -> 50,176 features  (7,037,504 parameters)
 *
 * Weights come from one of two places:
 *   - a weights file in the TSW1 container (see `loadWeights`), or
 *   - a seeded pseudo-random initialization (`seedWeights`) so runs without
 *     a weights file are still deterministic and numerically stable.
 */

import fs from 'node:fs';
import * as tf from '@tensorflow/tfjs';

export type ArchName = 'vgg16' | 'vgg19' | 'densenet121';

export const ARCH_NAMES: readonly ArchName[] = ['vgg16', 'vgg19', 'densenet121'];

/** Flattened feature width each trunk must produce on a 224x224 input. */
export const EXPECTED_DIM: Record<ArchName, number> = {
  vgg16: 25_088,
  vgg19: 25_088,
  densenet121: 50_176,
};

const BN_EPSILON = 1.001e-5;

type Sym = tf.SymbolicTensor;

function vggTrunk(convsPerBlock: readonly number[]): tf.LayersModel {
  const filters = [64, 128, 256, 512, 512];
  const input = tf.input({ shape: [224, 224, 3], name: 'input' });
  let x: Sym = input;
  convsPerBlock.forEach((nConvs, b) => {
    for (let c = 1; c <= nConvs; c++) {
      x = tf.layers
        .conv2d({
          filters: filters[b],
          kernelSize: 3,
          padding: 'same',
          activation: 'relu',
          name: `block${b + 1}_conv${c}`,
        })
        .apply(x) as Sym;
    }
    x = tf.layers
      .maxPooling2d({ poolSize: 2, strides: 2, name: `block${b + 1}_pool` })
      .apply(x) as Sym;
  });
  return tf.model({ inputs: input, outputs: x });
}

function denseConvBlock(x: Sym, stage: number, block: number, growthRate: number): Sym {
  const prefix = `conv${stage}_block${block}`;
  let y = tf.layers
    .batchNormalization({ epsilon: BN_EPSILON, name: `${prefix}_0_bn` })
    .apply(x) as Sym;
  y = tf.layers.activation({ activation: 'relu', name: `${prefix}_0_relu` }).apply(y) as Sym;
  y = tf.layers
    .conv2d({ filters: 4 * growthRate, kernelSize: 1, useBias: false, name: `${prefix}_1_conv` })
    .apply(y) as Sym;
  y = tf.layers
    .batchNormalization({ epsilon: BN_EPSILON, name: `${prefix}_1_bn` })
    .apply(y) as Sym;
  y = tf.layers.activation({ activation: 'relu', name: `${prefix}_1_relu` }).apply(y) as Sym;
  y = tf.layers
    .conv2d({
      filters: growthRate,
      kernelSize: 3,
      padding: 'same',
      useBias: false,
      name: `${prefix}_2_conv`,
    })
    .apply(y) as Sym;
  return tf.layers.concatenate({ name: `${prefix}_concat` }).apply([x, y]) as Sym;
}

function denseTransition(x: Sym, stage: number, channels: number): Sym {
  let y = tf.layers
    .batchNormalization({ epsilon: BN_EPSILON, name: `pool${stage}_bn` })
    .apply(x) as Sym;
  y = tf.layers.activation({ activation: 'relu', name: `pool${stage}_relu` }).apply(y) as Sym;
  y = tf.layers
    .conv2d({ filters: Math.floor(channels / 2), kernelSize: 1, useBias: false, name: `pool${stage}_conv` })
    .apply(y) as Sym;
  return tf.layers
    .avgPool2d({ poolSize: 2, strides: 2, name: `pool${stage}_pool` })
    .apply(y) as Sym;
}

function densenet121Trunk(): tf.LayersModel {
  const growthRate = 32;
  const blockSizes = [6, 12, 24, 16];
  const input = tf.input({ shape: [224, 224, 3], name: 'input' });
  let x = tf.layers
    .zeroPadding2d({ padding: [[3, 3], [3, 3]], name: 'conv1_pad' })
    .apply(input) as Sym;
  x = tf.layers
    .conv2d({ filters: 64, kernelSize: 7, strides: 2, useBias: false, name: 'conv1/conv' })
    .apply(x) as Sym;
  x = tf.layers.batchNormalization({ epsilon: BN_EPSILON, name: 'conv1/bn' }).apply(x) as Sym;
  x = tf.layers.activation({ activation: 'relu', name: 'conv1/relu' }).apply(x) as Sym;
  x = tf.layers
    .zeroPadding2d({ padding: [[1, 1], [1, 1]], name: 'pool1_pad' })
    .apply(x) as Sym;
  x = tf.layers.maxPooling2d({ poolSize: 3, strides: 2, name: 'pool1' }).apply(x) as Sym;

  let channels = 64;
  blockSizes.forEach((nBlocks, i) => {
    const stage = i + 2;
    for (let b = 1; b <= nBlocks; b++) {
      x = denseConvBlock(x, stage, b, growthRate);
    }
    channels += nBlocks * growthRate;
    if (i < blockSizes.length - 1) {
      x = denseTransition(x, stage, channels);
      channels = Math.floor(channels / 2);
    }
  });
  x = tf.layers.batchNormalization({ epsilon: BN_EPSILON, name: 'bn' }).apply(x) as Sym;
  x = tf.layers.activation({ activation: 'relu', name: 'relu' }).apply(x) as Sym;
  return tf.model({ inputs: input, outputs: x });
}

/** Build the convolutional trunk for one architecture. */
export function buildTrunk(arch: ArchName): tf.LayersModel {
  switch (arch) {
    case 'vgg16':
      return vggTrunk([2, 2, 3, 3, 3]);
    case 'vgg19':
      return vggTrunk([2, 2, 4, 4, 4]);
    case 'densenet121':
      return densenet121Trunk();
  }
}

/* ------------------------------------------------------------------ */
/* Deterministic initialization                                        */
/* ------------------------------------------------------------------ */

/** Small, fast, seedable PRNG (mulberry32); uniform floats in [0, 1). */
function mulberry32(seed: number): () => number {
  let s = seed >>> 0;
  return () => {
    s = (s + 0x6d2b79f5) >>> 0;
    let t = s;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** FNV-1a, used to give every weight its own stream from one seed. */
function fnv1a(text: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 0x01000193);
  }
  return h >>> 0;
}

/** Weight shapes are always fully known; narrow away tfjs's nullable dims. */
function concreteShape(w: { originalName: string; shape: Array<number | null> }): number[] {
  return w.shape.map((d) => {
    if (d === null) throw new Error(`weight ${w.originalName} has a dynamic dimension`);
    return d;
  });
}

/**
 * Overwrite every convolution kernel with seeded He-uniform values
 * (limit sqrt(6 / fan_in)). Biases stay zero and batch-norm parameters
 * stay at their identity defaults, so the network is numerically tame
 * and the whole parameter set is a pure function of the seed.
 */
export function seedWeights(model: tf.LayersModel, seed: number): void {
  for (const w of model.weights) {
    if (!w.originalName.endsWith('/kernel')) continue;
    const shape = concreteShape(w);
    const fanIn = shape.length === 4 ? shape[0] * shape[1] * shape[2] : shape[0];
    const limit = Math.sqrt(6 / fanIn);
    const rand = mulberry32((fnv1a(w.originalName) ^ seed) >>> 0);
    const size = shape.reduce((a, b) => a * b, 1);
    const values = new Float32Array(size);
    for (let i = 0; i < size; i++) values[i] = (2 * rand() - 1) * limit;
    w.write(tf.tensor(values, shape));
  }
}

/* ------------------------------------------------------------------ */
/* TSW1 weights container                                              */
/* ------------------------------------------------------------------ */

/**
 * Weights file layout (little-endian):
 *
 *     bytes 0..3  magic "TSW1"
 *     u32         entry count
 *     per entry:  u32 name length, UTF-8 weight name (e.g. "bn/gamma",
 *                 "block1_conv1/kernel"), u32 ndim, ndim x u32 dims,
 *                 prod(dims) x f32 values
 *
 * Names must match the model's weight names exactly; a file that is
 * missing weights, has extras, or disagrees on a shape is rejected.
 */
export function loadWeights(model: tf.LayersModel, weightsPath: string): void {
  let buf: Buffer;
  try {
    buf = fs.readFileSync(weightsPath);
  } catch (err) {
    throw new Error(`cannot read weights file ${weightsPath}: ${(err as Error).message}`);
  }
  if (buf.length < 8 || buf.toString('latin1', 0, 4) !== 'TSW1') {
    throw new Error(`${weightsPath}: not a TSW1 weights file`);
  }
  const count = buf.readUInt32LE(4);
  let off = 8;
  const entries = new Map<string, { shape: number[]; data: Float32Array }>();
  for (let e = 0; e < count; e++) {
    if (off + 4 > buf.length) throw new Error(`${weightsPath}: truncated at entry ${e}`);
    const nameLen = buf.readUInt32LE(off);
    off += 4;
    const name = buf.toString('utf-8', off, off + nameLen);
    off += nameLen;
    const ndim = buf.readUInt32LE(off);
    off += 4;
    const shape: number[] = [];
    for (let d = 0; d < ndim; d++) {
      shape.push(buf.readUInt32LE(off));
      off += 4;
    }
    const size = shape.reduce((a, b) => a * b, 1);
    if (off + 4 * size > buf.length) {
      throw new Error(`${weightsPath}: truncated data for "${name}"`);
    }
    const data = new Float32Array(size);
    for (let i = 0; i < size; i++) data[i] = buf.readFloatLE(off + 4 * i);
    off += 4 * size;
    if (entries.has(name)) throw new Error(`${weightsPath}: duplicate weight "${name}"`);
    entries.set(name, { shape, data });
  }
  if (off !== buf.length) throw new Error(`${weightsPath}: ${buf.length - off} trailing bytes`);

  const wanted = new Set(model.weights.map((w) => w.originalName));
  for (const name of entries.keys()) {
    if (!wanted.has(name)) {
      throw new Error(`${weightsPath}: weight "${name}" does not exist in this architecture`);
    }
  }
  for (const w of model.weights) {
    const entry = entries.get(w.originalName);
    if (!entry) throw new Error(`${weightsPath}: missing weight "${w.originalName}"`);
    const shape = concreteShape(w);
    if (entry.shape.length !== shape.length || entry.shape.some((d, i) => d !== shape[i])) {
      throw new Error(
        `${weightsPath}: weight "${w.originalName}" has shape [${entry.shape}] but the model needs [${shape}]`,
      );
    }
    w.write(tf.tensor(entry.data, entry.shape));
  }
}

/** Serialize a model's weights to the TSW1 container (see `loadWeights`). */
export function saveWeights(model: tf.LayersModel, weightsPath: string): void {
  const parts: Buffer[] = [Buffer.from('TSW1', 'latin1')];
  const head = Buffer.alloc(4);
  head.writeUInt32LE(model.weights.length, 0);
  parts.push(head);
  for (const w of model.weights) {
    const name = Buffer.from(w.originalName, 'utf-8');
    const shape = concreteShape(w);
    const nameLen = Buffer.alloc(4);
    nameLen.writeUInt32LE(name.length, 0);
    const dims = Buffer.alloc(4 + 4 * shape.length);
    dims.writeUInt32LE(shape.length, 0);
    shape.forEach((d, i) => dims.writeUInt32LE(d, 4 + 4 * i));
    const values = w.read().dataSync() as Float32Array;
    const data = Buffer.alloc(4 * values.length);
    for (let i = 0; i < values.length; i++) data.writeFloatLE(values[i], 4 * i);
    parts.push(nameLen, name, dims, data);
  }
  fs.writeFileSync(weightsPath, Buffer.concat(parts));
}

/** Total trainable + non-trainable parameter count. */
export function countParams(model: tf.LayersModel): number {
  return model.weights.reduce(
    (sum, w) => sum + concreteShape(w).reduce((a, b) => a * b, 1),
    0,
  );
}
