/**
 * End-to-end extraction: manifest -> decode -> preprocess -> trunk forward
 * -> row-major flatten -> one feature file written after the last batch.
 */

import path from 'node:path';
import { createRequire } from 'node:module';
import * as tf from '@tensorflow/tfjs';
import { setWasmPaths } from '@tensorflow/tfjs-backend-wasm';
import { parseManifest } from './manifest.js';
import { readPng } from './png.js';
import { makeBatch } from './preprocess.js';
import { buildTrunk, loadWeights, seedWeights, EXPECTED_DIM, type ArchName } from './models.js';
import { writeFeatureFile } from './fvec.js';

/**
 * Select the WebAssembly backend (an order of magnitude faster here than
 * the pure-JS fallback); fall back to the default backend with a warning
 * if it cannot start.
 */
export async function initBackend(log: (msg: string) => void = () => {}): Promise<string> {
  try {
    const require = createRequire(import.meta.url);
    const wasmDir = path.dirname(
      require.resolve('@tensorflow/tfjs-backend-wasm/dist/tfjs-backend-wasm.wasm'),
    );
    setWasmPaths(wasmDir + path.sep);
    await tf.setBackend('wasm');
  } catch (err) {
    log(`warning: wasm backend unavailable (${(err as Error).message}); using slower fallback`);
  }
  await tf.ready();
  return tf.getBackend();
}

export interface ExtractOptions {
  arch: ArchName;
  manifestPath: string;
  outPath: string;
  batchSize: number;
  /** TSW1 weights file; without one the trunk gets seeded random kernels. */
  weightsPath?: string;
  /** Seed for the fallback initialization. */
  seed?: number;
  log?: (msg: string) => void;
}

export interface ExtractResult {
  nSamples: number;
  dim: number;
  backend: string;
}

export async function extractFeatures(opts: ExtractOptions): Promise<ExtractResult> {
  const log = opts.log ?? (() => {});
  if (!Number.isInteger(opts.batchSize) || opts.batchSize < 1) {
    throw new Error(`batch size must be a positive integer, got ${opts.batchSize}`);
  }
  const manifest = parseManifest(opts.manifestPath);
  const backend = await initBackend(log);

  const model = buildTrunk(opts.arch);
  try {
    if (opts.weightsPath !== undefined) {
      loadWeights(model, opts.weightsPath);
      log(`loaded weights from ${opts.weightsPath}`);
    } else {
      seedWeights(model, opts.seed ?? 0);
      log(`no weights file given; using seeded random kernels (seed ${opts.seed ?? 0})`);
    }

    const entries = manifest.entries;
    const n = entries.length;
    const dim = EXPECTED_DIM[opts.arch];
    const features = new Float32Array(n * dim);

    for (let start = 0; start < n; start += opts.batchSize) {
      const chunk = entries.slice(start, start + opts.batchSize);
      const images = chunk.map((e) => readPng(e.path));
      const batch = makeBatch(images, opts.arch);
      const out = model.predict(batch) as tf.Tensor;
      const flat = out.reshape([chunk.length, -1]);
      if (flat.shape[1] !== dim) {
        throw new Error(
          `${opts.arch} produced ${flat.shape[1]} features per image instead of ${dim} ` +
            `(while processing ${chunk[0].path})`,
        );
      }
      const data = (await flat.data()) as Float32Array;
      features.set(data, start * dim);
      tf.dispose([batch, out, flat]);
      log(`featurized ${Math.min(start + opts.batchSize, n)}/${n} images`);
    }

    writeFeatureFile(opts.outPath, {
      features,
      dim,
      labels: Uint8Array.from(entries.map((e) => e.label)),
      sampleIds: entries.map((e) => e.sampleId),
      patientIds: manifest.hasPatientIds ? entries.map((e) => e.patientId) : null,
    });
    log(`wrote ${n} x ${dim} features to ${opts.outPath}`);
    return { nSamples: n, dim, backend };
  } finally {
    model.dispose();
  }
}
