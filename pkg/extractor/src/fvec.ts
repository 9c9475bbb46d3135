/**
 * Writer (and test-side reader) for the feature-vector file format the
 * classifier toolkit consumes.
 *
 * Little-endian layout:
 *
 *     bytes 0..5   magic 46 56 45 43 00 01 ("FVEC\x00\x01")
 *     bytes 6..9   u32 n_samples
 *     bytes 10..13 u32 dim
 *     byte  14     flags: bit0 = labels present, bit1 = id table present
 *     then         n*dim float32 features, row-major
 *     then         n label bytes (0/1)                     [bit0]
 *     then         u32 byte length + UTF-8 id table        [bit1]
 *
 * The id table is one `sample_id,patient_id\n` line per sample; a file with
 * no patient identities writes every patient field empty.
 */

import fs from 'node:fs';

export const FVEC_MAGIC = Buffer.from([0x46, 0x56, 0x45, 0x43, 0x00, 0x01]);

const FLAG_LABELS = 1;
const FLAG_TABLE = 2;

export interface FeatureFile {
  /** n*dim values, row-major. */
  features: Float32Array;
  dim: number;
  labels: Uint8Array;
  sampleIds: string[];
  /** null when the file carries no patient identities. */
  patientIds: string[] | null;
}

function checkShape(file: FeatureFile): number {
  const { features, dim, labels, sampleIds, patientIds } = file;
  if (!Number.isInteger(dim) || dim < 1) {
    throw new Error(`dim must be a positive integer, got ${dim}`);
  }
  if (features.length % dim !== 0) {
    throw new Error(`feature length ${features.length} is not a multiple of dim ${dim}`);
  }
  const n = features.length / dim;
  if (n < 1) throw new Error('feature file needs at least one sample');
  if (labels.length !== n) {
    throw new Error(`label count ${labels.length} does not match ${n} samples`);
  }
  for (const v of labels) {
    if (v !== 0 && v !== 1) throw new Error(`labels must be 0 or 1, got ${v}`);
  }
  if (sampleIds.length !== n) {
    throw new Error(`sample id count ${sampleIds.length} does not match ${n} samples`);
  }
  if (patientIds !== null && patientIds.length !== n) {
    throw new Error(`patient id count ${patientIds.length} does not match ${n} samples`);
  }
  const seen = new Set<string>();
  for (const sid of sampleIds) {
    if (sid === '') throw new Error('sample ids must be non-empty');
    if (sid.includes(',') || sid.includes('\n')) {
      throw new Error(`sample id ${JSON.stringify(sid)} may not contain commas or newlines`);
    }
    if (seen.has(sid)) throw new Error(`duplicate sample id ${JSON.stringify(sid)}`);
    seen.add(sid);
  }
  for (const pid of patientIds ?? []) {
    if (pid === '') throw new Error('patient ids must be non-empty when given');
    if (pid.includes(',') || pid.includes('\n')) {
      throw new Error(`patient id ${JSON.stringify(pid)} may not contain commas or newlines`);
    }
  }
  for (const v of features) {
    if (!Number.isFinite(v)) throw new Error('features must be finite');
  }
  return n;
}

/** Serialize to the exact byte layout; equal inputs give equal bytes. */
export function encodeFeatureFile(file: FeatureFile): Buffer {
  const n = checkShape(file);
  const head = Buffer.alloc(9);
  head.writeUInt32LE(n, 0);
  head.writeUInt32LE(file.dim, 4);
  head.writeUInt8(FLAG_LABELS | FLAG_TABLE, 8);

  // Float32Array is platform-endian; all supported Node targets are LE, but
  // guard so a big-endian host cannot silently write a byte-swapped file.
  const probe = new Uint8Array(Float32Array.of(1).buffer);
  if (probe[3] !== 0x3f) throw new Error('big-endian hosts are not supported');
  const feat = Buffer.from(file.features.buffer, file.features.byteOffset, file.features.byteLength);

  const pids = file.patientIds ?? new Array<string>(n).fill('');
  const table = Buffer.from(
    file.sampleIds.map((sid, i) => `${sid},${pids[i]}\n`).join(''),
    'utf-8',
  );
  const tableLen = Buffer.alloc(4);
  tableLen.writeUInt32LE(table.length, 0);

  return Buffer.concat([FVEC_MAGIC, head, feat, Buffer.from(file.labels), tableLen, table]);
}

export function writeFeatureFile(path: string, file: FeatureFile): void {
  fs.writeFileSync(path, encodeFeatureFile(file));
}

/** Parse a feature file; used by the tests to verify round-trips. */
export function readFeatureFile(path: string): FeatureFile {
  const buf = fs.readFileSync(path);
  if (buf.length < 15 || !buf.subarray(0, 6).equals(FVEC_MAGIC)) {
    throw new Error(`${path}: not a feature file`);
  }
  const n = buf.readUInt32LE(6);
  const dim = buf.readUInt32LE(10);
  const flags = buf.readUInt8(14);
  let off = 15;
  const featBytes = buf.subarray(off, off + 4 * n * dim);
  if (featBytes.length !== 4 * n * dim) throw new Error(`${path}: truncated features`);
  const features = new Float32Array(n * dim);
  for (let i = 0; i < n * dim; i++) features[i] = buf.readFloatLE(off + 4 * i);
  off += 4 * n * dim;

  let labels = new Uint8Array(n);
  if (flags & FLAG_LABELS) {
    labels = Uint8Array.from(buf.subarray(off, off + n));
    off += n;
  }
  let sampleIds = Array.from({ length: n }, (_, i) => String(i));
  let patientIds: string[] | null = null;
  if (flags & FLAG_TABLE) {
    const blobLen = buf.readUInt32LE(off);
    off += 4;
    const lines = buf.subarray(off, off + blobLen).toString('utf-8').split('\n');
    off += blobLen;
    if (lines.at(-1) === '') lines.pop();
    if (lines.length !== n) throw new Error(`${path}: id table has ${lines.length} lines for ${n} samples`);
    sampleIds = [];
    const pids: string[] = [];
    for (const line of lines) {
      const idx = line.indexOf(',');
      if (idx < 0) throw new Error(`${path}: id table line without comma`);
      sampleIds.push(line.slice(0, idx));
      pids.push(line.slice(idx + 1));
    }
    if (pids.every((p) => p !== '')) patientIds = pids;
  }
  if (off !== buf.length) throw new Error(`${path}: ${buf.length - off} trailing bytes`);
  return { features, dim, labels, sampleIds, patientIds };
}
