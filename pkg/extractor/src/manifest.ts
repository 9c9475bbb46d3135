/**
 * Manifest parsing: a CSV with header `path,sample_id,label,patient_id`
 * listing the images to featurize. `patient_id` is optional — either every
 * row carries one or the column is absent/blank everywhere.
 */

import fs from 'node:fs';
import path from 'node:path';
import Papa from 'papaparse';

export interface ManifestEntry {
  /** Image path, resolved relative to the manifest's directory. */
  path: string;
  sampleId: string;
  label: 0 | 1;
  /** Empty string when the manifest carries no patient identities. */
  patientId: string;
}

export interface Manifest {
  entries: ManifestEntry[];
  /** True when every row has a patient id. */
  hasPatientIds: boolean;
}

export function parseManifest(manifestPath: string): Manifest {
  let text: string;
  try {
    text = fs.readFileSync(manifestPath, 'utf-8');
  } catch (err) {
    throw new Error(`cannot read manifest ${manifestPath}: ${(err as Error).message}`);
  }
  const parsed = Papa.parse<Record<string, string>>(text, {
    header: true,
    skipEmptyLines: true,
    comments: '#',
  });
  if (parsed.errors.length > 0) {
    const e = parsed.errors[0];
    const where = e.row === undefined ? '' : ` (row ${e.row + 2})`;
    throw new Error(`${manifestPath}: malformed CSV${where}: ${e.message}`);
  }
  const fields = parsed.meta.fields ?? [];
  for (const required of ['path', 'sample_id', 'label']) {
    if (!fields.includes(required)) {
      throw new Error(`${manifestPath}: missing required column "${required}" (header must be path,sample_id,label[,patient_id])`);
    }
  }
  if (parsed.data.length === 0) {
    throw new Error(`${manifestPath}: manifest lists no images`);
  }

  const baseDir = path.dirname(path.resolve(manifestPath));
  const entries: ManifestEntry[] = [];
  const seen = new Set<string>();
  let withPid = 0;
  parsed.data.forEach((row, i) => {
    const rowNo = i + 2; // 1-based, after the header line
    const imgPath = (row.path ?? '').trim();
    const sampleId = (row.sample_id ?? '').trim();
    const labelText = (row.label ?? '').trim();
    const patientId = (row.patient_id ?? '').trim();
    if (imgPath === '') throw new Error(`${manifestPath} row ${rowNo}: empty path`);
    if (sampleId === '') throw new Error(`${manifestPath} row ${rowNo}: empty sample_id`);
    if (seen.has(sampleId)) {
      throw new Error(`${manifestPath} row ${rowNo}: duplicate sample_id "${sampleId}"`);
    }
    seen.add(sampleId);
    if (labelText !== '0' && labelText !== '1') {
      throw new Error(`${manifestPath} row ${rowNo}: label must be 0 or 1, got "${labelText}"`);
    }
    if (patientId !== '') withPid += 1;
    entries.push({
      path: path.isAbsolute(imgPath) ? imgPath : path.join(baseDir, imgPath),
      sampleId,
      label: labelText === '1' ? 1 : 0,
      patientId,
    });
  });

  if (withPid !== 0 && withPid !== entries.length) {
    throw new Error(
      `${manifestPath}: patient_id must be set on every row or on none (${withPid} of ${entries.length} rows have one)`,
    );
  }
  return { entries, hasPatientIds: withPid === entries.length };
}
