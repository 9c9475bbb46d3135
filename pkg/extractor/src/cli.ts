#!/usr/bin/env node
/** Command-line entry point for the feature extractor. */

import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';
import { extractFeatures } from './extract.js';
import { ARCH_NAMES, type ArchName } from './models.js';

async function main(): Promise<void> {
  const argv = await yargs(hideBin(process.argv))
    .scriptName('extract-features')
    .usage('$0 --arch <name> --manifest <csv> --out <file>')
    .option('arch', {
      choices: ARCH_NAMES as unknown as ArchName[],
      demandOption: true,
      describe: 'convolutional architecture to run',
    })
    .option('manifest', {
      type: 'string',
      demandOption: true,
      describe: 'CSV listing images: path,sample_id,label[,patient_id]',
    })
    .option('out', {
      type: 'string',
      demandOption: true,
      describe: 'feature file to write',
    })
    .option('batch-size', {
      type: 'number',
      default: 4,
      describe: 'images per forward pass',
    })
    .option('weights', {
      type: 'string',
      describe: 'TSW1 weights file (omit for seeded random kernels)',
    })
    .option('seed', {
      type: 'number',
      default: 0,
      describe: 'seed for the fallback initialization',
    })
    .strict()
    .help()
    .parse();

  const result = await extractFeatures({
    arch: argv.arch,
    manifestPath: argv.manifest,
    outPath: argv.out,
    batchSize: argv.batchSize,
    weightsPath: argv.weights,
    seed: argv.seed,
    log: (msg) => console.error(msg),
  });
  console.log(
    `${result.nSamples} samples x ${result.dim} features (${argv.arch}, ${result.backend} backend) -> ${argv.out}`,
  );
}

main().catch((err: unknown) => {
  console.error(`error: ${err instanceof Error ? err.message : String(err)}`);
  process.exit(1);
});
