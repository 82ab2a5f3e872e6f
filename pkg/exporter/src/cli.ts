#!/usr/bin/env node
/**
 * Command line front end. Mirrors the downstream engine's extract flags:
 *
 *   layerpool-export --manifest data/manifest.json --model vggnet --seed 0 \
 *       --layers conv1,conv5,fc6 --plan plan.json --scale 0.5 --out dump/
 *
 * The dataset manifest is the same JSON the engine reads: {"images":
 * [{"id", "path", ...}]} with paths relative to the manifest file. The dump
 * directory is then consumed with `layerpool extract --tensors dump/`.
 */

import { readFileSync } from 'fs';
import * as path from 'path';

import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';

import { ExportImage, runExport } from './export.js';
import { MODELS } from './nets.js';
import { loadPlan, ScalePlan } from './plan.js';

function readImageList(manifestPath: string): ExportImage[] {
  const doc = JSON.parse(readFileSync(manifestPath, 'utf-8'));
  const entries = doc['images'];
  if (!Array.isArray(entries) || entries.length === 0) {
    throw new Error(`${manifestPath}: no images listed`);
  }
  const baseDir = path.dirname(path.resolve(manifestPath));
  return entries.map((e: { id: string; path?: string }) => {
    if (!e.path) throw new Error(`image '${e.id}' has no path`);
    return {
      id: String(e.id),
      path: path.isAbsolute(e.path) ? e.path : path.join(baseDir, e.path),
    };
  });
}

async function main(): Promise<number> {
  const argv = await yargs(hideBin(process.argv))
    .usage('usage: layerpool-export --manifest <json> --out <dir> [options]')
    .option('manifest', { type: 'string', demandOption: true,
                          describe: 'dataset manifest listing image ids and paths' })
    .option('model', { type: 'string', default: 'vggnet',
                       choices: Object.keys(MODELS) })
    .option('seed', { type: 'number', default: 0,
                      describe: 'weight generation seed' })
    .option('layers', { type: 'string',
                        describe: 'comma-separated tap names (default: all)' })
    .option('plan', { type: 'string', describe: 'scale plan JSON' })
    .option('scale', { type: 'number',
                       describe: 'override the plan\'s scale ratio' })
    .option('out', { type: 'string', demandOption: true,
                     describe: 'output directory' })
    .strict()
    .help()
    .parse();

  let plan: ScalePlan | null = null;
  if (argv.plan) {
    plan = loadPlan(argv.plan);
    if (argv.scale !== undefined) plan = { ...plan, scale: argv.scale };
  } else if (argv.scale !== undefined) {
    throw new Error('--scale needs --plan (the plan carries the scale-1.0 long side)');
  }

  const taps = argv.layers
    ? argv.layers.split(',').map(s => s.trim()).filter(s => s.length > 0)
    : [];

  const manifest = await runExport({
    model: argv.model,
    seed: argv.seed,
    taps,
    images: readImageList(argv.manifest),
    plan,
    outDir: argv.out,
  });
  const tensors = manifest.images.length * manifest.taps.length;
  console.log(`wrote ${tensors} tensors for ${manifest.images.length} images under ${argv.out}`);
  return 0;
}

main().then(
  code => process.exit(code),
  err => {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    process.exit(1);
  },
);
