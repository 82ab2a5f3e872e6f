/**
 * Batch export: decode each listed image, resize it per the scale plan,
 * run the network forward, and write one interchange tensor per
 * (image, tap) plus a manifest.json describing the lot.
 *
 * Output directory layout:
 *
 *   manifest.json
 *   tensors/<image id>__<tap>.npy      one (channels, height, width) tensor
 *
 * The manifest records the model, tap list, scale plan, preprocessing and
 * per-image file paths and shapes:
 *
 *   {"model": ..., "taps": [...], "scale_plan": {...} | null,
 *    "preprocessing": "...",
 *    "images": [{"id": ..., "files": {tap: relpath}, "shapes": {tap: [c,h,w]}}]}
 */

import { mkdirSync, readFileSync, writeFileSync } from 'fs';
import * as path from 'path';

import * as tf from '@tensorflow/tfjs';

import { buildWeights, disposeWeights, forwardTaps, getModel, tapNames } from './nets.js';
import { encodeTensor } from './npy.js';
import { decodePnm, ImageDecodeError, Raster } from './pnm.js';
import { ScalePlan, targetDims } from './plan.js';

const PREPROCESSING = 'rgb in [0,1], centered by subtracting 0.5 per channel';

export interface ExportImage {
  id: string;
  path: string;
}

export interface ExportSpec {
  model: string;
  seed: number;
  /** Tap names to emit; empty means every tap the model has. */
  taps: string[];
  images: ExportImage[];
  plan: ScalePlan | null;
  outDir: string;
}

export interface ExportManifest {
  model: string;
  taps: string[];
  scale_plan: { scale1_long_side: number; scale: number } | null;
  preprocessing: string;
  images: {
    id: string;
    files: Record<string, string>;
    shapes: Record<string, [number, number, number]>;
  }[];
}

function fileStem(id: string): string {
  return id.replace(/[^A-Za-z0-9._-]/g, '_');
}

function resizeRaster(img: Raster, plan: ScalePlan | null): Raster {
  if (plan === null) return img;
  const [w, h] = targetDims(img.width, img.height, plan);
  if (w === img.width && h === img.height) return img;
  const data = tf.tidy(() => {
    const src = tf.tensor3d(img.data, [img.height, img.width, 3]);
    const dst = tf.image.resizeBilinear(src, [h, w], false, true);
    return dst.dataSync() as Float32Array;
  });
  return { width: w, height: h, data };
}

function preprocess(img: Raster): Float32Array {
  const out = new Float32Array(img.data.length);
  for (let i = 0; i < out.length; i++) out[i] = img.data[i] - 0.5;
  return out;
}

export async function runExport(spec: ExportSpec): Promise<ExportManifest> {
  await tf.setBackend('cpu');
  const model = getModel(spec.model);
  const taps = spec.taps.length > 0 ? spec.taps : tapNames(model);
  if (spec.images.length === 0) {
    throw new Error('no images to export');
  }
  const stems = new Set<string>();
  for (const image of spec.images) {
    const stem = fileStem(image.id);
    if (stems.has(stem)) {
      throw new Error(`image ids collide after sanitizing: '${image.id}' -> '${stem}'`);
    }
    stems.add(stem);
  }

  mkdirSync(path.join(spec.outDir, 'tensors'), { recursive: true });
  const weights = buildWeights(model, spec.seed);
  const manifest: ExportManifest = {
    model: model.name,
    taps,
    scale_plan: spec.plan === null
      ? null
      : { scale1_long_side: spec.plan.scale1LongSide, scale: spec.plan.scale },
    preprocessing: PREPROCESSING,
    images: [],
  };

  try {
    for (const image of spec.images) {
      let raster: Raster;
      try {
        raster = decodePnm(readFileSync(image.path));
      } catch (err) {
        if (err instanceof ImageDecodeError) {
          throw new ImageDecodeError(`${image.path}: ${err.message}`);
        }
        throw err;
      }
      raster = resizeRaster(raster, spec.plan);
      const maps = forwardTaps(preprocess(raster), raster.height, raster.width,
                               weights, taps);
      const files: Record<string, string> = {};
      const shapes: Record<string, [number, number, number]> = {};
      for (const tap of taps) {
        const tensor = maps.get(tap)!;
        const rel = path.join('tensors', `${fileStem(image.id)}__${tap}.npy`);
        writeFileSync(path.join(spec.outDir, rel), encodeTensor(tensor.shape, tensor.data));
        files[tap] = rel;
        shapes[tap] = tensor.shape;
      }
      manifest.images.push({ id: image.id, files, shapes });
    }
  } finally {
    disposeWeights(weights);
  }

  writeFileSync(path.join(spec.outDir, 'manifest.json'),
                JSON.stringify(manifest, null, 2));
  return manifest;
}
