/**
 * Tap-able CNN forward passes on the tfjs CPU backend.
 *
 * Two architectures are built in. Tap names follow the block convention the
 * downstream engine uses: convN is the rectified output of block N's last
 * convolution (before that block's pooling), fc6/fc7 are the rectified
 * fully-connected activations, emitted with a 1x1 spatial extent.
 *
 * Weights are generated from a seeded PRNG (He-style uniform fan-in
 * scaling), so runs are reproducible bit for bit. Channel counts and tap
 * shapes are purely architectural and hold for any weight values; loading
 * externally trained weights is out of scope here.
 *
 * Fully-connected layers act on the spatial average of the preceding map,
 * so arbitrary input sizes pass straight through with no cropping.
 */

import * as tf from '@tensorflow/tfjs';

import { mulberry32, uniform } from './rng.js';

export class UnknownTapError extends Error {}
export class InputTooSmallError extends Error {}

interface ConvLayer {
  kind: 'conv';
  filters: number;
  kernel: number;
  stride: number;
  pad: number | 'same';
  tap?: string;
}

interface PoolLayer {
  kind: 'pool';
  size: number;
  stride: number;
}

interface FcLayer {
  kind: 'fc';
  units: number;
  tap: string;
}

export type Layer = ConvLayer | PoolLayer | FcLayer;

export interface ModelSpec {
  name: string;
  /** Smallest accepted input side; below this a pooling stage runs dry. */
  minSide: number;
  layers: Layer[];
}

function conv(filters: number, kernel: number, stride: number,
              pad: number | 'same', tap?: string): ConvLayer {
  return { kind: 'conv', filters, kernel, stride, pad, tap };
}

function pool(size: number, stride: number): PoolLayer {
  return { kind: 'pool', size, stride };
}

function fc(units: number, tap: string): FcLayer {
  return { kind: 'fc', units, tap };
}

function vggBlock(filters: number, convs: number, tap: string): Layer[] {
  const layers: Layer[] = [];
  for (let i = 0; i < convs; i++) {
    layers.push(conv(filters, 3, 1, 'same', i === convs - 1 ? tap : undefined));
  }
  layers.push(pool(2, 2));
  return layers;
}

export const MODELS: Record<string, ModelSpec> = {
  alexnet: {
    name: 'alexnet',
    minSide: 63,
    layers: [
      conv(96, 11, 4, 2, 'conv1'), pool(3, 2),
      conv(256, 5, 1, 2, 'conv2'), pool(3, 2),
      conv(384, 3, 1, 1, 'conv3'),
      conv(384, 3, 1, 1, 'conv4'),
      conv(256, 3, 1, 1, 'conv5'), pool(3, 2),
      fc(4096, 'fc6'),
      fc(4096, 'fc7'),
    ],
  },
  vggnet: {
    // The 19-layer variant: blocks of 2, 2, 4, 4, 4 convolutions.
    name: 'vggnet',
    minSide: 32,
    layers: [
      ...vggBlock(64, 2, 'conv1'),
      ...vggBlock(128, 2, 'conv2'),
      ...vggBlock(256, 4, 'conv3'),
      ...vggBlock(512, 4, 'conv4'),
      ...vggBlock(512, 4, 'conv5'),
      fc(4096, 'fc6'),
      fc(4096, 'fc7'),
    ],
  },
};

export function getModel(name: string): ModelSpec {
  const spec = MODELS[name];
  if (!spec) {
    throw new UnknownTapError(
      `unknown model '${name}' (have: ${Object.keys(MODELS).join(', ')})`);
  }
  return spec;
}

export function tapNames(spec: ModelSpec): string[] {
  const names: string[] = [];
  for (const layer of spec.layers) {
    if (layer.kind !== 'pool' && layer.tap) names.push(layer.tap);
  }
  return names;
}

/** Channel count emitted at each tap; fixed by the architecture. */
export function tapChannels(spec: ModelSpec): Record<string, number> {
  const out: Record<string, number> = {};
  for (const layer of spec.layers) {
    if (layer.kind === 'conv' && layer.tap) out[layer.tap] = layer.filters;
    if (layer.kind === 'fc') out[layer.tap] = layer.units;
  }
  return out;
}

export interface ModelWeights {
  spec: ModelSpec;
  seed: number;
  tensors: tf.Tensor[];
}

/** One weight tensor per conv/fc layer, deterministic in (spec, seed). */
export function buildWeights(spec: ModelSpec, seed: number): ModelWeights {
  const next = mulberry32(seed);
  const tensors: tf.Tensor[] = [];
  let inC = 3;
  for (const layer of spec.layers) {
    if (layer.kind === 'conv') {
      const fanIn = layer.kernel * layer.kernel * inC;
      const limit = Math.sqrt(6 / fanIn);
      const values = uniform(layer.kernel * layer.kernel * inC * layer.filters, limit, next);
      tensors.push(tf.tensor4d(values, [layer.kernel, layer.kernel, inC, layer.filters]));
      inC = layer.filters;
    } else if (layer.kind === 'fc') {
      const limit = Math.sqrt(6 / inC);
      const values = uniform(inC * layer.units, limit, next);
      tensors.push(tf.tensor2d(values, [inC, layer.units]));
      inC = layer.units;
    }
  }
  return { spec, seed, tensors };
}

export function disposeWeights(weights: ModelWeights): void {
  for (const t of weights.tensors) t.dispose();
}

export interface TapTensor {
  /** CHW shape; fc taps are (units, 1, 1). */
  shape: [number, number, number];
  data: Float32Array;
}

/**
 * Runs `input` (HWC, 3 channels, already preprocessed) through the network
 * and collects the requested taps. Stops as soon as the last one is filled.
 */
export function forwardTaps(input: Float32Array, height: number, width: number,
                            weights: ModelWeights,
                            wanted: string[]): Map<string, TapTensor> {
  const spec = weights.spec;
  const known = new Set(tapNames(spec));
  for (const name of wanted) {
    if (!known.has(name)) {
      throw new UnknownTapError(
        `model '${spec.name}' has no tap '${name}' (have: ${[...known].join(', ')})`);
    }
  }
  if (Math.min(height, width) < spec.minSide) {
    throw new InputTooSmallError(
      `${spec.name} needs inputs of at least ${spec.minSide}px a side, got ${width}x${height}`);
  }

  const pending = new Set(wanted);
  const taps = new Map<string, TapTensor>();
  tf.tidy(() => {
    let x: tf.Tensor4D = tf.tensor4d(input, [1, height, width, 3]);
    let flat: tf.Tensor2D | null = null;
    let wi = 0;
    for (const layer of spec.layers) {
      if (pending.size === 0) break;
      if (layer.kind === 'conv') {
        const kernel = weights.tensors[wi++] as tf.Tensor4D;
        x = tf.relu(tf.conv2d(x, kernel, layer.stride, layer.pad));
        if (layer.tap && pending.has(layer.tap)) {
          const chw = tf.transpose(tf.squeeze<tf.Tensor3D>(x, [0]), [2, 0, 1]);
          taps.set(layer.tap, {
            shape: chw.shape as [number, number, number],
            data: chw.dataSync() as Float32Array,
          });
          pending.delete(layer.tap);
        }
      } else if (layer.kind === 'pool') {
        x = tf.maxPool(x, layer.size, layer.stride, 'valid');
      } else {
        const w = weights.tensors[wi++] as tf.Tensor2D;
        const src: tf.Tensor2D = flat === null ? tf.mean<tf.Tensor2D>(x, [1, 2]) : flat;
        flat = tf.relu<tf.Tensor2D>(tf.matMul<tf.Tensor2D>(src, w));
        if (pending.has(layer.tap)) {
          taps.set(layer.tap, {
            shape: [layer.units, 1, 1],
            data: flat.dataSync() as Float32Array,
          });
          pending.delete(layer.tap);
        }
      }
    }
  });
  return taps;
}
