/**
 * Scale plan handling. The engine that consumes our tensors decides sizing
 * once, as a JSON document {"scale1_long_side": int, "scale": float}; we
 * apply the same rounding rules so both sides agree on target dimensions.
 */

import { readFileSync } from 'fs';

export interface ScalePlan {
  scale1LongSide: number;
  scale: number;
}

export function roundHalfUp(x: number): number {
  return Math.floor(x + 0.5);
}

export function loadPlan(path: string): ScalePlan {
  const doc = JSON.parse(readFileSync(path, 'utf-8'));
  const plan = {
    scale1LongSide: Number(doc['scale1_long_side']),
    scale: doc['scale'] === undefined ? 1.0 : Number(doc['scale']),
  };
  if (!Number.isInteger(plan.scale1LongSide) || plan.scale1LongSide < 1) {
    throw new Error(`${path}: scale1_long_side must be a positive integer`);
  }
  if (!(plan.scale > 0)) {
    throw new Error(`${path}: scale must be positive`);
  }
  return plan;
}

export function effectiveLongSide(plan: ScalePlan): number {
  return roundHalfUp(plan.scale1LongSide * plan.scale);
}

/**
 * Target (width, height): long side to the plan's effective long side,
 * short side by the same factor (half-up, minimum 1), orientation kept.
 */
export function targetDims(width: number, height: number, plan: ScalePlan): [number, number] {
  if (width < 1 || height < 1) {
    throw new Error(`original dimensions must be positive, got ${width}x${height}`);
  }
  const longSide = effectiveLongSide(plan);
  const factor = longSide / Math.max(width, height);
  const shortSide = Math.max(1, roundHalfUp(Math.min(width, height) * factor));
  return width >= height ? [longSide, shortSide] : [shortSide, longSide];
}
