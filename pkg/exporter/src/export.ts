/**
 * Convert a sequential checkpoint into an NWA archive.
 *
 * The exporter stays framework-thin: it copies tensors (cast to float32),
 * records batch-norm gamma, moving variance, and epsilon verbatim, and
 * leaves all graph construction and batch-norm folding to consumers of the
 * archive.
 */

import * as fs from 'node:fs';

import {
  Checkpoint,
  LayerConfig,
  layerHasTensors,
  layerTensor,
  readCheckpoint,
} from './checkpoint.js';
import { LayerKind, NwaLayer, encodeArchive } from './nwa.js';

export class ExportError extends Error {}
export class UnsupportedLayerError extends ExportError {}

/** Keras default when a BatchNormalization config omits epsilon. */
export const DEFAULT_BN_EPSILON = 1e-3;

export interface ExportOptions {
  /** Skip unsupported weight-bearing layers instead of failing. */
  skipUnsupported?: boolean;
}

export interface PlannedLayer {
  sourceName: string;
  sourceClass: string;
  kind: LayerKind;
  shape: number[];
  hasBias: boolean;
  /** Name of the batch-norm layer attached to this one, if any. */
  batchnormFrom?: string;
}

export interface ExportPlan {
  source: string;
  layers: PlannedLayer[];
  /** Names of unsupported layers dropped under skipUnsupported. */
  skipped: string[];
}

const WEIGHT_LAYER_KINDS: Record<string, LayerKind> = {
  Dense: 'dense',
  Conv2D: 'conv2d',
};

function kernelFor(checkpoint: Checkpoint, layer: LayerConfig,
  kind: LayerKind): { shape: number[]; values: Float32Array } {
  const kernel = layerTensor(checkpoint, layer.name, 'kernel');
  if (!kernel) {
    throw new ExportError(`layer '${layer.name}' has no kernel tensor`);
  }
  const rank = kind === 'dense' ? 2 : 4;
  if (kernel.shape.length !== rank) {
    throw new ExportError(
      `layer '${layer.name}': expected rank-${rank} kernel, got [${kernel.shape}]`);
  }
  return kernel;
}

function attachBatchNorm(checkpoint: Checkpoint, layer: LayerConfig,
  target: NwaLayer | undefined): void {
  if (!target) {
    throw new ExportError(
      `batch norm '${layer.name}' does not follow a dense or conv layer`);
  }
  if (target.batchnorm) {
    throw new ExportError(
      `layer '${target.name}' already has batch norm; '${layer.name}' is the second`);
  }
  const units = target.shape[target.shape.length - 1];
  const variance = layerTensor(checkpoint, layer.name, 'moving_variance');
  if (!variance) {
    throw new ExportError(`batch norm '${layer.name}' has no moving_variance tensor`);
  }
  // scale=false layers store no gamma; the archive expects explicit ones.
  const gamma = layerTensor(checkpoint, layer.name, 'gamma');
  const epsilon = typeof layer.config.epsilon === 'number'
    ? layer.config.epsilon
    : DEFAULT_BN_EPSILON;
  target.batchnorm = {
    gamma: gamma ? gamma.values : new Float32Array(units).fill(1),
    movingVariance: variance.values,
    epsilon,
  };
}

/**
 * Map checkpoint layers onto archive layers.
 *
 * Dense and Conv2D become archive layers; BatchNormalization attaches to
 * the layer before it; weightless layers (activations, dropout, pooling,
 * flatten, ...) are passed over. Any other layer that carries tensors
 * raises UnsupportedLayerError unless options.skipUnsupported is set.
 */
export function planExport(checkpoint: Checkpoint, source: string,
  options: ExportOptions = {}): { plan: ExportPlan; layers: NwaLayer[] } {
  if (checkpoint.className !== 'Sequential') {
    throw new ExportError(
      `only Sequential models are supported, got '${checkpoint.className}'`);
  }

  const plan: ExportPlan = { source, layers: [], skipped: [] };
  const layers: NwaLayer[] = [];

  for (const layer of checkpoint.layers) {
    const kind = WEIGHT_LAYER_KINDS[layer.className];
    if (kind) {
      const kernel = kernelFor(checkpoint, layer, kind);
      const bias = layerTensor(checkpoint, layer.name, 'bias');
      layers.push({
        name: layer.name,
        kind,
        shape: kernel.shape,
        weights: kernel.values,
        bias: bias?.values,
      });
      plan.layers.push({
        sourceName: layer.name,
        sourceClass: layer.className,
        kind,
        shape: kernel.shape,
        hasBias: bias !== undefined,
      });
      continue;
    }
    if (layer.className === 'BatchNormalization') {
      attachBatchNorm(checkpoint, layer, layers[layers.length - 1]);
      plan.layers[plan.layers.length - 1].batchnormFrom = layer.name;
      continue;
    }
    if (!layerHasTensors(checkpoint, layer.name)) {
      continue; // activation / dropout / flatten / pooling: nothing to copy
    }
    if (options.skipUnsupported) {
      plan.skipped.push(layer.name);
      continue;
    }
    throw new UnsupportedLayerError(
      `unsupported layer '${layer.name}' (${layer.className}); ` +
      'pass --skip-unsupported to drop it');
  }

  return { plan, layers };
}

/** Read a checkpoint, convert it, and write the archive to outPath. */
export function exportCheckpoint(checkpointPath: string, outPath: string,
  options: ExportOptions = {}): ExportPlan {
  const checkpoint = readCheckpoint(checkpointPath);
  const { plan, layers } = planExport(checkpoint, checkpointPath, options);
  fs.writeFileSync(outPath, encodeArchive(layers));
  return plan;
}
