/**
 * Reader for Keras-style layers-model checkpoints: a model.json describing
 * the topology plus binary weight shards listed in its weightsManifest.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';

export class CheckpointError extends Error {}

export interface WeightSpec {
  name: string;
  shape: number[];
  dtype: string;
}

export interface LayerConfig {
  className: string;
  name: string;
  config: Record<string, unknown>;
}

export interface Checkpoint {
  /** Directory the shards live in. */
  dir: string;
  /** Topology class, e.g. 'Sequential'. */
  className: string;
  layers: LayerConfig[];
  /** Tensor name -> spec, in manifest order. */
  specs: Map<string, WeightSpec>;
  /** Tensor name -> values cast to float32 (null for non-float dtypes). */
  tensors: Map<string, Float32Array | null>;
}

function fail(message: string): never {
  throw new CheckpointError(message);
}

function dtypeBytes(dtype: string): number {
  switch (dtype) {
    case 'float32':
    case 'int32':
      return 4;
    case 'float64':
      return 8;
    case 'bool':
      return 1;
    default:
      return fail(`unsupported tensor dtype '${dtype}'`);
  }
}

function castToFloat32(bytes: Uint8Array, offset: number, count: number,
  dtype: string): Float32Array | null {
  const view = new DataView(bytes.buffer, bytes.byteOffset + offset);
  const out = new Float32Array(count);
  if (dtype === 'float32') {
    for (let i = 0; i < count; i++) {
      out[i] = view.getFloat32(i * 4, true);
    }
  } else if (dtype === 'float64') {
    for (let i = 0; i < count; i++) {
      out[i] = Math.fround(view.getFloat64(i * 8, true));
    }
  } else {
    return null;
  }
  return out;
}

interface ManifestGroup {
  paths: string[];
  weights: WeightSpec[];
}

function readGroup(dir: string, group: ManifestGroup,
  specs: Map<string, WeightSpec>, tensors: Map<string, Float32Array | null>): void {
  const shards = group.paths.map((p) => {
    const shardPath = path.join(dir, p);
    if (!fs.existsSync(shardPath)) {
      fail(`missing weight shard '${p}'`);
    }
    return new Uint8Array(fs.readFileSync(shardPath));
  });
  const total = shards.reduce((n, s) => n + s.length, 0);
  const data = new Uint8Array(total);
  let cursor = 0;
  for (const shard of shards) {
    data.set(shard, cursor);
    cursor += shard.length;
  }

  let offset = 0;
  for (const spec of group.weights) {
    const count = spec.shape.reduce((a, b) => a * b, 1);
    const byteLength = count * dtypeBytes(spec.dtype);
    if (offset + byteLength > data.length) {
      fail(`weight data exhausted while reading '${spec.name}'`);
    }
    if (specs.has(spec.name)) {
      fail(`duplicate tensor name '${spec.name}'`);
    }
    specs.set(spec.name, spec);
    tensors.set(spec.name, castToFloat32(data, offset, count, spec.dtype));
    offset += byteLength;
  }
}

/**
 * Load a checkpoint from a model.json path or a directory containing one.
 */
export function readCheckpoint(checkpointPath: string): Checkpoint {
  let modelJsonPath = checkpointPath;
  if (fs.existsSync(checkpointPath) && fs.statSync(checkpointPath).isDirectory()) {
    modelJsonPath = path.join(checkpointPath, 'model.json');
  }
  if (!fs.existsSync(modelJsonPath)) {
    fail(`no model.json at '${checkpointPath}'`);
  }
  let parsed: Record<string, unknown>;
  try {
    parsed = JSON.parse(fs.readFileSync(modelJsonPath, 'utf8'));
  } catch (err) {
    return fail(`could not parse '${modelJsonPath}': ${(err as Error).message}`);
  }

  let topology = parsed.modelTopology as Record<string, unknown> | undefined;
  if (!topology) {
    fail("model.json has no 'modelTopology'");
  }
  // Keras-converted models nest the architecture under model_config.
  if (topology.model_config) {
    topology = topology.model_config as Record<string, unknown>;
  }
  const className = topology.class_name as string;
  const config = topology.config as Record<string, unknown> | undefined;
  if (!className || !config || !Array.isArray(config.layers)) {
    fail("model.json topology is missing 'class_name' or 'config.layers'");
  }
  const layers: LayerConfig[] = (config.layers as Record<string, unknown>[]).map((entry) => {
    const layerConfig = (entry.config ?? {}) as Record<string, unknown>;
    return {
      className: entry.class_name as string,
      name: (layerConfig.name as string) ?? '',
      config: layerConfig,
    };
  });

  const specs = new Map<string, WeightSpec>();
  const tensors = new Map<string, Float32Array | null>();
  const dir = path.dirname(modelJsonPath);
  const groups = (parsed.weightsManifest ?? []) as ManifestGroup[];
  for (const group of groups) {
    readGroup(dir, group, specs, tensors);
  }

  return { dir, className, layers, specs, tensors };
}

export interface TensorEntry {
  shape: number[];
  values: Float32Array;
}

/**
 * Fetch a layer's tensor by suffix ('kernel', 'bias', 'gamma', ...).
 * Tensor names look like 'dense_1/kernel' or 'seq/dense_1/kernel'.
 * Returns undefined when the layer has no such tensor.
 */
export function layerTensor(checkpoint: Checkpoint, layerName: string,
  suffix: string): TensorEntry | undefined {
  for (const [name, spec] of checkpoint.specs) {
    const parts = name.split('/');
    if (parts.includes(layerName) && parts[parts.length - 1] === suffix) {
      const values = checkpoint.tensors.get(name);
      if (values === null || values === undefined) {
        fail(`tensor '${name}' has non-float dtype '${spec.dtype}'`);
      }
      return { shape: spec.shape, values };
    }
  }
  return undefined;
}

/** True when any stored tensor belongs to the named layer. */
export function layerHasTensors(checkpoint: Checkpoint, layerName: string): boolean {
  for (const name of checkpoint.specs.keys()) {
    if (name.split('/').includes(layerName)) {
      return true;
    }
  }
  return false;
}
