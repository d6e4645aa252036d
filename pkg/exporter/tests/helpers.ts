/** Fixture builders: synthetic layers-model checkpoints in temp directories. */

import * as fs from 'node:fs';
import * as os from 'node:os';
import * as path from 'node:path';

export interface TensorFixture {
  name: string;
  shape: number[];
  data: number[];
  dtype?: 'float32' | 'float64' | 'int32';
}

export interface CheckpointOptions {
  className?: string;
  /** Split the weight blob across this many shard files. */
  shards?: number;
  /** Nest the topology under modelTopology.model_config (Keras converter style). */
  nest?: boolean;
}

/** Small deterministic PRNG so fixtures are reproducible. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function randomValues(n: number, rand: () => number,
  lo = -1, hi = 1): number[] {
  return Array.from({ length: n }, () => lo + (hi - lo) * rand());
}

function tensorBytes(tensor: TensorFixture): Uint8Array {
  const dtype = tensor.dtype ?? 'float32';
  const count = tensor.shape.reduce((a, b) => a * b, 1);
  if (tensor.data.length !== count) {
    throw new Error(`fixture '${tensor.name}': ${tensor.data.length} values for shape [${tensor.shape}]`);
  }
  const width = dtype === 'float64' ? 8 : 4;
  const out = new Uint8Array(count * width);
  const view = new DataView(out.buffer);
  tensor.data.forEach((v, i) => {
    if (dtype === 'float32') view.setFloat32(i * 4, v, true);
    else if (dtype === 'float64') view.setFloat64(i * 8, v, true);
    else view.setInt32(i * 4, v, true);
  });
  return out;
}

/**
 * Write model.json plus weight shards into a fresh temp directory and
 * return its path. `layers` entries are raw Keras layer dicts
 * ({class_name, config: {name, ...}}).
 */
export function makeCheckpointDir(layers: object[], tensors: TensorFixture[],
  options: CheckpointOptions = {}): string {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), 'nwa-export-test-'));

  const chunks = tensors.map(tensorBytes);
  const total = chunks.reduce((n, c) => n + c.length, 0);
  const blob = new Uint8Array(total);
  let cursor = 0;
  for (const chunk of chunks) {
    blob.set(chunk, cursor);
    cursor += chunk.length;
  }

  const shardCount = options.shards ?? 1;
  const paths: string[] = [];
  const step = Math.ceil(total / shardCount) || 1;
  for (let i = 0; i < shardCount; i++) {
    const name = `group1-shard${i + 1}of${shardCount}.bin`;
    fs.writeFileSync(path.join(dir, name), blob.subarray(i * step, (i + 1) * step));
    paths.push(name);
  }

  const topology = {
    class_name: options.className ?? 'Sequential',
    config: { name: 'seq', layers },
  };
  const modelJson = {
    format: 'layers-model',
    modelTopology: options.nest ? { model_config: topology } : topology,
    weightsManifest: [{
      paths,
      weights: tensors.map((t) => ({
        name: t.name, shape: t.shape, dtype: t.dtype ?? 'float32',
      })),
    }],
  };
  fs.writeFileSync(path.join(dir, 'model.json'), JSON.stringify(modelJson));
  return dir;
}

export function denseLayer(name: string, units: number): object {
  return { class_name: 'Dense', config: { name, units, activation: 'relu' } };
}

export function batchNormLayer(name: string, epsilon?: number): object {
  const config: Record<string, unknown> = { name };
  if (epsilon !== undefined) {
    config.epsilon = epsilon;
  }
  return { class_name: 'BatchNormalization', config };
}
