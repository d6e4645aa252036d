/**
 * NWA v1 weight archive encoding.
 *
 * Layout: 8 ASCII magic bytes "NWARCH01", a little-endian uint64 manifest
 * length, a compact JSON manifest with sorted keys, then one blob of
 * little-endian float32 values. Offsets in the manifest are byte offsets
 * into the blob and are always 4-byte aligned. Dense weights are stored
 * row-major as [fan_in, fan_out], conv2d weights as
 * [kernel_h, kernel_w, in_channels, out_channels].
 */

export const MAGIC = 'NWARCH01';
export const FORMAT_VERSION = 1;
export const HEADER_BYTES = 16;

export type LayerKind = 'dense' | 'conv2d';

export interface BatchNormValues {
  gamma: Float32Array;
  movingVariance: Float32Array;
  epsilon: number;
}

/** One layer's tensors, ready to be packed into an archive. */
export interface NwaLayer {
  name: string;
  kind: LayerKind;
  shape: number[];
  weights: Float32Array;
  bias?: Float32Array;
  batchnorm?: BatchNormValues;
}

export class NwaFormatError extends Error {}

const KIND_RANK: Record<LayerKind, number> = { dense: 2, conv2d: 4 };

function check(cond: boolean, message: string): asserts cond {
  if (!cond) {
    throw new NwaFormatError(message);
  }
}

function allFinite(values: Float32Array): boolean {
  for (let i = 0; i < values.length; i++) {
    if (!Number.isFinite(values[i])) {
      return false;
    }
  }
  return true;
}

function unitsOut(layer: NwaLayer): number {
  return layer.shape[layer.shape.length - 1];
}

/** Throw NwaFormatError unless the layer list satisfies every invariant. */
export function validateLayers(layers: NwaLayer[]): void {
  layers.forEach((layer, i) => {
    const where = `layer ${i} ('${layer.name}')`;
    check(layer.kind === 'dense' || layer.kind === 'conv2d',
      `${where}: unknown kind '${layer.kind}'`);
    check(layer.shape.length === KIND_RANK[layer.kind],
      `${where}: ${layer.kind} shape must have rank ${KIND_RANK[layer.kind]}, ` +
      `got [${layer.shape}]`);
    check(layer.shape.every((d) => Number.isInteger(d) && d > 0),
      `${where}: shape entries must be positive integers, got [${layer.shape}]`);
    const count = layer.shape.reduce((a, b) => a * b, 1);
    check(layer.weights.length === count,
      `${where}: expected ${count} weights for shape [${layer.shape}], ` +
      `got ${layer.weights.length}`);
    check(allFinite(layer.weights), `${where}: weights contain non-finite values`);
    const out = unitsOut(layer);
    if (layer.bias) {
      check(layer.bias.length === out,
        `${where}: bias length ${layer.bias.length} != ${out} output units`);
      check(allFinite(layer.bias), `${where}: bias contains non-finite values`);
    }
    if (layer.batchnorm) {
      const bn = layer.batchnorm;
      check(Number.isFinite(bn.epsilon) && bn.epsilon > 0,
        `${where}: batchnorm epsilon must be finite and positive`);
      check(bn.gamma.length === out,
        `${where}: gamma length ${bn.gamma.length} != ${out} output units`);
      check(bn.movingVariance.length === out,
        `${where}: moving variance length ${bn.movingVariance.length} != ${out}`);
      check(allFinite(bn.gamma), `${where}: gamma contains non-finite values`);
      check(allFinite(bn.movingVariance) &&
        bn.movingVariance.every((v) => v >= 0),
        `${where}: moving variance must be finite and non-negative`);
    }
  });

  for (let i = 0; i + 1 < layers.length; i++) {
    const a = layers[i];
    const b = layers[i + 1];
    if (a.kind === 'dense' && b.kind === 'dense') {
      check(a.shape[1] === b.shape[0],
        `dense layers ${i} and ${i + 1} do not chain: ` +
        `fan_out ${a.shape[1]} != fan_in ${b.shape[0]}`);
    }
    if (a.kind === 'conv2d' && b.kind === 'conv2d') {
      check(a.shape[3] === b.shape[2],
        `conv layers ${i} and ${i + 1} do not chain: ` +
        `out_channels ${a.shape[3]} != in_channels ${b.shape[2]}`);
    }
  }
}

function isLittleEndian(): boolean {
  const probe = new ArrayBuffer(4);
  new Float32Array(probe)[0] = 1;
  return new Uint8Array(probe)[0] === 0;
}

const LITTLE_ENDIAN = isLittleEndian();

function float32LeBytes(values: Float32Array): Uint8Array {
  if (LITTLE_ENDIAN) {
    return new Uint8Array(values.buffer.slice(
      values.byteOffset, values.byteOffset + values.byteLength));
  }
  const out = new Uint8Array(values.length * 4);
  const view = new DataView(out.buffer);
  for (let i = 0; i < values.length; i++) {
    view.setFloat32(i * 4, values[i], true);
  }
  return out;
}

function float32FromLe(bytes: Uint8Array, offset: number, count: number): Float32Array {
  const view = new DataView(bytes.buffer, bytes.byteOffset + offset, count * 4);
  const out = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    out[i] = view.getFloat32(i * 4, true);
  }
  return out;
}

/**
 * Pack layers into NWA v1 bytes.
 *
 * Blob order per layer: weights, then bias, then gamma and moving variance.
 * The manifest is emitted with sorted keys so encoding is deterministic.
 */
export function encodeArchive(layers: NwaLayer[]): Uint8Array {
  validateLayers(layers);

  const chunks: Uint8Array[] = [];
  let blobSize = 0;
  const append = (values: Float32Array): number => {
    const bytes = float32LeBytes(values);
    const offset = blobSize;
    chunks.push(bytes);
    blobSize += bytes.length;
    return offset;
  };

  const manifestLayers = layers.map((layer) => {
    const weightOffset = append(layer.weights);
    const biasOffset = layer.bias ? append(layer.bias) : null;
    let batchnorm: Record<string, number> | null = null;
    if (layer.batchnorm) {
      const gammaOffset = append(layer.batchnorm.gamma);
      const varianceOffset = append(layer.batchnorm.movingVariance);
      // keys in sorted order; JSON.stringify preserves insertion order
      batchnorm = {
        epsilon: layer.batchnorm.epsilon,
        gamma_offset: gammaOffset,
        moving_variance_offset: varianceOffset,
      };
    }
    return {
      batchnorm,
      bias_offset: biasOffset,
      kind: layer.kind,
      name: layer.name,
      shape: layer.shape,
      weight_offset: weightOffset,
    };
  });

  const manifest = JSON.stringify({ layers: manifestLayers, version: FORMAT_VERSION });
  const manifestBytes = new TextEncoder().encode(manifest);

  const out = new Uint8Array(HEADER_BYTES + manifestBytes.length + blobSize);
  out.set(new TextEncoder().encode(MAGIC), 0);
  new DataView(out.buffer).setBigUint64(8, BigInt(manifestBytes.length), true);
  out.set(manifestBytes, HEADER_BYTES);
  let cursor = HEADER_BYTES + manifestBytes.length;
  for (const chunk of chunks) {
    out.set(chunk, cursor);
    cursor += chunk.length;
  }
  return out;
}

export interface DecodedLayer {
  name: string;
  kind: LayerKind;
  shape: number[];
  weights: Float32Array;
  bias?: Float32Array;
  gamma?: Float32Array;
  movingVariance?: Float32Array;
  epsilon?: number;
}

/** Parse NWA bytes back into per-layer tensors (used to verify round trips). */
export function decodeArchive(data: Uint8Array): DecodedLayer[] {
  check(data.length >= HEADER_BYTES, `file too short for header: ${data.length} bytes`);
  const magic = new TextDecoder().decode(data.subarray(0, 8));
  check(magic === MAGIC, `bad magic '${magic}'`);
  const manifestLength = Number(new DataView(data.buffer, data.byteOffset).getBigUint64(8, true));
  check(data.length >= HEADER_BYTES + manifestLength,
    'file too short for declared manifest length');
  const manifest = JSON.parse(
    new TextDecoder().decode(data.subarray(HEADER_BYTES, HEADER_BYTES + manifestLength)));
  check(manifest && typeof manifest === 'object' && Array.isArray(manifest.layers),
    "manifest missing 'layers' list");
  check(manifest.version === FORMAT_VERSION,
    `unsupported version ${manifest.version}, expected ${FORMAT_VERSION}`);

  const blob = data.subarray(HEADER_BYTES + manifestLength);
  return manifest.layers.map((entry: Record<string, unknown>) => {
    const shape = entry.shape as number[];
    const count = shape.reduce((a, b) => a * b, 1);
    const out = shape[shape.length - 1];
    const layer: DecodedLayer = {
      name: entry.name as string,
      kind: entry.kind as LayerKind,
      shape,
      weights: float32FromLe(blob, entry.weight_offset as number, count),
    };
    if (entry.bias_offset !== null && entry.bias_offset !== undefined) {
      layer.bias = float32FromLe(blob, entry.bias_offset as number, out);
    }
    const bn = entry.batchnorm as Record<string, number> | null;
    if (bn) {
      layer.gamma = float32FromLe(blob, bn.gamma_offset, out);
      layer.movingVariance = float32FromLe(blob, bn.moving_variance_offset, out);
      layer.epsilon = bn.epsilon;
    }
    return layer;
  });
}
