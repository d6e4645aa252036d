"""Reading and writing NWA v1 weight archives.

An archive is a single file holding the weights of a feed-forward network:

    bytes 0..7    ASCII magic "NWARCH01"
    bytes 8..15   uint64 little-endian manifest length L
    bytes 16..16+L UTF-8 JSON manifest
    remainder     blob of little-endian float32 values

The manifest is ``{"version": 1, "layers": [...]}`` where each layer entry
carries ``name``, ``kind`` ("dense" or "conv2d"), ``shape``, ``weight_offset``,
``bias_offset`` (or null) and ``batchnorm`` (null or an object with
``gamma_offset``, ``moving_variance_offset``, ``epsilon``). Offsets are in
bytes relative to the blob start and must be 4-byte aligned.

Element order is row major. Dense layers have shape [fan_in, fan_out] with
flat index ``in_idx * fan_out + out_idx``; conv2d layers have shape
[kernel_h, kernel_w, in_channels, out_channels] with flat index
``((kh * kernel_w + kw) * in_channels + in_idx) * out_channels + out_idx``.

Writers emit the manifest as compact JSON with sorted keys, so writing is
canonical: reading a file and writing it back reproduces it byte for byte.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"NWARCH01"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sQ")
_F4 = np.dtype("<f4")

KINDS = ("dense", "conv2d")
_KIND_RANK = {"dense": 2, "conv2d": 4}


class ArchiveFormatError(ValueError):
    """Raised when bytes or field values violate the archive format."""


@dataclass(frozen=True)
class BatchNormSpec:
    """Offsets of the per-output-channel batch norm arrays for one layer."""

    gamma_offset: int
    moving_variance_offset: int
    epsilon: float


@dataclass(frozen=True)
class LayerSpec:
    name: str
    kind: str
    shape: tuple[int, ...]
    weight_offset: int
    bias_offset: int | None = None
    batchnorm: BatchNormSpec | None = None

    @property
    def weight_count(self) -> int:
        return int(np.prod(self.shape))

    @property
    def units_out(self) -> int:
        """fan_out for dense layers, out_channels for conv layers."""
        return self.shape[-1]

    @property
    def units_in(self) -> int:
        """fan_in for dense layers, in_channels for conv layers."""
        return self.shape[-2]


@dataclass(frozen=True)
class WeightArchive:
    layers: tuple[LayerSpec, ...]
    blob: bytes
    version: int = FORMAT_VERSION

    def _array(self, offset: int, count: int) -> np.ndarray:
        a = np.frombuffer(self.blob, dtype=_F4, count=count, offset=offset)
        return a

    def layer_weights(self, index: int) -> np.ndarray:
        """Weight tensor of layer ``index`` reshaped to its declared shape.

        The returned array is a read-only view into the blob; copy before
        mutating.
        """
        layer = self.layers[index]
        return self._array(layer.weight_offset, layer.weight_count).reshape(layer.shape)

    def layer_bias(self, index: int) -> np.ndarray | None:
        layer = self.layers[index]
        if layer.bias_offset is None:
            return None
        return self._array(layer.bias_offset, layer.units_out)

    def layer_gamma(self, index: int) -> np.ndarray | None:
        layer = self.layers[index]
        if layer.batchnorm is None:
            return None
        return self._array(layer.batchnorm.gamma_offset, layer.units_out)

    def layer_moving_variance(self, index: int) -> np.ndarray | None:
        layer = self.layers[index]
        if layer.batchnorm is None:
            return None
        return self._array(layer.batchnorm.moving_variance_offset, layer.units_out)

    def batchnorm_scale(self, index: int) -> np.ndarray | None:
        """Per-channel folding factor |gamma| / sqrt(moving_variance + eps)."""
        layer = self.layers[index]
        if layer.batchnorm is None:
            return None
        gamma = self.layer_gamma(index)
        var = self.layer_moving_variance(index)
        return np.abs(gamma) / np.sqrt(var + layer.batchnorm.epsilon)

    def all_dense(self) -> bool:
        return all(l.kind == "dense" for l in self.layers)


class ArchiveBuilder:
    """Packs arrays into a blob and assembles a validated WeightArchive."""

    def __init__(self) -> None:
        self._chunks: list[bytes] = []
        self._size = 0
        self._layers: list[LayerSpec] = []

    def _append(self, array: np.ndarray, what: str) -> int:
        if array.dtype != np.float32:
            raise ArchiveFormatError(
                f"{what} must be float32, got {array.dtype} (v1 stores float32 only)"
            )
        data = np.ascontiguousarray(array, dtype=_F4).tobytes()
        offset = self._size
        self._chunks.append(data)
        self._size += len(data)
        return offset

    def _add(self, name, kind, weights, bias, batchnorm) -> None:
        w_off = self._append(weights, f"layer {name!r} weights")
        b_off = None
        if bias is not None:
            b_off = self._append(bias, f"layer {name!r} bias")
        bn = None
        if batchnorm is not None:
            gamma, var, eps = batchnorm
            g_off = self._append(gamma, f"layer {name!r} gamma")
            v_off = self._append(var, f"layer {name!r} moving variance")
            bn = BatchNormSpec(g_off, v_off, float(eps))
        self._layers.append(
            LayerSpec(str(name), kind, tuple(int(d) for d in weights.shape), w_off, b_off, bn)
        )

    def add_dense(self, name: str, weights: np.ndarray, bias: np.ndarray | None = None,
                  batchnorm=None) -> "ArchiveBuilder":
        """Add a dense layer; weights shaped (fan_in, fan_out)."""
        self._add(name, "dense", weights, bias, batchnorm)
        return self

    def add_conv2d(self, name: str, weights: np.ndarray, bias: np.ndarray | None = None,
                   batchnorm=None) -> "ArchiveBuilder":
        """Add a conv2d layer; weights shaped (kh, kw, in_channels, out_channels).

        ``batchnorm`` is an optional (gamma, moving_variance, epsilon) triple.
        """
        self._add(name, "conv2d", weights, bias, batchnorm)
        return self

    def build(self) -> WeightArchive:
        archive = WeightArchive(tuple(self._layers), b"".join(self._chunks))
        validate_archive(archive)
        return archive


def _check(cond: bool, message: str) -> None:
    if not cond:
        raise ArchiveFormatError(message)


def validate_archive(archive: WeightArchive) -> None:
    """Raise ArchiveFormatError unless ``archive`` satisfies every invariant."""
    _check(archive.version == FORMAT_VERSION,
           f"unsupported version {archive.version!r}, expected {FORMAT_VERSION}")
    blob_len = len(archive.blob)
    ranges: list[tuple[int, int, str]] = []

    def claim(offset, count, what):
        _check(isinstance(offset, int) and offset >= 0, f"{what}: offset must be a non-negative integer")
        _check(offset % 4 == 0, f"{what}: offset {offset} is not 4-byte aligned")
        end = offset + 4 * count
        _check(end <= blob_len, f"{what}: range [{offset}, {end}) exceeds blob of {blob_len} bytes")
        ranges.append((offset, end, what))

    for i, layer in enumerate(archive.layers):
        where = f"layer {i} ({layer.name!r})"
        _check(layer.kind in KINDS, f"{where}: unknown kind {layer.kind!r}")
        _check(len(layer.shape) == _KIND_RANK[layer.kind],
               f"{where}: {layer.kind} shape must have rank {_KIND_RANK[layer.kind]}, got {layer.shape}")
        _check(all(isinstance(d, int) and d > 0 for d in layer.shape),
               f"{where}: shape entries must be positive integers, got {layer.shape}")
        claim(layer.weight_offset, layer.weight_count, f"{where} weights")
        if layer.bias_offset is not None:
            claim(layer.bias_offset, layer.units_out, f"{where} bias")
        if layer.batchnorm is not None:
            bn = layer.batchnorm
            _check(np.isfinite(bn.epsilon) and bn.epsilon > 0,
                   f"{where}: batchnorm epsilon must be finite and positive")
            claim(bn.gamma_offset, layer.units_out, f"{where} gamma")
            claim(bn.moving_variance_offset, layer.units_out, f"{where} moving variance")

    ranges.sort()
    for (s0, e0, w0), (s1, e1, w1) in zip(ranges, ranges[1:]):
        _check(e0 <= s1, f"blob ranges overlap: {w0} and {w1}")

    for i, layer in enumerate(archive.layers):
        where = f"layer {i} ({layer.name!r})"
        _check(bool(np.isfinite(archive.layer_weights(i)).all()),
               f"{where}: weights contain non-finite values")
        bias = archive.layer_bias(i)
        _check(bias is None or bool(np.isfinite(bias).all()),
               f"{where}: bias contains non-finite values")
        if layer.batchnorm is not None:
            _check(bool(np.isfinite(archive.layer_gamma(i)).all()),
                   f"{where}: gamma contains non-finite values")
            var = archive.layer_moving_variance(i)
            _check(bool(np.isfinite(var).all()) and bool((var >= 0).all()),
                   f"{where}: moving variance must be finite and non-negative")

    for i in range(len(archive.layers) - 1):
        a, b = archive.layers[i], archive.layers[i + 1]
        if a.kind == b.kind == "dense":
            _check(a.shape[1] == b.shape[0],
                   f"dense layers {i} and {i + 1} do not chain: fan_out {a.shape[1]} != fan_in {b.shape[0]}")
        if a.kind == b.kind == "conv2d":
            _check(a.shape[3] == b.shape[2],
                   f"conv layers {i} and {i + 1} do not chain: out_channels {a.shape[3]} != in_channels {b.shape[2]}")


def _layer_to_json(layer: LayerSpec) -> dict:
    bn = None
    if layer.batchnorm is not None:
        bn = {
            "gamma_offset": layer.batchnorm.gamma_offset,
            "moving_variance_offset": layer.batchnorm.moving_variance_offset,
            "epsilon": layer.batchnorm.epsilon,
        }
    return {
        "name": layer.name,
        "kind": layer.kind,
        "shape": list(layer.shape),
        "weight_offset": layer.weight_offset,
        "bias_offset": layer.bias_offset,
        "batchnorm": bn,
    }


def archive_to_bytes(archive: WeightArchive) -> bytes:
    validate_archive(archive)
    manifest = {
        "version": archive.version,
        "layers": [_layer_to_json(l) for l in archive.layers],
    }
    encoded = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return _HEADER.pack(MAGIC, len(encoded)) + encoded + archive.blob


def archive_from_bytes(data: bytes) -> WeightArchive:
    _check(len(data) >= _HEADER.size, f"file too short for header: {len(data)} bytes")
    magic, manifest_len = _HEADER.unpack_from(data)
    _check(magic == MAGIC, f"bad magic {magic!r}")
    _check(len(data) >= _HEADER.size + manifest_len,
           "file too short for declared manifest length")
    try:
        manifest = json.loads(data[_HEADER.size : _HEADER.size + manifest_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ArchiveFormatError(f"manifest is not valid JSON: {exc}") from exc
    _check(isinstance(manifest, dict), "manifest must be a JSON object")
    _check(isinstance(manifest.get("layers"), list), "manifest missing 'layers' list")
    version = manifest.get("version")
    _check(isinstance(version, int), "manifest missing integer 'version'")

    layers = []
    for i, entry in enumerate(manifest["layers"]):
        _check(isinstance(entry, dict), f"layer {i}: manifest entry must be an object")
        try:
            shape = tuple(int(d) for d in entry["shape"])
            bn_entry = entry.get("batchnorm")
            bn = None
            if bn_entry is not None:
                bn = BatchNormSpec(
                    gamma_offset=bn_entry["gamma_offset"],
                    moving_variance_offset=bn_entry["moving_variance_offset"],
                    epsilon=float(bn_entry["epsilon"]),
                )
            layers.append(
                LayerSpec(
                    name=str(entry["name"]),
                    kind=entry["kind"],
                    shape=shape,
                    weight_offset=entry["weight_offset"],
                    bias_offset=entry.get("bias_offset"),
                    batchnorm=bn,
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ArchiveFormatError(f"layer {i}: malformed manifest entry: {exc}") from exc

    archive = WeightArchive(tuple(layers), data[_HEADER.size + manifest_len :], version)
    validate_archive(archive)
    return archive


def read_archive(path: str | Path) -> WeightArchive:
    """Read and validate an NWA file."""
    return archive_from_bytes(Path(path).read_bytes())


def write_archive(archive: WeightArchive, path: str | Path) -> None:
    """Validate and write ``archive`` to ``path`` in canonical form."""
    Path(path).write_bytes(archive_to_bytes(archive))
