"""Canonical JSON analysis reports.

Reports are dictionaries rendered with sorted keys and fixed indentation so
that the same analysis always produces byte-identical output. Execution
details that vary between runs of the same command (wall time, worker count)
stay out of the canonical payload; timing is attached only on request.

The report layout is documented by the JSON schema shipped at
``nncluster/schemas/analysis_report.schema.json``.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from .archive import WeightArchive
from .graph import WeightedGraph
from .shuffles import ShuffleReport
from .spectral import Partition, SpectralConfig

__all__ = [
    "REPORT_VERSION",
    "archive_digest",
    "cluster_report",
    "shuffle_test_report",
    "render_json",
]

REPORT_VERSION = 1


def archive_digest(data: bytes) -> str:
    """Hex SHA-256 of the serialized archive."""
    return hashlib.sha256(data).hexdigest()


def _input_section(archive: WeightArchive, digest: str) -> dict:
    return {
        "sha256": digest,
        "n_layers": len(archive.layers),
        "layer_names": [layer.name for layer in archive.layers],
        "layer_kinds": [layer.kind for layer in archive.layers],
    }


def _graph_section(graph: WeightedGraph) -> dict:
    return {
        "n_nodes": graph.n_nodes,
        "n_edges": int(graph.adjacency.nnz // 2),
        "total_weight": float(graph.adjacency.sum() / 2.0),
    }


def _spectral_section(config: SpectralConfig) -> dict:
    return {
        "k": config.k,
        "kmeans_restarts": config.kmeans_restarts,
        "kmeans_max_iters": config.kmeans_max_iters,
        "seed": config.seed,
        "eigensolver_tolerance": config.eigensolver_tolerance,
    }


def _partition_section(partition: Partition) -> dict:
    return {
        "cluster_sizes": [int(s) for s in partition.cluster_sizes()],
        "n_empty_clusters": len(partition.empty_clusters()),
        "degenerate": partition.is_degenerate,
    }


def cluster_report(archive: WeightArchive, digest: str, graph: WeightedGraph,
                   partition: Partition, ncut_value: float,
                   config: SpectralConfig) -> dict:
    return {
        "report_version": REPORT_VERSION,
        "kind": "cluster",
        "input": _input_section(archive, digest),
        "graph": _graph_section(graph),
        "spectral": _spectral_section(config),
        "partition": _partition_section(partition),
        "ncut": float(ncut_value),
    }


def shuffle_test_report(archive: WeightArchive, digest: str,
                        graph: WeightedGraph, partition: Partition,
                        shuffle: ShuffleReport, requested_shuffles: int,
                        seed: int, config: SpectralConfig) -> dict:
    ncuts = [float(v) for v in shuffle.shuffle_ncuts]
    z = float(shuffle.z_score)
    report = {
        "report_version": REPORT_VERSION,
        "kind": "shuffle-test",
        "input": _input_section(archive, digest),
        "graph": _graph_section(graph),
        "spectral": _spectral_section(config),
        "partition": _partition_section(partition),
        "ncut": float(shuffle.observed_ncut),
        "shuffle": {
            "method": shuffle.method,
            "seed": seed,
            "requested_shuffles": requested_shuffles,
            "n_shuffles": shuffle.n_shuffles,
            "excluded_shuffles": shuffle.excluded_shuffles,
            "degenerate_shuffles": len(shuffle.degenerate_shuffles),
            "p_value": float(shuffle.p_value),
            "z_score": None if np.isnan(z) else z,
            "ncuts": ncuts,
            "summary": {
                "mean": float(np.mean(ncuts)) if ncuts else None,
                "std": (float(np.std(ncuts, ddof=1))
                        if len(ncuts) > 1 else None),
                "min": float(min(ncuts)) if ncuts else None,
                "max": float(max(ncuts)) if ncuts else None,
            },
        },
    }
    return report


def render_json(report: dict) -> str:
    """Canonical serialization: sorted keys, two-space indent, newline end."""
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"
