"""Command line interface.

Commands analyze weight archives, transform them, run the training demos,
and render report figures. Analysis commands emit one canonical JSON report
on stdout (or to --output): keys sorted, two-space indent, no volatile
fields, so the same command always produces byte-identical bytes. Timing is
opt-in via --timing, which adds a timing object to the JSON and a human
line on stderr.

Exit codes: 0 success, 2 unusable input (missing or malformed archive,
bad arguments), 3 degenerate analysis (empty or too-small graph, eigensolver
failure), 4 training failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
from pathlib import Path

from .archive import (
    ArchiveFormatError,
    WeightArchive,
    archive_from_bytes,
    archive_to_bytes,
    write_archive,
)
from .graph import GraphBuildError, cnn_to_graph, mlp_to_graph
from .init_transform import apply_clusterable_init, assign_tags, tag_multipliers
from .regularizer import DegenerateEigenvalueError
from .report import (
    archive_digest,
    cluster_report,
    render_json,
    shuffle_test_report,
)
from .scenarios import SCENARIOS, build_scenario
from .shuffles import SHUFFLE_METHODS, run_shuffle_test
from .spectral import EigensolverError, SpectralConfig, ncut, spectral_cluster
from .trainer import TrainingDivergedError, train

_METHOD_FLAGS = {m.replace("_", "-"): m for m in SHUFFLE_METHODS}


def _default_jobs() -> int:
    raw = os.environ.get("NNCLUSTER_JOBS", "1")
    try:
        jobs = int(raw)
    except ValueError as exc:
        raise ValueError(f"NNCLUSTER_JOBS must be an integer, got {raw!r}") from exc
    if jobs < 1:
        raise ValueError(f"NNCLUSTER_JOBS must be >= 1, got {jobs}")
    return jobs


def _load_archive(path: str) -> tuple[WeightArchive, str]:
    data = Path(path).read_bytes()
    archive = archive_from_bytes(data)
    if not archive.layers:
        raise ValueError(f"archive {path} contains no layers")
    return archive, archive_digest(data)


def _build_graph(archive: WeightArchive):
    return mlp_to_graph(archive) if archive.all_dense() else cnn_to_graph(archive)


def _spectral_config(args) -> SpectralConfig:
    return SpectralConfig(
        k=args.k,
        kmeans_restarts=args.restarts,
        seed=args.seed,
        eigensolver_tolerance=args.tolerance,
    )


def _emit(args, report: dict, started: float) -> None:
    if args.timing:
        elapsed = time.perf_counter() - started
        report["timing"] = {"total_seconds": elapsed}
        print(f"elapsed {elapsed:.3f}s", file=sys.stderr)
    text = render_json(report)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


def _add_spectral_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--k", type=int, default=12,
                        help="number of clusters (default 12)")
    parser.add_argument("--restarts", type=int, default=10,
                        help="k-means restarts (default 10)")
    parser.add_argument("--seed", type=int, default=0,
                        help="random seed (default 0)")
    parser.add_argument("--tolerance", type=float, default=1e-9,
                        help="eigensolver residual tolerance (default 1e-9)")
    parser.add_argument("--output", "-o", default=None,
                        help="write the JSON report here instead of stdout")
    parser.add_argument("--timing", action="store_true",
                        help="include wall time in the report and on stderr")


def _cmd_cluster(args) -> int:
    started = time.perf_counter()
    archive, digest = _load_archive(args.archive)
    graph = _build_graph(archive)
    config = _spectral_config(args)
    partition = spectral_cluster(graph, config)
    value = ncut(graph, partition)
    _emit(args, cluster_report(archive, digest, graph, partition, value, config),
          started)
    return 0


def _cmd_shuffle_test(args) -> int:
    started = time.perf_counter()
    archive, digest = _load_archive(args.archive)
    graph = _build_graph(archive)
    config = _spectral_config(args)
    partition = spectral_cluster(graph, config)
    method = _METHOD_FLAGS[args.method]
    shuffle = run_shuffle_test(archive, method, args.n_shuffles, config=config,
                               seed=args.seed, jobs=args.jobs)
    report = shuffle_test_report(archive, digest, graph, partition, shuffle,
                                 requested_shuffles=args.n_shuffles,
                                 seed=args.seed, config=config)
    _emit(args, report, started)
    return 0


def _cmd_init_transform(args) -> int:
    archive, digest = _load_archive(args.archive)
    tagging = assign_tags(archive, c=args.clusters, seed=args.seed,
                          beta=args.beta)
    transformed = apply_clusterable_init(archive, tagging)
    write_archive(transformed, args.output)
    same, cross = tag_multipliers(args.clusters, args.beta)
    summary = {
        "kind": "init-transform",
        "input": {"sha256": digest, "n_layers": len(archive.layers)},
        "output": {
            "path": args.output,
            "sha256": archive_digest(archive_to_bytes(transformed)),
        },
        "clusters": args.clusters,
        "beta": args.beta,
        "seed": args.seed,
        "multipliers": {"same_tag": same, "cross_tag": cross},
    }
    sys.stdout.write(render_json(summary))
    return 0


def _cmd_train_demo(args) -> int:
    setup = build_scenario(args.scenario, seed=args.seed)
    config = setup.config
    if args.learning_rate is not None:
        config = dataclasses.replace(config, learning_rate=args.learning_rate)
    if args.epochs_pre is not None:
        config = dataclasses.replace(config, epochs_pre_prune=args.epochs_pre)
    if args.epochs_prune is not None:
        if args.epochs_prune == 0:
            config = dataclasses.replace(config, epochs_prune=0, prune=None)
        else:
            config = dataclasses.replace(config, epochs_prune=args.epochs_prune)
    result = train(setup.model, setup.x, setup.y, config)

    lines = [json.dumps(entry, sort_keys=True) for entry in result.metrics]
    text = "\n".join(lines) + ("\n" if lines else "")
    if args.metrics:
        Path(args.metrics).write_text(text)
    else:
        sys.stdout.write(text)
    if args.output:
        from .model import model_to_archive

        write_archive(model_to_archive(result.model), args.output)
    return 0


def _cmd_validate(args) -> int:
    archive, digest = _load_archive(args.archive)
    summary = {
        "kind": "validate",
        "valid": True,
        "input": {
            "sha256": digest,
            "n_layers": len(archive.layers),
            "layer_names": [layer.name for layer in archive.layers],
            "layer_kinds": [layer.kind for layer in archive.layers],
        },
    }
    sys.stdout.write(render_json(summary))
    return 0


def _cmd_render_report(args) -> int:
    from .render import render_report_files

    report = json.loads(Path(args.report).read_text())
    written = render_report_files(report, args.out_dir)
    for path in written:
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nncluster",
        description="Graph clusterability analysis of neural network weights",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cluster", help="spectral clustering and n-cut of one archive")
    p.add_argument("archive", help="weight archive path")
    _add_spectral_args(p)
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("shuffle-test",
                       help="compare the archive n-cut against shuffled controls")
    p.add_argument("archive", help="weight archive path")
    p.add_argument("--method", choices=sorted(_METHOD_FLAGS), default="layer",
                   help="shuffle null model (default layer)")
    p.add_argument("--n-shuffles", type=int, default=50,
                   help="number of shuffled controls (default 50)")
    p.add_argument("--jobs", type=int, default=None,
                   help="worker processes (default $NNCLUSTER_JOBS or 1)")
    _add_spectral_args(p)
    p.set_defaults(func=_cmd_shuffle_test)

    p = sub.add_parser("init-transform",
                       help="rescale a dense archive toward a tagged block init")
    p.add_argument("archive", help="weight archive path")
    p.add_argument("--output", "-o", required=True,
                   help="where to write the transformed archive")
    p.add_argument("--clusters", type=int, default=10,
                   help="number of tags (default 10)")
    p.add_argument("--beta", type=float, default=0.6,
                   help="cross-tag multiplier in (0, 1] (default 0.6)")
    p.add_argument("--seed", type=int, default=0, help="tag seed (default 0)")
    p.set_defaults(func=_cmd_init_transform)

    p = sub.add_parser("train-demo", help="run a named training scenario")
    p.add_argument("--scenario", choices=SCENARIOS, required=True)
    p.add_argument("--seed", type=int, default=0, help="scenario seed (default 0)")
    p.add_argument("--output", "-o", default=None,
                   help="write the trained archive here")
    p.add_argument("--metrics", default=None,
                   help="write JSON-lines metrics here instead of stdout")
    p.add_argument("--learning-rate", type=float, default=None,
                   help="override the scenario learning rate")
    p.add_argument("--epochs-pre", type=int, default=None,
                   help="override epochs before pruning")
    p.add_argument("--epochs-prune", type=int, default=None,
                   help="override pruning epochs (0 disables pruning)")
    p.set_defaults(func=_cmd_train_demo)

    p = sub.add_parser("validate", help="check an archive against the format rules")
    p.add_argument("archive", help="weight archive path")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("render-report",
                       help="render figures and CSV extracts for a JSON report")
    p.add_argument("report", help="analysis report JSON path")
    p.add_argument("--out-dir", default=".",
                   help="directory for figures and CSV files (default .)")
    p.set_defaults(func=_cmd_render_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "jobs", 1) is None:
            args.jobs = _default_jobs()
        return args.func(args)
    except (GraphBuildError, DegenerateEigenvalueError, EigensolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (ArchiveFormatError, FileNotFoundError, IsADirectoryError,
            PermissionError, ValueError, json.JSONDecodeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
