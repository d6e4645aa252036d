"""Figure and CSV rendering for analysis reports.

Takes the JSON report produced by the cluster or shuffle-test commands and
writes PNG figures next to delimited extracts of the same numbers, so the
plots can be regenerated or recomputed downstream without rerunning the
analysis. matplotlib is imported lazily with the Agg backend; the analysis
path itself never touches it.
"""

from __future__ import annotations

import csv
from pathlib import Path

__all__ = ["render_report_files"]


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _write_cluster_sizes(report: dict, out_dir: Path) -> list[Path]:
    sizes = report["partition"]["cluster_sizes"]
    csv_path = out_dir / "cluster_sizes.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cluster", "size"])
        for cluster, size in enumerate(sizes):
            writer.writerow([cluster, size])

    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(range(len(sizes)), sizes, color="tab:blue")
    ax.set_xlabel("cluster")
    ax.set_ylabel("nodes")
    ax.set_title(f"cluster sizes (n-cut {report['ncut']:.4f})")
    fig.tight_layout()
    png_path = out_dir / "cluster_sizes.png"
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return [csv_path, png_path]


def _write_shuffle_ncuts(report: dict, out_dir: Path) -> list[Path]:
    shuffle = report["shuffle"]
    ncuts = shuffle["ncuts"]
    observed = report["ncut"]

    csv_path = out_dir / "shuffle_ncuts.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["shuffle_index", "ncut"])
        for i, value in enumerate(ncuts):
            writer.writerow([i, value])

    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4))
    if ncuts:
        ax.hist(ncuts, bins=min(20, max(5, len(ncuts) // 3)),
                color="tab:gray", label=f"{len(ncuts)} shuffles")
    ax.axvline(observed, color="tab:red", linewidth=2,
               label=f"observed {observed:.4f}")
    z = shuffle["z_score"]
    z_text = "n/a" if z is None else f"{z:.2f}"
    ax.set_xlabel("n-cut")
    ax.set_ylabel("count")
    ax.set_title(
        f"{shuffle['method']} shuffles: p={shuffle['p_value']:.4f}, z={z_text}"
    )
    ax.legend()
    fig.tight_layout()
    png_path = out_dir / "shuffle_ncuts.png"
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return [csv_path, png_path]


def render_report_files(report: dict, out_dir) -> list[Path]:
    """Write figures and CSV extracts for ``report`` into ``out_dir``.

    Every report gets the cluster-size pair; shuffle-test reports also get
    the shuffle n-cut histogram pair. Returns the written paths.
    """
    if "partition" not in report or "ncut" not in report:
        raise ValueError("not an analysis report: missing partition or ncut")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = _write_cluster_sizes(report, out)
    if report.get("kind") == "shuffle-test":
        written += _write_shuffle_ncuts(report, out)
    return written
