"""Report writers: line-delimited records, text tables, plot data and figures."""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def write_jsonl(path, records):
    with open(path, "w") as f:
        for r in records:
            f.write(json.dumps(r, sort_keys=True) + "\n")


def format_table(records, columns) -> str:
    """Fixed-width text table of ``columns`` from dict records."""
    def cell(v):
        return f"{v:.4f}" if isinstance(v, float) else str(v)

    rows = [[cell(r.get(c, "")) for c in columns] for r in records]
    widths = [max(len(c), *(len(row[i]) for row in rows)) if rows else len(c) for i, c in enumerate(columns)]
    line = "  ".join(c.ljust(w) for c, w in zip(columns, widths))
    sep = "  ".join("-" * w for w in widths)
    body = ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in rows]
    return "\n".join([line, sep, *body]) + "\n"


def metric_table(report) -> str:
    docs = [d.record() for d in report.documents]
    summary = {"doc_id": "MEAN", "psnr": report.mean_psnr, "psnr_compressed": report.mean_psnr_compressed,
               "accuracy": report.accuracy}
    return format_table(docs + [summary], ["doc_id", "psnr", "psnr_compressed", "accuracy", "mse"])


def benchmark_table(report) -> str:
    return format_table(report.records(), ["variant", "tiles", "epochs", "seconds_per_epoch",
                                           "bytes_per_batch", "images_per_second"])


def write_time_vs_size(directory, report) -> list[Path]:
    """One two-column file per variant: corpus size (tiles), seconds per epoch."""
    directory = Path(directory)
    paths = []
    for variant in sorted({r.variant for r in report.rows}):
        path = directory / f"time_vs_size_{variant}.dat"
        rows = sorted((r.tiles, r.seconds_per_epoch) for r in report.rows if r.variant == variant)
        with open(path, "w") as f:
            f.write(f"# tiles seconds_per_epoch ({variant})\n")
            for n, s in rows:
                f.write(f"{n} {s:.6f}\n")
        paths.append(path)
    return paths


def plot_time_vs_size(path, report):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for variant in sorted({r.variant for r in report.rows}):
        rows = sorted((r.tiles, r.seconds_per_epoch) for r in report.rows if r.variant == variant)
        ax.plot([n for n, _ in rows], [s for _, s in rows], marker="o", label=variant)
    ax.set_xlabel("corpus size (tiles)")
    ax.set_ylabel("seconds per epoch")
    ax.set_title("Training time per epoch")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def plot_psnr(path, report):
    docs = report.documents
    fig, ax = plt.subplots(figsize=(max(4, 0.6 * len(docs) + 2), 3.5))
    xs = range(len(docs))
    cap = 60.0  # identical images have infinite PSNR; draw them at the cap
    vals = [min(d.psnr, cap) for d in docs]
    vals_c = [min(d.psnr_compressed, cap) for d in docs]
    ax.bar([x - 0.2 for x in xs], vals, width=0.4, label="decompressed")
    ax.bar([x + 0.2 for x in xs], vals_c, width=0.4, label="re-encoded")
    ax.set_xticks(list(xs))
    ax.set_xticklabels([d.doc_id for d in docs], rotation=45, ha="right")
    ax.set_ylabel("PSNR (dB)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path
