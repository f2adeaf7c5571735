"""Corpus evaluation and the compressed-vs-pixel training benchmark."""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..codec import PixelImage, decode_image, encode_any_size
from ..data.manifest import DatasetManifest, TileSample, load_tiles
from ..ddgan.config import TrainConfig
from ..ddgan.infer import binarize_tiles
from ..ddgan.model import DdganModel, iterate_batches, pixels_to_input, stream_to_input, train_step
from .metrics import mse, pixel_accuracy, psnr_from_mse, reassemble_tiles, threshold_binarize


class EvaluationError(Exception):
    pass


@dataclass
class DocumentMetrics:
    doc_id: str
    mse: float
    psnr: float
    accuracy: float
    mse_compressed: float
    psnr_compressed: float

    def record(self) -> dict:
        return {k: _jsonable(v) for k, v in asdict(self).items()}


@dataclass
class MetricReport:
    documents: list[DocumentMetrics] = field(default_factory=list)
    mean_psnr: float = float("nan")
    mean_psnr_compressed: float = float("nan")
    accuracy: float = float("nan")

    def records(self) -> list[dict]:
        rows = [{"kind": "document", **d.record()} for d in self.documents]
        rows.append({"kind": "summary", "mean_psnr": _jsonable(self.mean_psnr),
                     "mean_psnr_compressed": _jsonable(self.mean_psnr_compressed),
                     "accuracy": _jsonable(self.accuracy), "documents": len(self.documents)})
        return rows


def _jsonable(v):
    if isinstance(v, float):
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
        if np.isnan(v):
            return "nan"
        return round(v, 10)
    return v


def model_predictor(model: DdganModel, manifest: DatasetManifest | None = None):
    """Tile predictor backed by a trained model; checks it fits the manifest."""
    cfg = model.config.model
    if cfg.input_domain != "dct":
        raise EvaluationError("evaluation runs compressed-domain inference; the checkpoint takes pixel input")
    if manifest is not None and manifest.tile_size != cfg.tile_size:
        raise EvaluationError(f"checkpoint tile size {cfg.tile_size} does not match manifest tile size "
                              f"{manifest.tile_size}")

    def predict(streams):
        return binarize_tiles(streams, model)

    return predict


def evaluate_documents(samples: list[TileSample], manifest: DatasetManifest, predictor) -> MetricReport:
    """Binarize every tile, reassemble each document and score it against its ground truth.

    ``predictor`` maps a list of JFIF tile streams to (N, tile, tile) maps in
    [0, 255]; they are thresholded at 127. Two scores are kept per document:
    the binary output against the ground truth, and both of them JPEG
    re-encoded at the manifest quality and decoded again.
    """
    by_doc: dict[str, list[TileSample]] = {}
    for s in samples:
        by_doc.setdefault(s.doc_id, []).append(s)
    if not by_doc:
        raise EvaluationError("no documents to evaluate")
    rows, correct, total = [], 0, 0
    for doc_id in sorted(by_doc):
        tiles = sorted(by_doc[doc_id], key=lambda s: (s.row, s.col))
        preds = np.asarray(predictor([t.stream for t in tiles]))
        if preds.shape != (len(tiles), manifest.tile_size, manifest.tile_size):
            raise EvaluationError(f"predictor returned {preds.shape} for {len(tiles)} tiles")
        binary = threshold_binarize(preds)
        record = manifest.document(doc_id)
        out = reassemble_tiles([(t.row, t.col, b) for t, b in zip(tiles, binary)], record,
                               manifest.tile_size, manifest.border)
        gt = reassemble_tiles([(t.row, t.col, t.ground_truth) for t in tiles], record,
                              manifest.tile_size, manifest.border)
        m = mse(out, gt)
        out_c = decode_image(encode_any_size(PixelImage(out), manifest.quality)).gray()
        gt_c = decode_image(encode_any_size(PixelImage(gt), manifest.quality)).gray()
        mc = mse(out_c, gt_c)
        acc = pixel_accuracy(out, gt)
        correct += int(np.sum(out == gt))
        total += out.size
        rows.append(DocumentMetrics(doc_id, m, psnr_from_mse(m), acc, mc, psnr_from_mse(mc)))
    return MetricReport(
        documents=rows,
        mean_psnr=float(np.mean([r.psnr for r in rows])),
        mean_psnr_compressed=float(np.mean([r.psnr_compressed for r in rows])),
        accuracy=correct / total,
    )


def evaluate_corpus(manifest: DatasetManifest, root, predictor, split: str = "test") -> MetricReport:
    """Evaluate one split of a prepared dataset."""
    if not manifest.split_ids(split):
        raise EvaluationError(f"split {split!r} has no documents")
    return evaluate_documents(load_tiles(manifest, root, split), manifest, predictor)


# -- benchmark ----------------------------------------------------------------

@dataclass
class BenchmarkRow:
    variant: str
    tiles: int
    epochs: int
    seconds_per_epoch: float
    bytes_per_batch: float
    images_per_second: float
    config_hash: str
    order_digest: str

    def record(self) -> dict:
        return {k: _jsonable(v) for k, v in asdict(self).items()}


@dataclass
class BenchmarkReport:
    rows: list[BenchmarkRow]

    def row(self, variant: str, tiles: int | None = None) -> BenchmarkRow:
        cands = [r for r in self.rows if r.variant == variant and (tiles is None or r.tiles == tiles)]
        if not cands:
            raise KeyError(variant)
        return max(cands, key=lambda r: r.tiles)

    def records(self) -> list[dict]:
        return [r.record() for r in self.rows]


VARIANTS = ("compressed", "pixel")


def _variant_config(config: TrainConfig, variant: str) -> TrainConfig:
    domain = {"compressed": "dct", "pixel": "pixel"}[variant]
    return replace(config, model=replace(config.model, input_domain=domain))


def benchmark_variant(variant: str, streams: list[bytes], targets: np.ndarray, config: TrainConfig,
                      epochs: int = 1) -> BenchmarkRow:
    """Train ``epochs`` epochs from stored tiles and time them.

    The compressed variant partially decodes each batch's JFIF tiles; the
    pixel variant reads raw 8-bit tiles. Batch bytes are the measured sizes
    of what each variant reads: JFIF file sizes or raw sample counts.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown benchmark variant {variant!r}")
    cfg = _variant_config(config, variant)
    model = DdganModel(cfg)
    raw = None
    if variant == "pixel":
        raw = [decode_image(s).gray() for s in streams]
    n = len(streams)
    batch_bytes, order = [], hashlib.sha256()
    start = time.perf_counter()
    for epoch in range(epochs):
        for idx in iterate_batches(n, cfg.batch_size, cfg.seed, epoch):
            order.update(np.asarray(idx, dtype=np.int64).tobytes())
            if variant == "compressed":
                batch_bytes.append(sum(len(streams[i]) for i in idx))
                x = np.stack([stream_to_input(streams[i], "dct") for i in idx])
            else:
                batch_bytes.append(sum(raw[i].nbytes for i in idx))
                x = np.stack([pixels_to_input(raw[i]) for i in idx])
            train_step(model, x, targets[idx])
    elapsed = time.perf_counter() - start
    return BenchmarkRow(variant, n, epochs, elapsed / epochs, float(np.mean(batch_bytes)),
                        n * epochs / elapsed, cfg.digest(), order.hexdigest()[:16])


def benchmark(streams: list[bytes], ground_truth, config: TrainConfig, epochs: int = 1,
              sizes=None, variants=VARIANTS) -> BenchmarkReport:
    """Per-epoch time and bytes per batch for each variant, at each corpus size in ``sizes``."""
    targets = (np.asarray(ground_truth, dtype=np.float64) / 255.0)[:, None]
    sizes = sorted(set(sizes or [len(streams)]))
    if not streams or sizes[0] < 1 or sizes[-1] > len(streams):
        raise ValueError("benchmark corpus sizes must lie between 1 and the number of tiles")
    rows = []
    for size in sizes:
        for v in variants:
            rows.append(benchmark_variant(v, streams[:size], targets[:size], config, epochs))
    return BenchmarkReport(rows)


def config_hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()[:16]
