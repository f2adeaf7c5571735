"""Dataset manifest, document-level train/test split and the on-disk tile store.

Store layout under the manifest's directory::

    manifest.json
    <split>/<doc-id>/<row>_<col>.jpg   JFIF document tile
    <split>/<doc-id>/<row>_<col>.gt    binary ground-truth tile (binary PGM)
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .pipeline import BORDER, TILE, build_pairs, read_gray, write_pgm

FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"
UNASSIGNED = "unassigned"
RASTER_SUFFIXES = (".pgm", ".ppm", ".pbm", ".pnm", ".png", ".bmp", ".tif", ".tiff")


class ManifestError(Exception):
    pass


class ManifestVersionError(ManifestError):
    pass


class MissingTileFileError(ManifestError):
    pass


@dataclass(frozen=True)
class DocumentRecord:
    doc_id: str
    source: str
    ground_truth: str
    width: int
    height: int
    padded_width: int
    padded_height: int
    split: str = UNASSIGNED

    @property
    def grid(self) -> tuple[int, int]:
        return self.padded_height // TILE, self.padded_width // TILE


@dataclass(frozen=True)
class TileLocation:
    doc_id: str
    row: int
    col: int
    stream: str  # paths relative to the manifest directory
    ground_truth: str


@dataclass
class DatasetManifest:
    quality: int = 50
    tile_size: int = TILE
    border: int = BORDER
    seed: int | None = None
    documents: list[DocumentRecord] = field(default_factory=list)
    tiles: list[TileLocation] = field(default_factory=list)
    version: int = FORMAT_VERSION

    def document(self, doc_id: str) -> DocumentRecord:
        for d in self.documents:
            if d.doc_id == doc_id:
                return d
        raise KeyError(doc_id)

    def split_ids(self, split: str) -> list[str]:
        return [d.doc_id for d in self.documents if d.split == split]

    def tiles_of(self, doc_id: str) -> list[TileLocation]:
        return [t for t in self.tiles if t.doc_id == doc_id]

    def validate(self):
        ids = {d.doc_id for d in self.documents}
        if len(ids) != len(self.documents):
            raise ManifestError("duplicate document ids")
        counts = {i: 0 for i in ids}
        for t in self.tiles:
            if t.doc_id not in ids:
                raise ManifestError(f"tile ({t.row}, {t.col}) references unknown document {t.doc_id!r}")
            counts[t.doc_id] += 1
        for d in self.documents:
            if d.padded_width % self.tile_size or d.padded_height % self.tile_size:
                raise ManifestError(f"{d.doc_id}: padded size is not a multiple of {self.tile_size}")
            rows, cols = d.grid
            if counts[d.doc_id] != rows * cols:
                raise ManifestError(f"{d.doc_id}: {counts[d.doc_id]} tiles, expected {rows * cols}")


def tile_paths(split: str, doc_id: str, row: int, col: int) -> tuple[str, str]:
    stem = f"{split}/{doc_id}/{row}_{col}"
    return stem + ".jpg", stem + ".gt"


def split_train_test(manifest: DatasetManifest, fraction: float = 0.8, seed: int = 0) -> DatasetManifest:
    """Assign whole documents to train/test; ``fraction`` is the share of training documents.

    At least one document lands in each split when there are two or more.
    Tile paths are rewritten to the new split directories.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"split fraction must lie strictly between 0 and 1, got {fraction}")
    if not manifest.documents:
        raise ValueError("cannot split an empty corpus")
    ids = sorted(d.doc_id for d in manifest.documents)
    order = np.random.default_rng(seed).permutation(len(ids))
    n_train = int(round(fraction * len(ids)))
    if len(ids) > 1:
        n_train = min(max(n_train, 1), len(ids) - 1)
    else:
        n_train = 1
    train = {ids[i] for i in order[:n_train]}
    docs = [replace(d, split="train" if d.doc_id in train else "test") for d in manifest.documents]
    split_of = {d.doc_id: d.split for d in docs}
    tiles = [replace(t, **dict(zip(("stream", "ground_truth"), tile_paths(split_of[t.doc_id], t.doc_id, t.row, t.col))))
             for t in manifest.tiles]
    return replace(manifest, documents=docs, tiles=tiles, seed=seed)


# -- persistence ------------------------------------------------------------

def manifest_to_dict(m: DatasetManifest) -> dict:
    return {
        "version": m.version,
        "quality": m.quality,
        "tile_size": m.tile_size,
        "border": m.border,
        "seed": m.seed,
        "documents": [asdict(d) for d in m.documents],
        "tiles": [asdict(t) for t in m.tiles],
    }


def manifest_from_dict(data: dict) -> DatasetManifest:
    version = data.get("version")
    if version != FORMAT_VERSION:
        raise ManifestVersionError(f"manifest format version {version!r}; this reader handles {FORMAT_VERSION}")
    try:
        return DatasetManifest(
            quality=data["quality"], tile_size=data["tile_size"], border=data["border"], seed=data["seed"],
            documents=[DocumentRecord(**d) for d in data["documents"]],
            tiles=[TileLocation(**t) for t in data["tiles"]],
            version=version,
        )
    except (KeyError, TypeError) as e:
        raise ManifestError(f"malformed manifest: {e}") from e


def _manifest_file(path) -> Path:
    path = Path(path)
    return path / MANIFEST_NAME if path.is_dir() else path


def write_manifest(m: DatasetManifest, path):
    """Write the manifest JSON to ``path`` (a file, or a directory receiving manifest.json)."""
    m.validate()
    path = _manifest_file(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(manifest_to_dict(m), indent=2) + "\n")
    os.replace(tmp, path)
    return path


def load_manifest(path, check_files: bool = True) -> DatasetManifest:
    """Read and validate a manifest; every referenced tile file must exist when ``check_files``."""
    path = _manifest_file(path)
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ManifestError(f"{path}: not a manifest ({e})") from e
    m = manifest_from_dict(data)
    m.validate()
    if check_files:
        root = path.parent
        for t in m.tiles:
            for rel in (t.stream, t.ground_truth):
                if not (root / rel).is_file():
                    raise MissingTileFileError(f"tile file {rel} listed in {path.name} does not exist")
    return m


# -- ingestion --------------------------------------------------------------

def find_pairs(doc_dir, gt_dir) -> list[tuple[Path, Path]]:
    """Document rasters paired with the ground truth of the same file name.

    An identical file name wins; otherwise the ground truth may differ in
    extension. Documents without ground truth are an error.
    """
    doc_dir, gt_dir = Path(doc_dir), Path(gt_dir)
    docs = sorted(p for p in doc_dir.iterdir() if p.suffix.lower() in RASTER_SUFFIXES)
    if not docs:
        raise ManifestError(f"no raster images in {doc_dir}")
    gts = {p.name: p for p in gt_dir.iterdir() if p.suffix.lower() in RASTER_SUFFIXES}
    by_stem: dict[str, list[Path]] = {}
    for p in gts.values():
        by_stem.setdefault(p.stem, []).append(p)
    pairs = []
    for d in docs:
        gt = gts.get(d.name)
        if gt is None:
            cands = sorted(by_stem.get(d.stem, []))
            if not cands:
                raise ManifestError(f"no ground truth for {d.name} in {gt_dir}")
            gt = cands[0]
        pairs.append((d, gt))
    return pairs


def _write_pair(root: Path, loc: TileLocation, stream: bytes, gt: np.ndarray):
    jpg = root / loc.stream
    jpg.parent.mkdir(parents=True, exist_ok=True)
    jpg.write_bytes(stream)
    write_pgm(root / loc.ground_truth, gt)


def prepare_dataset(doc_dir, gt_dir, out_dir, quality: int = 50, fraction: float = 0.8,
                    seed: int = 0, border: int = BORDER) -> DatasetManifest:
    """Ingest a document/ground-truth directory pair into a split tile store."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pairs = find_pairs(doc_dir, gt_dir)
    m = DatasetManifest(quality=quality, border=border, seed=seed)
    built = {}
    for doc_path, gt_path in pairs:
        doc_id = doc_path.stem
        if doc_id in built:
            raise ManifestError(f"two documents share the id {doc_id!r}")
        doc, gt = read_gray(doc_path), read_gray(gt_path)
        if doc.shape != gt.shape:
            raise ManifestError(f"{doc_path.name}: document {doc.shape} and ground truth {gt.shape} differ")
        tile_pairs, info = build_pairs(doc_id, doc, gt, quality, border)
        built[doc_id] = tile_pairs
        m.documents.append(DocumentRecord(doc_id, str(doc_path), str(gt_path), info.original_width,
                                          info.original_height, info.padded_width, info.padded_height))
        for p in tile_pairs:
            m.tiles.append(TileLocation(doc_id, p.row, p.col, *tile_paths(UNASSIGNED, doc_id, p.row, p.col)))
    m = split_train_test(m, fraction, seed) if len(m.documents) > 1 else _all_train(m)
    by_key = {(p.doc_id, p.row, p.col): p for ps in built.values() for p in ps}
    for t in m.tiles:
        p = by_key[(t.doc_id, t.row, t.col)]
        _write_pair(out, t, p.stream, p.ground_truth)
    write_manifest(m, out / MANIFEST_NAME)
    return m


def _all_train(m: DatasetManifest) -> DatasetManifest:
    docs = [replace(d, split="train") for d in m.documents]
    tiles = [replace(t, **dict(zip(("stream", "ground_truth"), tile_paths("train", t.doc_id, t.row, t.col))))
             for t in m.tiles]
    return replace(m, documents=docs, tiles=tiles)


@dataclass
class TileSample:
    doc_id: str
    row: int
    col: int
    stream: bytes
    ground_truth: np.ndarray


def load_tiles(manifest: DatasetManifest, root, split: str | None = None) -> list[TileSample]:
    """Tile streams and ground truth for one split (all tiles when ``split`` is None)."""
    root = _manifest_file(root).parent
    keep = None if split is None else set(manifest.split_ids(split))
    out = []
    for t in manifest.tiles:
        if keep is not None and t.doc_id not in keep:
            continue
        try:
            stream = (root / t.stream).read_bytes()
            gt = read_gray(root / t.ground_truth)
        except FileNotFoundError as e:
            raise MissingTileFileError(str(e)) from e
        out.append(TileSample(t.doc_id, t.row, t.col, stream, gt))
    return out
