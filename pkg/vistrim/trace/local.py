"""Local file system storage of attention traces

A trace is a directory holding ``manifest.json`` and, per layer, two raw
little-endian float32 row-major blocks: ``layer_XXX_t2t.bin`` (T x T) and
``layer_XXX_t2v.bin`` (T x V_l). A corpus is a directory with one trace
sub-directory per sample.
"""
import json
from dataclasses import dataclass
from dataclasses import field
from pathlib import Path

import numpy as np

from vistrim.errors import ShapeError
from vistrim.errors import TraceError
from vistrim.logger import logger
from vistrim.model import AttentionMaps
from vistrim.model import LayerAttention

FORMAT_VERSION = 1
MANIFEST = "manifest.json"
DTYPE = "float32"
BYTE_ORDER = "little"
ROW_SUM_TOLERANCE = 1e-4

_STORAGE_DTYPE = np.dtype("<f4")


@dataclass
class TraceManifest:
    """Content of ``manifest.json``"""
    sample_id: str
    num_layers: int
    text_count: int
    vision_counts: list[int]
    layers: list[dict[str, any]] = field(default_factory=list)
    format_version: int = FORMAT_VERSION
    dtype: str = DTYPE
    byte_order: str = BYTE_ORDER

    def to_dict(self) -> dict[str, any]:
        """Serializable content"""
        return {"format_version": self.format_version,
                "sample_id": self.sample_id,
                "num_layers": self.num_layers,
                "text_count": self.text_count,
                "vision_counts": self.vision_counts,
                "dtype": self.dtype,
                "byte_order": self.byte_order,
                "layers": self.layers}

    @classmethod
    def from_dict(cls, content: dict[str, any]) -> "TraceManifest":
        """Parse a manifest, ignoring unknown keys"""
        try:
            manifest = cls(sample_id=str(content["sample_id"]),
                           num_layers=int(content["num_layers"]),
                           text_count=int(content["text_count"]),
                           vision_counts=[int(v) for v in
                                          content["vision_counts"]],
                           layers=list(content["layers"]),
                           format_version=int(content.get("format_version",
                                                          FORMAT_VERSION)),
                           dtype=content.get("dtype", DTYPE),
                           byte_order=content.get("byte_order", BYTE_ORDER))
        except (KeyError, TypeError, ValueError) as err:
            raise TraceError(f"malformed manifest: {err!r}") from err
        if manifest.format_version > FORMAT_VERSION:
            raise TraceError(f"unsupported trace format version "
                             f"{manifest.format_version}")
        if manifest.dtype != DTYPE or manifest.byte_order != BYTE_ORDER:
            raise TraceError(f"unsupported storage {manifest.dtype}/"
                             f"{manifest.byte_order}")
        if len(manifest.layers) != manifest.num_layers or \
                len(manifest.vision_counts) != manifest.num_layers:
            raise TraceError(f"manifest lists {len(manifest.layers)} layers "
                             f"and {len(manifest.vision_counts)} vision "
                             f"counts for num_layers={manifest.num_layers}")
        counts = manifest.vision_counts
        if any(b > a for a, b in zip(counts, counts[1:])):
            raise TraceError(f"vision counts increase across layers: {counts}")
        return manifest


def _write_block(path: Path, block: np.ndarray):
    try:
        np.ascontiguousarray(block, dtype=_STORAGE_DTYPE).tofile(path)
    except OSError as err:
        raise TraceError(f"cannot write {path}: {err}") from err


def _read_block(path: Path, rows: int, cols: int) -> np.ndarray:
    if not path.is_file():
        raise TraceError(f"missing block file {path}")
    expected = rows * cols * _STORAGE_DTYPE.itemsize
    size = path.stat().st_size
    if size != expected:
        raise TraceError(f"size mismatch for {path}: {size} bytes, expected "
                         f"{expected} for {rows}x{cols} float32")
    block = np.fromfile(path, dtype=_STORAGE_DTYPE).astype(np.float64)
    if not np.all(np.isfinite(block)):
        raise TraceError(f"non finite values in {path}")
    return block.reshape(rows, cols)


def write_trace(maps: AttentionMaps, directory: str | Path) -> TraceManifest:
    """Write the attention maps of one sample

    :param maps: Attention maps,
    :param directory: Destination directory, created if needed,
    :return: The written manifest
    """
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise TraceError(f"cannot create {directory}: {err}") from err
    layers = []
    for attention in maps.per_layer:
        t2t_name = f"layer_{attention.layer_index:03d}_t2t.bin"
        t2v_name = f"layer_{attention.layer_index:03d}_t2v.bin"
        _write_block(directory / t2t_name, attention.t2t)
        _write_block(directory / t2v_name, attention.t2v)
        layers.append({"layer_index": attention.layer_index,
                       "t2t": t2t_name,
                       "t2v": t2v_name,
                       "vision_ids": [int(i) for i in attention.vision_ids]})
    manifest = TraceManifest(sample_id=maps.sample_id,
                             num_layers=maps.num_layers,
                             text_count=maps.text_count,
                             vision_counts=maps.vision_counts,
                             layers=layers)
    try:
        with open(directory / MANIFEST, "w", encoding="utf-8") as json_file:
            json.dump(manifest.to_dict(), json_file, indent=2)
    except OSError as err:
        raise TraceError(f"cannot write {directory / MANIFEST}: {err}") \
            from err
    return manifest


def read_manifest(directory: str | Path) -> TraceManifest:
    """Read and validate ``manifest.json``"""
    filename = Path(directory) / MANIFEST
    try:
        with open(filename, "r", encoding="utf-8") as json_file:
            content = json.load(json_file)
    except FileNotFoundError as err:
        raise TraceError(f"missing manifest {filename}") from err
    except (OSError, json.JSONDecodeError) as err:
        raise TraceError(f"cannot read {filename}: {err}") from err
    if not isinstance(content, dict):
        raise TraceError(f"malformed manifest {filename}")
    return TraceManifest.from_dict(content)


def read_trace(directory: str | Path) -> AttentionMaps:
    """Load the attention maps of one sample

    Text query rows whose t2t plus t2v mass is off 1 by more than 1e-4 are
    reported as warnings.

    :param directory: Trace directory,
    :return: The attention maps, widened to float64
    """
    directory = Path(directory)
    manifest = read_manifest(directory)
    per_layer = []
    for entry, vision_count in zip(manifest.layers, manifest.vision_counts):
        try:
            layer_index = int(entry["layer_index"])
            t2t_name, t2v_name = entry["t2t"], entry["t2v"]
        except (KeyError, TypeError, ValueError) as err:
            raise TraceError(f"malformed layer entry in {directory}: "
                             f"{err!r}") from err
        t2t = _read_block(directory / t2t_name, manifest.text_count,
                          manifest.text_count)
        t2v = _read_block(directory / t2v_name, manifest.text_count,
                          vision_count)
        ids = entry.get("vision_ids")
        if ids is not None and len(ids) != vision_count:
            raise TraceError(f"layer {layer_index} of {directory}: "
                             f"{len(ids)} vision ids for {vision_count} "
                             f"columns")
        row_sums = t2t.sum(axis=1) + t2v.sum(axis=1)
        drift = float(np.max(np.abs(row_sums - 1.0))) if row_sums.size else 0.0
        if drift > ROW_SUM_TOLERANCE:
            logger().warning(f"{manifest.sample_id} layer {layer_index}: "
                             f"text rows deviate from 1 by up to {drift:.2e}")
        try:
            per_layer.append(LayerAttention(layer_index=layer_index, t2t=t2t,
                                            t2v=t2v, vision_ids=ids))
        except (ShapeError, TypeError, ValueError) as err:
            raise TraceError(f"invalid layer {layer_index} in {directory}: "
                             f"{err}") from err
    try:
        return AttentionMaps(sample_id=manifest.sample_id,
                             per_layer=per_layer)
    except ShapeError as err:
        raise TraceError(f"invalid trace {directory}: {err}") from err


def write_corpus(corpus: list[AttentionMaps],
                 directory: str | Path
                 ) -> list[TraceManifest]:
    """Write one trace sub-directory per sample, named after the sample"""
    directory = Path(directory)
    return [write_trace(maps, directory / maps.sample_id) for maps in corpus]


def read_corpus(directory: str | Path) -> list[AttentionMaps]:
    """Load every trace of a corpus directory, in name order

    A directory holding a manifest itself is read as a one-sample corpus.

    :param directory: Corpus directory,
    :return: The attention maps of every sample
    """
    directory = Path(directory)
    if (directory / MANIFEST).is_file():
        return [read_trace(directory)]
    if not directory.is_dir():
        raise TraceError(f"missing trace directory {directory}")
    samples = sorted(p for p in directory.iterdir()
                     if p.is_dir() and (p / MANIFEST).is_file())
    logger().info(f"reading {len(samples)} traces from {directory}")
    return [read_trace(sample) for sample in samples]
