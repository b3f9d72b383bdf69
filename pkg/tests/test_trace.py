import json
import logging

import numpy as np
import pytest

from vistrim.errors import TraceError
from vistrim.model import AttentionMaps
from vistrim.model import LayerAttention
from vistrim.model import prefill
from vistrim.prune import PruneSchedule
from vistrim.prune import make_hook
from vistrim.trace import MANIFEST
from vistrim.trace import read_corpus
from vistrim.trace import read_manifest
from vistrim.trace import read_trace
from vistrim.trace import write_corpus
from vistrim.trace import write_trace


@pytest.fixture
def pruned_maps(small_model, small_sequence):
    schedule = PruneSchedule(((1, 6), (2, 3)), 4)
    _, maps = prefill(small_model, small_sequence, make_hook(schedule),
                      sample_id="sample_00000")
    yield maps


def test_round_trip_at_float32(tmp_path, pruned_maps):
    write_trace(pruned_maps, tmp_path / "trace")
    loaded = read_trace(tmp_path / "trace")
    assert loaded.sample_id == pruned_maps.sample_id
    assert loaded.vision_counts == [12, 12, 6, 3]
    for original, restored in zip(pruned_maps.per_layer, loaded.per_layer):
        assert restored.layer_index == original.layer_index
        assert np.array_equal(restored.t2t,
                              original.t2t.astype(np.float32))
        assert np.array_equal(restored.t2v,
                              original.t2v.astype(np.float32))
        assert np.array_equal(restored.vision_ids, original.vision_ids)
        assert restored.t2t.dtype == np.float64


def test_block_sizes_and_manifest(tmp_path, pruned_maps):
    manifest = write_trace(pruned_maps, tmp_path)
    assert (tmp_path / "layer_000_t2t.bin").stat().st_size == 5 * 5 * 4
    assert (tmp_path / "layer_003_t2v.bin").stat().st_size == 5 * 3 * 4
    content = json.loads((tmp_path / MANIFEST).read_text(encoding="utf-8"))
    assert content["format_version"] == 1
    assert content["dtype"] == "float32"
    assert content["byte_order"] == "little"
    assert content["vision_counts"] == manifest.vision_counts


def test_little_endian_row_major_layout(tmp_path):
    t2t = np.array([[1.0, 0.0], [0.25, 0.5]])
    maps = AttentionMaps("x", [LayerAttention(0, t2t, np.array([[0.0],
                                                                 [0.25]]))])
    write_trace(maps, tmp_path)
    raw = np.fromfile(tmp_path / "layer_000_t2t.bin", dtype="<f4")
    assert raw.tolist() == [1.0, 0.0, 0.25, 0.5]


def test_missing_block_names_file(tmp_path, pruned_maps):
    write_trace(pruned_maps, tmp_path)
    (tmp_path / "layer_002_t2v.bin").unlink()
    with pytest.raises(TraceError, match="layer_002_t2v.bin"):
        read_trace(tmp_path)


def test_truncated_block(tmp_path, pruned_maps):
    write_trace(pruned_maps, tmp_path)
    path = tmp_path / "layer_001_t2t.bin"
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(TraceError, match="size mismatch"):
        read_trace(tmp_path)


def test_nan_block(tmp_path, pruned_maps):
    write_trace(pruned_maps, tmp_path)
    path = tmp_path / "layer_000_t2v.bin"
    block = np.fromfile(path, dtype="<f4")
    block[0] = np.nan
    block.tofile(path)
    with pytest.raises(TraceError, match="non finite"):
        read_trace(tmp_path)


def _rewrite_manifest(directory, **changes):
    filename = directory / MANIFEST
    content = json.loads(filename.read_text(encoding="utf-8"))
    content.update(changes)
    filename.write_text(json.dumps(content), encoding="utf-8")


def test_malformed_manifests(tmp_path, pruned_maps):
    write_trace(pruned_maps, tmp_path)
    _rewrite_manifest(tmp_path, vision_counts=[3, 6, 6, 12])
    with pytest.raises(TraceError, match="increase"):
        read_manifest(tmp_path)
    _rewrite_manifest(tmp_path, vision_counts=[12, 12, 6, 3],
                      format_version=99)
    with pytest.raises(TraceError, match="version"):
        read_manifest(tmp_path)
    _rewrite_manifest(tmp_path, format_version=1, dtype="float16")
    with pytest.raises(TraceError):
        read_manifest(tmp_path)
    (tmp_path / MANIFEST).write_text("{", encoding="utf-8")
    with pytest.raises(TraceError):
        read_manifest(tmp_path)


def test_unknown_manifest_keys_are_ignored(tmp_path, pruned_maps):
    write_trace(pruned_maps, tmp_path)
    _rewrite_manifest(tmp_path, producer="external exporter")
    assert read_trace(tmp_path).num_layers == 4


def test_missing_manifest(tmp_path):
    with pytest.raises(TraceError, match="missing manifest"):
        read_trace(tmp_path)


def test_external_row_sums_warn(tmp_path, caplog):
    t2t = np.array([[0.5, 0.0], [0.3, 0.3]])
    t2v = np.array([[0.499], [0.399]])
    maps = AttentionMaps("external", [LayerAttention(0, t2t, t2v)])
    write_trace(maps, tmp_path)
    with caplog.at_level(logging.WARNING, logger="vistrim"):
        loaded = read_trace(tmp_path)
    assert loaded.num_layers == 1
    assert any("deviate" in record.message for record in caplog.records)


@pytest.mark.parametrize("ids", [[5, 3], [2, 2]])
def test_unordered_vision_ids_are_rejected(tmp_path, ids):
    t2t = np.array([[1.0]])
    maps = AttentionMaps("external", [
        LayerAttention(0, 0.5 * t2t, np.array([[0.4, 0.1]]),
                       vision_ids=[2, 5])])
    write_trace(maps, tmp_path)
    content = json.loads((tmp_path / MANIFEST).read_text(encoding="utf-8"))
    content["layers"][0]["vision_ids"] = ids
    (tmp_path / MANIFEST).write_text(json.dumps(content), encoding="utf-8")
    with pytest.raises(TraceError, match="increasing"):
        read_trace(tmp_path)
    with pytest.raises(TraceError):
        read_corpus(tmp_path)


def test_corpus_round_trip(tmp_path, pruned_maps, small_model,
                           small_sequence):
    _, dense = prefill(small_model, small_sequence, sample_id="sample_00001")
    write_corpus([dense, pruned_maps], tmp_path)
    corpus = read_corpus(tmp_path)
    assert [maps.sample_id for maps in corpus] == ["sample_00000",
                                                   "sample_00001"]
    assert read_corpus(tmp_path / "sample_00001")[0].sample_id == \
        "sample_00001"


def test_missing_corpus(tmp_path):
    with pytest.raises(TraceError):
        read_corpus(tmp_path / "nowhere")
