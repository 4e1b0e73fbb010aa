import json

import numpy as np
import pytest

from hotspots.prosody import (
    NormStats,
    ProsodyError,
    build_grid,
    cell_key,
    fit_norm_stats,
    load_prosody_store,
    parse_cell_key,
    training_cell_keys,
)
from hotspots.vectors import DenseVectorStore, VectorStoreError
from hotspots.windowing import Window


def window(meeting="m1", start=0.0, index=0):
    return Window(meeting_id=meeting, index=index, start_s=start, end_s=start + 60.0, label="not_hot")


def write_store(path, dim, rows, kind="prosody_subwindow"):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"dim": dim, "kind": kind}) + "\n")
        for key, vec in rows:
            fh.write(json.dumps({"key": key, "vec": vec}) + "\n")


def test_empty_store_with_header_loads(tmp_path):
    path = tmp_path / "p.jsonl"
    write_store(path, 3, [])
    store = load_prosody_store(path)
    assert len(store) == 0
    assert store.dim == 3


def test_duplicate_cell_rejected(tmp_path):
    path = tmp_path / "p.jsonl"
    write_store(path, 1, [("m1#0#5", [1.0]), ("m1#0#5", [2.0])])
    with pytest.raises(VectorStoreError, match="duplicate"):
        load_prosody_store(path)


def test_dim_mismatch_rejected(tmp_path):
    path = tmp_path / "p.jsonl"
    write_store(path, 2, [("m1#0#0", [1.0])])
    with pytest.raises(VectorStoreError, match="dim"):
        load_prosody_store(path)


def test_non_finite_rejected(tmp_path):
    path = tmp_path / "p.jsonl"
    write_store(path, 1, [("m1#0#0", [float("nan")])])
    with pytest.raises(VectorStoreError, match="non-finite"):
        load_prosody_store(path)


def test_wrong_kind_rejected(tmp_path):
    path = tmp_path / "p.jsonl"
    write_store(path, 1, [("m1#0#0", [1.0])], kind="utterance_embedding")
    with pytest.raises(VectorStoreError, match="kind"):
        load_prosody_store(path)


def test_off_grid_or_malformed_keys_rejected(tmp_path):
    for bad in ("m1#0#7", "m1#0", "m1#x#5", "m1#-1#5"):
        path = tmp_path / "p.jsonl"
        write_store(path, 1, [(bad, [1.0])])
        with pytest.raises((VectorStoreError, ProsodyError)):
            load_prosody_store(path)


def test_cell_key_round_trip():
    assert parse_cell_key(cell_key("m1", 2, 45.0)) == ("m1", 2, 45.0)
    assert cell_key("m1", 0, 5.0) == "m1#0#5"


def test_store_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    out = DenseVectorStore(dim=4, kind="prosody_subwindow")
    for ch in range(2):
        for k in range(12):
            out.add(f"m1#{ch}#{5 * k}", rng.normal(size=4))
    out.write(tmp_path / "p.jsonl")
    store = load_prosody_store(tmp_path / "p.jsonl")
    assert len(store) == 24
    assert store.channels("m1") == [0, 1]
    reread = DenseVectorStore.load(tmp_path / "p.jsonl")
    assert sorted(reread.keys()) == sorted(out.keys())
    for key in out.keys():
        assert np.array_equal(reread.get(key), out.get(key))


def full_store(dim=3, channels=2, duration=120.0, meeting="m1", seed=0):
    from hotspots.prosody import ProsodyStore

    rng = np.random.default_rng(seed)
    store = ProsodyStore(dim=dim)
    for ch in range(channels):
        for k in range(int(duration // 5)):
            store.add(meeting, ch, 5.0 * k, rng.normal(size=dim))
    return store


def test_fit_stats_two_cells():
    from hotspots.prosody import ProsodyStore

    ps = ProsodyStore(dim=1)
    ps.add("m1", 0, 0.0, np.array([0.0]))
    ps.add("m1", 0, 5.0, np.array([2.0]))
    stats = fit_norm_stats(ps, [window()])
    assert stats.mean == pytest.approx([1.0])
    assert stats.std == pytest.approx([1.0])  # population std


def test_fit_stats_constant_dim_flagged():
    from hotspots.prosody import ProsodyStore

    ps = ProsodyStore(dim=2)
    ps.add("m1", 0, 0.0, np.array([3.0, 1.0]))
    ps.add("m1", 0, 5.0, np.array([3.0, 2.0]))
    stats = fit_norm_stats(ps, [window()])
    assert stats.constant_dims.tolist() == [True, False]
    z = stats.apply(np.array([3.0, 1.5]))
    assert z[0] == 0.0


def test_fit_stats_matches_two_pass_reference():
    store = full_store(dim=5, channels=3, duration=240.0, seed=7)
    windows = [window(start=15.0 * i, index=i) for i in range(13)]
    stats = fit_norm_stats(store, windows)
    keys = training_cell_keys(store, windows)
    x = np.stack([store.get(*k) for k in keys])
    mean_ref = x.sum(axis=0) / len(keys)
    var_ref = ((x - mean_ref) ** 2).sum(axis=0) / len(keys)
    assert np.allclose(stats.mean, mean_ref, rtol=1e-12, atol=1e-12)
    assert np.allclose(stats.std, np.sqrt(var_ref), rtol=1e-12, atol=1e-12)


def test_stats_ignore_cells_outside_training_windows():
    from hotspots.prosody import ProsodyStore

    ps = ProsodyStore(dim=1)
    ps.add("m1", 0, 0.0, np.array([1.0]))
    ps.add("m1", 0, 100.0, np.array([100.0]))  # outside the single window
    stats = fit_norm_stats(ps, [window()])
    assert stats.mean == pytest.approx([1.0])


def test_no_training_cells_is_an_error():
    from hotspots.prosody import ProsodyStore

    ps = ProsodyStore(dim=1)
    with pytest.raises(ProsodyError):
        fit_norm_stats(ps, [window()])


def test_grid_shape_and_presence():
    store = full_store(dim=3, channels=2, duration=120.0)
    stats = fit_norm_stats(store, [window(start=0.0)])
    grid = build_grid(store, stats, window(start=15.0, index=1))
    assert grid.shape == (2, 12, 3)
    assert grid.n_present == 24
    assert grid.normalized
    assert grid.mask.all()


def test_empty_store_grid_all_masked():
    from hotspots.prosody import ProsodyStore

    ps = ProsodyStore(dim=3)
    stats = NormStats(mean=np.zeros(3), std=np.ones(3), fitted_on="training")
    grid = build_grid(ps, stats, window())
    assert grid.shape == (1, 12, 3)
    assert grid.n_present == 0
    assert not grid.mask.any()
    assert np.all(grid.tensor == 0.0)


def test_normalized_training_cells_have_zero_mean_unit_variance():
    store = full_store(dim=6, channels=2, duration=240.0, seed=11)
    windows = [window(start=15.0 * i, index=i) for i in range(13)]
    stats = fit_norm_stats(store, windows)
    cells = [stats.apply(store.get(*k)) for k in training_cell_keys(store, windows)]
    z = np.stack(cells)
    live = ~stats.constant_dims
    assert np.all(np.abs(z.mean(axis=0)[live]) < 1e-9)
    assert np.all(np.abs(z.var(axis=0)[live] - 1.0) < 1e-9)


def test_stats_save_load_round_trip(tmp_path):
    stats = NormStats(mean=np.array([1.0, 2.0]), std=np.array([0.0, 3.0]), fitted_on="training")
    stats.save(tmp_path / "stats.json")
    loaded = NormStats.load(tmp_path / "stats.json")
    assert np.array_equal(loaded.mean, stats.mean)
    assert np.array_equal(loaded.std, stats.std)
    assert loaded.fitted_on == "training"


def test_unnormalized_grids_rejected_by_models():
    from hotspots.models import ModelError, stack_grids
    from hotspots.prosody import ProsodyGrid

    grid = ProsodyGrid(
        window_key="m1#0",
        channel_ids=[0],
        tensor=np.zeros((1, 12, 3)),
        mask=np.ones((1, 12), dtype=bool),
        normalized=False,
    )
    with pytest.raises(ModelError, match="normalized"):
        stack_grids([grid])
