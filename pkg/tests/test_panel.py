import numpy as np
import pytest

from regime_atlas.errors import ConfigError, DataError
from regime_atlas.panel import load_csv, normalize_raw, save_panel_csv


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_empty_cell_becomes_gap(tmp_path):
    path = write(tmp_path, "a,b,c\n1,2,3\n4,,6\n7,8,9\n10,11,12\n")
    panel, mask, _ = load_csv(path)
    assert panel.n_series == 3 and panel.n_stamps == 4
    assert mask.sum() == 1
    assert mask[1, 1]  # series b, second stamp


def test_minmax_normalization(tmp_path):
    path = write(tmp_path, "a\n2\n4\n6\n")
    panel, _, _ = load_csv(path)
    assert np.allclose(panel.values[0], [0.0, 0.5, 1.0])


def test_constant_series_maps_to_midscale(tmp_path):
    path = write(tmp_path, "a,b\n5,1\n5,2\n5,3\n")
    panel, _, warnings = load_csv(path)
    assert np.allclose(panel.values[0], 0.5)
    assert warnings.constant_series == ["a"]
    assert panel.scale.constant[0] and not panel.scale.constant[1]
    # constant series denormalize back to the original value
    assert np.allclose(panel.denormalize()[0], 5.0)


def test_all_missing_series_flagged(tmp_path):
    path = write(tmp_path, "a,b\n,1\n,2\n")
    panel, _, warnings = load_csv(path)
    assert warnings.all_missing_series == ["a"]
    assert np.isnan(panel.values[0]).all()


def test_ragged_rows_rejected(tmp_path):
    path = write(tmp_path, "a,b\n1,2\n3\n")
    with pytest.raises(DataError):
        load_csv(path)


def test_non_numeric_rejected(tmp_path):
    path = write(tmp_path, "a\n1\nxyz\n")
    with pytest.raises(DataError):
        load_csv(path)


def test_duplicate_ids_rejected(tmp_path):
    path = write(tmp_path, "a,a\n1,2\n")
    with pytest.raises(DataError):
        load_csv(path)


def test_rows_series_layout(tmp_path):
    path = write(tmp_path, "x,1,2,3\ny,4,5,6\n")
    panel, _, _ = load_csv(path, layout="rows=series")
    assert panel.ids == ("x", "y")
    assert panel.n_stamps == 3
    assert np.allclose(panel.values[0], [0.0, 0.5, 1.0])


def test_unknown_layout_rejected(tmp_path):
    path = write(tmp_path, "a\n1\n")
    with pytest.raises(ConfigError):
        load_csv(path, layout="sideways")


def test_denormalize_round_trip(rng):
    raw = rng.normal(0, 10, size=(6, 40))
    raw[2, 5] = np.nan
    ids = tuple(f"s{i}" for i in range(6))
    panel, _ = normalize_raw(raw, ids)
    back = panel.denormalize()
    present = ~np.isnan(raw)
    assert np.nanmax(np.abs(back[present] - raw[present])) < 1e-12


def test_global_normalization_keeps_shapes_identical():
    raw = np.array([[0.0, 1.0, 2.0], [0.0, 1.0, 4.0]])
    panel, _ = normalize_raw(raw, ("a", "b"), mode="global")
    # both series share the panel-wide scale
    assert np.allclose(panel.values[0], [0.0, 0.25, 0.5])
    assert np.allclose(panel.values[1], [0.0, 0.25, 1.0])
    back = panel.denormalize()
    assert np.allclose(back, raw)


def test_save_panel_round_trip(tmp_path, rng):
    raw = rng.random((4, 9))
    raw[1, 3] = np.nan
    panel, _ = normalize_raw(raw, ("a", "b", "c", "d"))
    out = tmp_path / "out.csv"
    save_panel_csv(panel, str(out))
    again, mask, _ = load_csv(str(out))
    present = ~mask
    assert np.allclose(again.values[present], panel.values[present])
    assert (mask == panel.gap_mask).all()
