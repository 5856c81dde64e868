"""io_formats tests: byte-identical round trips and strict rejection of
malformed files."""

import numpy as np
import pytest

from polarlab import io_formats as iof
from polarlab.channel import FerEstimate
from polarlab.codec import CodeSpec, FrozenMask
from polarlab.construction import DatasetRecord, build_mask, ga_reliabilities
from polarlab.errors import InvalidArgument, SchemaError
from polarlab.surrogate import MlpConfig, Standardizer, forward, init_params


@pytest.fixture
def random_records():
    rng = np.random.default_rng(0)
    recs = []
    for _ in range(40):
        bits = np.zeros(64, dtype=np.uint8)
        bits[rng.permutation(64)[:32]] = 1
        errors = int(rng.integers(1, 100))
        frames = int(rng.integers(errors, 10_000))
        recs.append(DatasetRecord(FrozenMask(bits),
                                  FerEstimate.from_counts(errors, frames,
                                                          2.5)))
    return recs


# ---------------------------------------------------------------------------
# masks

def test_mask_round_trip(tmp_path):
    spec = CodeSpec(64, 32)
    mask = build_mask(spec, ga_reliabilities(spec, 2.0))
    path = str(tmp_path / "mask.txt")
    iof.save_mask(path, spec, mask, {"design_ebn0_db": 2.0})
    spec2, mask2 = iof.load_mask(path)
    assert spec2 == spec
    assert np.array_equal(mask2.bits, mask.bits)


def test_mask_string_convention(tmp_path):
    # "1000" with N=4, K=3 means frozen set {0}
    path = str(tmp_path / "m.txt")
    path_file = tmp_path / "m.txt"
    path_file.write_text("# polarlab-mask v1\n# n: 4\n# k: 3\n1000\n")
    spec, mask = iof.load_mask(path)
    assert spec == CodeSpec(4, 3)
    assert np.array_equal(mask.bits, [1, 0, 0, 0])


def test_mask_rejects_wrong_version_and_popcount(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("# polarlab-mask v9\n# n: 4\n# k: 3\n1000\n")
    with pytest.raises(SchemaError):
        iof.load_mask(str(bad))
    bad.write_text("# polarlab-mask v1\n# n: 4\n# k: 3\n1100\n")
    with pytest.raises(SchemaError):
        iof.load_mask(str(bad))


# ---------------------------------------------------------------------------
# datasets

def _header():
    return iof.DatasetHeader(64, 32, "scl", 4, 2.5, 2.0, 8, 100, 42)


def test_dataset_round_trip_and_determinism(tmp_path, random_records):
    p1, p2 = str(tmp_path / "a.txt"), str(tmp_path / "b.txt")
    iof.save_dataset(p1, _header(), random_records)
    header, loaded = iof.load_dataset(p1)
    assert header == _header()
    assert len(loaded) == len(random_records)
    for a, b in zip(random_records, loaded):
        assert np.array_equal(a.mask.bits, b.mask.bits)
        assert a.fer_estimate == b.fer_estimate
    iof.save_dataset(p2, header, loaded)
    assert (tmp_path / "a.txt").read_bytes() == (tmp_path / "b.txt").read_bytes()


def test_dataset_rejects_bad_rows(tmp_path, random_records):
    path = str(tmp_path / "ds.txt")
    iof.save_dataset(path, _header(), random_records)
    lines = (tmp_path / "ds.txt").read_text().splitlines()
    n_header = sum(1 for ln in lines if ln.startswith("#"))

    # popcount violation, reported with its line number
    bad = lines[:]
    bad.insert(n_header, "1" * 64 + " 0.5 10 5")
    (tmp_path / "bad1.txt").write_text("\n".join(bad) + "\n")
    with pytest.raises(SchemaError, match=rf":{n_header + 1}:"):
        iof.load_dataset(str(tmp_path / "bad1.txt"))

    # fer inconsistent with frame_errors/frames
    bad = lines[:]
    tokens = bad[n_header].split()
    tokens[1] = "0.123456"
    bad[n_header] = " ".join(tokens)
    (tmp_path / "bad2.txt").write_text("\n".join(bad) + "\n")
    with pytest.raises(SchemaError, match="fer"):
        iof.load_dataset(str(tmp_path / "bad2.txt"))

    # wrong column count
    bad = lines[:]
    bad[n_header] = bad[n_header] + " 7"
    (tmp_path / "bad3.txt").write_text("\n".join(bad) + "\n")
    with pytest.raises(SchemaError, match="4 fields"):
        iof.load_dataset(str(tmp_path / "bad3.txt"))


def test_dataset_rejects_header_problems(tmp_path, random_records):
    path = str(tmp_path / "ds.txt")
    iof.save_dataset(path, _header(), random_records)
    text = (tmp_path / "ds.txt").read_text()
    (tmp_path / "v.txt").write_text(text.replace("dataset v1", "dataset v2"))
    with pytest.raises(SchemaError):
        iof.load_dataset(str(tmp_path / "v.txt"))
    (tmp_path / "m.txt").write_text(text.replace("# seed: 42\n", ""))
    with pytest.raises(SchemaError, match="missing"):
        iof.load_dataset(str(tmp_path / "m.txt"))
    (tmp_path / "u.txt").write_text(text.replace("# seed: 42",
                                                 "# seed: 42\n# extra: 1"))
    with pytest.raises(SchemaError, match="unknown"):
        iof.load_dataset(str(tmp_path / "u.txt"))


# ---------------------------------------------------------------------------
# models

@pytest.mark.parametrize("cfg,batchnorm,d_in", [
    (MlpConfig(6, 320, 3), False, 36),  # large-sweep shape
    (MlpConfig(3, 16, 2), True, 10),
    (MlpConfig(1, 5, 1), False, 7),
])
def test_model_round_trip_bit_exact(tmp_path, cfg, batchnorm, d_in):
    rng = np.random.default_rng(1)
    params = init_params(cfg, d_in, rng, batchnorm=batchnorm)
    kept = np.sort(rng.permutation(128)[:d_in])
    std = Standardizer(kept, rng.normal(0, 1, d_in),
                       np.abs(rng.normal(1, 0.1, d_in)) + 0.1, -3.0, 1.2)
    path = str(tmp_path / "model.txt")
    iof.save_model(path, params, std, {"epochs": 100})
    loaded, std2 = iof.load_model(path)
    x = rng.normal(0, 1, (100, d_in))
    assert np.array_equal(forward(cfg, params, x), forward(cfg, loaded, x))
    assert np.array_equal(std2.kept_indices, std.kept_indices)
    assert std2.out_mean == std.out_mean and std2.out_std == std.out_std
    iof.save_model(str(tmp_path / "again.txt"), loaded, std2, {"epochs": 100})
    assert (tmp_path / "model.txt").read_bytes() == \
        (tmp_path / "again.txt").read_bytes()


def test_model_rejects_truncation_and_unknown_fields(tmp_path):
    cfg = MlpConfig(2, 6, 1)
    rng = np.random.default_rng(2)
    params = init_params(cfg, 4, rng)
    std = Standardizer(np.arange(4), np.zeros(4), np.ones(4), 0.0, 1.0)
    path = str(tmp_path / "model.txt")
    iof.save_model(path, params, std)
    lines = (tmp_path / "model.txt").read_text().splitlines()
    (tmp_path / "trunc.txt").write_text("\n".join(lines[:len(lines) // 2])
                                        + "\n")
    with pytest.raises(SchemaError):
        iof.load_model(str(tmp_path / "trunc.txt"))
    (tmp_path / "extra.txt").write_text("\n".join(lines) + "\nmystery 1 2\n")
    with pytest.raises(SchemaError, match="mystery"):
        iof.load_model(str(tmp_path / "extra.txt"))
    (tmp_path / "v.txt").write_text("\n".join(lines).replace("model v1",
                                                             "model v7"))
    with pytest.raises(SchemaError):
        iof.load_model(str(tmp_path / "v.txt"))


def test_model_rejects_shape_mismatch(tmp_path):
    cfg = MlpConfig(2, 6, 1)
    params = init_params(cfg, 4, np.random.default_rng(3))
    std = Standardizer(np.arange(4), np.zeros(4), np.ones(4), 0.0, 1.0)
    path = str(tmp_path / "model.txt")
    iof.save_model(path, params, std)
    text = (tmp_path / "model.txt").read_text()
    (tmp_path / "bad.txt").write_text(text.replace("layer 0 4 6",
                                                   "layer 0 4 5"))
    with pytest.raises(SchemaError, match="shape"):
        iof.load_model(str(tmp_path / "bad.txt"))


# ---------------------------------------------------------------------------
# FER curves

def _points():
    return [(x, FerEstimate.from_counts(max(1, int(1000 * 10 ** (-x / 2))),
                                        100_000, x))
            for x in np.arange(0.8, 6.01, 0.4)]


def test_fer_curve_csv_round_trip(tmp_path):
    pts = _points()
    csv_path, svg_path = iof.emit_fer_curve(pts, str(tmp_path / "curve"))
    lines = (tmp_path / "curve.csv").read_text().splitlines()
    assert lines[0] == "ebn0_db,fer,ci_halfwidth,frames"
    assert len(lines) == len(pts) + 1
    for (ebn0, est), line in zip(pts, lines[1:]):
        cols = line.split(",")
        assert float(cols[0]) == ebn0
        assert float(cols[1]) == est.fer
        assert float(cols[2]) == est.ci_halfwidth
        assert int(cols[3]) == est.frames


def test_fer_curve_svg_content(tmp_path):
    _, svg_path = iof.emit_fer_curve(_points(), str(tmp_path / "c"), "SCL-4")
    svg = (tmp_path / "c.svg").read_text()
    assert svg.startswith("<svg")
    assert "polyline" in svg and "SCL-4" in svg
    assert "1e-" in svg  # logarithmic FER tick labels


def test_fer_curve_single_point_renders_marker_only():
    svg = iof.render_fer_svg({"x": [(2.0, 1e-3)]})
    assert "circle" in svg and "polyline" not in svg


def test_fer_curve_empty_rejected(tmp_path):
    with pytest.raises(InvalidArgument):
        iof.emit_fer_curve([], str(tmp_path / "never"))
    with pytest.raises(InvalidArgument):
        iof.render_fer_svg({"x": [(1.0, 0.0)]})


def test_multi_curve_svg_has_one_polyline_per_curve():
    curves = {
        "a": [(1.0, 1e-2), (2.0, 1e-3)],
        "b": [(1.0, 2e-2), (2.0, 2e-3)],
    }
    svg = iof.render_fer_svg(curves)
    assert svg.count("<polyline") == 2
    assert "a</text>" in svg and "b</text>" in svg
