import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elax.errors import ConfigurationError
from elax.io import read_csv, read_snapshot, sha256_of, verify_manifest, write_csv, write_manifest, write_snapshot
from elax.spectral import FourierField, GridSpec, seeded_smooth_field


class TestSnapshots:
    @pytest.mark.parametrize("dim,components", [(2, 1), (3, 3)])
    def test_roundtrip_is_exact(self, tmp_path, dim, components):
        f = seeded_smooth_field(GridSpec(dim, 8), components, 7, 2.0)
        write_snapshot(tmp_path / "a.elax1", f, 0.1)
        g, t = read_snapshot(tmp_path / "a.elax1")
        assert t == 0.1
        assert g.real == f.real and g.grid == f.grid
        assert np.array_equal(g.coeffs, f.coeffs)

    def test_byte_layout(self, tmp_path):
        grid = GridSpec(2, 8)
        f = FourierField.single_mode(grid, (1, -2), amplitude=2.0 - 1.0j)
        path = tmp_path / "m.elax1"
        write_snapshot(path, f, 1.0 / 3.0)
        raw = path.read_bytes()
        header, data = raw.split(b"\n", 1)
        assert header == b"ELAX1 dim=2 n=8 components=1 real=0 t=0.33333333333333331 norm=forward"
        assert len(data) == 8 * 8 * 16
        # (1, -2) sits at row 1, column 6 in FFT order
        offset = (1 * 8 + 6) * 16
        assert np.frombuffer(data[offset : offset + 16], dtype="<f8").tolist() == [2.0, -1.0]

    def test_rejects_foreign_file(self, tmp_path):
        (tmp_path / "x").write_bytes(b"NOPE dim=2\n")
        with pytest.raises(ConfigurationError):
            read_snapshot(tmp_path / "x")

    def test_rejects_truncated_data(self, tmp_path):
        write_snapshot(tmp_path / "a", FourierField.single_mode(GridSpec(2, 8), (1, 0)), 0.0)
        raw = (tmp_path / "a").read_bytes()
        (tmp_path / "a").write_bytes(raw[:-16])
        with pytest.raises(ConfigurationError):
            read_snapshot(tmp_path / "a")


class TestCsv:
    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=5))
    def test_floats_roundtrip_exactly(self, tmp_path_factory, values):
        path = tmp_path_factory.mktemp("csv") / "v.csv"
        write_csv(path, [f"c{i}" for i in range(len(values))], [values])
        _, rows = read_csv(path)
        assert rows[0] == values

    def test_mixed_cells_and_nan(self, tmp_path):
        write_csv(tmp_path / "m.csv", ["name", "n", "x"], [["square", 3, float("nan")], ["cube", np.int64(4), np.float64(0.1)]])
        text = (tmp_path / "m.csv").read_text()
        assert text == "name,n,x\nsquare,3,nan\ncube,4,0.10000000000000001\n"


class TestManifest:
    def test_hashes_and_tamper_detection(self, tmp_path):
        (tmp_path / "b.csv").write_text("t\n0\n")
        (tmp_path / "a.csv").write_text("t\n1\n")
        write_manifest(tmp_path, "spectrum", ["b.csv", "a.csv"])
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["format"] == "elax-manifest-1"
        assert [e["path"] for e in manifest["files"]] == ["a.csv", "b.csv"]
        assert manifest["files"][0]["sha256"] == sha256_of(tmp_path / "a.csv")
        assert manifest["files"][0]["bytes"] == 4
        assert verify_manifest(tmp_path) == []
        (tmp_path / "b.csv").write_text("t\n2\n")
        assert verify_manifest(tmp_path) == ["b.csv"]

    def test_known_digest(self, tmp_path):
        (tmp_path / "e").write_bytes(b"")
        assert sha256_of(tmp_path / "e") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
