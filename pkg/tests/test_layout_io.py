"""Layout domain types and JSON round-tripping."""
import numpy as np
import pytest

from panolayout.layout import (
    BoundaryPrediction,
    CameraModel,
    Corner,
    Layout,
    StageOutputs,
    load_layout,
    load_prediction,
    save_layout,
    validate_layout,
)


def make_layout(w=16, h=8, floor=6.0, ceiling=1.0, corners=((3, 1.0), (9, 0.5))):
    return Layout(np.full(w, floor), np.full(w, ceiling),
                  tuple(Corner(c, s) for c, s in corners))


class TestCameraModel:
    def test_valid(self):
        cam = CameraModel(1024, 512, 1.6)
        assert cam.horizon_row == 255.5

    @pytest.mark.parametrize("w,h", [(100, 60), (2, 2), (511, 256)])
    def test_rejects_bad_aspect(self, w, h):
        with pytest.raises(ValueError, match="width = 2"):
            CameraModel(w, h)

    def test_rejects_nonpositive_camera_height(self):
        with pytest.raises(ValueError, match="camera_height"):
            CameraModel(64, 32, 0.0)


class TestLayoutInvariants:
    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="equal length"):
            Layout(np.zeros(4), np.zeros(5))

    def test_floor_above_horizon_rejected_with_column(self):
        cam = CameraModel(16, 8)
        layout = Layout(np.array([6.0] * 15 + [2.0]), np.full(16, 1.0))
        with pytest.raises(ValueError, match="column 15"):
            validate_layout(cam, layout)

    def test_ceiling_below_horizon_rejected(self):
        cam = CameraModel(16, 8)
        layout = Layout(np.full(16, 6.0), np.array([5.0] + [1.0] * 15))
        with pytest.raises(ValueError, match="column 0"):
            validate_layout(cam, layout)

    def test_corner_column_out_of_range(self):
        cam = CameraModel(16, 8)
        with pytest.raises(ValueError, match="corner column"):
            validate_layout(cam, make_layout(corners=((16, 1.0),)))

    def test_duplicate_corner_warns_last_wins(self):
        with pytest.warns(UserWarning, match="duplicate corner"):
            layout = Layout(np.full(8, 6.0), np.full(8, 1.0),
                            (Corner(2, 0.3), Corner(2, 0.9)))
        assert layout.corners == (Corner(2, 0.9),)

    def test_corner_strength_range(self):
        with pytest.raises(ValueError, match="strength"):
            Corner(1, 1.5)

    def test_immutable_arrays(self):
        layout = make_layout()
        with pytest.raises(ValueError):
            layout.floor_rows[0] = 0.0

    def test_dense_corner_strengths(self):
        layout = make_layout(corners=((3, 1.0), (9, 0.5)))
        dense = layout.corner_strengths()
        assert dense[3] == 1.0 and dense[9] == 0.5 and dense.sum() == 1.5


class TestBoundaryPrediction:
    def test_sigma_must_be_positive(self):
        with pytest.raises(ValueError, match=r"sigma\[1\]"):
            BoundaryPrediction(np.full(3, 6.0), np.array([1.0, 0.0, 1.0]))

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="equal length"):
            BoundaryPrediction(np.full(3, 6.0), np.full(4, 1.0))


class TestStageOutputs:
    def test_wall_depth_positive(self):
        with pytest.raises(ValueError, match="wall_depth"):
            StageOutputs(np.full(4, 6.0), np.full(4, 1.0),
                         np.array([1.0, -1.0, 1.0, 1.0]), np.zeros(4))

    def test_floor_rows_from_prediction(self):
        pred = BoundaryPrediction(np.full(4, 6.0), np.full(4, 1.0))
        out = StageOutputs(pred, np.full(4, 1.0), np.full(4, 2.0), np.zeros(4))
        assert np.array_equal(out.floor_rows, pred.mu)


class TestJsonRoundtrip:
    def test_well_formed_file(self, tmp_path):
        cam = CameraModel(1024, 512, 1.6)
        rows = 300.0 + 50.0 * np.sin(np.linspace(0, 2 * np.pi, 1024, endpoint=False))
        layout = Layout(rows, np.full(1024, 100.0), (Corner(0, 1.0),))
        path = tmp_path / "layout.json"
        save_layout(cam, layout, path)
        cam2, layout2 = load_layout(path)
        assert layout2.width == 1024
        assert cam2 == cam

    def test_roundtrip_close_and_bytes_stable(self, tmp_path):
        cam = CameraModel(16, 8, 1.234567891)
        layout = make_layout(floor=6.123456789, ceiling=1.987654321)
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        save_layout(cam, layout, a)
        save_layout(cam, layout, b)
        assert a.read_bytes() == b.read_bytes()
        cam2, layout2 = load_layout(a)
        assert np.allclose(layout2.floor_rows, layout.floor_rows, atol=1e-9)
        assert np.allclose(layout2.ceiling_rows, layout.ceiling_rows, atol=1e-9)
        assert abs(cam2.camera_height - cam.camera_height) < 1e-9

    def test_roundtrip_random_layouts(self, tmp_path):
        rng = np.random.default_rng(42)
        for trial in range(25):
            h = int(rng.choice([8, 32, 128]))
            w = 2 * h
            cam = CameraModel(w, h, float(rng.uniform(0.5, 3.0)))
            floor = rng.uniform(h / 2 + 0.01, h - 0.01, size=w)
            ceiling = rng.uniform(0.0, h / 2 - 1.0, size=w)
            n_corners = int(rng.integers(0, 5))
            cols = rng.choice(w, size=n_corners, replace=False)
            corners = tuple(Corner(int(c), float(rng.uniform(0, 1))) for c in cols)
            layout = validate_layout(cam, Layout(floor, ceiling, corners))
            path = tmp_path / f"r{trial}.json"
            save_layout(cam, layout, path)
            cam2, layout2 = load_layout(path)
            assert cam2 == cam
            assert np.allclose(layout2.floor_rows, floor, atol=1e-9)
            assert np.allclose(layout2.ceiling_rows, ceiling, atol=1e-9)
            assert layout2.corners == layout.corners

    def test_empty_corners_serialize_as_empty_list(self, tmp_path):
        cam = CameraModel(16, 8)
        path = tmp_path / "l.json"
        save_layout(cam, make_layout(corners=()), path)
        assert '"corners": []' in path.read_text()
        _, layout = load_layout(path)
        assert layout.corners == ()

    def test_sigma_rows_roundtrip(self, tmp_path):
        cam = CameraModel(16, 8)
        layout = make_layout()
        sigma = np.linspace(0.5, 2.0, 16)
        path = tmp_path / "pred.json"
        save_layout(cam, layout, path, sigma_rows=sigma)
        _, _, sigma2 = load_prediction(path)
        assert np.allclose(sigma2, sigma, atol=1e-9)

    def test_rejects_invalid_floor_row_naming_column(self, tmp_path):
        cam = CameraModel(16, 8)
        path = tmp_path / "bad.json"
        good = make_layout()
        save_layout(cam, good, path)
        text = path.read_text().replace("6.000000000", "2.000000000", 1)
        path.write_text(text)
        with pytest.raises(ValueError, match="column 0"):
            load_layout(path)

    def test_rejects_nan(self, tmp_path):
        path = tmp_path / "nan.json"
        path.write_text('{"camera": {"width": 16, "height": 8, "camera_height_m": NaN},'
                        ' "floor_rows": [], "ceiling_rows": [], "corners": []}')
        with pytest.raises(ValueError, match="NaN"):
            load_layout(path)

    def test_parse_failure(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ValueError, match="parse failure"):
            load_layout(path)

    def test_rejects_nonpositive_sigma_rows(self, tmp_path):
        cam = CameraModel(16, 8)
        path = tmp_path / "pred.json"
        save_layout(cam, make_layout(), path, sigma_rows=np.full(16, 1.0))
        text = path.read_text().replace("1.000000000, 1.000000000",
                                        "0.000000000, 1.000000000", 1)
        path.write_text(text)
        with pytest.raises(ValueError, match="sigma_rows"):
            load_prediction(path)
