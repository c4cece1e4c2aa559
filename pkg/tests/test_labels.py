import io
import json

import numpy as np
import pytest

from seld3d.labels import (EventLabel, LabelParseError, cartesian_to_doa,
                           doa_to_cartesian, labels_from_json, labels_to_json,
                           load_labels, segment_clip)


class TestLoadLabels:
    def test_basic_row(self):
        (lab,) = load_labels(io.StringIO("10,3,0,30,-10,2.5\n"))
        assert lab == EventLabel(10, 3, 0, 30.0, -10.0, 2.5)

    def test_class_out_of_range(self):
        with pytest.raises(LabelParseError, match="line 1"):
            load_labels(io.StringIO("10,13,0,0,0,1\n"))

    def test_empty_file(self):
        assert load_labels(io.StringIO("")) == []

    def test_error_carries_line_number(self):
        stream = io.StringIO("0,1,0,0,0,1\n5,2,0,bogus,0,1\n")
        with pytest.raises(LabelParseError) as err:
            load_labels(stream)
        assert err.value.line_no == 2

    def test_angle_and_distance_bounds(self):
        for row in ("0,0,0,180,0,1", "0,0,0,0,91,1", "0,0,0,0,0,0", "0,0,0,0,0,-2"):
            with pytest.raises(LabelParseError):
                load_labels(io.StringIO(row + "\n"))

    def test_wrong_field_count(self):
        with pytest.raises(LabelParseError):
            load_labels(io.StringIO("1,2,3\n"))


class TestDoaConversion:
    def test_axes(self):
        np.testing.assert_allclose(doa_to_cartesian(0, 0), [1, 0, 0], atol=1e-12)
        np.testing.assert_allclose(doa_to_cartesian(90, 0), [0, 1, 0], atol=1e-12)
        np.testing.assert_allclose(doa_to_cartesian(45, 90), [0, 0, 1], atol=1e-12)

    def test_unit_norm(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            v = doa_to_cartesian(rng.uniform(-180, 180), rng.uniform(-90, 90))
            assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)

    def test_round_trip(self):
        for az, el in [(-120.0, 33.0), (15.5, -70.0), (179.0, 0.0)]:
            got = cartesian_to_doa(doa_to_cartesian(az, el))
            assert got == pytest.approx((az, el), abs=1e-9)


class TestSegmentation:
    def test_sixty_second_clip(self):
        features = np.zeros((7, 6000, 128))
        segments = segment_clip(features, [])
        assert len(segments) == 60
        assert all(s.feature.shape == (7, 100, 128) for s in segments)

    def test_label_rebased_to_window(self):
        features = np.zeros((7, 200, 128))
        labels = [EventLabel(25, 1, 0, 0.0, 0.0, 1.0)]
        segments = segment_clip(features, labels)
        assert segments[0].labels == []
        assert segments[1].labels[0].frame == 5

    def test_partial_window_dropped(self):
        assert segment_clip(np.zeros((7, 90, 128)), []) == []

    def test_start_frames(self):
        segments = segment_clip(np.zeros((7, 300, 128)), [])
        assert [s.start_frame for s in segments] == [0, 20, 40]


class TestJsonSidecar:
    def test_round_trip(self):
        labels = [EventLabel(3, 5, 1, -45.0, 20.0, 4.2),
                  EventLabel(9, 0, 0, 170.0, -5.0, 0.8)]
        text = labels_to_json(labels, d_norm=10.0)
        doc = json.loads(text)
        assert doc["d_norm"] == 10.0
        assert labels_from_json(text) == labels
