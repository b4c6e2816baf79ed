import io

import numpy as np
import pytest

from gapmm.data.bal import BALParseError, parse_bal, serialize_bal
from gapmm.data.idx import IDXParseError, load_idx_dataset, parse_idx, write_idx
from gapmm.data.synth import (
    ClassificationSpec,
    SyntheticBASpec,
    synth_ba,
    synth_classification,
)
from gapmm.kernels import RobustKernel

MINIMAL_BAL = """1 1 1
0 0 0.5 -0.5
0.1
0.2
0.3
1.0
2.0
-3.0
500.0
0.0
0.0
1.5
-0.5
2.5
"""


class TestBALParser:
    def test_minimal_file(self):
        problem = parse_bal(io.StringIO(MINIMAL_BAL))
        assert problem.num_cameras == 1
        assert problem.num_points == 1
        assert problem.num_observations == 1
        np.testing.assert_array_equal(problem.measurements, [[0.5, -0.5]])
        np.testing.assert_allclose(problem.camera_params[0],
                                   [0.1, 0.2, 0.3, 1.0, 2.0, -3.0, 500.0, 0, 0])
        np.testing.assert_allclose(problem.points[0], [1.5, -0.5, 2.5])

    def test_truncated_observations(self):
        text = "1 1 2\n0 0 0.5 -0.5\n"
        with pytest.raises(BALParseError) as err:
            parse_bal(io.StringIO(text))
        assert "truncated" in str(err.value)
        assert err.value.line >= 2

    def test_observation_index_out_of_range(self):
        text = MINIMAL_BAL.replace("0 0 0.5 -0.5", "0 3 0.5 -0.5")
        with pytest.raises(BALParseError) as err:
            parse_bal(io.StringIO(text))
        assert "out of range" in str(err.value)
        assert err.value.line == 2

    def test_malformed_header(self):
        with pytest.raises(BALParseError) as err:
            parse_bal(io.StringIO("one 1 1\n"))
        assert err.value.line == 1

    def test_roundtrip_token_for_token(self):
        problem = parse_bal(io.StringIO(MINIMAL_BAL))
        out = io.StringIO()
        serialize_bal(problem, out)
        assert out.getvalue().split() == MINIMAL_BAL.split()
        again = parse_bal(io.StringIO(out.getvalue()))
        out2 = io.StringIO()
        serialize_bal(again, out2)
        assert out2.getvalue() == out.getvalue()


class TestIDXParser:
    def test_minimal_vector(self):
        raw = bytes([0, 0, 0x08, 1]) + (3).to_bytes(4, "big") + bytes([7, 0, 255])
        arr = parse_idx(io.BytesIO(raw))
        np.testing.assert_array_equal(arr, [7, 0, 255])
        assert arr.shape == (3,)

    def test_wrong_type_byte(self):
        raw = bytes([0, 0, 0x09, 1]) + (1).to_bytes(4, "big") + bytes([1])
        with pytest.raises(IDXParseError) as err:
            parse_idx(io.BytesIO(raw))
        assert "type byte" in str(err.value)

    def test_bad_magic_prefix(self):
        raw = bytes([1, 0, 0x08, 1]) + (1).to_bytes(4, "big") + bytes([1])
        with pytest.raises(IDXParseError):
            parse_idx(io.BytesIO(raw))

    def test_truncated_payload(self):
        raw = bytes([0, 0, 0x08, 1]) + (5).to_bytes(4, "big") + bytes([1, 2])
        with pytest.raises(IDXParseError) as err:
            parse_idx(io.BytesIO(raw))
        assert "truncated" in str(err.value)

    def test_image_roundtrip(self):
        img = np.array([[[1, 2], [3, 4]], [[5, 6], [7, 8]]], dtype=np.uint8)
        buf = io.BytesIO()
        write_idx(img, buf)
        buf.seek(0)
        again = parse_idx(buf)
        np.testing.assert_array_equal(again, img)

    def test_load_dataset_one_hot(self, tmp_path):
        images = np.array([[[0, 128], [255, 64]]], dtype=np.uint8)
        labels = np.array([2], dtype=np.uint8)
        ip, lp = tmp_path / "im.idx", tmp_path / "lb.idx"
        with open(ip, "wb") as fh:
            write_idx(images, fh)
        with open(lp, "wb") as fh:
            write_idx(labels, fh)
        samples = load_idx_dataset(ip, lp, num_classes=4)
        assert len(samples) == 1
        np.testing.assert_allclose(samples[0].x, [0, 128 / 255, 1.0, 64 / 255])
        np.testing.assert_array_equal(samples[0].y, [0, 0, 1, 0])
        with pytest.raises(IDXParseError):
            load_idx_dataset(ip, lp, num_classes=2)


class TestSynthBA:
    def test_clean_instance_zero_cost(self):
        spec = SyntheticBASpec(cameras=3, points=20, observation_density=0.8,
                               noise=0.0, outlier_fraction=0.0, seed=0)
        problem, theta = synth_ba(spec)
        assert problem.robust_cost(theta) == pytest.approx(0.0, abs=1e-16)

    def test_seed_determinism(self):
        spec = SyntheticBASpec(cameras=4, points=30, outlier_fraction=0.2, seed=7)
        p1, t1 = synth_ba(spec)
        p2, t2 = synth_ba(spec)
        np.testing.assert_array_equal(t1, t2)
        np.testing.assert_array_equal(p1.measurements, p2.measurements)
        np.testing.assert_array_equal(p1.cam_idx, p2.cam_idx)

    def test_outlier_plateau_count(self):
        tau = 1.0
        spec = SyntheticBASpec(cameras=5, points=100, observation_density=0.6,
                               noise=0.05, outlier_fraction=0.3,
                               outlier_spread=40.0, seed=3)
        problem, theta = synth_ba(spec, RobustKernel(tau=tau))
        # plateau-counting oracle on the generated instance
        rn = problem.residual_norms(theta)
        n_outliers = int(round(0.3 * problem.num_observations))
        assert problem.robust_cost(theta) == pytest.approx(
            n_outliers * tau * tau / 4, rel=0.1)
        assert np.sum(rn > tau) >= 0.9 * n_outliers

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            SyntheticBASpec(cameras=0)
        with pytest.raises(ValueError):
            SyntheticBASpec(observation_density=0.0)
        with pytest.raises(ValueError):
            SyntheticBASpec(outlier_fraction=1.0)


class TestSynthClassification:
    def test_seed_determinism(self):
        spec = ClassificationSpec(samples=50, input_dim=8, classes=4, seed=5)
        s1 = synth_classification(spec)
        s2 = synth_classification(spec)
        for a, b in zip(s1, s2):
            np.testing.assert_array_equal(a.x, b.x)
            np.testing.assert_array_equal(a.y, b.y)

    def test_class_balance(self):
        spec = ClassificationSpec(samples=103, input_dim=4, classes=4, seed=1)
        samples = synth_classification(spec)
        counts = np.sum([s.y for s in samples], axis=0)
        assert counts.max() - counts.min() <= 1
        assert counts.sum() == 103

    def test_linear_probe_beats_chance(self):
        spec = ClassificationSpec(samples=200, input_dim=8, classes=4, seed=2)
        samples = synth_classification(spec)
        X = np.stack([s.x for s in samples])
        Y = np.stack([s.y for s in samples])
        Xb = np.hstack([X, np.ones((len(X), 1))])
        # closed-form least-squares probe
        W = np.linalg.lstsq(Xb, Y, rcond=None)[0]
        acc = np.mean(np.argmax(Xb @ W, axis=1) == np.argmax(Y, axis=1))
        assert acc > 0.4  # chance is 0.25

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            ClassificationSpec(classes=1)
        with pytest.raises(ValueError):
            ClassificationSpec(input_dim=1)
