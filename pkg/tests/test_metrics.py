import numpy as np
import pytest

import salientdeblur as sd
from salientdeblur.metrics import align_kernel, cumulative_table, evaluate_kernels


def shifted(kernel, dy, dx):
    out = np.zeros_like(kernel)
    h, w = kernel.shape
    ys = slice(max(dy, 0), min(h + dy, h))
    xs = slice(max(dx, 0), min(w + dx, w))
    out[ys, xs] = kernel[slice(max(-dy, 0), min(h - dy, h)), slice(max(-dx, 0), min(w - dx, w))]
    return out


class TestSsde:
    def test_identical_kernels(self):
        k = sd.kernel_preset("line-d", 9)
        err, shift = sd.ssde(k, k)
        assert err == 0.0
        assert shift == (0, 0)

    def test_shifted_kernel_aligns_to_zero(self):
        k = sd.kernel_preset("box", 9)
        err, shift = sd.ssde(shifted(k, 1, 0), k)
        assert err <= 1e-12
        assert shift == (-1, 0)

    def test_delta_vs_uniform_closed_form(self):
        err, _ = sd.ssde(sd.delta_kernel(3), np.full((3, 3), 1.0 / 9.0))
        assert err == pytest.approx(8.0 / 9.0, abs=1e-12)

    def test_symmetric_after_alignment(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            a = rng.random((7, 7))
            b = rng.random((7, 7))
            assert sd.ssde(a, b)[0] == pytest.approx(sd.ssde(b, a)[0], abs=1e-12)

    def test_different_sizes_padded(self):
        small = sd.delta_kernel(3)
        big = sd.delta_kernel(7)
        err, _ = sd.ssde(small, big)
        assert err <= 1e-12

    def test_unnormalized_inputs_normalized(self):
        k = sd.kernel_preset("line-h", 7)
        err, _ = sd.ssde(k * 3.7, k)
        assert err <= 1e-12


class TestPsnr:
    def test_identical_capped(self):
        img = np.random.default_rng(1).random((16, 16))
        assert sd.psnr(img, img) == 99.0

    def test_known_mse(self):
        ref = np.zeros((10, 10))
        img = np.full((10, 10), 0.1)  # MSE = 0.01
        assert sd.psnr(img, ref) == pytest.approx(20.0)
        img = np.ones((10, 10))  # MSE = 1
        assert sd.psnr(img, ref) == pytest.approx(0.0)

    def test_monotone_in_noise(self):
        rng = np.random.default_rng(2)
        ref = rng.random((32, 32))
        values = []
        for sigma in (0.01, 0.05, 0.1, 0.2):
            noisy = ref + rng.normal(0, sigma, ref.shape)
            values.append(sd.psnr(noisy, ref))
        assert values == sorted(values, reverse=True)

    def test_shape_mismatch(self):
        with pytest.raises(sd.InvalidInputError):
            sd.psnr(np.zeros((4, 4)), np.zeros((5, 5)))


class TestErrorRatio:
    def test_equal_restorations(self):
        rng = np.random.default_rng(3)
        truth = rng.random((12, 12))
        restored = truth + rng.normal(0, 0.1, truth.shape)
        assert sd.error_ratio(restored, restored, truth) == pytest.approx(1.0)

    def test_perfect_restoration(self):
        rng = np.random.default_rng(4)
        truth = rng.random((12, 12))
        other = truth + 0.1
        assert sd.error_ratio(truth, other, truth) == 0.0

    def test_zero_denominator_capped(self):
        truth = np.random.default_rng(5).random((8, 8))
        assert sd.error_ratio(truth + 0.2, truth, truth) == 1e6

    def test_scales_with_numerator_residual(self):
        rng = np.random.default_rng(6)
        truth = rng.random((10, 10))
        base = rng.normal(0, 1, truth.shape)
        est = truth + rng.normal(0, 0.05, truth.shape)
        r1 = sd.error_ratio(truth + base, est, truth)
        r2 = sd.error_ratio(truth + 2 * base, est, truth)
        assert r2 == pytest.approx(4 * r1)


class TestAlignment:
    def test_align_kernel_round_trip(self):
        k = sd.kernel_preset("l-curve", 9)
        moved = shifted(k, -1, 2)
        aligned, shift = align_kernel(moved, k)
        assert shift == (1, -2)
        assert np.allclose(aligned, k, atol=1e-12)


class TestEvaluation:
    def test_cumulative_table(self):
        table = cumulative_table([1.0, 2.0, 2.0, 9.0], thresholds=(1.5, 2.5, 10.0))
        assert table == [(1.5, 0.25), (2.5, 0.75), (10.0, 1.0)]

    def test_evaluate_kernels_on_synthetic(self):
        chart = sd.test_chart(96)
        k_true = sd.kernel_preset("line-h", 7)
        blurred = sd.synthesize(chart, k_true, noise_sigma=0.01, seed=8)
        report = evaluate_kernels(shifted(k_true, 1, 1), k_true, blurred, chart)
        assert report.ssde <= 1e-12           # same kernel after alignment
        assert report.error_ratio == pytest.approx(1.0, abs=1e-6)
        assert report.alignment_shift == (-1, -1)
        assert report.psnr_db > 10.0

    def test_evaluate_directory(self, tmp_path):
        chart = sd.test_chart(96)
        k_true = sd.kernel_preset("line-h", 7)
        blurred = sd.synthesize(chart, k_true, noise_sigma=0.01, seed=9)
        case = tmp_path / "case_a"
        case.mkdir()
        sd.write_image(case / "blurred.png", blurred, bit_depth=16)
        sd.write_image(case / "sharp.png", chart, bit_depth=16)
        sd.write_kernel(case / "kernel_true.txt", k_true)
        csv_path = tmp_path / "report.csv"
        results, table = sd.evaluate_directory(tmp_path, csv_path=csv_path)
        assert len(results) == 1
        name, report = results[0]
        assert name == "case_a"
        assert np.isfinite(report.ssde) and np.isfinite(report.error_ratio)
        assert report.ssde < 0.05
        lines = csv_path.read_text().strip().splitlines()
        assert lines[0] == "case,ssde,psnr,error_ratio"
        assert lines[1].startswith("case_a,")
        assert len(table) == 10

    def test_empty_directory_is_error(self, tmp_path):
        with pytest.raises(sd.InvalidInputError):
            sd.evaluate_directory(tmp_path)
