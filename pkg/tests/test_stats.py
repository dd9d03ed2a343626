import math

import numpy as np
import pytest

from rvelab.raster import VoxelGrid, voxelize
from rvelab.sampling import ProtocolSpec, draw_periodized
from rvelab.stats import (
    CorrelationCurve,
    SampleSet,
    StudySummary,
    empirical_autocorrelation,
    error_decomposition,
    format_summary,
    read_realizations_csv,
    realization_columns,
    scaling_fit,
    success_probability,
    summarize,
    vf_variance_curve,
    write_realizations_csv,
)

# Student-t 0.995 quantile at 9 dof, frozen from an independent
# mpmath quadrature + bisection inversion of the CDF
T_995_DOF9 = 3.24983554159


class TestSummarize:
    def test_constant_samples(self):
        s = summarize(SampleSet([0.7] * 12))
        assert s.mean == pytest.approx(0.7, abs=1e-15)
        assert s.std == pytest.approx(0.0, abs=1e-15)
        assert s.ci_halfwidth == pytest.approx(0.0, abs=1e-15)

    def test_t_quantile_at_ten_samples(self):
        values = np.arange(10.0)
        s = summarize(SampleSet(values))
        expected = T_995_DOF9 * values.std(ddof=1) / math.sqrt(10)
        assert s.ci_halfwidth == pytest.approx(expected, rel=1e-9)

    def test_reference_block_formatting(self):
        # ten samples engineered to reproduce the reference-style string
        std = 1.5e-5 * math.sqrt(10) / T_995_DOF9
        base = np.array([-1.0, 1.0] * 5)
        samples = base / base.std(ddof=1) * std + 0.345228
        assert format_summary(summarize(SampleSet(samples))) == "0.345228 +- 0.000015"

    def test_affine_equivariance(self):
        rng = np.random.default_rng(0)
        v = rng.normal(2.0, 0.3, 40)
        s1 = summarize(SampleSet(v))
        s2 = summarize(SampleSet(3.5 * v))
        assert s2.mean == pytest.approx(3.5 * s1.mean, rel=1e-12)
        assert s2.std == pytest.approx(3.5 * s1.std, rel=1e-12)
        assert s2.ci_halfwidth == pytest.approx(3.5 * s1.ci_halfwidth, rel=1e-12)

    def test_single_sample_refused(self):
        with pytest.raises(ValueError):
            summarize(SampleSet([1.0]))

    def test_empty_refused(self):
        with pytest.raises(ValueError):
            SampleSet([])


class TestErrorDecomposition:
    def test_exact_reference(self):
        d = error_decomposition(SampleSet([2.0, 2.0, 2.0]), 2.0)
        assert d["relative_systematic"] == 0.0

    def test_published_table_values(self):
        # arithmetic on the published snapshot mean vs the reference value
        d = error_decomposition(SampleSet([0.356449] * 3), 0.345228)
        assert d["relative_systematic"] == pytest.approx(0.032503157, rel=1e-6)
        d = error_decomposition(SampleSet([0.345291] * 3), 0.345228)
        assert d["relative_systematic"] == pytest.approx(1.8248809e-4, rel=1e-6)

    def test_relative_random(self):
        rng = np.random.default_rng(1)
        v = rng.normal(1.0, 0.05, 500)
        d = error_decomposition(SampleSet(v), 1.0)
        assert d["relative_random"] == pytest.approx(v.std(ddof=1) / v.mean())


class TestSuccessProbability:
    def test_all_equal(self):
        assert success_probability(SampleSet([1.0] * 5), 1.0, 0.01) == 1.0

    def test_fraction(self):
        samples = SampleSet([1.0, 1.005, 1.02, 0.97, 0.995])
        assert success_probability(samples, 1.0, 0.01) == pytest.approx(3 / 5)

    def test_scale_invariance(self):
        rng = np.random.default_rng(2)
        v = rng.normal(1.0, 0.02, 200)
        p1 = success_probability(SampleSet(v), 1.0, 0.01)
        p2 = success_probability(SampleSet(100 * v), 100.0, 0.01)
        assert p1 == p2


class TestScalingFit:
    def test_exact_power_law(self):
        pts = [(x, 2.7 / x) for x in (1.0, 2.0, 4.0, 8.0)]
        fit = scaling_fit(pts)
        assert fit["slope"] == pytest.approx(-1.0, abs=1e-12)
        assert fit["r2"] == pytest.approx(1.0, abs=1e-12)

    def test_published_periodized_regression(self):
        # frozen from an independent mpmath normal-equation regression
        pts = [(2, 0.0017786), (4, 0.0006614), (8, 0.0002450), (16, 0.0000871)]
        assert scaling_fit(pts)["slope"] == pytest.approx(-1.448851798, abs=1e-6)

    def test_published_snapshot_regression(self):
        pts = [(2, 0.0172593), (4, 0.0080232), (8, 0.0043529), (16, 0.0020374)]
        assert scaling_fit(pts)["slope"] == pytest.approx(-1.012991928, abs=1e-6)

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            scaling_fit([(1.0, 1.0), (2.0, 0.5)])

    def test_nonpositive_refused(self):
        with pytest.raises(ValueError):
            scaling_fit([(1.0, 1.0), (2.0, 0.0), (3.0, 0.1)])


class TestAutocorrelation:
    def test_zero_shift_is_one(self):
        rng = np.random.default_rng(3)
        grid = VoxelGrid((rng.random((32, 32)) < 0.4).astype(np.uint8), 1.0)
        curve = empirical_autocorrelation(grid)
        assert curve.h[0] == pytest.approx(1.0, abs=1e-12)
        assert curve.counts[0] == 1

    def test_mean_removed_zero_sum(self):
        rng = np.random.default_rng(4)
        phase = (rng.random((16, 16)) < 0.5).astype(np.uint8)
        grid = VoxelGrid(phase, 1.0)
        curve = empirical_autocorrelation(grid)
        total = float(np.sum(curve.h * curve.counts))
        assert abs(total) <= 1e-10 * curve.counts.sum()

    def test_iid_noise_decorrelates(self):
        rng = np.random.default_rng(5)
        grid = VoxelGrid((rng.random((64, 64)) < 0.5).astype(np.uint8), 1.0)
        curve = empirical_autocorrelation(grid)
        assert np.abs(curve.h[1:]).max() <= 5.0 / 64.0

    def test_parseval_normalization(self):
        rng = np.random.default_rng(6)
        phase = (rng.random((24, 24)) < 0.35).astype(np.uint8)
        grid = VoxelGrid(phase, 1.0)
        phi = phase.mean()
        f = phase - phi
        # independent full-spectrum Parseval audit of the normalization
        spec = np.fft.fftn(f)
        lhs = float(np.sum(f * f))
        rhs = float(np.sum(np.abs(spec) ** 2) / f.size)
        assert lhs == pytest.approx(rhs, rel=1e-10)
        curve = empirical_autocorrelation(grid)
        assert curve.h[0] * phi * (1 - phi) == pytest.approx(lhs / f.size, rel=1e-10)

    def test_degenerate_refused(self):
        with pytest.raises(ValueError):
            empirical_autocorrelation(VoxelGrid(np.zeros((8, 8), np.uint8), 1.0))

    def test_radius_units(self):
        rng = np.random.default_rng(7)
        grid = VoxelGrid((rng.random((16, 16)) < 0.4).astype(np.uint8), 1.0)
        c1 = empirical_autocorrelation(grid)
        c2 = empirical_autocorrelation(grid, radius_unit=0.25)
        np.testing.assert_allclose(c2.r, c1.r / 0.25)

    @pytest.mark.slow
    def test_packed_spheres_show_contact_shell(self):
        # oscillatory h from the enforced minimum distance: depletion
        # minimum below the diameter, then a contact-shell peak at the
        # isolation distance (centers at 2.4 r)
        spec = ProtocolSpec(protocol="periodized", shape="sphere", size=16, phi=0.30)
        cfg = draw_periodized(spec, seed=8)
        grid = voxelize(cfg, 16 * 16)
        r = cfg.species.radius
        curve = empirical_autocorrelation(grid, radius_unit=r)
        h = curve.h
        idx = next(i for i in range(1, len(h) - 1)
                   if h[i] <= h[i - 1] and h[i] <= h[i + 1])
        assert 1.4 <= curve.r[idx] <= 3.0
        assert h[idx] < 0
        shell = (curve.r > 2.0) & (curve.r < 3.0)
        peak = curve.r[shell][np.argmax(h[shell])]
        assert h[shell].max() > 0
        assert 2.0 <= peak <= 3.0


class TestVfVarianceCurve:
    def test_normalization(self):
        rng = np.random.default_rng(8)
        sweep = [(2.0, rng.normal(0.3, 0.01, 500)),
                 (4.0, rng.normal(0.3, 0.005, 500))]
        rows = vf_variance_curve(sweep, phi=0.3)
        sigma = math.sqrt(0.3 * 0.7)
        assert rows[0]["normalized_std"] == pytest.approx(0.01 / sigma, rel=0.15)
        assert rows[1]["normalized_std"] == pytest.approx(0.005 / sigma, rel=0.15)

    def test_degenerate_refused(self):
        with pytest.raises(ValueError):
            vf_variance_curve([(2.0, [0.3])], phi=0.3)
        with pytest.raises(ValueError):
            vf_variance_curve([], phi=0.0)


class TestCsvSchema:
    def test_round_trip(self, tmp_path):
        rows = [{
            "protocol": "periodized", "K": 2, "seed": 123, "n": 32,
            "phi_measured": 0.301, "a11": 0.345, "a22": 0.346, "a33": 0.344,
            "iters": 17, "residual": 4.2e-7,
        }]
        path = tmp_path / "r.csv"
        write_realizations_csv(path, rows, dim=3)
        back = read_realizations_csv(path)
        assert back[0]["a33"] == pytest.approx(0.344)
        assert back[0]["seed"] == 123
        assert realization_columns(2) == [
            "protocol", "K", "seed", "n", "phi_measured", "a11", "a22",
            "iters", "residual"]
