"""Tests for base pairs, randomized samples and the sub-Gaussian condition."""

import math

import numpy as np
import pytest

from app.services.randomization import (
    DistributionKind,
    DistributionSpec,
    EnsembleSpec,
    make_base_pair,
    sample_generator,
    sample_pair,
    subgaussian_check,
)
from app.services.spectral_core import sobolev_norm

GAMMAS = np.linspace(-10.0, 10.0, 201)


class TestBasePair:
    def test_coefficients_follow_the_power_law(self):
        base = make_base_pair(0.5, 3, eta=0.01, L=2)
        assert base.u.mean == 1.0
        assert base.ut.mean == 1.0
        assert base.u.coefficient((0, 0, 1))[0] == pytest.approx(2.0 ** (-2.01 / 2))
        assert base.ut.coefficient((0, 0, 1))[0] == pytest.approx(2.0 ** (-1.01 / 2))
        assert np.all(base.u.c == 0.0)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"s": 0.0, "d": 3},
            {"s": 1.0, "d": 3},
            {"s": 0.5, "d": 2},
            {"s": 0.5, "d": 3, "eta": 0.0},
            {"s": 0.5, "d": 3, "amplitude": 0.0},
        ],
    )
    def test_rejects_bad_parameters(self, kwargs):
        with pytest.raises(ValueError):
            make_base_pair(**kwargs)

    def test_amplitude_scales_every_coefficient(self):
        unit = make_base_pair(0.5, 3, L=2)
        scaled = make_base_pair(0.5, 3, L=2, amplitude=0.02)
        assert scaled.u.mean == pytest.approx(0.02)
        assert scaled.ut.mean == pytest.approx(0.02)
        np.testing.assert_allclose(scaled.u.b, 0.02 * unit.u.b, rtol=1e-15)
        np.testing.assert_allclose(scaled.ut.b, 0.02 * unit.ut.b, rtol=1e-15)

    def test_larger_box_weighs_on_higher_norms(self):
        small = make_base_pair(0.5, 3, L=2).u
        large = make_base_pair(0.5, 3, L=6).u
        below = sobolev_norm(large, 0.3) / sobolev_norm(small, 0.3)
        above = sobolev_norm(large, 1.0) / sobolev_norm(small, 1.0)
        assert above > below


class TestSampling:
    def test_sample_is_a_function_of_seed_and_index(self, small_ensemble):
        assert sample_pair(small_ensemble, 3) == sample_pair(small_ensemble, 3)
        assert sample_pair(small_ensemble, 3) != sample_pair(small_ensemble, 4)

    def test_seed_changes_the_draw(self, small_ensemble):
        other = EnsembleSpec(small_ensemble.base, small_ensemble.dist, 8)
        assert sample_pair(other, 0) != sample_pair(small_ensemble, 0)

    def test_components_use_independent_streams(self):
        a = sample_generator(1, 0, 0).standard_normal(4)
        b = sample_generator(1, 0, 1).standard_normal(4)
        assert not np.array_equal(a, b)

    def test_u_and_ut_multipliers_are_uncorrelated(self):
        base = make_base_pair(0.5, 3, L=4)
        sample = sample_pair(EnsembleSpec(base, DistributionSpec.of("gaussian"), 5), 0)
        live = base.u.b != 0.0
        x = sample.u.b[live] / base.u.b[live]
        y = sample.ut.b[live] / base.ut.b[live]
        r = np.corrcoef(x, y)[0, 1]
        assert abs(r) < 4.0 / np.sqrt(x.size)

    def test_rademacher_preserves_magnitudes(self):
        base = make_base_pair(0.5, 3, L=2)
        spec = EnsembleSpec(base, DistributionSpec.of("rademacher"), 11)
        sample = sample_pair(spec, 0)
        np.testing.assert_array_equal(np.abs(sample.u.b), np.abs(base.u.b))
        assert abs(sample.u.mean) == 1.0
        assert np.all(sample.u.c == 0.0)

    @pytest.mark.parametrize("kind", list(DistributionKind))
    def test_draws_have_unit_variance(self, kind):
        rng = np.random.default_rng(0)
        values = DistributionSpec.of(kind).draw(rng, (200_000,))
        assert values.mean() == pytest.approx(0.0, abs=0.01)
        assert values.var() == pytest.approx(1.0, abs=0.02)


class TestSubgaussian:
    @pytest.mark.parametrize("kind", list(DistributionKind))
    def test_bound_holds(self, kind):
        report = subgaussian_check(DistributionSpec.of(kind), GAMMAS)
        assert report.passed
        assert len(report.log_mgf) == GAMMAS.size

    def test_too_small_constant_is_reported(self, caplog):
        dist = DistributionSpec(DistributionKind.GAUSSIAN, 0.4)
        report = subgaussian_check(dist, GAMMAS)
        assert not report.passed
        assert 0.0 not in report.violations
        assert "Sub-Gaussian bound fails" in caplog.text

    def test_uniform_log_mgf(self):
        dist = DistributionSpec.of("uniform")
        # Unit variance: log E exp(gX) ~ g^2 / 2 near zero.
        assert float(dist.log_mgf(1e-3)) == pytest.approx(0.5e-6, rel=1e-3)
        x = math.sqrt(3.0) * 2.0
        assert float(dist.log_mgf(2.0)) == pytest.approx(math.log(math.sinh(x) / x))
        assert np.isfinite(dist.log_mgf(1e4))

    def test_rademacher_log_mgf(self):
        dist = DistributionSpec.of("rademacher")
        assert float(dist.log_mgf(1.5)) == pytest.approx(math.log(math.cosh(1.5)))
