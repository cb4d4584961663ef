"""Tests for exponents, tail estimates, the Gronwall suite, growth fits,
interpolation checks, convergence in N and the time-step order."""

import math

import numpy as np
import pytest

from app.services.galerkin_solver import SolverConfig, TrajectoryRecord, evolve, sample_grid
from app.services.propagator import free_evolve
from app.services.randomization import DistributionSpec, EnsembleSpec, make_base_pair
from app.services.spectral_core import FilterSpec, FourierField, PhaseState
from app.services.statistics import (
    ConvergenceStudyError,
    ExponentConstraintError,
    MixedNormSettings,
    SetMembershipRecord,
    absorption_limit,
    clopper_pearson,
    convergence_study,
    gronwall_check,
    growth_fit,
    holder_interp_check,
    interpolation_sides,
    is_dyadic,
    log_convexity_fuzz,
    order_check,
    set_quantities,
    summarize_tails,
    tail_curve,
    validate_dyadic,
    validate_exponents,
)

VOL = (2 * math.pi) ** 3


@pytest.fixture
def bundle():
    return validate_exponents(0.5, 0.1)


class TestExponents:
    def test_defaults(self, bundle):
        assert bundle.epsilon1 == pytest.approx(1.0)
        assert bundle.delta_upper == pytest.approx(5.0 / 6.0)
        assert bundle.delta == pytest.approx(0.5 * (0.5 + 5.0 / 6.0))
        assert bundle.delta_tilde == 0.5
        assert bundle.growth_exponent == pytest.approx(2.0)
        assert bundle.l4_exponent == pytest.approx(0.6)
        assert all(v <= 0 for v in bundle.side_conditions().values())

    @pytest.mark.parametrize(
        "s, epsilon, kwargs",
        [
            (0.0, 0.1, {}),
            (1.2, 0.1, {}),
            (0.5, 0.25, {}),
            (0.5, 0.1, {"delta": 0.5}),
            (0.5, 0.1, {"delta": 0.9}),
            (0.5, 0.1, {"delta_tilde": 0.3}),
            (0.5, 0.1, {"delta_check": 0.0}),
            (0.5, 0.1, {"epsilon0": -1.0}),
        ],
    )
    def test_rejects_inadmissible(self, s, epsilon, kwargs):
        with pytest.raises(ExponentConstraintError):
            validate_exponents(s, epsilon, **kwargs)


class TestClopperPearson:
    def test_no_failures(self):
        lo, hi = clopper_pearson(0, 100)
        assert lo == 0.0
        assert hi == pytest.approx(1.0 - 0.025 ** (1 / 100))

    def test_all_failures(self):
        lo, hi = clopper_pearson(50, 50)
        assert lo == pytest.approx(0.025 ** (1 / 50))
        assert hi == 1.0

    def test_interval_contains_estimate(self):
        lo, hi = clopper_pearson(30, 200)
        assert lo < 0.15 < hi


class TestSetQuantities:
    def test_low_part_of_constant_level(self):
        base = make_base_pair(0.5, 3, L=2)
        bundle = validate_exponents(0.5, 0.1)
        record = set_quantities(base, 0.5, bundle)
        assert record.q_F == pytest.approx(math.sqrt(2 * VOL))
        assert record.q_G == pytest.approx(VOL**0.25)
        assert record.q_H is None
        assert record.in_E_M is None
        assert record.threshold_G == pytest.approx(0.5**0.1)

    def test_scaled_pair_sits_inside_the_sets(self, bundle):
        # q_F sees only |b_n|, which a Rademacher draw keeps.
        unit = set_quantities(make_base_pair(0.5, 3, L=2), 2.0, bundle)
        small = set_quantities(make_base_pair(0.5, 3, L=2, amplitude=0.02), 2.0, bundle)
        assert unit.q_F > unit.threshold_F
        assert small.q_F == pytest.approx(0.02 * unit.q_F)
        assert small.q_F < small.threshold_F
        assert small.q_G < small.threshold_G

    def test_mixed_norms_fill_every_event(self, bundle):
        base = make_base_pair(0.5, 3, L=2)
        mixed = MixedNormSettings(t_max=2.0, dt_quad=0.5)
        record = set_quantities(base, 1.0, bundle, mixed)
        for value in (record.q_H, record.q_K, record.q_R):
            assert value is not None and value > 0
        assert record.tail_H > 0
        assert isinstance(record.in_E_M, bool)


def _record(M: float, q_F: float, q_G: float, mixed: bool = False) -> SetMembershipRecord:
    extra = {"q_H": 0.0, "q_K": 0.0, "q_R": 0.0} if mixed else {"q_H": None, "q_K": None, "q_R": None}
    return SetMembershipRecord(
        M=M, q_F=q_F, q_G=q_G, threshold_F=1.0, threshold_G=1.0, threshold_HKR=1.0, **extra
    )


class TestTails:
    def test_counts_complements(self):
        records = [
            (_record(1, 2.0, 0.5), _record(2, 0.5, 0.5)),
            (_record(1, 0.5, 2.0), _record(2, 0.5, 0.5)),
            (_record(1, 0.5, 0.5), _record(2, 0.5, 0.5)),
        ]
        curve = summarize_tails((1.0, 2.0), records)
        assert curve.events["F"].failures == (1, 0)
        assert curve.events["G"].failures == (1, 0)
        assert curve.events["F"].nonincreasing()
        assert "E" not in curve.events

    def test_upper_intersection_over_dyadic_levels(self):
        records = [
            (_record(1, 0.5, 0.5, True), _record(2, 2.0, 0.5, True), _record(3, 0.5, 0.5, True)),
            (_record(1, 2.0, 0.5, True), _record(2, 0.5, 0.5, True), _record(3, 0.5, 0.5, True)),
        ]
        curve = summarize_tails((1.0, 2.0, 3.0), records)
        assert curve.events["E"].failures == (1, 1, 0)
        # M = 3 is not dyadic; at M = 1 both samples fail somewhere at or above.
        assert curve.events["E_upper"].M_values == (1.0, 2.0)
        assert curve.events["E_upper"].failures == (2, 1)

    def test_needs_enough_samples(self, small_ensemble, bundle):
        with pytest.raises(ValueError, match="at least"):
            tail_curve(small_ensemble, bundle, [1.0], 10)

    @pytest.mark.parametrize("workers", [1, 3])
    def test_worker_count_does_not_change_results(self, small_ensemble, bundle, workers):
        curve = tail_curve(small_ensemble, bundle, [1.0, 2.0], 100, workers=workers)
        reference = tail_curve(small_ensemble, bundle, [1.0, 2.0], 100, workers=1)
        assert curve.events["F"].failures == reference.events["F"].failures
        assert curve.records[17][1].q_G == reference.records[17][1].q_G

    def test_raising_epsilon_never_adds_failures(self):
        base = make_base_pair(0.5, 3, L=2, amplitude=0.02)
        spec = EnsembleSpec(base, DistributionSpec.of("gaussian"), 9)
        M_list = [1.0, 2.0, 4.0]
        tight = tail_curve(spec, validate_exponents(0.5, 0.05), M_list, 100)
        loose = tail_curve(spec, validate_exponents(0.5, 0.2), M_list, 100)
        for event in ("F", "G"):
            pairs = zip(tight.events[event].failures, loose.events[event].failures)
            assert all(b <= a for a, b in pairs)

    def test_is_dyadic(self):
        assert is_dyadic(1) and is_dyadic(16.0)
        assert not is_dyadic(12) and not is_dyadic(0.5) and not is_dyadic(2.5)


class TestGronwall:
    def test_inequalities_hold_on_a_short_run(self, small_sample, bundle):
        cfg = SolverConfig(FilterSpec(4), 1e-3, 0.4, sample_grid(0.4, 0.1))
        record = evolve(small_sample, cfg)
        report = gronwall_check(record, 1.0, bundle, quad_step=0.05)
        assert report.times.size == 5
        assert report.passed_ii
        assert report.passed_i
        assert report.passed_iii
        assert report.passed
        assert report.A[0] == 0.0 and report.B[0] == 0.0
        assert report.margin_iii[0] == pytest.approx(0.0, abs=1e-12)


class TestGrowthFit:
    def _records(self, exponent: float, n_times: int = 21) -> list[TrajectoryRecord]:
        times = np.linspace(0.0, 10.0, n_times)
        state = PhaseState.zeros(3, 0)
        cfg = SolverConfig(FilterSpec(4), 0.1, 10.0)
        values = (1.0 + times) ** exponent
        return [
            TrajectoryRecord(
                times=times,
                energies=np.zeros_like(times),
                l4_SNu=values,
                l4_spacetime=np.zeros_like(times),
                initial=state,
                final=state,
                config=cfg,
                h1_w=values,
                h_1m_eps_w=values,
                decomposition_level=1.0,
            )
        ]

    def test_recovers_power_law(self, bundle):
        fit = growth_fit(self._records(0.5), bundle, M=1.0)
        assert fit.slope == pytest.approx(0.5, rel=1e-10)
        assert fit.passed
        assert fit.margin == pytest.approx(1.5)

    def test_fast_growth_fails_l4_bound(self, bundle):
        fit = growth_fit(self._records(3.0), bundle, M=1.0, quantity="l4_SNu")
        assert not fit.passed
        assert fit.bound == pytest.approx(bundle.l4_exponent)

    def test_needs_enough_times(self, bundle):
        with pytest.raises(ValueError, match="at least"):
            growth_fit(self._records(0.5, n_times=5), bundle, M=1.0)


class TestInterpolation:
    def test_single_mode_is_equality(self):
        f = FourierField.from_modes(3, 2, {(1, 2, 0): (0.3, -0.7)})
        lhs, rhs = interpolation_sides(f, 2.0, -1.0, 0.4)
        assert lhs == pytest.approx(rhs, rel=1e-13)

    def test_holder_chain_on_a_standing_wave(self):
        u = FourierField.from_modes(1, 1, {(1,): (1.0, 0.0)})
        init = PhaseState(u, FourierField.zeros(1, 1))
        times = np.linspace(0.0, math.pi, 9)
        states = [free_evolve(init, float(t)) for t in times]
        report = holder_interp_check(times, states, 1.0, 0.0, 0.5)
        assert len(report.pairs) == 36
        assert report.sigma == 0.5
        assert report.passed
        assert report.holder_quotient > 0

    def test_rejects_mismatched_inputs(self):
        with pytest.raises(ValueError):
            holder_interp_check([0.0, 1.0], [PhaseState.zeros(1, 1)])

    def test_fuzz_finds_no_violations(self):
        report = log_convexity_fuzz(2000, seed=5, batch=512)
        assert report.n_fields == 2000
        assert report.passed
        assert report.single_mode_error < 1e-12


class TestConvergence:
    def test_validate_dyadic(self):
        assert validate_dyadic([8, 16, 16, 32]) == (8.0, 16.0, 16.0, 32.0)
        for bad in ([8], [8, 12], [16, 8], [8, 32], [6, 12]):
            with pytest.raises(ConvergenceStudyError):
                validate_dyadic(bad)

    def test_absorption_limit(self):
        assert absorption_limit(FilterSpec(8), 3, 8) == 5

    def test_study_on_a_small_box(self):
        spec = EnsembleSpec(make_base_pair(0.5, 3, L=4), DistributionSpec.of("gaussian"), 1)
        template = SolverConfig(FilterSpec(4), 1e-2, 0.2, sample_grid(0.2, 0.1))
        table = convergence_study(spec, [2, 4], template, 0.2, 0.1)
        assert table.N_values == (2.0, 4.0)
        assert len(table.rows) == 1
        assert table.consistency_holds
        assert table.residual_time == 0.2
        assert table.absorption_limits == (1, 3)


class TestOrder:
    def test_second_order_errors(self):
        dts = (4e-3, 2e-3, 1e-3)
        report = order_check(dts, [0.3 * dt**2 for dt in dts])
        assert report.ratios == pytest.approx((4.0, 4.0))
        assert report.order == pytest.approx(2.0)
        assert report.passed

    def test_first_order_errors_fail(self):
        dts = (4e-3, 2e-3, 1e-3)
        report = order_check(dts, [0.3 * dt for dt in dts])
        assert not report.passed
