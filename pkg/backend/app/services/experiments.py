"""The six experiments: each turns an ExperimentConfig into tables, checks
and snapshots. Artifacts are written by the caller once an experiment has
finished, so a failure leaves nothing half-written.
"""

import asyncio
import logging
import math
from collections.abc import Awaitable, Callable
from dataclasses import asdict

import numpy as np

from app.models.schemas import ExperimentConfig
from app.services.artifacts import ExperimentResult
from app.services.galerkin_solver import (
    SolverConfig,
    TrajectoryRecord,
    evolve,
    mean_mode_reference,
    sample_grid,
    w_states,
)
from app.services.propagator import free_evolve
from app.services.randomization import (
    DistributionKind,
    DistributionSpec,
    EnsembleSpec,
    make_base_pair,
    sample_pair,
    subgaussian_check,
)
from app.services.spectral_core import (
    FilterSpec,
    FourierField,
    PhaseState,
    l2_squared,
    lattice,
)
from app.services.statistics import (
    ExponentBundle,
    MixedNormSettings,
    convergence_study_async,
    gronwall_check,
    growth_fit,
    holder_interp_check,
    log_convexity_fuzz,
    order_check,
    tail_curve_async,
)
from app.services.worker_pool import map_ordered

logger = logging.getLogger(__name__)

ORACLE_DT = 1e-4
ORACLE_TOLERANCE = 1e-8
ORDER_DTS = (4e-3, 2e-3, 1e-3)
SUBGAUSSIAN_GAMMAS = tuple(float(g) for g in np.linspace(-10.0, 10.0, 201))
DEFAULT_TAIL_M = (2.0, 4.0, 8.0, 16.0)
DEFAULT_TAIL_SAMPLES = 10_000
DEFAULT_GRONWALL_M = (4.0, 8.0)
DEFAULT_GRONWALL_SAMPLES = 100


def ensemble(cfg: ExperimentConfig) -> EnsembleSpec:
    base = make_base_pair(cfg.s, cfg.d, cfg.eta, cfg.L, cfg.amplitude)
    return EnsembleSpec(base, DistributionSpec.of(cfg.dist), cfg.seed)


def solver_config(
    cfg: ExperimentConfig,
    t_end: float,
    *,
    N: float | None = None,
    dt: float | None = None,
    lean: bool = False,
    decomposition_level: float | None = None,
    sample_times: tuple[float, ...] | None = None,
) -> SolverConfig:
    return SolverConfig(
        filter=FilterSpec(cfg.N if N is None else N),
        dt=cfg.dt if dt is None else dt,
        t_end=t_end,
        sample_times=sample_grid(t_end, cfg.sample_stride) if sample_times is None else sample_times,
        oversample=cfg.oversample,
        lean=lean,
        decomposition_level=decomposition_level,
        epsilon=cfg.epsilon,
    )


def parameters(cfg: ExperimentConfig, bundle: ExponentBundle) -> dict:
    params = cfg.model_dump(mode="json")
    params["exponents"] = asdict(bundle)
    return params


def _min(values) -> float:
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.min()) if arr.size else 0.0


def high_mode_error(record: TrajectoryRecord) -> float:
    """Largest deviation from free evolution over the modes the filter zeroes."""
    init = record.initial
    lat = lattice(init.dim, init.cutoff)
    silent = (record.config.filter.multiplier(lat.norm_sq) == 0.0) & lat.canonical
    worst = 0.0
    for t, state in zip(record.times, record.require_states()):
        free = free_evolve(init, float(t))
        for got, want in ((state.u, free.u), (state.ut, free.ut)):
            worst = max(
                worst,
                float(np.abs(got.b - want.b)[silent].max(initial=0.0)),
                float(np.abs(got.c - want.c)[silent].max(initial=0.0)),
            )
    return worst


def constant_state(dim: int, a0: float, a1: float) -> PhaseState:
    return PhaseState(FourierField.constant(dim, a0), FourierField.constant(dim, a1))


def mean_at(cfg: ExperimentConfig, dt: float, t: float) -> float:
    # A constant stays in the mean mode, where every filter is the identity.
    init = constant_state(cfg.d, 1.0, 0.0)
    solver = SolverConfig(FilterSpec(1.0), dt, t, (t,), cfg.oversample, lean=True)
    return evolve(init, solver).final.u.mean


# -- energy-check ------------------------------------------------------------


async def run_energy_check(cfg: ExperimentConfig, workers: int) -> ExperimentResult:
    bundle = cfg.bundle()
    result = ExperimentResult("energy-check", parameters(cfg, bundle))
    init = sample_pair(ensemble(cfg), 0)
    record = await asyncio.to_thread(evolve, init, solver_config(cfg, cfg.t_end))

    e0 = float(record.energies[0]) if record.energies.size else 0.0
    scale = abs(e0) if e0 != 0.0 else 1.0
    drift = np.abs(record.energies - e0) / scale
    max_drift = float(drift.max(initial=0.0))
    result.add_check(
        "energy_drift",
        max_drift <= cfg.tolerance,
        cfg.tolerance - max_drift,
        f"max relative drift {max_drift:.3e} over [0, {cfg.t_end}]",
    )

    exact = await asyncio.to_thread(high_mode_error, record)
    result.add_check(
        "high_mode_exactness",
        exact <= cfg.exactness_tolerance,
        cfg.exactness_tolerance - exact,
        f"modes with zero filter weight deviate from free evolution by {exact:.3e} "
        f"at {record.times.size} sample times",
    )

    reference = float(mean_mode_reference(1.0, 0.0, [1.0])[0])
    computed = await asyncio.to_thread(mean_at, cfg, ORACLE_DT, 1.0)
    oracle_error = abs(computed - reference)
    result.add_check(
        "scalar_ode_oracle",
        oracle_error <= ORACLE_TOLERANCE,
        ORACLE_TOLERANCE - oracle_error,
        f"|a(1) - reference| = {oracle_error:.3e} at dt={ORACLE_DT}",
    )

    fine = await asyncio.to_thread(mean_at, cfg, min(ORDER_DTS) / 16.0, 1.0)
    coarse = await map_ordered(lambda dt: mean_at(cfg, dt, 1.0), ORDER_DTS, workers)
    errors = [abs(a - fine) for a in coarse]
    order = order_check(ORDER_DTS, errors)
    ratio_margin = min(
        (min(r - 4.0 / order.factor, 4.0 * order.factor - r) for r in order.ratios),
        default=-math.inf,
    )
    result.add_check(
        "second_order",
        order.passed,
        ratio_margin,
        f"error ratios {', '.join(f'{r:.3f}' for r in order.ratios)}, fitted order {order.order:.3f}",
    )

    result.add_table(
        "data.csv",
        ("t", "energy", "relative_drift", "l4_SNu", "l4_spacetime"),
        zip(record.times, record.energies, drift, record.l4_SNu, record.l4_spacetime),
    )
    result.add_table(
        "oracle.csv",
        ("dt", "a_at_1", "error_vs_fine"),
        [(dt, a, e) for dt, a, e in zip(ORDER_DTS, coarse, errors)]
        + [(ORACLE_DT, computed, abs(computed - fine))],
    )
    result.snapshots["final"] = record.final
    return result


# -- growth ------------------------------------------------------------------


async def run_growth(cfg: ExperimentConfig, workers: int) -> ExperimentResult:
    bundle = cfg.bundle()
    result = ExperimentResult("growth", parameters(cfg, bundle))
    spec = ensemble(cfg)
    solver = solver_config(cfg, cfg.t_end, lean=True, decomposition_level=0.0)

    def run(k: int) -> TrajectoryRecord:
        logger.debug("Growth run for sample %d", k)
        return evolve(sample_pair(spec, k), solver)

    records = await map_ordered(run, range(cfg.n_seeds), workers)
    for quantity in ("h1_w", "l4_SNu"):
        fit = growth_fit(records, bundle, M=0.0, quantity=quantity)
        result.add_check(
            f"growth_{quantity}",
            fit.passed,
            fit.margin,
            f"slope {fit.slope:.4f} vs bound {fit.bound:.4f} over {fit.n_points} points",
        )

    rows = []
    for k, record in enumerate(records):
        for i, t in enumerate(record.times):
            rows.append(
                (
                    k,
                    t,
                    record.h1_w[i],
                    record.h_1m_eps_w[i],
                    record.l4_SNu[i],
                    record.l4_spacetime[i],
                    record.energies[i],
                )
            )
    result.add_table(
        "data.csv",
        ("sample", "t", "h1_w", "h_1m_eps_w", "l4_SNu", "l4_spacetime", "energy"),
        rows,
    )
    return result


# -- tails -------------------------------------------------------------------


async def run_tails(cfg: ExperimentConfig, workers: int) -> ExperimentResult:
    bundle = cfg.bundle()
    result = ExperimentResult("tails", parameters(cfg, bundle))
    spec = ensemble(cfg)
    M_list = tuple(cfg.M_list or DEFAULT_TAIL_M)
    n = cfg.n_samples or DEFAULT_TAIL_SAMPLES
    mixed = (
        MixedNormSettings(cfg.t_max, cfg.dt_quad, cfg.norm_oversample)
        if cfg.mixed_norms
        else None
    )
    curve = await tail_curve_async(
        spec, bundle, M_list, n, mixed, cfg.norm_oversample, workers
    )

    for name in ("F", "G"):
        tail = curve.events[name]
        result.add_check(
            f"tail_{name}_nonincreasing",
            tail.nonincreasing(),
            min(
                (hi - lo for hi, lo in zip(tail.upper, tail.lower[1:])),
                default=0.0,
            ),
            f"failures per M: {list(tail.failures)}",
        )
        result.add_check(
            f"tail_{name}_vanishes",
            tail.failures[-1] == 0,
            -float(tail.failures[-1]),
            f"{tail.failures[-1]} failures of {n} at M={M_list[-1]}",
        )

    sub = subgaussian_check(spec.dist, SUBGAUSSIAN_GAMMAS)
    result.add_check(
        "subgaussian_bound",
        sub.passed,
        _min(np.asarray(sub.log_bound) - np.asarray(sub.log_mgf)),
        f"{spec.dist.kind.value} with c={spec.dist.subgaussian_c}",
    )

    l2_values = await map_ordered(
        lambda k: l2_squared(sample_pair(spec, k).u), range(n), workers
    )
    expected = l2_squared(spec.base.u)
    mean = float(np.mean(l2_values))
    if spec.dist.kind is DistributionKind.RADEMACHER:
        error = float(np.max(np.abs(np.asarray(l2_values) - expected)))
        tol = 1e-12 * max(expected, 1.0)
        result.add_check(
            "rademacher_norm_identity", error <= tol, tol - error, f"max deviation {error:.3e}"
        )
    else:
        stderr = float(np.std(l2_values, ddof=1)) / math.sqrt(n)
        gap = abs(mean - expected)
        result.add_check(
            "l2_mean",
            gap <= 4.0 * stderr,
            4.0 * stderr - gap,
            f"mean {mean:.6g} vs {expected:.6g}, standard error {stderr:.3g}",
        )

    rows = []
    for name, tail in sorted(curve.events.items()):
        for M, k, p, lo, hi in zip(
            tail.M_values, tail.failures, tail.probability, tail.lower, tail.upper
        ):
            rows.append(
                (
                    name,
                    M,
                    k,
                    tail.n_samples,
                    p,
                    lo,
                    hi,
                    M ** (2.0 * bundle.epsilon0),
                    math.log(p) if p > 0 else None,
                )
            )
    result.add_table(
        "data.csv",
        ("event", "M", "failures", "n", "p_hat", "ci_low", "ci_high", "M_pow_2eps0", "log_p_hat"),
        rows,
    )
    quantities = [
        (k, r.M, r.q_F, r.q_G, r.q_H, r.q_K, r.q_R, r.in_E_M)
        for k, row in enumerate(curve.records)
        for r in row
    ]
    result.add_table(
        "quantities.csv",
        ("sample", "M", "q_F", "q_G", "q_H", "q_K", "q_R", "in_E_M"),
        quantities,
    )
    return result


# -- converge ----------------------------------------------------------------


async def run_converge(cfg: ExperimentConfig, workers: int) -> ExperimentResult:
    bundle = cfg.bundle()
    result = ExperimentResult("converge", parameters(cfg, bundle))
    init = sample_pair(ensemble(cfg), 0)
    template = solver_config(cfg, cfg.T)
    table = await convergence_study_async(
        init,
        cfg.N_list,
        template,
        cfg.T,
        cfg.epsilon,
        norm_oversample=cfg.norm_oversample,
        workers=workers,
    )

    def gaps(values) -> float:
        return min((a - b for a, b in zip(values, values[1:])), default=0.0)

    result.add_check(
        "differences_decreasing",
        table.differences_decreasing,
        min(gaps([r.w_difference for r in table.rows]), gaps([r.wt_difference for r in table.rows])),
        "max_t differences of w in H^(1-eps) and w_t in H^(-eps)",
    )
    worst = max(table.consistency_errors, default=0.0)
    result.add_check(
        "decomposition_consistency",
        table.consistency_holds,
        table.consistency_tolerance - worst,
        f"round-off of u_N = S(t) data + w, worst {worst:.3e} over K <= N - 2",
    )
    result.add_check(
        "residual_decreasing",
        table.residuals_decreasing,
        gaps(table.residuals),
        f"untruncated residual at t={table.residual_time}",
    )

    result.add_table(
        "data.csv",
        ("N", "N_next", "w_difference", "wt_difference", "l3_difference"),
        [(r.N, r.N_next, r.w_difference, r.wt_difference, r.l3_difference) for r in table.rows],
    )
    result.add_table(
        "residuals.csv",
        ("N", "residual", "consistency_error", "absorption_limit"),
        zip(table.N_values, table.residuals, table.consistency_errors, table.absorption_limits),
    )
    return result


# -- gronwall ----------------------------------------------------------------


async def run_gronwall(cfg: ExperimentConfig, workers: int) -> ExperimentResult:
    bundle = cfg.bundle()
    result = ExperimentResult("gronwall", parameters(cfg, bundle))
    spec = ensemble(cfg)
    M_list = tuple(cfg.M_list or DEFAULT_GRONWALL_M)
    n = cfg.n_samples or DEFAULT_GRONWALL_SAMPLES
    solver = solver_config(cfg, cfg.t_end)

    def run(k: int) -> list[tuple]:
        record = evolve(sample_pair(spec, k), solver)
        return [
            (k, M, gronwall_check(record, M, bundle, quad_step=cfg.dt_quad))
            for M in M_list
        ]

    per_sample = await map_ordered(run, range(n), workers)
    reports = [item for batch in per_sample for item in batch]

    for label, attr, margin in (
        ("derivative_bound", "passed_i", "margin_i"),
        ("majorization", "passed_ii", "margin_ii"),
        ("gronwall_bound", "passed_iii", "margin_iii"),
    ):
        passed = all(getattr(r, attr) for _, _, r in reports)
        worst = min((_min(getattr(r, margin)) for _, _, r in reports), default=0.0)
        result.add_check(label, passed, worst, f"{len(reports)} trajectories x levels")
    side = bundle.side_conditions()
    result.add_check(
        "side_conditions",
        all(v <= 0.0 for v in side.values()),
        -max(side.values()),
        ", ".join(f"{k}={v:.4g}" for k, v in sorted(side.items())),
    )

    rows = []
    for k, M, r in reports:
        for i, t in enumerate(r.times):
            rows.append(
                (
                    k,
                    M,
                    t,
                    r.derivative[i],
                    r.rhs_i[i],
                    r.margin_i[i],
                    r.lhs_ii[i],
                    r.rhs_ii[i],
                    r.margin_ii[i],
                    r.energy_root[i],
                    r.A[i],
                    r.B[i],
                    r.bound_iii[i],
                    r.margin_iii[i],
                )
            )
    result.add_table(
        "data.csv",
        (
            "sample",
            "M",
            "t",
            "dE_dt",
            "rhs_i",
            "margin_i",
            "lhs_ii",
            "rhs_ii",
            "margin_ii",
            "energy_root",
            "A",
            "B",
            "bound_iii",
            "margin_iii",
        ),
        rows,
    )
    return result


# -- interp ------------------------------------------------------------------


async def run_interp(cfg: ExperimentConfig, workers: int) -> ExperimentResult:
    bundle = cfg.bundle()
    result = ExperimentResult("interp", parameters(cfg, bundle))
    fuzz = await asyncio.to_thread(log_convexity_fuzz, cfg.n_fuzz, cfg.seed)
    result.add_check(
        "log_convexity_fuzz",
        fuzz.passed,
        -float(fuzz.violations),
        f"{fuzz.violations} violations in {fuzz.n_fields} fields, worst relative excess {fuzz.worst_relative:.3e}",
    )
    result.add_check(
        "single_mode_equality",
        fuzz.single_mode_error <= 1e-12,
        1e-12 - fuzz.single_mode_error,
        f"worst relative gap {fuzz.single_mode_error:.3e}",
    )

    theta = cfg.theta if cfg.theta is not None else 1.0 - cfg.epsilon / 2.0
    init = sample_pair(ensemble(cfg), 0)
    record = await asyncio.to_thread(evolve, init, solver_config(cfg, cfg.t_end))
    ws = w_states(record, 0.0)
    report = await asyncio.to_thread(
        holder_interp_check, record.times, ws, cfg.sigma1, cfg.sigma2, theta
    )
    result.add_check(
        "holder_interpolation",
        bool(np.all(report.interp_margin >= -1e-12 * (1.0 + report.interp_rhs))),
        _min(report.interp_margin),
        f"{len(report.pairs)} pairs at sigma={report.sigma:.4g}",
    )
    result.add_check(
        "holder_chain",
        report.passed,
        _min(report.chain_margin),
        f"Hölder quotient {report.holder_quotient:.6g} for exponent {report.exponent:.4g}",
    )
    result.add_table(
        "data.csv",
        ("t1", "t2", "interp_lhs", "interp_rhs", "chain_rhs"),
        [
            (t1, t2, lhs, rhs, chain)
            for (t1, t2), lhs, rhs, chain in zip(
                report.pairs, report.interp_lhs, report.interp_rhs, report.chain_rhs
            )
        ],
    )
    result.snapshots["final"] = record.final
    return result


RUNNERS: dict[str, Callable[[ExperimentConfig, int], Awaitable[ExperimentResult]]] = {
    "energy-check": run_energy_check,
    "growth": run_growth,
    "tails": run_tails,
    "converge": run_converge,
    "gronwall": run_gronwall,
    "interp": run_interp,
}


async def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    logger.info("Starting experiment %s (seed %d)", cfg.experiment, cfg.seed)
    result = await RUNNERS[cfg.experiment](cfg, workers)
    logger.info(
        "Experiment %s finished: %s",
        cfg.experiment,
        "passed" if result.passed else "failed " + ", ".join(c.name for c in result.failing()),
    )
    return result
