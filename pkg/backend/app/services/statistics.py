"""Quantitative checks on the truncated flow and its random data.

Every check returns a frozen report with signed margins and a `passed`
flag; nothing here raises because a numerical inequality failed.
"""

import asyncio
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy import integrate, stats

from app.services.galerkin_solver import (
    SolverConfig,
    StrangStepper,
    TrajectoryRecord,
    decompose,
    energy,
    evolve,
    residual_untruncated,
    w_states,
)
from app.services.propagator import (
    MixedNormSpec,
    free_displacement,
    free_evolve,
    weighted_mixed_norm,
)
from app.services.randomization import EnsembleSpec, sample_pair
from app.services.spectral_core import (
    DEFAULT_NORM_OVERSAMPLE,
    FilterSpec,
    FourierField,
    PhaseState,
    dealiased_grid_size,
    lattice,
    lp_from_values,
    lp_norm,
    max_coefficient_difference,
    phase_norm,
    project_high,
    project_low,
    smooth_filter,
    sobolev_norm,
    synthesize,
)
from app.services.worker_pool import map_ordered

logger = logging.getLogger(__name__)

CONFIDENCE = 0.95
MIN_TAIL_SAMPLES = 100
MIN_GROWTH_POINTS = 10
HOLDER_CONSTANT = 2.0
EVENTS = ("F", "G", "H", "K", "R", "E")


class ExponentConstraintError(ValueError):
    """Exponents that violate one of the admissibility inequalities."""


class ConvergenceStudyError(ValueError):
    """Filter cutoffs that are not a nondecreasing dyadic sequence."""


# -- exponents ---------------------------------------------------------------


@dataclass(frozen=True)
class ExponentBundle:
    s: float
    epsilon: float
    epsilon1: float
    delta: float
    delta_tilde: float
    delta_check: float
    epsilon0: float = 0.05

    @property
    def delta_upper(self) -> float:
        return self.s / (2.0 * (self.s - 2.0 * self.epsilon))

    @property
    def growth_exponent(self) -> float:
        """(1 - s)/s + epsilon1, the allowed H^1 growth rate of w."""
        return (1.0 - self.s) / self.s + self.epsilon1

    @property
    def l4_exponent(self) -> float:
        return (1.0 - self.s) / (2.0 * self.s) + self.epsilon

    def side_conditions(self) -> dict[str, float]:
        """Quantities that must be <= 0."""
        gap = self.s - 2.0 * self.epsilon
        return {
            "delta_tilde_side": -self.s + self.epsilon + self.delta_tilde * gap,
            "delta_side": -self.s + self.epsilon + (self.delta + 0.5) * gap,
        }


def validate_exponents(
    s: float,
    epsilon: float,
    *,
    delta: float | None = None,
    delta_tilde: float | None = None,
    delta_check: float | None = None,
    epsilon0: float = 0.05,
) -> ExponentBundle:
    """Minimal epsilon1 and admissible weight exponents for (s, epsilon)."""
    if not 0.0 < s < 1.0:
        raise ExponentConstraintError(f"s must satisfy 0 < s < 1, got s={s}")
    if not 0.0 < epsilon < s / 2.0:
        raise ExponentConstraintError(
            f"epsilon must satisfy 0 < epsilon < s/2, got epsilon={epsilon}, s/2={s / 2.0}"
        )
    gap = s - 2.0 * epsilon
    epsilon1 = (1.0 - s + epsilon) / gap - (1.0 - s) / s
    upper = s / (2.0 * gap)

    if delta is None:
        delta = 0.5 * (0.5 + upper)
    elif not 0.5 < delta < upper:
        raise ExponentConstraintError(
            f"delta must satisfy 1/2 < delta < s/(2(s - 2 epsilon)) = {upper:.6g}, "
            f"got delta={delta}"
        )
    if delta_tilde is None:
        delta_tilde = 0.5
    elif not 1.0 / 3.0 < delta_tilde < 1.0:
        raise ExponentConstraintError(
            f"delta_tilde must satisfy 1/3 < delta_tilde < 1, got {delta_tilde}"
        )
    if delta_check is None:
        delta_check = 0.1
    elif not delta_check > 0.0:
        raise ExponentConstraintError(f"delta_check must be positive, got {delta_check}")
    if not epsilon0 > 0.0:
        raise ExponentConstraintError(f"epsilon0 must be positive, got {epsilon0}")

    bundle = ExponentBundle(s, epsilon, epsilon1, delta, delta_tilde, delta_check, epsilon0)
    for name, value in bundle.side_conditions().items():
        if value > 0.0:
            raise ExponentConstraintError(
                f"side condition {name} must be <= 0, got {value:.6g}"
            )
    return bundle


# -- set quantities and tails ------------------------------------------------


@dataclass(frozen=True)
class MixedNormSettings:
    t_max: float = 200.0
    dt_quad: float = 0.05
    oversample: int = DEFAULT_NORM_OVERSAMPLE

    def spec(self, exponent: float, q: float, p: float) -> MixedNormSpec:
        return MixedNormSpec(exponent, q, p, self.t_max, self.dt_quad, self.oversample)


@dataclass(frozen=True)
class SetMembershipRecord:
    """The five defining quantities at level M.

    H, K and R are None when the space-time norms were not evaluated; their
    tails are added before comparing with the threshold.
    """

    M: float
    q_F: float
    q_G: float
    q_H: float | None
    q_K: float | None
    q_R: float | None
    tail_H: float = 0.0
    tail_K: float = 0.0
    tail_R: float = 0.0
    threshold_F: float = 0.0
    threshold_G: float = 0.0
    threshold_HKR: float = 0.0

    @property
    def in_F(self) -> bool:
        return self.q_F <= self.threshold_F

    @property
    def in_G(self) -> bool:
        return self.q_G <= self.threshold_G

    def _in_mixed(self, value: float | None, tail: float) -> bool | None:
        if value is None:
            return None
        return value + tail <= self.threshold_HKR

    @property
    def in_H(self) -> bool | None:
        return self._in_mixed(self.q_H, self.tail_H)

    @property
    def in_K(self) -> bool | None:
        return self._in_mixed(self.q_K, self.tail_K)

    @property
    def in_R(self) -> bool | None:
        return self._in_mixed(self.q_R, self.tail_R)

    @property
    def in_E_M(self) -> bool | None:
        mixed = (self.in_H, self.in_K, self.in_R)
        if any(flag is None for flag in mixed):
            return None
        return self.in_F and self.in_G and all(mixed)

    def membership(self, event: str) -> bool | None:
        return getattr(self, f"in_{event}" if event != "E" else "in_E_M")


def set_quantities(
    sample: PhaseState,
    M: float,
    bundle: ExponentBundle,
    mixed: MixedNormSettings | None = None,
    norm_oversample: int = DEFAULT_NORM_OVERSAMPLE,
) -> SetMembershipRecord:
    low = sample.map(lambda f: project_low(f, M))
    q_F = phase_norm(low, 1.0)
    q_G = lp_norm(low.u, 4.0, norm_oversample)

    q_H = q_K = q_R = None
    tail_H = tail_K = tail_R = 0.0
    if mixed is not None:
        q_H, tail_H = weighted_mixed_norm(sample, M, mixed.spec(bundle.delta, 2.0, math.inf))
        q_K, tail_K = weighted_mixed_norm(sample, M, mixed.spec(bundle.delta_tilde, 3.0, 6.0))
        q_R, tail_R = weighted_mixed_norm(sample, M, mixed.spec(bundle.delta_check, math.inf, 4.0))

    return SetMembershipRecord(
        M=M,
        q_F=q_F,
        q_G=q_G,
        q_H=q_H,
        q_K=q_K,
        q_R=q_R,
        tail_H=tail_H,
        tail_K=tail_K,
        tail_R=tail_R,
        threshold_F=M ** (1.0 - bundle.s + bundle.epsilon),
        threshold_G=M**bundle.epsilon,
        threshold_HKR=M ** (bundle.epsilon - bundle.s),
    )


def clopper_pearson(
    failures: int, n: int, confidence: float = CONFIDENCE
) -> tuple[float, float]:
    """Exact two-sided binomial interval for failures / n."""
    alpha = 1.0 - confidence
    lo = stats.beta.ppf(alpha / 2, failures, n - failures + 1) if failures > 0 else 0.0
    hi = stats.beta.ppf(1 - alpha / 2, failures + 1, n - failures) if failures < n else 1.0
    return float(lo), float(hi)


@dataclass(frozen=True)
class EventTail:
    """Complement counts of one event across the M values."""

    event: str
    M_values: tuple[float, ...]
    failures: tuple[int, ...]
    n_samples: int
    probability: tuple[float, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def nonincreasing(self) -> bool:
        """Each estimate is at most the previous one, up to overlapping intervals."""
        return all(
            p_next <= p_prev or lo_next <= hi_prev
            for p_prev, p_next, hi_prev, lo_next in zip(
                self.probability,
                self.probability[1:],
                self.upper,
                self.lower[1:],
            )
        )


@dataclass(frozen=True)
class TailCurve:
    M_values: tuple[float, ...]
    n_samples: int
    events: dict[str, EventTail]
    records: tuple[tuple[SetMembershipRecord, ...], ...] = field(repr=False)


def _event_tail(event: str, M_values: Sequence[float], counts: Sequence[int], n: int) -> EventTail:
    intervals = [clopper_pearson(k, n) for k in counts]
    return EventTail(
        event=event,
        M_values=tuple(M_values),
        failures=tuple(counts),
        n_samples=n,
        probability=tuple(k / n for k in counts),
        lower=tuple(lo for lo, _ in intervals),
        upper=tuple(hi for _, hi in intervals),
    )


def is_dyadic(value: float) -> bool:
    if value < 1 or value != int(value):
        return False
    n = int(value)
    return n & (n - 1) == 0


def _sample_records(
    spec: EnsembleSpec,
    bundle: ExponentBundle,
    M_values: Sequence[float],
    mixed: MixedNormSettings | None,
    norm_oversample: int,
    k: int,
) -> tuple[SetMembershipRecord, ...]:
    sample = sample_pair(spec, k)
    logger.debug("Set quantities for sample %d", k)
    return tuple(set_quantities(sample, M, bundle, mixed, norm_oversample) for M in M_values)


def summarize_tails(
    M_values: Sequence[float], records: Sequence[Sequence[SetMembershipRecord]]
) -> TailCurve:
    n = len(records)
    events: dict[str, EventTail] = {}
    for event in EVENTS:
        flags = [[rec.membership(event) for rec in row] for row in records]
        if any(flag is None for row in flags for flag in row):
            continue
        counts = [sum(1 for row in flags if not row[j]) for j in range(len(M_values))]
        events[event] = _event_tail(event, M_values, counts, n)

    if "E" in events:
        # Upper intersection over the dyadic levels K >= M present in the list.
        dyadic = [j for j, M in enumerate(M_values) if is_dyadic(M)]
        counts = []
        for j in dyadic:
            above = [i for i in dyadic if M_values[i] >= M_values[j]]
            counts.append(
                sum(1 for row in records if not all(row[i].in_E_M for i in above))
            )
        events["E_upper"] = _event_tail(
            "E_upper", [M_values[j] for j in dyadic], counts, n
        )
    return TailCurve(tuple(M_values), n, events, tuple(tuple(r) for r in records))


async def tail_curve_async(
    spec: EnsembleSpec,
    bundle: ExponentBundle,
    M_list: Sequence[float],
    n_samples: int,
    mixed: MixedNormSettings | None = None,
    norm_oversample: int = DEFAULT_NORM_OVERSAMPLE,
    workers: int = 1,
) -> TailCurve:
    if n_samples < MIN_TAIL_SAMPLES:
        raise ValueError(f"tail estimates need at least {MIN_TAIL_SAMPLES} samples, got {n_samples}")
    M_values = tuple(float(M) for M in M_list)
    work = partial(_sample_records, spec, bundle, M_values, mixed, norm_oversample)
    records = await map_ordered(work, range(n_samples), workers)
    return summarize_tails(M_values, records)


def tail_curve(
    spec: EnsembleSpec,
    bundle: ExponentBundle,
    M_list: Sequence[float],
    n_samples: int,
    mixed: MixedNormSettings | None = None,
    norm_oversample: int = DEFAULT_NORM_OVERSAMPLE,
    workers: int = 1,
) -> TailCurve:
    """Monte Carlo complement probabilities with Clopper-Pearson intervals."""
    return asyncio.run(
        tail_curve_async(spec, bundle, M_list, n_samples, mixed, norm_oversample, workers)
    )


# -- the Gronwall suite ------------------------------------------------------


@dataclass(frozen=True)
class GronwallReport:
    """Per-sample-time sides of the three nested inequalities.

    (i)   |dE(w)/dt| <= ||w_t|| ||(a + W)^3 - W^3||
    (ii)  ||(a + W)^3 - W^3|| <= g + f ||W||_4^2
    (iii) E(w)^(1/2)(t) <= exp(A(t)) (E(w)^(1/2)(0) + B(t))
    with a = S_N S(t) Pi^M data and W = S_N w.
    """

    times: np.ndarray
    derivative: np.ndarray
    rhs_i: np.ndarray
    lhs_ii: np.ndarray
    rhs_ii: np.ndarray
    energy_root: np.ndarray
    A: np.ndarray
    B: np.ndarray
    bound_iii: np.ndarray
    side_conditions: dict[str, float]
    fd_tolerance: float

    @property
    def margin_i(self) -> np.ndarray:
        return self.rhs_i - np.abs(self.derivative)

    @property
    def margin_ii(self) -> np.ndarray:
        return self.rhs_ii - self.lhs_ii

    @property
    def margin_iii(self) -> np.ndarray:
        return self.bound_iii - self.energy_root

    def _slack(self, scale: np.ndarray) -> np.ndarray:
        return self.fd_tolerance * (1.0 + np.abs(scale))

    @property
    def passed_i(self) -> bool:
        return bool(np.all(self.margin_i >= -self._slack(self.rhs_i)))

    @property
    def passed_ii(self) -> bool:
        return bool(np.all(self.margin_ii >= -1e-12 * (1.0 + self.rhs_ii)))

    @property
    def passed_iii(self) -> bool:
        return bool(np.all(self.margin_iii >= -self._slack(self.energy_root)))

    @property
    def passed_side_conditions(self) -> bool:
        return all(v <= 0.0 for v in self.side_conditions.values())

    @property
    def passed(self) -> bool:
        return self.passed_i and self.passed_ii and self.passed_iii and self.passed_side_conditions


def gronwall_grid_size(bandwidth: int, oversample: int = 3) -> int:
    """Grid with exact sixth powers, so discrete Hölder steps are identities."""
    return dealiased_grid_size(bandwidth, max(oversample, 3), order=6, retained=0)


def _filtered_free(
    base: PhaseState, M: float, spec: FilterSpec, K: int
) -> PhaseState:
    high = base.map(lambda f: smooth_filter(project_high(f, M), spec))
    return high.resized(K)


def _free_norm_profile(
    free: PhaseState, times: np.ndarray, G: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """sup, L^4 and L^6 norms of the u-part of S(t) free on the grid."""
    sup = np.empty_like(times)
    l4 = np.empty_like(times)
    l6 = np.empty_like(times)
    for start in range(0, times.size, 16):
        chunk = times[start : start + 16]
        mean, b, c = free_displacement(free, chunk)
        values = synthesize(mean, b, c, free.dim, free.cutoff, G)
        stop = start + chunk.size
        sup[start:stop] = lp_from_values(values, math.inf, free.dim)
        l4[start:stop] = lp_from_values(values, 4.0, free.dim)
        l6[start:stop] = lp_from_values(values, 6.0, free.dim)
    return sup, l4, l6


def _quadrature_times(sample_times: np.ndarray, step: float) -> tuple[np.ndarray, np.ndarray]:
    """A grid on [0, t_last] containing every sample time; returns it and the sample positions."""
    t_last = float(sample_times[-1]) if sample_times.size else 0.0
    uniform = np.linspace(0.0, t_last, max(math.ceil(t_last / step), 1) + 1)
    nodes = np.union1d(uniform, sample_times)
    return nodes, np.searchsorted(nodes, sample_times)


def gronwall_check(
    traj: TrajectoryRecord,
    M: float,
    bundle: ExponentBundle,
    quad_step: float = 0.05,
    fd_tolerance: float = 1e-6,
    oversample: int = 3,
) -> GronwallReport:
    """The three inequalities along a full-state trajectory at level M."""
    cfg = traj.config
    states = traj.require_states()
    base = traj.initial
    dim, L = base.dim, base.cutoff
    spec = cfg.filter
    K = spec.bandwidth
    G = gronwall_grid_size(K, oversample)
    multiplier = spec.multiplier(lattice(dim, K).norm_sq)
    stepper = StrangStepper(dim, L, spec, cfg.oversample, cfg.grid_size)
    h = cfg.dt

    def w_energy(w: PhaseState) -> float:
        return energy(w, spec, cfg.oversample)

    def grid_values(f: FourierField) -> np.ndarray:
        g = f.resized(K)
        return synthesize(g.mean, g.b * multiplier, g.c * multiplier, dim, K, G)

    cell = (2 * math.pi / G) ** dim
    free = _filtered_free(base, M, spec, K)

    n = len(states)
    derivative = np.empty(n)
    rhs_i = np.empty(n)
    lhs_ii = np.empty(n)
    rhs_ii = np.empty(n)
    energy_root = np.empty(n)
    for idx, (t, state) in enumerate(zip(traj.times, states)):
        t = float(t)
        w = decompose(base, state, M, t)
        forward = decompose(base, stepper.advance(state, h), M, t + h)
        backward = decompose(base, stepper.advance(state, -h), M, t - h)
        derivative[idx] = (w_energy(forward) - w_energy(backward)) / (2.0 * h)
        energy_root[idx] = math.sqrt(max(w_energy(w), 0.0))

        mean, b, c = free_displacement(free, np.asarray(t))
        a = synthesize(mean, b, c, dim, K, G)
        W = grid_values(w.u)
        # (a + W)^3 - W^3 expanded
        defect = a * (a * a + 3.0 * W * (a + W))
        defect_l2 = math.sqrt(cell * float(np.sum(np.square(defect))))
        wt_l2 = sobolev_norm(w.ut, 0.0)
        rhs_i[idx] = wt_l2 * defect_l2

        a_sup = float(np.abs(a).max())
        a2 = np.square(a)
        a_l4 = (cell * float(np.sum(np.square(a2)))) ** 0.25
        a_l6 = (cell * float(np.sum(a2 * a2 * a2))) ** (1.0 / 6.0)
        W_l4 = (cell * float(np.sum(np.square(np.square(W))))) ** 0.25
        lhs_ii[idx] = defect_l2
        rhs_ii[idx] = a_l6**3 + 3.0 * a_sup * a_l4 * W_l4 + 3.0 * a_sup * W_l4**2

    nodes, positions = _quadrature_times(np.asarray(traj.times, dtype=np.float64), quad_step)
    sup, l4, l6 = _free_norm_profile(free, nodes, G)
    alpha = 9.0 / math.sqrt(2.0) * sup
    beta = (l6**3 + 1.5 * sup * l4**2) / math.sqrt(2.0)
    A_all = integrate.cumulative_trapezoid(alpha, nodes, initial=0.0)
    B_all = integrate.cumulative_trapezoid(beta, nodes, initial=0.0)
    A = A_all[positions]
    B = B_all[positions]
    y0 = math.sqrt(max(w_energy(decompose(base, base, M, 0.0)), 0.0))
    with np.errstate(over="ignore"):
        bound = np.exp(A) * (y0 + B)

    report = GronwallReport(
        times=np.asarray(traj.times),
        derivative=derivative,
        rhs_i=rhs_i,
        lhs_ii=lhs_ii,
        rhs_ii=rhs_ii,
        energy_root=energy_root,
        A=A,
        B=B,
        bound_iii=bound,
        side_conditions=bundle.side_conditions(),
        fd_tolerance=fd_tolerance,
    )
    logger.debug(
        "Gronwall at M=%s: min margins %.3g %.3g %.3g",
        M,
        float(report.margin_i.min(initial=0.0)),
        float(report.margin_ii.min(initial=0.0)),
        float(report.margin_iii.min(initial=0.0)),
    )
    return report


# -- growth ------------------------------------------------------------------


@dataclass(frozen=True)
class GrowthFit:
    quantity: str
    slope: float
    intercept: float
    r_value: float
    bound: float
    n_points: int

    @property
    def margin(self) -> float:
        return self.bound - self.slope

    @property
    def passed(self) -> bool:
        return self.slope <= self.bound


def power_law_points(
    times: np.ndarray, values: np.ndarray, M: float, s: float
) -> tuple[np.ndarray, np.ndarray]:
    """(log(M^s + t), log sup_{tau <= t} value) over the tail half of the record."""
    times = np.asarray(times, dtype=np.float64)
    running = np.maximum.accumulate(np.asarray(values, dtype=np.float64))
    tail = slice(times.size // 2, None)
    x = M**s + times[tail]
    y = running[tail]
    keep = (x > 0) & (y > 0)
    return np.log(x[keep]), np.log(y[keep])


def growth_fit(
    records: Sequence[TrajectoryRecord],
    bundle: ExponentBundle,
    M: float = 0.0,
    quantity: str = "h1_w",
) -> GrowthFit:
    """Least-squares slope of the log running sup against log(M^s + t).

    `h1_w` is compared with (1-s)/s + epsilon1, `l4_SNu` with
    (1-s)/(2s) + epsilon.
    """
    xs = []
    ys = []
    for record in records:
        values = getattr(record, quantity)
        if values is None:
            raise ValueError(f"record carries no {quantity} values")
        if record.times.size < MIN_GROWTH_POINTS:
            raise ValueError(
                f"growth fit needs at least {MIN_GROWTH_POINTS} sample times, "
                f"got {record.times.size}"
            )
        x, y = power_law_points(record.times, values, M, bundle.s)
        xs.append(x)
        ys.append(y)
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    if x.size < 2 or np.ptp(x) == 0.0:
        raise ValueError("growth fit needs at least two distinct positive times")
    fit = stats.linregress(x, y)
    bound = bundle.growth_exponent if quantity == "h1_w" else bundle.l4_exponent
    return GrowthFit(
        quantity=quantity,
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        r_value=float(fit.rvalue) if np.isfinite(fit.rvalue) else 0.0,
        bound=bound,
        n_points=int(x.size),
    )


# -- interpolation -----------------------------------------------------------


def interpolation_sides(
    f: FourierField, sigma1: float, sigma2: float, theta: float
) -> tuple[float, float]:
    """||f||_{H^(theta s1 + (1-theta) s2)} and ||f||_{H^s1}^theta ||f||_{H^s2}^(1-theta)."""
    sigma = theta * sigma1 + (1.0 - theta) * sigma2
    lhs = sobolev_norm(f, sigma)
    rhs = sobolev_norm(f, sigma1) ** theta * sobolev_norm(f, sigma2) ** (1.0 - theta)
    return lhs, rhs


@dataclass(frozen=True)
class HolderReport:
    pairs: tuple[tuple[float, float], ...]
    interp_lhs: np.ndarray
    interp_rhs: np.ndarray
    chain_rhs: np.ndarray
    holder_quotient: float
    sigma: float
    exponent: float

    @property
    def interp_margin(self) -> np.ndarray:
        return self.interp_rhs - self.interp_lhs

    @property
    def chain_margin(self) -> np.ndarray:
        return self.chain_rhs - self.interp_lhs

    @property
    def passed(self) -> bool:
        slack = 1e-12 * (1.0 + self.interp_rhs)
        return bool(
            np.all(self.interp_margin >= -slack)
            and np.all(self.chain_margin >= -1e-12 * (1.0 + self.chain_rhs))
        )


def holder_interp_check(
    times: Sequence[float],
    states: Sequence[PhaseState],
    sigma1: float = 1.0,
    sigma2: float = 0.0,
    theta: float = 0.95,
) -> HolderReport:
    """Interpolation and the time-Hölder chain over every pair of samples.

    The chain bound is 2 |t1 - t2|^(1 - theta) sup||u||_{H^s1}^theta
    sup(||u||, ||u_t||)_{H^s2}^(1 - theta), suprema taken over the samples.

    Those are maxima over the sampled times, not suprema over the interval:
    between samples the norms may peak higher, so a passing chain holds for
    the recorded trajectory only. Sample densely when that matters.
    """
    if len(states) != len(times):
        raise ValueError("need one state per sample time")
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    sup1 = max(sobolev_norm(st.u, sigma1) for st in states)
    sup2 = max(
        max(sobolev_norm(st.u, sigma2), sobolev_norm(st.ut, sigma2)) for st in states
    )
    sigma = theta * sigma1 + (1.0 - theta) * sigma2
    exponent = 1.0 - theta

    pairs = []
    lhs = []
    rhs = []
    chain = []
    quotient = 0.0
    for i in range(len(states)):
        for j in range(i + 1, len(states)):
            diff = states[i].u - states[j].u
            left, right = interpolation_sides(diff, sigma1, sigma2, theta)
            gap = abs(float(times[j]) - float(times[i]))
            pairs.append((float(times[i]), float(times[j])))
            lhs.append(left)
            rhs.append(right)
            chain.append(HOLDER_CONSTANT * gap**exponent * sup1**theta * sup2**exponent)
            if gap > 0:
                quotient = max(quotient, left / gap**exponent)
    return HolderReport(
        pairs=tuple(pairs),
        interp_lhs=np.asarray(lhs),
        interp_rhs=np.asarray(rhs),
        chain_rhs=np.asarray(chain),
        holder_quotient=quotient,
        sigma=sigma,
        exponent=exponent,
    )


@dataclass(frozen=True)
class FuzzReport:
    n_fields: int
    violations: int
    worst_relative: float
    single_mode_error: float

    @property
    def passed(self) -> bool:
        return self.violations == 0


def log_convexity_fuzz(
    n_fields: int,
    seed: int,
    dim: int = 3,
    cutoff: int = 2,
    relative_slack: float = 1e-12,
    batch: int = 4096,
) -> FuzzReport:
    """Random sparse fields and exponents against the interpolation inequality.

    Works on squared coefficient magnitudes directly, so no fields are built.
    """
    lat = lattice(dim, cutoff)
    weights = (1.0 + lat.norm_sq[lat.canonical]).astype(np.float64)
    modes = weights.size
    vol = (2 * math.pi) ** dim
    rng = np.random.default_rng(np.random.SeedSequence(seed))

    def norm_sq(mean_sq: np.ndarray, coeff_sq: np.ndarray, sigma: np.ndarray) -> np.ndarray:
        powered = weights[None, :] ** sigma[:, None]
        return vol * mean_sq + 0.5 * vol * np.sum(powered * coeff_sq, axis=1)

    violations = 0
    worst = 0.0
    remaining = n_fields
    while remaining > 0:
        size = min(batch, remaining)
        remaining -= size
        scale = 10.0 ** rng.uniform(-3, 3, size=(size, 1))
        coeff_sq = (scale * rng.standard_normal((size, modes))) ** 2
        coeff_sq *= rng.random((size, modes)) < rng.uniform(0.05, 1.0, size=(size, 1))
        mean_sq = (scale[:, 0] * rng.standard_normal(size)) ** 2 * (rng.random(size) < 0.5)
        sigma1 = rng.uniform(-2.0, 2.0, size)
        sigma2 = rng.uniform(-2.0, 2.0, size)
        theta = rng.random(size)
        mid = theta * sigma1 + (1.0 - theta) * sigma2
        lhs = np.sqrt(norm_sq(mean_sq, coeff_sq, mid))
        rhs = np.sqrt(norm_sq(mean_sq, coeff_sq, sigma1)) ** theta * np.sqrt(
            norm_sq(mean_sq, coeff_sq, sigma2)
        ) ** (1.0 - theta)
        excess = (lhs - rhs) / np.where(rhs > 0, rhs, 1.0)
        violations += int(np.sum(excess > relative_slack))
        worst = max(worst, float(excess.max(initial=-math.inf)))

    # One mode: the weights multiply exactly, so both sides agree.
    single = []
    for w in weights[: min(modes, 16)]:
        for sigma1, sigma2, theta in ((1.0, 0.0, 0.5), (2.0, -1.0, 0.3), (0.5, 1.5, 0.9)):
            mid = theta * sigma1 + (1.0 - theta) * sigma2
            lhs = math.sqrt(w**mid)
            rhs = math.sqrt(w**sigma1) ** theta * math.sqrt(w**sigma2) ** (1.0 - theta)
            single.append(abs(lhs - rhs) / rhs)
    return FuzzReport(n_fields, violations, worst, max(single))


# -- convergence in N --------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceRow:
    N: float
    N_next: float
    w_difference: float
    wt_difference: float
    l3_difference: float


@dataclass(frozen=True)
class ConvergenceTable:
    N_values: tuple[float, ...]
    rows: tuple[ConvergenceRow, ...]
    residuals: tuple[float, ...]
    residual_time: float
    consistency_errors: tuple[float, ...]
    absorption_limits: tuple[int, ...]
    grid_size: int
    consistency_tolerance: float = 1e-10

    @staticmethod
    def _strictly_decreasing(values: Sequence[float]) -> bool:
        return all(b < a for a, b in zip(values, values[1:]))

    @property
    def differences_decreasing(self) -> bool:
        return self._strictly_decreasing(
            [r.w_difference for r in self.rows]
        ) and self._strictly_decreasing([r.wt_difference for r in self.rows])

    @property
    def residuals_decreasing(self) -> bool:
        return self._strictly_decreasing(self.residuals)

    @property
    def consistency_holds(self) -> bool:
        return all(e <= self.consistency_tolerance for e in self.consistency_errors)


def validate_dyadic(N_list: Sequence[float]) -> tuple[float, ...]:
    values = tuple(float(N) for N in N_list)
    if len(values) < 2:
        raise ConvergenceStudyError("need at least two filter cutoffs")
    if not all(is_dyadic(N) for N in values):
        raise ConvergenceStudyError(f"filter cutoffs must be powers of two, got {values}")
    if any(b not in (a, 2 * a) for a, b in zip(values, values[1:])):
        raise ConvergenceStudyError(
            f"consecutive cutoffs must repeat or double, got {values}"
        )
    return values


def absorption_limit(spec: FilterSpec, dim: int, cutoff: int) -> int:
    """Largest integer K with S_K S_N = S_K on the box of `cutoff`."""
    norm_sq = lattice(dim, cutoff).norm_sq
    outer = spec.multiplier(norm_sq)
    best = 0
    for K in range(1, max(int(spec.N), 1) + 1):
        inner = FilterSpec(K).multiplier(norm_sq)
        if np.array_equal(inner * outer, inner):
            best = K
    return best


def decomposition_consistency_error(
    base: PhaseState, state: PhaseState, w: PhaseState, t: float, N: float
) -> float:
    """max over K <= N - 2 of |S_K u_N - S_K(S(t) data + w)| coefficient-wise.

    w is itself u_N - S(t) data, so this measures only the round-off of the
    split and its recombination. It checks the bookkeeping of the
    decomposition; it is not independent evidence about the filtered equation.
    """
    linear = free_evolve(base.map(lambda f: project_high(f, 0.0)), t)
    rebuilt = (linear + w).u
    worst = 0.0
    for K in range(1, int(N) - 1):
        spec = FilterSpec(K)
        worst = max(
            worst,
            max_coefficient_difference(
                smooth_filter(state.u, spec), smooth_filter(rebuilt, spec)
            ),
        )
    return worst


def _l3_spacetime(
    times: np.ndarray, fields_a: Sequence, fields_b: Sequence, spec_a, spec_b, oversample: int
) -> float:
    cubes = [
        lp_norm(smooth_filter(fa, spec_a) - smooth_filter(fb, spec_b), 3.0, oversample) ** 3
        for fa, fb in zip(fields_a, fields_b)
    ]
    if len(cubes) < 2:
        return 0.0
    return float(integrate.trapezoid(cubes, times)) ** (1.0 / 3.0)


async def convergence_study_async(
    init: PhaseState,
    N_list: Sequence[float],
    template: SolverConfig,
    T: float,
    epsilon: float,
    residual_time: float = 1.0,
    norm_oversample: int = DEFAULT_NORM_OVERSAMPLE,
    workers: int = 1,
) -> ConvergenceTable:
    N_values = validate_dyadic(N_list)
    dim, L = init.dim, init.cutoff
    # every run steps on a box at least as wide as its filter band
    widest = FilterSpec(max(N_values)).bandwidth
    G = dealiased_grid_size(widest, template.oversample, grid_size=template.grid_size)
    residual_time = min(residual_time, T)
    times = tuple(t for t in template.sample_times if t <= T + 1e-12)
    if residual_time not in times:
        times = tuple(sorted(set(times) | {residual_time}))

    def run(N: float) -> TrajectoryRecord:
        cfg = SolverConfig(
            filter=FilterSpec(N),
            dt=template.dt,
            t_end=T,
            sample_times=times,
            oversample=template.oversample,
            epsilon=epsilon,
            grid_size=G,
        )
        logger.info("Convergence run N=%s on a %d-point grid", N, G)
        return evolve(init, cfg)

    trajectories = await map_ordered(run, N_values, workers)
    ws = [w_states(traj, 0.0) for traj in trajectories]
    t_arr = np.asarray(times)

    rows = []
    for i in range(len(N_values) - 1):
        wa, wb = ws[i], ws[i + 1]
        rows.append(
            ConvergenceRow(
                N=N_values[i],
                N_next=N_values[i + 1],
                w_difference=max(sobolev_norm(a.u - b.u, 1.0 - epsilon) for a, b in zip(wa, wb)),
                wt_difference=max(sobolev_norm(a.ut - b.ut, -epsilon) for a, b in zip(wa, wb)),
                l3_difference=_l3_spacetime(
                    t_arr,
                    [st.u for st in trajectories[i].require_states()],
                    [st.u for st in trajectories[i + 1].require_states()],
                    FilterSpec(N_values[i]),
                    FilterSpec(N_values[i + 1]),
                    norm_oversample,
                ),
            )
        )

    at = times.index(residual_time)
    residuals = tuple(residual_untruncated(traj)[at] for traj in trajectories)
    consistency = tuple(
        max(
            decomposition_consistency_error(init, st, w, float(t), N)
            for t, st, w in zip(times, traj.require_states(), w_list)
        )
        for N, traj, w_list in zip(N_values, trajectories, ws)
    )
    absorption = tuple(absorption_limit(FilterSpec(N), dim, L) for N in N_values)
    return ConvergenceTable(
        N_values=N_values,
        rows=tuple(rows),
        residuals=residuals,
        residual_time=residual_time,
        consistency_errors=consistency,
        absorption_limits=absorption,
        grid_size=G,
    )


def convergence_study(
    spec: EnsembleSpec,
    N_list: Sequence[float],
    template: SolverConfig,
    T: float,
    epsilon: float,
    sample: int = 0,
    workers: int = 1,
) -> ConvergenceTable:
    """Differences between consecutive filter cutoffs on one shared grid."""
    init = sample_pair(spec, sample)
    return asyncio.run(
        convergence_study_async(init, N_list, template, T, epsilon, workers=workers)
    )


# -- time-step order ---------------------------------------------------------


@dataclass(frozen=True)
class OrderReport:
    dts: tuple[float, ...]
    errors: tuple[float, ...]
    ratios: tuple[float, ...]
    order: float
    expected: float = 2.0
    factor: float = 1.5

    @property
    def passed(self) -> bool:
        target = 2.0**self.expected
        return bool(self.ratios) and all(
            target / self.factor <= r <= target * self.factor for r in self.ratios
        )


def order_check(dts: Sequence[float], errors: Sequence[float], expected: float = 2.0) -> OrderReport:
    """Error ratios across halved steps; dt^p scaling gives 2^p per halving."""
    pairs = sorted(zip(dts, errors), reverse=True)
    dts_sorted = tuple(float(d) for d, _ in pairs)
    errs = tuple(float(e) for _, e in pairs)
    ratios = tuple(a / b if b > 0 else math.inf for a, b in zip(errs, errs[1:]))
    fit = stats.linregress(np.log(dts_sorted), np.log(np.maximum(errs, 1e-300)))
    return OrderReport(dts_sorted, errs, ratios, float(fit.slope), expected)
