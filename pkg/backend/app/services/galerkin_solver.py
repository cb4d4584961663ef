"""Strang-split integration of the filtered cubic wave equation

    d_tt u - Lap u + S_N((S_N u)^3) = 0,

with the conserved energy, the split u = S(t) Pi^M data + w, and the defect
against the unfiltered cubic equation along a computed trajectory.
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate

from app.services.propagator import free_evolve
from app.services.spectral_core import (
    DEFAULT_DEALIAS_OVERSAMPLE,
    CubicNonlinearity,
    FilterSpec,
    FourierField,
    PhaseState,
    cube,
    cubic_term,
    dealiased_grid_size,
    gradient_l2_squared,
    l2_squared,
    lattice,
    phase_norm,
    project_high,
    sobolev_norm,
)

logger = logging.getLogger(__name__)

INTEGRATORS = ("strang",)
TIME_SLACK = 1e-12
ODE_TOLERANCE = 1e-13


class SolverConfigError(ValueError):
    """Step size, sample times or integrator outside what the solver accepts."""


class TrajectoryError(ValueError):
    """A trajectory that cannot serve the requested analysis."""


def sample_grid(t_end: float, stride: float) -> tuple[float, ...]:
    """0, stride, 2 stride, ... up to and including t_end."""
    if stride <= 0:
        raise SolverConfigError(f"sample stride must be positive, got {stride}")
    count = max(math.floor(t_end / stride + 1e-9), 0)
    times = [k * stride for k in range(count + 1)]
    if t_end - times[-1] > TIME_SLACK:
        times.append(t_end)
    return tuple(times)


@dataclass(frozen=True)
class SolverConfig:
    filter: FilterSpec
    dt: float
    t_end: float
    sample_times: tuple[float, ...] = ()
    oversample: int = DEFAULT_DEALIAS_OVERSAMPLE
    integrator: str = "strang"
    lean: bool = False
    decomposition_level: float | None = None
    epsilon: float = 0.1
    grid_size: int | None = None

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise SolverConfigError(f"time step must be positive, got {self.dt}")
        if self.t_end < 0:
            raise SolverConfigError(f"t_end must be >= 0, got {self.t_end}")
        if self.integrator not in INTEGRATORS:
            raise SolverConfigError(
                f"unknown integrator {self.integrator!r}, expected one of {INTEGRATORS}"
            )
        default = (0.0, self.t_end) if self.t_end > 0 else (0.0,)
        times = tuple(float(t) for t in (self.sample_times or default))
        if times[0] < -TIME_SLACK or times[-1] > self.t_end + TIME_SLACK:
            raise SolverConfigError(
                f"sample times must lie in [0, {self.t_end}], got {times[0]}..{times[-1]}"
            )
        if any(b <= a for a, b in zip(times, times[1:])):
            raise SolverConfigError("sample times must be strictly increasing")
        object.__setattr__(self, "sample_times", times)
        if self.decomposition_level is not None and self.decomposition_level < 0:
            raise SolverConfigError("decomposition level must be >= 0")
        # Rejects grids below the dealiasing rule before any stepping.
        dealiased_grid_size(self.filter.bandwidth, self.oversample, grid_size=self.grid_size)


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """Quantities of u_N recorded at the sample times.

    `l4_SNu` is ||S_N u(t)||_{L^4(T^d)}; `l4_spacetime` is the cumulative
    ||S_N u||_{L^4((0,t) x T^d)}. The w-norms are present only when the run
    carried a decomposition level or went through `nonlinear_component`.
    """

    times: np.ndarray
    energies: np.ndarray
    l4_SNu: np.ndarray
    l4_spacetime: np.ndarray
    initial: PhaseState
    final: PhaseState
    config: SolverConfig
    states: tuple[PhaseState, ...] | None = None
    h1_w: np.ndarray | None = None
    h_1m_eps_w: np.ndarray | None = None
    decomposition_level: float | None = None

    @property
    def lean(self) -> bool:
        return self.states is None

    def require_states(self) -> tuple[PhaseState, ...]:
        if self.states is None:
            raise TrajectoryError("trajectory was run in lean mode and holds no states")
        return self.states


def time_reversed(state: PhaseState) -> PhaseState:
    """(u, -ut); evolving it forward runs the original flow backward."""
    return PhaseState(state.u, -state.ut)


def decompose(base: PhaseState, state: PhaseState, M: float, t: float) -> PhaseState:
    """w(t) = u(t) - S(t) Pi^M base, with its time derivative."""
    high = base.map(lambda f: project_high(f, M)).resized(state.cutoff)
    return state - free_evolve(high, t)


class StrangStepper:
    """One half rotation, one cubic kick, one half rotation, on raw arrays.

    Modes outside the filtered box are only ever rotated, so they follow the
    free flow exactly. The working box is max(cutoff, K) with K the filter
    bandwidth: the cubic term feeds every filtered mode, even ones the data
    leaves at zero.
    """

    def __init__(
        self,
        dim: int,
        cutoff: int,
        spec: FilterSpec,
        oversample: int = DEFAULT_DEALIAS_OVERSAMPLE,
        grid_size: int | None = None,
    ) -> None:
        self.dim = dim
        self.op = CubicNonlinearity(dim, spec, oversample, grid_size)
        K = self.op.bandwidth
        cutoff = self.cutoff = max(cutoff, K)
        self._inner = (Ellipsis, *((slice(cutoff - K, cutoff + K + 1),) * dim))
        self._freq = np.sqrt(lattice(dim, cutoff).norm_sq)
        self._rotations: dict[float, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    def _rotation(self, h: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if h not in self._rotations:
            phase = h * self._freq
            safe = np.where(self._freq > 0, self._freq, 1.0)
            sin = np.sin(phase)
            self._rotations[h] = (
                np.cos(phase),
                np.where(self._freq > 0, sin / safe, h),
                self._freq * sin,
            )
        return self._rotations[h]

    def _rotate(self, y: list, h: float) -> None:
        cos, sinc, nsin = self._rotation(h)
        u_mean, u_b, u_c, v_mean, v_b, v_c = y
        y[0] = u_mean + h * v_mean
        y[1] = cos * u_b + sinc * v_b
        y[2] = cos * u_c + sinc * v_c
        y[4] = cos * v_b - nsin * u_b
        y[5] = cos * v_c - nsin * u_c

    def step(self, y: list, h: float) -> float:
        """Advances y = [u_mean, u_b, u_c, ut_mean, ut_b, ut_c] by h in place.

        Returns int (S_N u)^4 at the half step, the midpoint sample of the
        space-time L^4 integrand.
        """
        self._rotate(y, 0.5 * h)
        inner = self._inner
        mean, b, c, values = self.op.apply(y[0], y[1][inner], y[2][inner])
        y[3] = y[3] - h * mean
        y[4][inner] -= h * b
        y[5][inner] -= h * c
        quartic = self.op.quartic_integral(values)
        self._rotate(y, 0.5 * h)
        return quartic

    def quartic(self, y: list) -> float:
        inner = self._inner
        values = self.op.filtered_values(y[0], y[1][inner], y[2][inner])
        return self.op.quartic_integral(values)

    def advance(self, state: PhaseState, h: float, steps: int = 1) -> PhaseState:
        """`steps` steps of size h; h < 0 steps backward exactly in exact arithmetic.

        The result lives on the working box, padded past state.cutoff if needed.
        """
        if state.cutoff > self.cutoff:
            raise ValueError(
                f"state cutoff {state.cutoff} exceeds the working box {self.cutoff}"
            )
        y = _unpack(state.resized(self.cutoff))
        for _ in range(steps):
            self.step(y, h)
        return _pack(y, state.dim, self.cutoff)


def _unpack(state: PhaseState) -> list:
    u, ut = state.u, state.ut
    return [u.mean, u.b.copy(), u.c.copy(), ut.mean, ut.b.copy(), ut.c.copy()]


def _pack(y: list, dim: int, cutoff: int) -> PhaseState:
    return PhaseState(
        FourierField(dim, cutoff, float(y[0]), y[1], y[2]),
        FourierField(dim, cutoff, float(y[3]), y[4], y[5]),
    )


def _linear_energy(y: list, dim: int, cutoff: int) -> float:
    state = _pack(y, dim, cutoff)
    return 0.5 * (l2_squared(state.ut) + gradient_l2_squared(state.u))


def energy(
    state: PhaseState,
    filter: FilterSpec,
    oversample: int = DEFAULT_DEALIAS_OVERSAMPLE,
) -> float:
    """E_N = 1/2 (||ut||^2 + ||grad u||^2) + 1/4 int (S_N u)^4, quadrature exact."""
    op = CubicNonlinearity(state.dim, filter, oversample)
    g = state.u.resized(op.bandwidth)
    quartic = op.quartic_integral(op.filtered_values(g.mean, g.b, g.c))
    return 0.5 * (l2_squared(state.ut) + gradient_l2_squared(state.u)) + 0.25 * quartic


def _w_norms(w: PhaseState, epsilon: float) -> tuple[float, float]:
    return phase_norm(w, 1.0), sobolev_norm(w.u, 1.0 - epsilon)


def evolve(init: PhaseState, cfg: SolverConfig) -> TrajectoryRecord:
    """Integrates the filtered equation from `init` through cfg.t_end.

    Every interval between sample times is covered by equal substeps no
    longer than cfg.dt, so samples land on their times exactly. Recorded
    states, including `initial`, live on the stepper's working box.
    """
    dim = init.dim
    stepper = StrangStepper(dim, init.cutoff, cfg.filter, cfg.oversample, cfg.grid_size)
    L = stepper.cutoff
    init = init.resized(L)
    level = cfg.decomposition_level
    logger.debug(
        "Evolving d=%d L=%d N=%s dt=%s to t=%s on a %d-point grid",
        dim,
        L,
        cfg.filter.N,
        cfg.dt,
        cfg.t_end,
        stepper.op.grid_size,
    )

    stops = list(cfg.sample_times)
    if cfg.t_end - stops[-1] > TIME_SLACK:
        stops.append(cfg.t_end)
    recorded = set(range(len(cfg.sample_times)))

    y = _unpack(init)
    t = 0.0
    spacetime = 0.0
    energies: list[float] = []
    l4: list[float] = []
    l4_st: list[float] = []
    states: list[PhaseState] = []
    h1: list[float] = []
    h1m: list[float] = []

    for index, stop in enumerate(stops):
        span = stop - t
        if span > TIME_SLACK:
            steps = math.ceil(span / cfg.dt - 1e-9)
            h = span / steps
            for _ in range(steps):
                spacetime += h * stepper.step(y, h)
            t = stop
        if index not in recorded:
            continue

        quartic = stepper.quartic(y)
        energies.append(_linear_energy(y, dim, L) + 0.25 * quartic)
        l4.append(quartic**0.25)
        l4_st.append(spacetime**0.25)
        if not cfg.lean or level is not None:
            state = _pack(y, dim, L)
            if not cfg.lean:
                states.append(state)
            if level is not None:
                norms = _w_norms(decompose(init, state, level, stop), cfg.epsilon)
                h1.append(norms[0])
                h1m.append(norms[1])

    final = _pack(y, dim, L)
    return TrajectoryRecord(
        times=np.asarray(cfg.sample_times),
        energies=np.asarray(energies),
        l4_SNu=np.asarray(l4),
        l4_spacetime=np.asarray(l4_st),
        initial=init,
        final=final,
        config=cfg,
        states=None if cfg.lean else tuple(states),
        h1_w=np.asarray(h1) if level is not None else None,
        h_1m_eps_w=np.asarray(h1m) if level is not None else None,
        decomposition_level=level,
    )


def nonlinear_component(
    traj: TrajectoryRecord, base: PhaseState, M: float
) -> TrajectoryRecord:
    """The record with w-norms for u_N(t) = S(t) Pi^M base + w(t)."""
    states = traj.require_states()
    if base.dim != traj.initial.dim or base != traj.initial:
        raise TrajectoryError("base does not match the trajectory's initial data")
    h1 = []
    h1m = []
    for t, state in zip(traj.times, states):
        norms = _w_norms(decompose(base, state, M, float(t)), traj.config.epsilon)
        h1.append(norms[0])
        h1m.append(norms[1])
    return replace(
        traj,
        h1_w=np.asarray(h1),
        h_1m_eps_w=np.asarray(h1m),
        decomposition_level=M,
    )


def w_states(traj: TrajectoryRecord, M: float) -> list[PhaseState]:
    states = traj.require_states()
    return [
        decompose(traj.initial, state, M, float(t))
        for t, state in zip(traj.times, states)
    ]


def default_tau(dim: int) -> float:
    return max(dim / 4.0, 1.0)


def residual_untruncated(
    traj: TrajectoryRecord, tau: float | None = None
) -> list[float]:
    """||S_N((S_N u)^3) - u^3||_{H^-tau} at every sample time."""
    states = traj.require_states()
    if tau is None:
        tau = default_tau(traj.initial.dim)
    spec = traj.config.filter
    out = []
    for state in states:
        u = state.u
        full = cube(u, traj.config.oversample)
        filtered = cubic_term(u.resized(full.cutoff), spec, traj.config.oversample)
        out.append(sobolev_norm(filtered - full, -tau))
    return out


def mean_mode_reference(a0: float, a1: float, times: Sequence[float]) -> np.ndarray:
    """Adaptive high-order solution of a'' + a^3 = 0 at the given times."""
    times = np.asarray(times, dtype=np.float64)
    sol = integrate.solve_ivp(
        lambda _t, y: (y[1], -y[0] ** 3),
        (0.0, float(times.max(initial=0.0))),
        (a0, a1),
        method="DOP853",
        t_eval=times,
        rtol=ODE_TOLERANCE,
        atol=ODE_TOLERANCE,
    )
    if not sol.success:
        raise RuntimeError(f"reference integrator failed: {sol.message}")
    return sol.y[0]
