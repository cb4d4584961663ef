"""The free wave group on phase space and weighted space-time norms of it."""

import logging
import math
from collections.abc import Iterator
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from app.services.spectral_core import (
    DEFAULT_NORM_OVERSAMPLE,
    FourierField,
    PhaseState,
    lattice,
    lp_from_values,
    norm_grid_size,
    project_high,
    synthesize,
)

logger = logging.getLogger(__name__)

TIME_NORMS = (2.0, 3.0, math.inf)
SPACE_NORMS = (math.inf, 6.0, 4.0, 3.0, 2.0)
# Smallest admissible weight exponent per time norm (strict inequality).
WEIGHT_THRESHOLDS = {2.0: 0.5, 3.0: 1.0 / 3.0, math.inf: 0.0}
# Time nodes synthesized together; bounds memory at large grids.
TIME_CHUNK = 32


class MixedNormSpecError(ValueError):
    """Weight exponent, time norm or space norm outside the admissible set."""


def bracket(t: np.ndarray | float) -> np.ndarray:
    """<t> = (1 + t^2)^(1/2)."""
    return np.sqrt(1.0 + np.square(t))


@dataclass(frozen=True)
class MixedNormSpec:
    """The norm ||<t>^-exponent f(t)||_{L^q_t L^p_x} of the free flow."""

    weight_exponent: float
    time_norm: float
    space_norm: float
    t_max: float = 200.0
    dt_quad: float = 0.05
    oversample: int = DEFAULT_NORM_OVERSAMPLE

    def __post_init__(self) -> None:
        q = float(self.time_norm)
        p = float(self.space_norm)
        if q not in TIME_NORMS:
            raise MixedNormSpecError(f"time norm must be one of 2, 3, inf, got {q}")
        if p not in SPACE_NORMS:
            raise MixedNormSpecError(f"space norm must be one of inf, 6, 4, got {p}")
        threshold = WEIGHT_THRESHOLDS[q]
        if not self.weight_exponent > threshold:
            raise MixedNormSpecError(
                f"weight exponent {self.weight_exponent} must exceed {threshold:.6g} "
                f"for time norm q={q}"
            )
        if self.t_max <= 0 or self.dt_quad <= 0:
            raise MixedNormSpecError("t_max and dt_quad must be positive")
        if self.dt_quad > self.t_max:
            raise MixedNormSpecError("dt_quad must not exceed t_max")

    @property
    def q(self) -> float:
        return float(self.time_norm)

    @property
    def p(self) -> float:
        return float(self.space_norm)

    def time_grid(self) -> np.ndarray:
        """Uniform nodes on [-t_max, t_max]; t_max is always a node."""
        steps = max(math.ceil(self.t_max / self.dt_quad - 1e-9), 1)
        return np.linspace(-self.t_max, self.t_max, 2 * steps + 1)

    def weight(self, t: np.ndarray | float) -> np.ndarray:
        return bracket(t) ** (-self.weight_exponent)

    def tail_weight(self) -> float:
        """The weight's L^q norm over |t| > t_max."""
        if math.isinf(self.q):
            return float(self.weight(self.t_max))
        power = self.q * self.weight_exponent
        one_side, _ = integrate.quad(
            lambda t: (1.0 + t * t) ** (-0.5 * power), self.t_max, math.inf
        )
        return (2.0 * one_side) ** (1.0 / self.q)


def _frequencies(dim: int, cutoff: int) -> np.ndarray:
    return np.sqrt(lattice(dim, cutoff).norm_sq)


def _rotation(
    freq: np.ndarray, t: np.ndarray | float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """cos(t|n|), sin(t|n|)/|n| and |n| sin(t|n|); the first two have limits 1 and t at n = 0."""
    t = np.asarray(t, dtype=np.float64)
    t = t.reshape(t.shape + (1,) * freq.ndim)
    phase = t * freq
    cos = np.cos(phase)
    sin = np.sin(phase)
    safe = np.where(freq > 0, freq, 1.0)
    sinc = np.where(freq > 0, sin / safe, t)
    return cos, sinc, freq * sin


def free_evolve(state: PhaseState, t: float) -> PhaseState:
    """S(t)(u, ut): each mode rotates at frequency |n|, the mean drifts linearly."""
    dim, L = state.dim, state.cutoff
    cos, sinc, nsin = _rotation(_frequencies(dim, L), t)
    u, ut = state.u, state.ut
    new_u = FourierField(
        dim,
        L,
        u.mean + t * ut.mean,
        cos * u.b + sinc * ut.b,
        cos * u.c + sinc * ut.c,
    )
    new_ut = FourierField(
        dim,
        L,
        ut.mean,
        cos * ut.b - nsin * u.b,
        cos * ut.c - nsin * u.c,
    )
    return PhaseState(new_u, new_ut)


def free_displacement(
    state: PhaseState, times: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(mean, b, c) of the u-component of S(t) state for a batch of times."""
    times = np.asarray(times, dtype=np.float64)
    cos, sinc, _ = _rotation(_frequencies(state.dim, state.cutoff), times)
    u, ut = state.u, state.ut
    mean = u.mean + times * ut.mean
    return mean, cos * u.b + sinc * ut.b, cos * u.c + sinc * ut.c


def _chunks(times: np.ndarray, size: int) -> Iterator[np.ndarray]:
    for start in range(0, times.size, size):
        yield times[start : start + size]


def space_norm_profile(
    state: PhaseState, M: float, spec: MixedNormSpec
) -> tuple[np.ndarray, np.ndarray]:
    """Time nodes and ||S(t) Pi^M state||_{L^p_x} at each of them."""
    times = spec.time_grid()
    high = state.map(lambda f: project_high(f, M))
    K = max(high.u.bandwidth, high.ut.bandwidth)
    if K == 0:
        return times, np.zeros_like(times)

    high = high.resized(K)
    G = norm_grid_size(K, spec.oversample)
    norms = np.empty_like(times)
    offset = 0
    for chunk in _chunks(times, TIME_CHUNK):
        mean, b, c = free_displacement(high, chunk)
        values = synthesize(mean, b, c, state.dim, K, G)
        norms[offset : offset + chunk.size] = lp_from_values(values, spec.p, state.dim)
        offset += chunk.size
    return times, norms


def weighted_mixed_norm(
    state: PhaseState, M: float, spec: MixedNormSpec
) -> tuple[float, float]:
    """(value, tail_bound) of ||<t>^-exponent S(t) Pi^M state||_{L^q_t L^p_x}.

    The value is the trapezoid rule over [-t_max, t_max] (the grid maximum
    for q = inf); tail_bound dominates the contribution of |t| > t_max.
    """
    times, norms = space_norm_profile(state, M, spec)
    sup_norm = float(norms.max(initial=0.0))
    if sup_norm == 0.0:
        return 0.0, 0.0

    weighted = spec.weight(times) * norms
    if math.isinf(spec.q):
        value = float(weighted.max())
    else:
        value = float(integrate.trapezoid(weighted**spec.q, times)) ** (1.0 / spec.q)
    tail = sup_norm * spec.tail_weight()
    logger.debug(
        "Mixed norm q=%s p=%s M=%s: value=%.6g tail=%.3g",
        spec.q,
        spec.p,
        M,
        value,
        tail,
    )
    return value, tail
