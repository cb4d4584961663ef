"""Base pairs in H^s x H^(s-1), randomized samples of them, and the
sub-Gaussian moment condition of the coefficient distributions."""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from app.services.spectral_core import FourierField, PhaseState, lattice

logger = logging.getLogger(__name__)

DEFAULT_ETA = 0.01
UNIFORM_HALF_WIDTH = math.sqrt(3.0)


class DistributionKind(str, Enum):
    GAUSSIAN = "gaussian"
    RADEMACHER = "rademacher"
    UNIFORM = "uniform"


# Smallest c with E exp(g X) <= exp(c g^2); the uniform one is Hoeffding's
# bound (2a)^2 / 8 for support [-a, a].
SUBGAUSSIAN_CONSTANTS = {
    DistributionKind.GAUSSIAN: 0.5,
    DistributionKind.RADEMACHER: 0.5,
    DistributionKind.UNIFORM: 1.5,
}


@dataclass(frozen=True)
class DistributionSpec:
    """Mean-zero, unit-variance law of every coefficient multiplier."""

    kind: DistributionKind
    subgaussian_c: float

    @classmethod
    def of(cls, kind: str | DistributionKind) -> "DistributionSpec":
        kind = DistributionKind(kind)
        return cls(kind, SUBGAUSSIAN_CONSTANTS[kind])

    def draw(self, rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
        if self.kind is DistributionKind.GAUSSIAN:
            return rng.standard_normal(shape)
        if self.kind is DistributionKind.RADEMACHER:
            return 2.0 * rng.integers(0, 2, size=shape) - 1.0
        return rng.uniform(-UNIFORM_HALF_WIDTH, UNIFORM_HALF_WIDTH, size=shape)

    def log_mgf(self, gamma: np.ndarray) -> np.ndarray:
        """log E exp(gamma X) in closed form."""
        g = np.asarray(gamma, dtype=np.float64)
        if self.kind is DistributionKind.GAUSSIAN:
            return 0.5 * g**2
        if self.kind is DistributionKind.RADEMACHER:
            return np.logaddexp(g, -g) - math.log(2.0)
        # sinh(x) / x with x = a|gamma|, written to stay finite for large x
        x = UNIFORM_HALF_WIDTH * np.abs(g)
        safe = np.where(x > 0, x, 1.0)
        big = safe + np.log1p(-np.exp(-2.0 * safe)) - math.log(2.0) - np.log(safe)
        return np.where(x > 0, big, 0.0)


@dataclass(frozen=True)
class EnsembleSpec:
    """A randomized data law: the base pair, the multiplier law and a seed."""

    base: PhaseState
    dist: DistributionSpec
    master_seed: int


@dataclass(frozen=True)
class SubgaussianReport:
    kind: DistributionKind
    subgaussian_c: float
    gammas: tuple[float, ...]
    log_mgf: tuple[float, ...]
    log_bound: tuple[float, ...]
    violations: tuple[float, ...] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return not self.violations


def _bracket_powers(dim: int, cutoff: int, exponent: float) -> np.ndarray:
    lat = lattice(dim, cutoff)
    return np.where(lat.canonical, (1.0 + lat.norm_sq) ** (-0.5 * exponent), 0.0)


def make_base_pair(
    s: float,
    d: int,
    eta: float = DEFAULT_ETA,
    L: int = 16,
    amplitude: float = 1.0,
) -> PhaseState:
    """(u0, u1) with b_n = A <n>^-(s + d/2 + eta) and A <n>^-(s - 1 + d/2 + eta).

    Both means are A. The infinite-L pair lies in H^sigma exactly for
    sigma < s + eta.
    """
    if not 0 < s < 1:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    if d < 3:
        raise ValueError(f"dimension must be >= 3, got {d}")
    if eta <= 0:
        raise ValueError(f"eta must be positive, got {eta}")
    if not amplitude > 0:
        raise ValueError(f"amplitude must be positive, got {amplitude}")

    shape = lattice(d, L).shape
    zero = np.zeros(shape)
    A = float(amplitude)
    u0 = FourierField(d, L, A, A * _bracket_powers(d, L, s + d / 2 + eta), zero)
    u1 = FourierField(d, L, A, A * _bracket_powers(d, L, s - 1 + d / 2 + eta), zero)
    return PhaseState(u0, u1)


def sample_generator(master_seed: int, k: int, j: int) -> np.random.Generator:
    """Generator for component j of sample k, independent of draw order."""
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(k, j))
    return np.random.default_rng(seq)


def _randomize(
    f: FourierField, dist: DistributionSpec, rng: np.random.Generator
) -> FourierField:
    alpha = dist.draw(rng, ())
    beta = dist.draw(rng, f.b.shape)
    gamma = dist.draw(rng, f.c.shape)
    return FourierField(f.dim, f.cutoff, float(alpha) * f.mean, beta * f.b, gamma * f.c)


def sample_pair(spec: EnsembleSpec, k: int) -> PhaseState:
    """The k-th draw (u0^omega, u1^omega); a pure function of (seed, k)."""
    u = _randomize(spec.base.u, spec.dist, sample_generator(spec.master_seed, k, 0))
    ut = _randomize(spec.base.ut, spec.dist, sample_generator(spec.master_seed, k, 1))
    return PhaseState(u, ut)


def subgaussian_check(
    dist: DistributionSpec, gamma_grid: Sequence[float]
) -> SubgaussianReport:
    """Checks E exp(gamma X) <= exp(c gamma^2) on the grid, in log space."""
    gammas = np.asarray(gamma_grid, dtype=np.float64)
    lhs = dist.log_mgf(gammas)
    rhs = dist.subgaussian_c * gammas**2
    slack = 1e-12 * np.maximum(1.0, np.abs(rhs))
    bad = gammas[lhs > rhs + slack]
    if bad.size:
        logger.warning(
            "Sub-Gaussian bound fails for %s with c=%s at gamma=%s",
            dist.kind.value,
            dist.subgaussian_c,
            bad.tolist(),
        )
    return SubgaussianReport(
        kind=dist.kind,
        subgaussian_c=dist.subgaussian_c,
        gammas=tuple(gammas.tolist()),
        log_mgf=tuple(lhs.tolist()),
        log_bound=tuple(rhs.tolist()),
        violations=tuple(bad.tolist()),
    )
