"""Real Fourier fields on the torus (R/2piZ)^d: norms, projectors, the smooth
filter S_N, grid transforms and the exactly dealiased cubic term.

Coefficients are stored densely over the box |n|_inf <= L, indexed by n + L
along every axis. Only canonical indices (first nonzero component positive)
carry a (b_n, c_n) pair; every other slot, the centre included, is held at
zero and the constant term lives in `mean`. Integrals use the physical
measure on the torus, without a 1/(2pi)^d normalisation.
"""

import logging
import math
from collections.abc import Callable, Iterator, Mapping, Sequence
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft

logger = logging.getLogger(__name__)

SUPPORTED_P = (2.0, 3.0, 4.0, 6.0, math.inf)

# Four points per retained wavelength make p in {2, 4, 6} quadratures exact.
DEFAULT_NORM_OVERSAMPLE = 4
# 2 * (2K + 1) = 4K + 2 already clears the 4K + 1 dealiasing threshold.
DEFAULT_DEALIAS_OVERSAMPLE = 2


class GridTooSmallError(ValueError):
    """A physical grid cannot represent the requested bandwidth."""


class UnsupportedNormError(ValueError):
    """Lebesgue exponent outside the supported set."""


@dataclass(frozen=True)
class LatticeIndex:
    n: tuple[int, ...]

    @property
    def canonical(self) -> bool:
        for component in self.n:
            if component != 0:
                return component > 0
        return False

    @property
    def norm(self) -> float:
        return math.sqrt(sum(k * k for k in self.n))

    @property
    def bracket(self) -> float:
        """<n> = (1 + |n|^2)^(1/2)."""
        return math.sqrt(1 + sum(k * k for k in self.n))


def canonical_index(n: Sequence[int]) -> tuple[LatticeIndex, int]:
    """Representative of {n, -n} with first nonzero component positive.

    The sign is -1 when n had to be flipped, which is the factor the sine
    coefficient picks up (sin(-n.x) = -sin(n.x)).
    """
    vec = tuple(int(k) for k in n)
    for component in vec:
        if component > 0:
            return LatticeIndex(vec), 1
        if component < 0:
            return LatticeIndex(tuple(-k for k in vec)), -1
    raise ValueError("the zero vector has no canonical representative")


@dataclass(frozen=True, eq=False)
class Lattice:
    """Index arrays for the box |n|_inf <= cutoff in `dim` dimensions."""

    dim: int
    cutoff: int
    components: np.ndarray
    norm_sq: np.ndarray
    canonical: np.ndarray

    @property
    def shape(self) -> tuple[int, ...]:
        return (2 * self.cutoff + 1,) * self.dim

    @property
    def centre(self) -> tuple[int, ...]:
        return (self.cutoff,) * self.dim


@lru_cache(maxsize=64)
def lattice(dim: int, cutoff: int) -> Lattice:
    if dim < 1:
        raise ValueError(f"dimension must be >= 1, got {dim}")
    if cutoff < 0:
        raise ValueError(f"cutoff must be >= 0, got {cutoff}")

    axis = np.arange(-cutoff, cutoff + 1)
    components = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"))
    norm_sq = np.sum(components**2, axis=0)

    canonical = np.zeros(norm_sq.shape, dtype=bool)
    undecided = np.ones(norm_sq.shape, dtype=bool)
    for k in range(dim):
        canonical |= undecided & (components[k] > 0)
        undecided &= components[k] == 0

    for arr in (components, norm_sq, canonical):
        arr.flags.writeable = False
    return Lattice(dim, cutoff, components, norm_sq, canonical)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def _resize_box(arr: np.ndarray, dim: int, old: int, new: int) -> np.ndarray:
    """Pad with zeros or truncate the trailing `dim` box axes."""
    if new == old:
        return arr
    batch = arr.shape[: arr.ndim - dim]
    if new < old:
        cut = (slice(old - new, old + new + 1),) * dim
        return arr[(Ellipsis, *cut)].copy()
    out = np.zeros(batch + (2 * new + 1,) * dim, dtype=arr.dtype)
    inner = (slice(new - old, new + old + 1),) * dim
    out[(Ellipsis, *inner)] = arr
    return out


@dataclass(frozen=True, eq=False)
class FourierField:
    """u(x) = mean + sum over canonical n of b_n cos(n.x) + c_n sin(n.x)."""

    dim: int
    cutoff: int
    mean: float
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self) -> None:
        lat = lattice(self.dim, self.cutoff)
        b = np.asarray(self.b, dtype=np.float64)
        c = np.asarray(self.c, dtype=np.float64)
        if b.shape != lat.shape or c.shape != lat.shape:
            raise ValueError(
                f"coefficient arrays must have shape {lat.shape}, "
                f"got {b.shape} and {c.shape}"
            )
        object.__setattr__(self, "mean", float(self.mean))
        object.__setattr__(self, "b", _frozen(np.where(lat.canonical, b, 0.0)))
        object.__setattr__(self, "c", _frozen(np.where(lat.canonical, c, 0.0)))

    @classmethod
    def zeros(cls, dim: int, cutoff: int) -> "FourierField":
        shape = lattice(dim, cutoff).shape
        return cls(dim, cutoff, 0.0, np.zeros(shape), np.zeros(shape))

    @classmethod
    def constant(cls, dim: int, value: float, cutoff: int = 0) -> "FourierField":
        shape = lattice(dim, cutoff).shape
        return cls(dim, cutoff, value, np.zeros(shape), np.zeros(shape))

    @classmethod
    def from_modes(
        cls,
        dim: int,
        cutoff: int,
        modes: Mapping[tuple[int, ...], tuple[float, float]],
        mean: float = 0.0,
    ) -> "FourierField":
        """Build a field from {n: (b_n, c_n)}; non-canonical n are folded."""
        shape = lattice(dim, cutoff).shape
        b = np.zeros(shape)
        c = np.zeros(shape)
        for n, (bn, cn) in modes.items():
            if len(n) != dim:
                raise ValueError(f"index {n} does not have {dim} components")
            if max(abs(k) for k in n) > cutoff:
                raise ValueError(f"index {n} lies outside the box of cutoff {cutoff}")
            idx, sign = canonical_index(n)
            pos = tuple(k + cutoff for k in idx.n)
            b[pos] += bn
            c[pos] += sign * cn
        return cls(dim, cutoff, mean, b, c)

    @property
    def bandwidth(self) -> int:
        """Largest |n_i| carrying a nonzero coefficient (0 for constants)."""
        active = (self.b != 0) | (self.c != 0)
        if not active.any():
            return 0
        comps = lattice(self.dim, self.cutoff).components
        return int(np.abs(comps[:, active]).max())

    def coefficient(self, n: Sequence[int]) -> tuple[float, float]:
        """(b, c) of cos(n.x), sin(n.x) exactly as written, for any nonzero n."""
        idx, sign = canonical_index(n)
        if max(abs(k) for k in idx.n) > self.cutoff:
            return 0.0, 0.0
        pos = tuple(k + self.cutoff for k in idx.n)
        return float(self.b[pos]), float(sign * self.c[pos])

    def modes(self) -> Iterator[tuple[tuple[int, ...], float, float]]:
        """Canonical (n, b_n, c_n) in lexicographic index order."""
        lat = lattice(self.dim, self.cutoff)
        for pos in np.argwhere(lat.canonical):
            key = tuple(int(p) for p in pos)
            yield (
                tuple(p - self.cutoff for p in key),
                float(self.b[key]),
                float(self.c[key]),
            )

    def resized(self, cutoff: int) -> "FourierField":
        if cutoff == self.cutoff:
            return self
        return FourierField(
            self.dim,
            cutoff,
            self.mean,
            _resize_box(self.b, self.dim, self.cutoff, cutoff),
            _resize_box(self.c, self.dim, self.cutoff, cutoff),
        )

    def scaled(self, factor: float) -> "FourierField":
        return FourierField(
            self.dim, self.cutoff, factor * self.mean, factor * self.b, factor * self.c
        )

    def _aligned(self, other: "FourierField") -> tuple["FourierField", "FourierField"]:
        if self.dim != other.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
        cutoff = max(self.cutoff, other.cutoff)
        return self.resized(cutoff), other.resized(cutoff)

    def __add__(self, other: "FourierField") -> "FourierField":
        f, g = self._aligned(other)
        return FourierField(f.dim, f.cutoff, f.mean + g.mean, f.b + g.b, f.c + g.c)

    def __sub__(self, other: "FourierField") -> "FourierField":
        f, g = self._aligned(other)
        return FourierField(f.dim, f.cutoff, f.mean - g.mean, f.b - g.b, f.c - g.c)

    def __neg__(self) -> "FourierField":
        return self.scaled(-1.0)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FourierField) or other.dim != self.dim:
            return NotImplemented
        f, g = self._aligned(other)
        return (
            f.mean == g.mean
            and np.array_equal(f.b, g.b)
            and np.array_equal(f.c, g.c)
        )

    __hash__ = None  # type: ignore[assignment]


def max_coefficient_difference(f: FourierField, g: FourierField) -> float:
    diff = f - g
    return float(max(abs(diff.mean), np.abs(diff.b).max(), np.abs(diff.c).max()))


@dataclass(frozen=True, eq=False)
class PhaseState:
    """A point (u, d_t u) of the wave flow's phase space."""

    u: FourierField
    ut: FourierField

    def __post_init__(self) -> None:
        if self.u.dim != self.ut.dim:
            raise ValueError(
                f"u and ut dimensions differ: {self.u.dim} vs {self.ut.dim}"
            )
        if self.u.cutoff != self.ut.cutoff:
            raise ValueError(
                f"u and ut cutoffs differ: {self.u.cutoff} vs {self.ut.cutoff}"
            )

    @classmethod
    def zeros(cls, dim: int, cutoff: int) -> "PhaseState":
        return cls(FourierField.zeros(dim, cutoff), FourierField.zeros(dim, cutoff))

    @property
    def dim(self) -> int:
        return self.u.dim

    @property
    def cutoff(self) -> int:
        return self.u.cutoff

    def map(self, func: Callable[[FourierField], FourierField]) -> "PhaseState":
        return PhaseState(func(self.u), func(self.ut))

    def resized(self, cutoff: int) -> "PhaseState":
        return self.map(lambda f: f.resized(cutoff))

    def scaled(self, factor: float) -> "PhaseState":
        return self.map(lambda f: f.scaled(factor))

    def __add__(self, other: "PhaseState") -> "PhaseState":
        return PhaseState(self.u + other.u, self.ut + other.ut)

    def __sub__(self, other: "PhaseState") -> "PhaseState":
        return PhaseState(self.u - other.u, self.ut - other.ut)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PhaseState):
            return NotImplemented
        return self.u == other.u and self.ut == other.ut

    __hash__ = None  # type: ignore[assignment]


def max_state_difference(a: PhaseState, b: PhaseState) -> float:
    return max(
        max_coefficient_difference(a.u, b.u), max_coefficient_difference(a.ut, b.ut)
    )


@dataclass(frozen=True, eq=False)
class PhysicalGrid:
    """Field values at the nodes x_k = 2 pi k / G of a uniform grid."""

    dim: int
    points_per_dim: int
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        expected = (self.points_per_dim,) * self.dim
        if values.shape != expected:
            raise ValueError(f"grid values must have shape {expected}, got {values.shape}")
        object.__setattr__(self, "values", _frozen(values))

    @property
    def cell_volume(self) -> float:
        return (2 * math.pi / self.points_per_dim) ** self.dim

    def integral(self) -> float:
        """Trapezoidal quadrature, exact for trig polynomials below G per mode."""
        return self.cell_volume * float(self.values.sum())


# -- the smooth filter ------------------------------------------------------


def _h(t: np.ndarray) -> np.ndarray:
    positive = t > 0
    safe = np.where(positive, t, 1.0)
    return np.where(positive, np.exp(-1.0 / safe), 0.0)


def transition(t: np.ndarray | float) -> np.ndarray:
    """psi: 1 for t <= 0, 0 for t >= 1, smooth and decreasing in between."""
    t = np.asarray(t, dtype=np.float64)
    rising = _h(1.0 - t)
    return rising / (_h(t) + rising)


def chi(r: np.ndarray | float) -> np.ndarray:
    """The bump profile: 1 on |r| <= 1/2, 0 on |r| >= 1."""
    return transition(2.0 * np.abs(np.asarray(r, dtype=np.float64)) - 1.0)


@dataclass(frozen=True)
class FilterSpec:
    """S_N, the Fourier multiplier chi(|n|^2 / N^2)."""

    N: float

    def __post_init__(self) -> None:
        if not self.N > 0:
            raise ValueError(f"filter cutoff N must be positive, got {self.N}")

    def multiplier(self, norm_sq: np.ndarray) -> np.ndarray:
        return chi(np.asarray(norm_sq, dtype=np.float64) / (self.N * self.N))

    @property
    def bandwidth(self) -> int:
        """Largest |n_i| with a nonzero multiplier (chi vanishes from |n| = N)."""
        return max(math.ceil(self.N) - 1, 0)

    @property
    def identity_radius(self) -> float:
        """Modes with |n| <= N / sqrt(2) pass through unchanged."""
        return self.N / math.sqrt(2.0)


# -- norms -----------------------------------------------------------------


def _torus_volume(dim: int) -> float:
    return (2 * math.pi) ** dim


def sobolev_norm(f: FourierField, sigma: float) -> float:
    """H^sigma norm with physical measure: vol a^2 + vol/2 sum <n>^2s (b^2 + c^2)."""
    lat = lattice(f.dim, f.cutoff)
    vol = _torus_volume(f.dim)
    weights = (1.0 + lat.norm_sq) ** sigma
    total = vol * f.mean**2 + 0.5 * vol * float(np.sum(weights * (f.b**2 + f.c**2)))
    return math.sqrt(total)


def phase_norm(state: PhaseState, sigma: float) -> float:
    """Norm on H^sigma x H^(sigma - 1)."""
    return math.hypot(sobolev_norm(state.u, sigma), sobolev_norm(state.ut, sigma - 1.0))


def gradient_l2_squared(f: FourierField) -> float:
    lat = lattice(f.dim, f.cutoff)
    vol = _torus_volume(f.dim)
    return 0.5 * vol * float(np.sum(lat.norm_sq * (f.b**2 + f.c**2)))


def l2_squared(f: FourierField) -> float:
    return sobolev_norm(f, 0.0) ** 2


def _check_p(p: float) -> float:
    p = float(p)
    if p not in SUPPORTED_P:
        raise UnsupportedNormError(
            f"L^p norm supported for p in {{2, 3, 4, 6, inf}}, got {p}"
        )
    return p


def lp_from_values(values: np.ndarray, p: float, dim: int) -> np.ndarray:
    """L^p norm of grid samples over the trailing `dim` axes.

    p = inf is the grid maximum, a lower bound for the true supremum.
    """
    p = _check_p(p)
    axes = tuple(range(-dim, 0))
    magnitude = np.abs(values)
    if math.isinf(p):
        return magnitude.max(axis=axes)
    cell = (2 * math.pi / values.shape[-1]) ** dim
    return (cell * np.sum(magnitude**p, axis=axes)) ** (1.0 / p)


def norm_grid_size(bandwidth: int, oversample: int) -> int:
    if oversample < 1:
        raise ValueError(f"oversample must be >= 1, got {oversample}")
    return fft.next_fast_len(oversample * (2 * bandwidth + 1), real=True)


def lp_norm(
    f: FourierField, p: float, oversample: int = DEFAULT_NORM_OVERSAMPLE
) -> float:
    p = _check_p(p)
    K = f.bandwidth
    G = norm_grid_size(K, oversample)
    g = f.resized(K)
    values = synthesize(g.mean, g.b, g.c, f.dim, K, G)
    return float(lp_from_values(values, p, f.dim))


# -- projectors and the filter ----------------------------------------------


def _low_mask(f: FourierField, M: float) -> np.ndarray:
    if M < 0:
        raise ValueError(f"projection level must be >= 0, got {M}")
    return lattice(f.dim, f.cutoff).norm_sq <= M * M


def project_low(f: FourierField, M: float) -> FourierField:
    """Pi_M: the mean and the modes with Euclidean |n| <= M."""
    keep = _low_mask(f, M)
    return FourierField(f.dim, f.cutoff, f.mean, f.b * keep, f.c * keep)


def project_high(f: FourierField, M: float) -> FourierField:
    """Pi^M = 1 - Pi_M: the modes with |n| > M, mean removed."""
    drop = ~_low_mask(f, M)
    return FourierField(f.dim, f.cutoff, 0.0, f.b * drop, f.c * drop)


def smooth_filter(f: FourierField, spec: FilterSpec) -> FourierField:
    mult = spec.multiplier(lattice(f.dim, f.cutoff).norm_sq)
    return FourierField(f.dim, f.cutoff, f.mean, f.b * mult, f.c * mult)


def translate(f: FourierField, shift: Sequence[float]) -> FourierField:
    """The field x -> f(x + shift)."""
    lat = lattice(f.dim, f.cutoff)
    phase = np.tensordot(np.asarray(shift, dtype=np.float64), lat.components, axes=1)
    cos, sin = np.cos(phase), np.sin(phase)
    return FourierField(
        f.dim, f.cutoff, f.mean, f.b * cos + f.c * sin, f.c * cos - f.b * sin
    )


# -- transforms --------------------------------------------------------------


def _box_axes(dim: int) -> tuple[int, ...]:
    return tuple(range(-dim, 0))


def _complex_box(
    mean: np.ndarray | float, b: np.ndarray, c: np.ndarray, dim: int, cutoff: int
) -> np.ndarray:
    """Hermitian exponential coefficients z_n, with z_n = (b_n - i c_n) / 2."""
    half = 0.5 * (b - 1j * c)
    z = half + np.conj(np.flip(half, axis=_box_axes(dim)))
    z[(Ellipsis, *((cutoff,) * dim))] += mean
    return z


def _grid_index(dim: int, cutoff: int, G: int) -> tuple[np.ndarray, ...]:
    wrapped = np.arange(-cutoff, cutoff + 1) % G
    return np.ix_(*([wrapped] * (dim - 1)), np.arange(cutoff + 1))


def synthesize(
    mean: np.ndarray | float,
    b: np.ndarray,
    c: np.ndarray,
    dim: int,
    cutoff: int,
    G: int,
) -> np.ndarray:
    """Grid values from coefficient arrays; leading batch axes are allowed."""
    if G < 2 * cutoff + 1:
        raise GridTooSmallError(
            f"grid of {G} points cannot hold modes up to |n_i| = {cutoff}"
        )
    z = _complex_box(mean, b, c, dim, cutoff)
    batch = z.shape[: z.ndim - dim]
    spectrum = np.zeros(batch + (G,) * (dim - 1) + (G // 2 + 1,), dtype=np.complex128)
    spectrum[(Ellipsis, *_grid_index(dim, cutoff, G))] = z[..., cutoff:]
    return fft.irfftn(spectrum, s=(G,) * dim, axes=_box_axes(dim), norm="forward")


def analyze(
    values: np.ndarray, dim: int, cutoff: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(mean, b, c) of grid values, truncated to the box of `cutoff`."""
    G = values.shape[-1]
    if G < 2 * cutoff + 1:
        raise GridTooSmallError(
            f"grid of {G} points cannot resolve modes up to |n_i| = {cutoff}"
        )
    spectrum = fft.rfftn(values, axes=_box_axes(dim), norm="forward")
    half = spectrum[(Ellipsis, *_grid_index(dim, cutoff, G))]
    batch = half.shape[: half.ndim - dim]
    z = np.zeros(batch + (2 * cutoff + 1,) * dim, dtype=np.complex128)
    z[..., cutoff:] = half
    z[..., :cutoff] = np.conj(np.flip(z, axis=_box_axes(dim)))[..., :cutoff]

    canonical = lattice(dim, cutoff).canonical
    b = np.where(canonical, 2.0 * z.real, 0.0)
    c = np.where(canonical, -2.0 * z.imag, 0.0)
    mean = z[(Ellipsis, *((cutoff,) * dim))].real
    return mean, b, c


def to_physical(f: FourierField, G: int) -> PhysicalGrid:
    K = f.bandwidth
    if G < 2 * K + 1:
        raise GridTooSmallError(
            f"grid of {G} points is below the bandwidth 2*{K}+1 of the field"
        )
    g = f.resized(K)
    return PhysicalGrid(f.dim, G, synthesize(g.mean, g.b, g.c, f.dim, K, G))


def from_physical(grid: PhysicalGrid, cutoff: int) -> FourierField:
    mean, b, c = analyze(grid.values, grid.dim, cutoff)
    return FourierField(grid.dim, cutoff, float(mean), b, c)


# -- the cubic term ----------------------------------------------------------


def dealiased_grid_size(
    bandwidth: int,
    oversample: int = DEFAULT_DEALIAS_OVERSAMPLE,
    *,
    order: int = 3,
    retained: int | None = None,
    grid_size: int | None = None,
) -> int:
    """Points per dimension for an exact degree-`order` product.

    Products of fields bandlimited to K reach order * K; their coefficients up
    to `retained` (default K) are alias-free once G >= order * K + retained + 1.
    For order 3 and retained K this is also the threshold for exact
    quadrature of a fourth power.
    """
    if retained is None:
        retained = bandwidth
    minimum = order * bandwidth + retained + 1
    if oversample < 1:
        raise ValueError(f"oversample must be >= 1, got {oversample}")
    target = oversample * (2 * bandwidth + 1)
    if target < minimum:
        raise GridTooSmallError(
            f"oversample {oversample} gives {target} points per dimension, "
            f"the dealiasing rule needs at least {minimum} for bandwidth {bandwidth}"
        )
    if grid_size is not None:
        if grid_size < minimum:
            raise GridTooSmallError(
                f"grid of {grid_size} points is below the dealiasing minimum {minimum}"
            )
        target = max(target, grid_size)
    return fft.next_fast_len(target, real=True)


class CubicNonlinearity:
    """S_N((S_N u)^3) on coefficient arrays of the filtered box.

    Modes with |n_i| > K (K the filter bandwidth) have chi = 0, so the input
    is cut to that box before transforming and the output lives on it too.
    """

    def __init__(
        self,
        dim: int,
        spec: FilterSpec,
        oversample: int = DEFAULT_DEALIAS_OVERSAMPLE,
        grid_size: int | None = None,
    ) -> None:
        self.dim = dim
        self.spec = spec
        self.bandwidth = spec.bandwidth
        self.grid_size = dealiased_grid_size(
            self.bandwidth, oversample, grid_size=grid_size
        )
        self._multiplier = spec.multiplier(lattice(dim, self.bandwidth).norm_sq)

    def filtered_values(
        self, mean: float, b: np.ndarray, c: np.ndarray
    ) -> np.ndarray:
        """Grid values of S_N f from arrays already cut to the filtered box."""
        return synthesize(
            mean,
            b * self._multiplier,
            c * self._multiplier,
            self.dim,
            self.bandwidth,
            self.grid_size,
        )

    def apply(
        self, mean: float, b: np.ndarray, c: np.ndarray
    ) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
        """Returns (mean, b, c) of the cubic term plus the S_N f grid values."""
        values = self.filtered_values(mean, b, c)
        cube_mean, cube_b, cube_c = analyze(values * values * values, self.dim, self.bandwidth)
        return (
            float(cube_mean),
            cube_b * self._multiplier,
            cube_c * self._multiplier,
            values,
        )

    def quartic_integral(self, values: np.ndarray) -> float:
        """int (S_N f)^4 from the grid values returned by `apply`."""
        cell = (2 * math.pi / self.grid_size) ** self.dim
        return cell * float(np.sum(np.square(np.square(values))))


def cubic_term(
    f: FourierField,
    spec: FilterSpec,
    oversample: int = DEFAULT_DEALIAS_OVERSAMPLE,
    grid_size: int | None = None,
) -> FourierField:
    """S_N((S_N f)^3), alias-free on every retained mode.

    The result carries the whole filtered band, so its cutoff is
    max(f.cutoff, K) with K the filter bandwidth.
    """
    op = CubicNonlinearity(f.dim, spec, oversample, grid_size)
    g = f.resized(op.bandwidth)
    mean, b, c, _ = op.apply(g.mean, g.b, g.c)
    return FourierField(f.dim, op.bandwidth, mean, b, c).resized(
        max(f.cutoff, op.bandwidth)
    )


def cube(f: FourierField, oversample: int = DEFAULT_DEALIAS_OVERSAMPLE) -> FourierField:
    """The unfiltered f^3, complete up to cutoff 3L."""
    L = f.cutoff
    G = dealiased_grid_size(L, max(oversample, 3), retained=3 * L)
    values = synthesize(f.mean, f.b, f.c, f.dim, L, G)
    mean, b, c = analyze(values * values * values, f.dim, 3 * L)
    return FourierField(f.dim, 3 * L, float(mean), b, c)
