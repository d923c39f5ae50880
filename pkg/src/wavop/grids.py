"""Uniform grids over centered boxes and functions sampled on them."""
from dataclasses import dataclass

import numpy as np


def is_power_of_two(value):
    value = int(value)
    return value > 0 and (value & (value - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [-L, L)^n with ``points`` nodes per axis.

    Node i sits at -L + i*h with h = 2L/points, so the origin is node points/2.
    """
    half_width: float
    points: int
    dim: int = 1

    def __post_init__(self):
        if not is_power_of_two(self.points):
            raise ValueError(f"points per axis must be a power of two, got {self.points}")
        if self.half_width <= 0:
            raise ValueError("half_width must be positive")
        if self.dim not in (1, 2):
            raise ValueError(f"only dimensions 1 and 2 are supported, got {self.dim}")

    @property
    def spacing(self):
        return 2.0 * self.half_width / self.points

    @property
    def shape(self):
        return (self.points,) * self.dim

    @property
    def cell_volume(self):
        return self.spacing ** self.dim

    def axis(self):
        return -self.half_width + self.spacing * np.arange(self.points)

    def mesh(self):
        axes = [self.axis()] * self.dim
        return np.meshgrid(*axes, indexing="ij")

    def radius(self, center=None):
        mesh = self.mesh()
        center = np.zeros(self.dim) if center is None else np.asarray(center, float)
        return np.sqrt(sum((m - c) ** 2 for m, c in zip(mesh, center)))

    def frequencies(self):
        """Angular frequencies per axis matching ``numpy.fft`` ordering."""
        return 2.0 * np.pi * np.fft.fftfreq(self.points, d=self.spacing)

    def zeros(self, dtype=complex):
        return GridFunction(self, np.zeros(self.shape, dtype=dtype))

    def sample(self, func, dtype=complex):
        """Sample ``func`` (taking one coordinate array per axis) on the grid."""
        return GridFunction(self, np.asarray(func(*self.mesh()), dtype=dtype))


@dataclass
class GridFunction:
    grid: Grid
    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        if self.samples.shape != self.grid.shape:
            raise ValueError(
                f"sample shape {self.samples.shape} does not match grid {self.grid.shape}")

    def inner(self, other):
        """Quadrature of f * conj(g)."""
        return complex(self.grid.cell_volume * np.vdot(other.samples, self.samples))

    def norm(self, p=2):
        vals = np.abs(self.samples)
        if p == np.inf:
            return float(vals.max())
        return float((self.grid.cell_volume * np.sum(vals ** p)) ** (1.0 / p))

    def energy(self):
        return float(self.grid.cell_volume * np.sum(np.abs(self.samples) ** 2))

    def boundary_fraction(self, band_fraction=1.0 / 16.0):
        """Fraction of L2 energy within ``band_fraction`` of the box edge on any axis."""
        total = float(np.sum(np.abs(self.samples) ** 2))
        if total == 0.0:
            return 0.0
        P = self.grid.points
        w = max(1, int(round(band_fraction * P)))
        inner = np.abs(self.samples[(slice(w, P - w),) * self.grid.dim]) ** 2
        return float((total - np.sum(inner)) / total)

    def copy_with(self, samples):
        return GridFunction(self.grid, samples)

    def __add__(self, other):
        return GridFunction(self.grid, self.samples + other.samples)

    def __sub__(self, other):
        return GridFunction(self.grid, self.samples - other.samples)

    def __mul__(self, scalar):
        return GridFunction(self.grid, self.samples * scalar)

    __rmul__ = __mul__


def wave_packets(grid, rng, count=4, freq_range=(2.0, 20.0), min_cycles=4.0, radius=2.0):
    """Random real sum of Gaussian wave packets.

    Each packet has centre within ``radius`` of the origin, angular frequency
    |w| in ``freq_range`` and envelope width s with |w| s >= ``min_cycles``, so
    its spectrum is concentrated away from zero and below the top of the range.
    """
    mesh = grid.mesh()
    out = np.zeros(grid.shape)
    for _ in range(count):
        centre = rng.uniform(-radius, radius, grid.dim)
        w = rng.uniform(*freq_range)
        direction = rng.normal(size=grid.dim)
        direction /= np.linalg.norm(direction)
        width = rng.uniform(min_cycles / w, 2.0 * min_cycles / w)
        amp = rng.normal()
        phase = rng.uniform(0, 2 * np.pi)
        r2 = sum((m - c) ** 2 for m, c in zip(mesh, centre))
        arg = sum(w * d * (m - c) for m, d, c in zip(mesh, direction, centre))
        out += amp * np.exp(-0.5 * r2 / width ** 2) * np.cos(arg + phase)
    return GridFunction(grid, out.astype(complex))
