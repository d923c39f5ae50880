"""Borel measures built from a density, Dirac atoms and a hyperplane density.

mu = g dx + sum_i c_i delta_{x_i} + lambda, where lambda lives on {y'' = 0}
and acts by convolution with h along the first m coordinates. The dilate
mu_j has Fourier transform mu^(2^j xi).
"""
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate, signal
from scipy import fft as sfft

from .grids import Grid, GridFunction
from .streams import thread_count


class BoundaryMassError(ValueError):
    pass


class MeasureConfigError(ValueError):
    pass


# ---------------------------------------------------------------- densities

def _coords_norm(coords, center):
    return np.sqrt(sum((c - x0) ** 2 for c, x0 in zip(coords, center)))


@dataclass
class Density:
    """Base class: subclasses implement ``__call__`` on coordinate arrays."""
    dim: int

    def l1_norm(self):
        raise NotImplementedError

    def fourier(self, xi):
        return numeric_fourier(self, xi)

    def axis_factors(self):
        """1-D densities whose product is this density, or None."""
        return None

    def to_dict(self):
        raise NotImplementedError


@dataclass
class GaussianDensity(Density):
    mass: float = 1.0
    sigma: float = 1.0
    center: tuple = None

    def __post_init__(self):
        if self.sigma <= 0:
            raise MeasureConfigError("gaussian sigma must be positive")
        self.center = tuple(np.zeros(self.dim)) if self.center is None else tuple(
            float(c) for c in np.atleast_1d(self.center))
        if len(self.center) != self.dim:
            raise MeasureConfigError("gaussian center has the wrong dimension")

    def __call__(self, *coords):
        r2 = sum((c - x0) ** 2 for c, x0 in zip(coords, self.center))
        norm = (2.0 * np.pi * self.sigma ** 2) ** (-self.dim / 2.0)
        return self.mass * norm * np.exp(-0.5 * r2 / self.sigma ** 2)

    def fourier(self, xi):
        xi = np.atleast_2d(np.asarray(xi, float).reshape(-1, self.dim))
        phase = xi @ np.asarray(self.center)
        return self.mass * np.exp(-0.5 * self.sigma ** 2 * np.sum(xi ** 2, axis=1) - 1j * phase)

    def l1_norm(self):
        return abs(self.mass)

    def axis_factors(self):
        return [GaussianDensity(1, self.mass if a == 0 else 1.0, self.sigma, (self.center[a],))
                for a in range(self.dim)]

    def to_dict(self):
        return {"type": "gaussian", "mass": self.mass, "sigma": self.sigma,
                "center": list(self.center)}


@dataclass
class BoxDensity(Density):
    """Uniform density on a cube; faces carry half the interior value."""
    mass: float = 1.0
    half_width: float = 1.0
    center: tuple = None

    def __post_init__(self):
        if self.half_width <= 0:
            raise MeasureConfigError("box half_width must be positive")
        self.center = tuple(np.zeros(self.dim)) if self.center is None else tuple(
            float(c) for c in np.atleast_1d(self.center))

    def __call__(self, *coords):
        w = self.half_width
        val = self.mass / (2.0 * w) ** self.dim
        out = np.full(np.broadcast(*coords).shape, val, dtype=float)
        for c, x0 in zip(coords, self.center):
            d = np.abs(c - x0)
            out = out * np.where(d < w, 1.0, np.where(np.isclose(d, w, rtol=0, atol=1e-12 * w), 0.5, 0.0))
        return out

    def fourier(self, xi):
        xi = np.atleast_2d(np.asarray(xi, float).reshape(-1, self.dim))
        w = self.half_width
        out = np.full(xi.shape[0], complex(self.mass))
        for a in range(self.dim):
            out = out * np.sinc(w * xi[:, a] / np.pi) * np.exp(-1j * xi[:, a] * self.center[a])
        return out

    def l1_norm(self):
        return abs(self.mass)

    def axis_factors(self):
        return [BoxDensity(1, self.mass if a == 0 else 1.0, self.half_width, (self.center[a],))
                for a in range(self.dim)]

    def to_dict(self):
        return {"type": "box", "mass": self.mass, "half_width": self.half_width,
                "center": list(self.center)}


@dataclass
class RationalDecayDensity(Density):
    """scale * (1 + |x|)^{-power}."""
    scale: float = 1.0
    power: float = 4.0

    def __call__(self, *coords):
        return self.scale * (1.0 + _coords_norm(coords, [0.0] * self.dim)) ** (-self.power)

    def l1_norm(self):
        if self.power <= self.dim:
            return math.inf
        if self.dim == 1:
            return 2.0 * abs(self.scale) / (self.power - 1.0)
        # 2-D: 2 pi int_0^inf r (1+r)^{-s} dr = 2 pi / ((s-1)(s-2))
        return 2.0 * np.pi * abs(self.scale) / ((self.power - 1.0) * (self.power - 2.0))

    def fourier(self, xi):
        xi = np.asarray(xi, float).reshape(-1, self.dim)
        if self.dim == 1:
            out = []
            for w in np.abs(xi[:, 0]):
                if w == 0.0:
                    out.append(self.l1_norm())
                    continue
                val, _ = integrate.quad(lambda x: (1.0 + x) ** (-self.power), 0.0, np.inf,
                                        weight="cos", wvar=w)
                out.append(2.0 * self.scale * val)
            return np.asarray(out, dtype=complex)
        return numeric_fourier(self, xi)

    def to_dict(self):
        return {"type": "rational-decay", "scale": self.scale, "power": self.power}


@dataclass
class TabulatedDensity(Density):
    """Samples on a centered uniform grid, linear interpolation, zero outside."""
    half_width: float = 1.0
    values: np.ndarray = None
    path: str = ""

    def __call__(self, *coords):
        vals = np.asarray(self.values, float)
        P = vals.shape[0]
        h = 2.0 * self.half_width / P
        axis = -self.half_width + h * np.arange(P)
        if self.dim == 1:
            return np.interp(coords[0], axis, vals, left=0.0, right=0.0)
        from scipy.interpolate import RegularGridInterpolator
        interp = RegularGridInterpolator((axis,) * self.dim, vals, bounds_error=False,
                                         fill_value=0.0)
        shape = np.broadcast(*coords).shape
        pts = np.stack([np.broadcast_to(c, shape).ravel() for c in coords], axis=1)
        return interp(pts).reshape(shape)

    def l1_norm(self):
        vals = np.abs(np.asarray(self.values, float))
        h = 2.0 * self.half_width / vals.shape[0]
        return float(h ** self.dim * vals.sum())

    def to_dict(self):
        return {"type": "file", "path": self.path, "half_width": self.half_width}


def numeric_fourier(density, xi, half_width=None, points=None):
    """Quadrature sum of density(x) exp(-i x.xi) on a centered grid."""
    xi = np.asarray(xi, float).reshape(-1, density.dim)
    L = half_width or 64.0
    P = points or (4096 if density.dim == 1 else 512)
    grid = Grid(L, P, density.dim)
    vals = density(*grid.mesh()).ravel()
    coords = np.stack([m.ravel() for m in grid.mesh()], axis=1)
    out = np.empty(xi.shape[0], dtype=complex)
    for s in range(0, xi.shape[0], 64):
        out[s:s + 64] = np.exp(-1j * xi[s:s + 64] @ coords.T) @ vals * grid.cell_volume
    return out


def density_from_dict(spec, dim, base_dir=None):
    if not isinstance(spec, dict) or "type" not in spec:
        raise MeasureConfigError("density spec must be a mapping with a 'type' key")
    kind = spec["type"]
    try:
        if kind == "gaussian":
            return GaussianDensity(dim, float(spec.get("mass", 1.0)), float(spec.get("sigma", 1.0)),
                                   spec.get("center"))
        if kind == "box":
            return BoxDensity(dim, float(spec.get("mass", 1.0)), float(spec.get("half_width", 1.0)),
                              spec.get("center"))
        if kind == "rational-decay":
            return RationalDecayDensity(dim, float(spec.get("scale", 1.0)),
                                        float(spec.get("power", 4.0)))
        if kind == "file":
            path = Path(spec["path"])
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            values = np.load(path)
            if values.ndim != dim:
                raise MeasureConfigError(f"density file {path} has {values.ndim} axes, expected {dim}")
            return TabulatedDensity(dim, float(spec["half_width"]), values, str(spec["path"]))
    except KeyError as exc:
        raise MeasureConfigError(f"density spec of type {kind!r} is missing {exc}") from exc
    raise MeasureConfigError(f"unknown density type {kind!r}")


# ---------------------------------------------------------------- measures

@dataclass
class SingularPart:
    """Density h on R^m, carried by the hyperplane {y'' = 0} of R^n."""
    m: int
    h: Density


@dataclass
class BorelMeasure:
    dim: int
    density: Density = None
    atoms: list = field(default_factory=list)
    singular: SingularPart = None

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise MeasureConfigError(f"ambient dimension must be 1 or 2, got {self.dim}")
        self.atoms = [(complex(c).real if np.isreal(c) else complex(c),
                       np.atleast_1d(np.asarray(x, float))) for c, x in self.atoms]
        if self.density is None and not self.atoms and self.singular is None:
            raise MeasureConfigError("a measure needs at least one part")
        if self.density is not None and self.density.dim != self.dim:
            raise MeasureConfigError("density dimension does not match the measure")
        for _, x in self.atoms:
            if x.shape != (self.dim,):
                raise MeasureConfigError(f"atom location {x} does not match dimension {self.dim}")
        if self.singular is not None:
            if self.dim == 1:
                raise MeasureConfigError("a singular hyperplane part requires dimension >= 2")
            if not 1 <= self.singular.m < self.dim:
                raise MeasureConfigError("singular part needs 1 <= m < n")
            if self.singular.h.dim != self.singular.m:
                raise MeasureConfigError("singular density must live on R^m")

    def total_variation(self):
        tv = 0.0
        if self.density is not None:
            tv += self.density.l1_norm()
        tv += sum(abs(c) for c, _ in self.atoms)
        if self.singular is not None:
            tv += self.singular.h.l1_norm()
        return tv

    def is_dirac_only(self):
        return self.density is None and self.singular is None


def dirac(dim, at=None, weight=1.0):
    at = np.zeros(dim) if at is None else at
    return BorelMeasure(dim, atoms=[(weight, at)])


def measure_from_dict(spec, base_dir=None):
    """Parse a measure specification mapping (see the harness schema)."""
    if not isinstance(spec, dict):
        raise MeasureConfigError("measure spec must be a mapping")
    try:
        dim = int(spec["dim"])
    except (KeyError, TypeError, ValueError) as exc:
        raise MeasureConfigError("measure.dim must be given as an integer") from exc
    density = None
    if spec.get("density") is not None:
        density = density_from_dict(spec["density"], dim, base_dir)
    atoms = []
    for item in spec.get("atoms") or []:
        if not isinstance(item, (list, tuple)) or len(item) != 2:
            raise MeasureConfigError(f"atom entries must be [c, x], got {item!r}")
        atoms.append((float(item[0]), np.atleast_1d(np.asarray(item[1], float))))
    singular = None
    if spec.get("singular") is not None:
        sing = spec["singular"]
        m = int(sing.get("m", 1))
        singular = SingularPart(m, density_from_dict(sing["h"], m, base_dir))
    return BorelMeasure(dim, density, atoms, singular)


def measure_to_dict(mu):
    out = {"dim": mu.dim}
    if mu.density is not None:
        out["density"] = mu.density.to_dict()
    if mu.atoms:
        out["atoms"] = [[float(np.real(c)), [float(v) for v in x]] for c, x in mu.atoms]
    if mu.singular is not None:
        out["singular"] = {"m": mu.singular.m, "h": mu.singular.h.to_dict()}
    return out


# ---------------------------------------------------------------- validation

def _radial_profile(density, radii):
    """max over a few directions of |density| at each radius."""
    dim = density.dim
    if dim == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        ang = np.linspace(0, 2 * np.pi, 16, endpoint=False)
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    out = np.zeros(radii.size)
    for d in dirs:
        pts = radii[:, None] * d[None, :]
        vals = np.abs(density(*[pts[:, a] for a in range(dim)]))
        out = np.maximum(out, vals)
    return out


@dataclass
class AdmissibilityReport:
    exponent: float
    density_sup: float
    density_slope: float
    density_pass: bool
    atomic_sum: float
    atomic_tail_bound: float
    atomic_pass: bool
    singular_sup: float
    singular_slope: float
    singular_pass: bool
    passed: bool
    messages: list

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _weighted_scan(density, exponent, r_max=1e3):
    radii = np.concatenate([[0.0], np.logspace(-2, np.log10(r_max), 240)])
    vals = _radial_profile(density, radii) * (1.0 + radii) ** exponent
    sup = float(np.max(vals))
    tail = radii >= r_max / 100.0
    t_r, t_v = radii[tail], vals[tail]
    if np.all(t_v <= 1e-300):
        slope = -np.inf
    else:
        keep = t_v > 0
        slope = float(np.polyfit(np.log(1.0 + t_r[keep]), np.log(t_v[keep]), 1)[0]) if keep.sum() > 2 else -np.inf
    return sup, slope


def validate_measure(mu, N, eps, threshold=1e12, slope_tol=0.01):
    """Check the weighted size conditions with weight (1+|x|)^{2n+2N+2eps}.

    The density (and the hyperplane density) pass when the weighted radial
    sup is below ``threshold`` and does not grow over the last two decades
    of the scan. The atomic part passes when the weighted sum is finite and
    its ratio-test tail estimate is small relative to it.
    """
    n = mu.dim
    expo = 2 * n + 2 * N + 2 * eps
    msgs = []
    d_sup, d_slope, d_pass = 0.0, -np.inf, True
    if mu.density is not None:
        d_sup, d_slope = _weighted_scan(mu.density, expo)
        d_pass = bool(d_sup < threshold and d_slope <= slope_tol)
        if not d_pass:
            msgs.append(f"density fails (1+|x|)^{expo:g}|g(x)| <= C: weighted sup {d_sup:.3g}, "
                        f"tail slope {d_slope:.3g}")
    a_sum, a_tail, a_pass = 0.0, 0.0, True
    if mu.atoms:
        terms = np.array([abs(c) * (1.0 + np.linalg.norm(x)) ** expo for c, x in mu.atoms])
        a_sum = math.fsum(terms)
        if terms.size >= 3 and terms[-1] > 0 and terms[-2] > 0:
            q = terms[-1] / terms[-2]
            a_tail = float(terms[-1] * q / (1.0 - q)) if q < 1 else math.inf
        a_pass = bool(np.isfinite(a_sum) and a_sum < threshold and np.isfinite(a_tail))
        if not a_pass:
            msgs.append(f"atoms fail sum |c_i|(1+|x_i|)^{expo:g} < inf: sum {a_sum:.3g}")
    s_sup, s_slope, s_pass = 0.0, -np.inf, True
    if mu.singular is not None:
        s_sup, s_slope = _weighted_scan(mu.singular.h, expo)
        s_pass = bool(s_sup < threshold and s_slope <= slope_tol)
        if not s_pass:
            msgs.append(f"hyperplane density fails (1+|y'|)^{expo:g}|h(y')| <= C: weighted sup "
                        f"{s_sup:.3g}, tail slope {s_slope:.3g}")
    return AdmissibilityReport(expo, d_sup, d_slope, d_pass, a_sum, a_tail, a_pass, s_sup, s_slope,
                               s_pass, bool(d_pass and a_pass and s_pass), msgs)


# ---------------------------------------------------------------- dilation

@dataclass
class DilatedMeasure:
    base: BorelMeasure
    j: int = 0

    @property
    def dim(self):
        return self.base.dim

    @property
    def factor(self):
        return 2.0 ** self.j

    def density_values(self, *coords):
        s = self.factor
        return s ** (-self.dim) * self.base.density(*[c / s for c in coords])

    def atoms(self):
        return [(c, self.factor * x) for c, x in self.base.atoms]

    def singular_values(self, t):
        s = self.factor
        m = self.base.singular.m
        return s ** (-m) * self.base.singular.h(t / s)

    def fourier(self, xi):
        return measure_fourier(self, xi)


def dilate_measure(mu, j):
    return DilatedMeasure(mu, int(j))


def measure_fourier(mu_j, xi_points):
    """mu^_j(xi) = g^(2^j xi) + sum c_i exp(-i 2^j x_i.xi) + h^(2^j xi')."""
    if isinstance(mu_j, BorelMeasure):
        mu_j = DilatedMeasure(mu_j, 0)
    mu = mu_j.base
    xi = np.asarray(xi_points, float).reshape(-1, mu.dim)
    s = mu_j.factor
    out = np.zeros(xi.shape[0], dtype=complex)
    if mu.density is not None:
        out += mu.density.fourier(s * xi)
    for c, x in mu.atoms:
        out += c * np.exp(-1j * s * (xi @ x))
    if mu.singular is not None:
        m = mu.singular.m
        out += mu.singular.h.fourier(s * xi[:, :m])
    return out


# ---------------------------------------------------------------- convolution

def _offset_axis(grid):
    P = grid.points
    return grid.spacing * np.arange(-(P - 1), P)


def _linear_conv(kernel, samples, mode, axes):
    """out[i] = sum_m kernel[P-1+i-m] samples[m] along ``axes``."""
    if mode == "fft":
        return signal.fftconvolve(kernel, samples, mode="valid", axes=axes)
    if mode != "direct":
        raise ValueError(f"unknown convolution mode {mode!r}")
    return _direct_conv(kernel, samples, axes)


def _direct_conv(kernel, samples, axes):
    samples = np.asarray(samples)
    if samples.ndim == 1:
        P = samples.size
        out = np.zeros(P, dtype=np.result_type(kernel, samples))
        for m in range(P):
            out += samples[m] * kernel[P - 1 - m:2 * P - 1 - m]
        return out
    P = samples.shape[0]
    if tuple(axes) == (0,):
        out = np.zeros(samples.shape, dtype=np.result_type(kernel, samples))
        for m in range(P):
            out += samples[m][None, :] * kernel[P - 1 - m:2 * P - 1 - m]
        return out
    out = np.zeros(samples.shape, dtype=np.result_type(kernel, samples))
    for m1 in range(P):
        for m2 in range(P):
            v = samples[m1, m2]
            if v != 0:
                out += v * kernel[P - 1 - m1:2 * P - 1 - m1, P - 1 - m2:2 * P - 1 - m2]
    return out


def _periodic_sinc(t, h, P):
    """Band-limited interpolation kernel of an even-length periodic grid."""
    x = np.pi * t / h
    den = P * np.tan(x / P)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.sin(x) / den
    node = np.isclose(np.sin(x / P), 0.0, atol=1e-15)
    return np.where(node, np.cos(x) / np.cos(x / P), val)


def _shift_fft(samples, shift, grid):
    F = sfft.fftn(samples, workers=thread_count())
    P = grid.points
    for a in range(grid.dim):
        xi = grid.frequencies()
        ph = np.exp(-1j * xi * shift[a])
        ph[P // 2] = np.cos(np.pi * shift[a] / grid.spacing)
        shape = [1] * grid.dim
        shape[a] = P
        F = F * ph.reshape(shape)
    return sfft.ifftn(F, workers=thread_count())


def _shift_direct(samples, shift, grid):
    x = grid.axis()
    out = np.asarray(samples, dtype=complex)
    for a in range(grid.dim):
        S = _periodic_sinc(x[:, None] - shift[a] - x[None, :], grid.spacing, grid.points)
        out = np.moveaxis(np.tensordot(S, np.moveaxis(out, a, 0), axes=(1, 0)), 0, a)
    return out


def translate(samples, shift, grid, mode="fft"):
    """Samples of f(x - shift) for band-limited grid data."""
    shift = np.asarray(shift, float)
    steps = shift / grid.spacing
    if np.allclose(steps, np.round(steps), rtol=0, atol=1e-12):
        out = samples
        for a in range(grid.dim):
            out = np.roll(out, int(round(steps[a])), axis=a)
        return np.asarray(out, dtype=complex)
    if mode == "fft":
        return _shift_fft(samples, shift, grid)
    return _shift_direct(samples, shift, grid)


def _escape_fraction(f, shift, band_fraction):
    """Energy fraction of f that a translation by ``shift`` moves into the boundary band."""
    grid = f.grid
    L = grid.half_width
    band = band_fraction * 2 * L
    mesh = grid.mesh()
    inside = np.ones(grid.shape, dtype=bool)
    for a in range(grid.dim):
        y = mesh[a] + shift[a]
        inside &= (y >= -L + band) & (y < L - band)
    e = np.abs(f.samples) ** 2
    total = e.sum()
    return float(e[~inside].sum() / total) if total > 0 else 0.0


def convolve(mu_j, f, mode="fft", boundary_tol=1e-6, band_fraction=1.0 / 16.0):
    """Samples of mu_j * f on f's grid.

    Densities act by zero-padded linear convolution (FFT or direct sum),
    atoms by band-limited translation, the hyperplane part by convolution
    along the first m axes. Raises ``BoundaryMassError`` when the result has
    more than ``boundary_tol`` of its energy near the box edge.
    """
    if isinstance(mu_j, BorelMeasure):
        mu_j = DilatedMeasure(mu_j, 0)
    mu = mu_j.base
    grid = f.grid
    if grid.dim != mu.dim:
        raise ValueError("grid and measure dimensions differ")
    if not np.all(np.isfinite(f.samples)):
        raise ValueError("grid function has non-finite samples")
    h = grid.spacing
    out = np.zeros(grid.shape, dtype=complex)
    smooth = np.zeros(grid.shape, dtype=complex)
    if mu.density is not None:
        offs = _offset_axis(grid)
        mesh = np.meshgrid(*([offs] * grid.dim), indexing="ij")
        kernel = mu_j.density_values(*mesh)
        smooth += grid.cell_volume * _linear_conv(kernel, f.samples, mode, tuple(range(grid.dim)))
    if mu.singular is not None:
        kernel = mu_j.singular_values(_offset_axis(grid))
        kernel = kernel.reshape((-1,) + (1,) * (grid.dim - 1))
        smooth += h * _linear_conv(kernel, f.samples, mode, (0,))
    out += smooth
    if mu.density is not None or mu.singular is not None:
        frac = GridFunction(grid, smooth).boundary_fraction(band_fraction)
        if frac >= boundary_tol:
            raise BoundaryMassError(
                f"convolution at j={mu_j.j} leaves {frac:.2e} of its energy at the box edge")
    for c, x in mu_j.atoms():
        frac = _escape_fraction(f, x, band_fraction)
        if frac >= boundary_tol:
            raise BoundaryMassError(
                f"atom shift {x} at j={mu_j.j} pushes {frac:.2e} of the energy to the box edge")
        out += c * translate(f.samples, x, grid, mode)
    if not np.all(np.isfinite(out)):
        raise ValueError("convolution produced non-finite samples")
    return GridFunction(grid, out)


def convolve_fourier(mu_j, f):
    """Reference: inverse DFT of mu^_j(xi) f^(xi) (periodic, so only valid for padded data)."""
    if isinstance(mu_j, BorelMeasure):
        mu_j = DilatedMeasure(mu_j, 0)
    grid = f.grid
    freqs = np.meshgrid(*([grid.frequencies()] * grid.dim), indexing="ij")
    xi = np.stack([q.ravel() for q in freqs], axis=1)
    mult = measure_fourier(mu_j, xi).reshape(grid.shape)
    F = sfft.fftn(f.samples, workers=thread_count())
    return GridFunction(grid, sfft.ifftn(F * mult, workers=thread_count()))
