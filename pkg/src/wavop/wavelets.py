"""Meyer-type orthonormal wavelet systems in one and two dimensions.

Scale convention: psi_{j,k}(x) = 2^{-nj/2} psi(2^{-j} x - k), so larger j is a
coarser scale. Fourier convention: f^(xi) = int f(x) exp(-i x xi) dx.

Every 1-D factor is band limited. It is tabulated once on a fine spatial grid
by an inverse FFT of its sampled spectrum (times (i xi)^d for derivatives) and
evaluated elsewhere by local barycentric Lagrange interpolation. A direct
frequency-quadrature path is kept as an independent oracle.
"""
import hashlib
import json
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from pathlib import Path

import numpy as np
from scipy import fft as sfft
from scipy import special

from .grids import Grid, GridFunction, is_power_of_two
from .streams import thread_count

FAMILY_FORMAT_VERSION = 1
TWO_PI_3 = 2.0 * np.pi / 3.0


class UnsupportedOrderError(ValueError):
    pass


class SupportOverflowError(ValueError):
    def __init__(self, index, message):
        super().__init__(message)
        self.index = index


# ---------------------------------------------------------------- ramps

def polynomial_ramp(t):
    """Classical ramp t^4 (35 - 84 t + 70 t^2 - 20 t^3) clipped to [0, 1]."""
    t = np.clip(t, 0.0, 1.0)
    return t ** 4 * (35.0 - 84.0 * t + 70.0 * t ** 2 - 20.0 * t ** 3)


def beta_ramp(t, order):
    """Smoothstep of degree 2*order+1: regularized incomplete beta I_t(order+1, order+1)."""
    t = np.clip(t, 0.0, 1.0)
    return special.betainc(order + 1.0, order + 1.0, t)


def make_ramp(name):
    """Ramp by name: ``"poly"`` or ``"beta<q>"`` (e.g. ``"beta7"``)."""
    if name == "poly":
        return polynomial_ramp
    if name.startswith("beta"):
        q = int(name[4:])
        if q < 1:
            raise ValueError("beta ramp order must be >= 1")
        return lambda t: beta_ramp(t, q)
    raise ValueError(f"unknown ramp {name!r}")


def scaling_spectrum(xi, ramp):
    """Fourier profile of the Meyer scaling function (real, even)."""
    a = np.abs(np.asarray(xi, dtype=float))
    out = np.where(a <= TWO_PI_3, 1.0, 0.0)
    mid = (a > TWO_PI_3) & (a < 2 * TWO_PI_3)
    out = np.where(mid, np.cos(0.5 * np.pi * ramp(3.0 * a / (2.0 * np.pi) - 1.0)), out)
    return out.astype(complex)


def wavelet_spectrum(xi, ramp):
    """Fourier profile of the Meyer wavelet, exp(-i xi/2) times a real even envelope."""
    xi = np.asarray(xi, dtype=float)
    a = np.abs(xi)
    env = np.zeros_like(a)
    lo = (a >= TWO_PI_3) & (a <= 2 * TWO_PI_3)
    hi = (a > 2 * TWO_PI_3) & (a <= 4 * TWO_PI_3)
    env = np.where(lo, np.sin(0.5 * np.pi * ramp(3.0 * a / (2.0 * np.pi) - 1.0)), env)
    env = np.where(hi, np.cos(0.5 * np.pi * ramp(3.0 * a / (4.0 * np.pi) - 1.0)), env)
    return env * np.exp(-0.5j * xi)


# ---------------------------------------------------------------- 1-D profiles

_STENCIL = 10
_STENCIL_WEIGHTS = np.array([(-1) ** i * math.comb(_STENCIL - 1, i) for i in range(_STENCIL)],
                            dtype=float)


def lagrange_eval(table, origin, step, t, chunk=1 << 19):
    """Evaluate tabulated samples at ``t`` with a 10-point barycentric stencil.

    ``table[m]`` holds the value at ``origin + m*step``; points outside the
    table evaluate to zero. Points that land exactly on nodes are looked up.
    """
    t = np.asarray(t, dtype=float)
    flat = t.ravel()
    out = np.zeros(flat.shape, dtype=table.dtype)
    for start in range(0, flat.size, chunk):
        out[start:start + chunk] = _lagrange_chunk(table, origin, step, flat[start:start + chunk])
    return out.reshape(t.shape)


def _lagrange_chunk(table, origin, step, flat):
    pos = (flat - origin) / step
    base = np.floor(pos).astype(np.int64)
    frac = pos - base
    size = table.shape[0]
    out = np.zeros(flat.shape, dtype=table.dtype)
    half = _STENCIL // 2 - 1
    first = base - half
    inside = (first >= 0) & (first + _STENCIL <= size)
    node = inside & (frac == 0.0)
    out[node] = table[base[node]]
    rest = inside & ~node
    if np.any(rest):
        rows = np.lib.stride_tricks.sliding_window_view(table, _STENCIL)[first[rest]]
        w = _STENCIL_WEIGHTS[None, :] / ((frac[rest] + half)[:, None]
                                         - np.arange(_STENCIL)[None, :])
        out[rest] = np.einsum("ij,ij->i", w, rows) / w.sum(axis=1)
    return out


class BandProfile:
    """A band-limited function on the line given by its Fourier profile.

    ``spectrum`` maps angular frequencies to complex values and must vanish for
    |xi| > ``band``. ``breakpoints`` lists the nonnegative frequencies where the
    profile is not smooth (used by the quadrature oracle).
    """

    def __init__(self, spectrum, band, breakpoints, resolution=2 ** 10, oversample=64,
                 max_order=2, real=True, center=0.0, label=""):
        if not is_power_of_two(resolution) or resolution < 2 ** 10:
            raise ValueError(f"frequency resolution must be a power of two >= 1024, got {resolution}")
        self.spectrum = spectrum
        self.band = float(band)
        self.breakpoints = sorted(set(float(b) for b in breakpoints) | {0.0, float(band)})
        self.resolution = int(resolution)
        self.period = resolution / 2.0
        self.step = 1.0 / oversample
        self.max_order = int(max_order)
        self.real = real
        self.center = float(center)
        self.label = label
        self._tables = {}

    @cached_property
    def frequency_grid(self):
        size = int(round(self.period / self.step))
        return 2.0 * np.pi * np.fft.fftfreq(size, d=self.step)

    @cached_property
    def sampled_spectrum(self):
        return np.asarray(self.spectrum(self.frequency_grid), dtype=complex)

    def table(self, order):
        order = int(order)
        if order < 0 or order > self.max_order:
            raise UnsupportedOrderError(
                f"derivative order {order} exceeds supported regularity {self.max_order}")
        if order not in self._tables:
            xi = self.frequency_grid
            spec = self.sampled_spectrum * (1j * xi) ** order
            vals = sfft.ifft(spec, workers=thread_count()) / self.step
            vals = np.fft.fftshift(vals)
            if self.real:
                vals = vals.real.copy()
            self._tables[order] = vals
        return self._tables[order]

    @property
    def origin(self):
        return -self.period / 2.0

    def __call__(self, t, order=0):
        return lagrange_eval(self.table(order), self.origin, self.step, t)

    def direct(self, t, order=0, nodes=24):
        """Oracle: (1/2pi) int F(xi) (i xi)^d e^{i xi t} d xi by composite Gauss-Legendre."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        gx, gw = np.polynomial.legendre.leggauss(nodes)
        edges = []
        pos = self.breakpoints
        for a, b in zip(pos[:-1], pos[1:]):
            pieces = max(4, int(np.ceil((b - a) * (np.max(np.abs(t)) + 1.0) / np.pi)))
            cuts = np.linspace(a, b, pieces + 1)
            edges.extend(zip(cuts[:-1], cuts[1:]))
        xs, ws = [], []
        for a, b in edges:
            for sgn in (1.0, -1.0):
                lo, hi = (a, b) if sgn > 0 else (-b, -a)
                xs.append(0.5 * (hi - lo) * gx + 0.5 * (hi + lo))
                ws.append(0.5 * (hi - lo) * gw)
        xi = np.concatenate(xs)
        w = np.concatenate(ws) * self.spectrum(xi) * (1j * xi) ** order
        out = np.empty(t.shape, dtype=complex)
        for start in range(0, t.size, 256):
            chunk = t[start:start + 256]
            out[start:start + 256] = np.exp(1j * np.outer(chunk, xi)) @ w / (2.0 * np.pi)
        return out.real if self.real else out

    def essential_radius(self, tol=1e-8):
        """Smallest R with L2 mass outside [center-R, center+R] below ``tol`` (relative)."""
        key = ("essential", tol)
        if key in self._tables:
            return self._tables[key]
        vals = np.abs(self.table(0)) ** 2
        x = self.origin + self.step * np.arange(vals.size)
        dist = np.abs(x - self.center)
        order = np.argsort(dist)[::-1]
        tail = np.cumsum(vals[order])
        total = tail[-1]
        over = np.nonzero(tail > tol * total)[0]
        radius = 0.0 if over.size == 0 else float(dist[order][over[0]])
        self._tables[key] = radius
        return radius

    def reach(self, tol=1e-11):
        """Smallest R with |f(t)| <= tol*max|f| for |t - center| > R."""
        key = ("reach", tol)
        if key not in self._tables:
            vals = np.abs(self.table(0))
            x = self.origin + self.step * np.arange(vals.size)
            big = np.nonzero(vals > tol * vals.max())[0]
            self._tables[key] = float(np.max(np.abs(x[big] - self.center)))
        return self._tables[key]

    def with_multiplier(self, multiplier, label="", real=None):
        """New profile with spectrum multiplier(xi) * F(xi), same band and tabulation."""
        base = self.spectrum

        def spec(xi):
            xi = np.asarray(xi, dtype=float)
            vals = np.asarray(base(xi), dtype=complex)
            live = vals != 0
            out = np.zeros(xi.shape, dtype=complex)
            out[live] = np.asarray(multiplier(xi[live])).reshape(-1) * vals[live]
            return out

        prof = BandProfile(spec, self.band, self.breakpoints, self.resolution,
                           int(round(1.0 / self.step)), self.max_order,
                           self.real if real is None else real, self.center, label or self.label)
        return prof


# ---------------------------------------------------------------- separable members

@dataclass
class SeparableTerm:
    coefficient: complex
    profiles: tuple
    shifts: tuple


@dataclass
class SeparableFunction:
    """Finite sum of products of 1-D band profiles, each with an argument shift.

    A term evaluates to ``c * prod_a profile_a(t_a + shift_a)``.
    """
    dim: int
    terms: list
    label: str = ""

    def evaluate(self, points, alpha=None):
        pts = _as_points(points, self.dim)
        alpha = _as_alpha(alpha, self.dim)
        out = np.zeros(pts.shape[0], dtype=complex)
        for term in self.terms:
            val = np.full(pts.shape[0], complex(term.coefficient))
            for a in range(self.dim):
                val = val * term.profiles[a](pts[:, a] + term.shifts[a], alpha[a])
            out += val
        return out

    @property
    def max_order(self):
        return min(p.max_order for t in self.terms for p in t.profiles)

    def reach(self):
        r = 0.0
        for t in self.terms:
            for p, s in zip(t.profiles, t.shifts):
                r = max(r, p.reach() + abs(p.center - s))
        return r


def _as_points(points, dim):
    pts = np.asarray(points, dtype=float)
    if dim == 1 and pts.ndim <= 1:
        return pts.reshape(-1, 1)
    pts = pts.reshape(-1, dim)
    return pts


def _as_alpha(alpha, dim):
    if alpha is None:
        return (0,) * dim
    if np.isscalar(alpha):
        if dim != 1:
            raise ValueError("multi-index required in dimension > 1")
        return (int(alpha),)
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != dim:
        raise ValueError(f"multi-index {alpha} does not match dimension {dim}")
    if min(alpha) < 0:
        raise ValueError("multi-index entries must be nonnegative")
    return alpha


# ---------------------------------------------------------------- index types

@dataclass(frozen=True)
class WaveletIndex:
    l: int
    j: int
    k: tuple

    def __post_init__(self):
        k = (int(self.k),) if np.isscalar(self.k) else tuple(int(v) for v in self.k)
        object.__setattr__(self, "k", k)


@dataclass(frozen=True)
class IndexWindow:
    j_min: int
    j_max: int
    k_max: int
    l_set: tuple = (1,)

    def __post_init__(self):
        if self.j_min > self.j_max:
            raise ValueError("j_min must not exceed j_max")
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        object.__setattr__(self, "l_set", tuple(int(v) for v in self.l_set))

    @property
    def scales(self):
        return range(self.j_min, self.j_max + 1)

    def indices(self, dim):
        """All indices in enumeration order: l, then j, then k lexicographic."""
        ks = range(-self.k_max, self.k_max + 1)
        for l in self.l_set:
            for j in self.scales:
                for k in product(ks, repeat=dim):
                    yield WaveletIndex(l, j, k)

    def size(self, dim):
        return len(self.l_set) * len(self.scales) * (2 * self.k_max + 1) ** dim


# ---------------------------------------------------------------- families

MEMBER_FACTORS = {
    1: (("wavelet",),),
    2: (("scaling", "wavelet"), ("wavelet", "scaling"), ("wavelet", "wavelet")),
}


def meyer_profiles(ramp="beta7", resolution=2 ** 10, regularity=2):
    ramp_fn = make_ramp(ramp)
    scaling = BandProfile(lambda xi: scaling_spectrum(xi, ramp_fn), 2 * TWO_PI_3,
                          [TWO_PI_3], resolution, max_order=regularity,
                          center=0.0, label=f"meyer-scaling[{ramp}]")
    wavelet = BandProfile(lambda xi: wavelet_spectrum(xi, ramp_fn), 4 * TWO_PI_3,
                          [TWO_PI_3, 2 * TWO_PI_3], resolution, max_order=regularity,
                          center=0.5, label=f"meyer-wavelet[{ramp}]")
    return {"scaling": scaling, "wavelet": wavelet}


@dataclass
class MotherFamily:
    dim: int
    members: list
    regularity: int
    epsilon: float = 0.5
    ramp: str = "beta7"
    resolution: int = 2 ** 10
    kind: str = "meyer"
    profiles: dict = field(default_factory=dict)

    @property
    def count(self):
        return len(self.members)

    @property
    def decay_order(self):
        return 2 * self.dim + 2 * self.regularity + 2 * self.epsilon

    def member(self, l):
        if not 1 <= l <= self.count:
            raise ValueError(f"member index l={l} outside [1, {self.count}]")
        return self.members[l - 1]

    def eval_member(self, idx, points):
        return self.eval_member_derivative(idx, None, points)

    def eval_member_derivative(self, idx, alpha, points):
        alpha = _as_alpha(alpha, self.dim)
        if sum(alpha) > self.regularity:
            raise UnsupportedOrderError(
                f"|alpha|={sum(alpha)} exceeds family regularity {self.regularity}")
        pts = _as_points(points, self.dim)
        scale = 2.0 ** (-idx.j)
        arg = scale * pts - np.asarray(idx.k, dtype=float)[None, :]
        factor = 2.0 ** (-self.dim * idx.j / 2.0) * scale ** sum(alpha)
        return factor * self.member(idx.l).evaluate(arg, alpha)

    def metadata(self):
        return {"format_version": FAMILY_FORMAT_VERSION, "kind": self.kind, "dim": self.dim,
                "regularity": self.regularity, "epsilon": self.epsilon, "ramp": self.ramp,
                "resolution": self.resolution}


def build_system(n, frequency_resolution=2 ** 10, regularity=2, epsilon=0.5, ramp="beta7"):
    """Meyer family in dimension ``n``: one member for n=1, three tensor members for n=2."""
    if n not in (1, 2):
        raise ValueError(f"dimension must be 1 or 2, got {n}")
    if not is_power_of_two(frequency_resolution) or frequency_resolution < 2 ** 10:
        raise ValueError(
            f"frequency_resolution must be a power of two >= 1024, got {frequency_resolution}")
    if regularity < 1:
        raise ValueError("regularity must be >= 1")
    profiles = meyer_profiles(ramp, frequency_resolution, regularity)
    members = []
    for factors in MEMBER_FACTORS[n]:
        members.append(SeparableFunction(
            n, [SeparableTerm(1.0, tuple(profiles[f] for f in factors), (0.0,) * n)],
            label="x".join(factors)))
    return MotherFamily(n, members, regularity, epsilon, ramp, frequency_resolution,
                        profiles=profiles)


def build_pair(n, frequency_resolution=2 ** 10, regularity=2, epsilon=0.5,
               analysis_ramp="beta7", synthesis_ramp=None):
    """Analysis and synthesis families; the synthesis family reuses the analysis one by default."""
    psi = build_system(n, frequency_resolution, regularity, epsilon, analysis_ramp)
    if synthesis_ramp is None or synthesis_ramp == analysis_ramp:
        return psi, psi
    return psi, build_system(n, frequency_resolution, regularity, epsilon, synthesis_ramp)


def save_family(family, stem):
    """Write ``stem.json`` (metadata) and ``stem.npz`` (raw sampled spectra)."""
    stem = Path(stem)
    arrays = {name: prof.sampled_spectrum for name, prof in family.profiles.items()}
    np.savez(stem.with_suffix(".npz"), **arrays)
    meta = family.metadata()
    meta["checksums"] = {name: hashlib.sha256(a.tobytes()).hexdigest()
                         for name, a in sorted(arrays.items())}
    stem.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    return stem


def load_family(stem):
    """Rebuild a family from its metadata and check the stored spectra match."""
    stem = Path(stem)
    meta = json.loads(stem.with_suffix(".json").read_text())
    if meta.get("format_version") != FAMILY_FORMAT_VERSION:
        raise ValueError(f"unsupported family format version {meta.get('format_version')}")
    family = build_system(meta["dim"], meta["resolution"], meta["regularity"],
                          meta["epsilon"], meta["ramp"])
    with np.load(stem.with_suffix(".npz")) as data:
        for name, prof in family.profiles.items():
            if not np.array_equal(data[name], prof.sampled_spectrum):
                raise ValueError(f"stored spectrum {name!r} does not match its metadata")
    return family


# ---------------------------------------------------------------- decay report

@dataclass
class CallableMember:
    """Wrap ``func(points, alpha)`` as a member for decay reports."""
    dim: int
    func: object
    label: str = "callable"

    def evaluate(self, points, alpha=None):
        return np.asarray(self.func(_as_points(points, self.dim), _as_alpha(alpha, self.dim)))


def multi_indices(dim, order):
    return [a for a in product(range(order + 1), repeat=dim) if sum(a) == order]


def shell_points(dim, r, width=2 ** 0.25, density=16):
    """Sample points with r <= |x| < width*r (both signs in 1-D, polar in 2-D)."""
    radial = np.linspace(r, width * r, max(8, int(density * (width - 1) * r) + 2), endpoint=False)
    if dim == 1:
        return np.concatenate([radial, -radial]).reshape(-1, 1)
    ang_count = max(64, int(2 * np.pi * width * r * density / 4))
    ang = np.linspace(0.0, 2.0 * np.pi, ang_count, endpoint=False)
    rr, aa = np.meshgrid(radial, ang, indexing="ij")
    return np.stack([(rr * np.cos(aa)).ravel(), (rr * np.sin(aa)).ravel()], axis=1)


@dataclass
class DecayTable:
    exponent_base: float
    radii: np.ndarray
    orders: list
    raw: dict
    normalized: dict
    slopes: dict
    constants: dict
    flags: dict

    def passes(self, order):
        return not self.flags[order]


def fit_slope(x, y):
    """Least-squares slope of log y against log x."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.maximum(np.asarray(y, float), 1e-300))
    return float(np.polyfit(lx, ly, 1)[0])


def decay_report(member, order_cap, radii, epsilon=0.5, slope_tol=0.0):
    """Normalized decay C(alpha, r) = max_shell |d^alpha f| (1 + r)^{2n + 2|alpha| + 2 eps}.

    ``raw[order]`` is the shell maximum over all multi-indices of that order.
    The non-decay flag is raised when the log-log slope of the raw maximum
    against (1 + r) is above -(2n + 2|alpha| + 2 eps) + slope_tol.
    """
    dim = member.dim
    radii = np.asarray(sorted(radii), dtype=float)
    if np.any(radii <= 0):
        raise ValueError("radii must be positive")
    raw, normalized, slopes, constants, flags = {}, {}, {}, {}, {}
    for order in range(order_cap + 1):
        expo = 2 * dim + 2 * order + 2 * epsilon
        vals = []
        for r in radii:
            pts = shell_points(dim, r)
            m = 0.0
            for alpha in multi_indices(dim, order):
                m = max(m, float(np.max(np.abs(member.evaluate(pts, alpha)))))
            vals.append(m)
        vals = np.asarray(vals)
        raw[order] = vals
        normalized[order] = vals * (1.0 + radii) ** expo
        slopes[order] = fit_slope(1.0 + radii, vals)
        constants[order] = float(np.max(normalized[order]))
        flags[order] = bool(slopes[order] > -expo + slope_tol)
    return DecayTable(2 * dim + 2 * epsilon, radii, list(range(order_cap + 1)), raw, normalized,
                      slopes, constants, flags)


# ---------------------------------------------------------------- block analysis

def scale_k_range(grid, j, reach, center, k_max):
    """Integer k whose scaled member at scale j can touch the grid box (one axis)."""
    s = 2.0 ** (-j)
    lo = math.floor(-grid.half_width * s - center - reach)
    hi = math.ceil(grid.half_width * s - center + reach)
    return np.arange(max(lo, -k_max), min(hi, k_max) + 1)


def axis_matrix(profile, shift, order, u, ks):
    """M[i, m] = profile(u_i - k_m + shift) with derivative ``order``."""
    arg = u[:, None] - ks[None, :].astype(float) + shift
    return profile(arg, order)


_MATRIX_CACHE = OrderedDict()
_MATRIX_CACHE_BYTES = [0]
MATRIX_CACHE_LIMIT = 768 * 2 ** 20


def grid_axis_matrix(profile, shift, order, grid, j, ks):
    """Cached ``axis_matrix`` for the nodes of ``grid`` at scale ``j``."""
    key = (id(profile), float(shift), int(order), grid.half_width, grid.points, int(j),
           int(ks[0]) if len(ks) else 0, len(ks))
    hit = _MATRIX_CACHE.get(key)
    if hit is not None and hit[0] is profile:
        _MATRIX_CACHE.move_to_end(key)
        return hit[1]
    mat = axis_matrix(profile, shift, order, 2.0 ** (-j) * grid.axis(), ks)
    mat.setflags(write=False)
    _MATRIX_CACHE[key] = (profile, mat)
    _MATRIX_CACHE_BYTES[0] += mat.nbytes
    while _MATRIX_CACHE_BYTES[0] > MATRIX_CACHE_LIMIT and len(_MATRIX_CACHE) > 1:
        _, (_, old) = _MATRIX_CACHE.popitem(last=False)
        _MATRIX_CACHE_BYTES[0] -= old.nbytes
    return mat


def _member_reach(member):
    return member.reach() + 1.0


def check_resolution(grid, j_min, band=4 * TWO_PI_3):
    """Quadrature of band-limited products is exact when their joint band is below 2pi/h."""
    if 2.0 * band * 2.0 ** (-j_min) >= 2.0 * np.pi / grid.spacing:
        raise ValueError(
            f"grid spacing {grid.spacing:g} cannot resolve scale j={j_min}; "
            f"need h < {np.pi / (band * 2.0 ** (-j_min)):g}")


def analysis_block(member, f, j, k_max):
    """Inner products <f, m_{j,k}> over every k whose scaled member reaches f's box."""
    grid = f.grid
    n = grid.dim
    reach = _member_reach(member)
    ks = [scale_k_range(grid, j, reach, 0.0, k_max) for _ in range(n)]
    total = 0.0
    for term in member.terms:
        mats = [grid_axis_matrix(term.profiles[a], term.shifts[a], 0, grid, j, ks[a]).conj()
                for a in range(n)]
        if n == 1:
            vals = mats[0].T @ f.samples
        else:
            vals = mats[0].T @ f.samples @ mats[1]
        total = total + np.conj(term.coefficient) * vals
    return ks, grid.cell_volume * 2.0 ** (-n * j / 2.0) * total


def synthesis_block(member, ks, coeff, j, grid):
    """Samples of sum_k coeff[k] m_{j,k} on ``grid``."""
    n = grid.dim
    out = np.zeros(grid.shape, dtype=complex)
    for term in member.terms:
        mats = [grid_axis_matrix(term.profiles[a], term.shifts[a], 0, grid, j, ks[a])
                for a in range(n)]
        if n == 1:
            part = mats[0] @ coeff
        else:
            part = mats[0] @ coeff @ mats[1].T
        out += term.coefficient * 2.0 ** (-n * j / 2.0) * part
    return out


def analyze_grid(family, f, window):
    """Inner products <f, psi^l_{j,k}> for the window, by grid quadrature.

    Returns ``{(l, j): (ks, values)}`` where ``ks`` lists the k-range per axis
    and ``values`` has one axis per spatial dimension. Indices outside the
    returned blocks have members that do not reach the grid box.
    """
    check_resolution(f.grid, window.j_min)
    return {(l, j): analysis_block(family.member(l), f, j, window.k_max)
            for l in window.l_set for j in window.scales}


def synthesize_grid(family, blocks, grid):
    """Sum of coefficient * psi^l_{j,k} over all blocks, sampled on ``grid``."""
    out = np.zeros(grid.shape, dtype=complex)
    for (l, j), (ks, vals) in blocks.items():
        out += synthesis_block(family.member(l), ks, vals, j, grid)
    return GridFunction(grid, out)


def coefficient_energy(blocks):
    return float(sum(np.sum(np.abs(v) ** 2) for _, v in blocks.values()))


def parseval_defect(family, f, window):
    """|‖f‖² - sum_window |<f, psi>|²| / ‖f‖²."""
    energy = f.energy()
    if energy == 0.0:
        raise ValueError("parseval defect is undefined for the zero function")
    if window is None:
        return 1.0
    blocks = analyze_grid(family, f, window)
    return abs(energy - coefficient_energy(blocks)) / energy


def _support_box(member, j, k):
    """Per-axis essential interval of a scaled member."""
    scale = 2.0 ** j
    box = []
    for a in range(member.dim):
        lo, hi = np.inf, -np.inf
        for t in member.terms:
            p = t.profiles[a]
            r = p.essential_radius()
            c = p.center - t.shifts[a]
            lo = min(lo, scale * (k[a] + c - r))
            hi = max(hi, scale * (k[a] + c + r))
        box.append((lo, hi))
    return box


def gram_matrix(family, window, grid, indices=None):
    """Gram matrix of the window members by quadrature on ``grid``.

    Raises ``SupportOverflowError`` naming the first member whose essential
    support (tail L2 mass below 1e-8) leaves the grid box.
    """
    if indices is None:
        indices = list(window.indices(family.dim))
    check_resolution(grid, min(i.j for i in indices))
    n = family.dim
    L = grid.half_width
    for idx in indices:
        for lo, hi in _support_box(family.member(idx.l), idx.j, idx.k):
            if lo < -L or hi > L:
                raise SupportOverflowError(
                    idx, f"member {idx} has essential support [{lo:.3g}, {hi:.3g}] "
                         f"outside the grid box [{-L}, {L}]")
    x = grid.axis()
    h = grid.spacing
    # factor-wise evaluation: member = sum_t c_t prod_a p_{t,a}
    axis_vals = []
    for idx in indices:
        member = family.member(idx.l)
        scale = 2.0 ** (-idx.j)
        per_term = []
        for t in member.terms:
            per_term.append((t.coefficient * 2.0 ** (-n * idx.j / 2.0),
                             [t.profiles[a](scale * x - idx.k[a] + t.shifts[a]) for a in range(n)]))
        axis_vals.append(per_term)
    size = len(indices)
    G = np.zeros((size, size), dtype=complex)
    # stack single-term factors for speed; fall back to loops for multi-term members
    if all(len(v) == 1 for v in axis_vals):
        coef = np.array([v[0][0] for v in axis_vals])
        G = np.outer(coef, coef.conj()).astype(complex)
        for a in range(n):
            M = np.stack([v[0][1][a] for v in axis_vals])
            G = G * (h * (M @ M.conj().T))
        return G
    for p in range(size):
        for q in range(size):
            acc = 0.0
            for cp, fp in axis_vals[p]:
                for cq, fq in axis_vals[q]:
                    prod_ = cp * np.conj(cq)
                    for a in range(n):
                        prod_ = prod_ * h * np.vdot(fq[a], fp[a])
                    acc += prod_
            G[p, q] = acc
    return G
