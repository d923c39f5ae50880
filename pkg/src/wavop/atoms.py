"""(p, inf)-atoms and the quasi-norms of their images under the operator.

An atom a lives on a ball B = B(x0, r), satisfies |a| <= |B|^{-1/p} and has
vanishing moments up to order floor(n(1/p - 1)). Images Ta are evaluated
from the coefficients <a, Psi^l_{j,k}> of the atom against the effective
wavelets, synthesized on a near-field box and on dyadic far-field shells.
"""
import csv
import math
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from .grids import Grid, GridFunction
from .kernels import KernelSpec
from .streams import substream
from .wavelets import fit_slope

SIZE_TOL = 1e-12
MOMENT_TOL = 1e-10
HOLDER_TOL = 1e-6
NOISE_FLOOR = 1e-12


class DegenerateAtomError(RuntimeError):
    pass


def moment_order(n, p):
    """floor(n(1/p - 1)): the highest moment order an atom must cancel."""
    if not 0 < p <= 1:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    return int(math.floor(n * (1.0 / p - 1.0) + 1e-12))


def decay_index(n, p):
    """The unique integer k >= 1 with n/(k+n) < p <= n/(k-1+n)."""
    return moment_order(n, p) + 1


@dataclass
class ExponentRange:
    left: float
    right: float = math.inf
    indices: dict = field(default_factory=dict)

    def contains(self, p):
        return self.left < p < self.right


def admissible_p_range(n, N, ps=()):
    """Open interval (n/(N+n), inf) and the decay index k for each p <= 1 in it."""
    if N < 1:
        raise ValueError("N must be at least 1")
    rng = ExponentRange(n / (N + n))
    for p in ps:
        if rng.contains(p) and p <= 1:
            rng.indices[p] = decay_index(n, p)
    return rng


def ball_volume(n, r):
    return 2.0 * r if n == 1 else math.pi * r * r


@dataclass
class Atom:
    center: np.ndarray
    radius: float
    p: float
    samples: GridFunction

    def __post_init__(self):
        self.center = np.atleast_1d(np.asarray(self.center, float))

    @property
    def dim(self):
        return self.samples.grid.dim

    @property
    def moment_order(self):
        return moment_order(self.dim, self.p)

    @property
    def size_bound(self):
        return ball_volume(self.dim, self.radius) ** (-1.0 / self.p)

    def scaled_coords(self):
        """(x - x0)/r on the grid, one array per axis."""
        return [(m - c) / self.radius for m, c in zip(self.samples.grid.mesh(), self.center)]

    def quasi_norm_integral(self):
        g = self.samples.grid
        return float(g.cell_volume * np.sum(np.abs(self.samples.samples) ** self.p))


def atom_grid(center, radius, per_radius=32, margin=4.0):
    """Smallest power-of-two grid with spacing r/per_radius holding B(x0, margin*r)."""
    center = np.atleast_1d(np.asarray(center, float))
    h = radius / per_radius
    reach = float(np.max(np.abs(center))) + margin * radius
    points = 1 << max(4, int(math.ceil(math.log2(2.0 * reach / h))))
    return Grid(points * h / 2.0, points, center.size)


def _monomials(coords, degree):
    n = len(coords)
    alphas = [a for d in range(degree + 1) for a in product(range(d + 1), repeat=n) if sum(a) == d]
    return alphas, np.stack([np.prod([c ** e for c, e in zip(coords, a)], axis=0)
                             for a in alphas], axis=1)


def _bump(t2):
    out = np.zeros_like(t2)
    inside = t2 < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - t2[inside]))
    return out


def _random_profile(rng, coords, modes=4, max_freq=4.0):
    n = len(coords)
    vals = np.full(coords[0].shape, rng.normal())
    for _ in range(modes):
        w = rng.uniform(-max_freq, max_freq, n)
        vals = vals + rng.normal() * np.cos(sum(wa * c for wa, c in zip(w, coords))
                                             + rng.uniform(0, 2 * np.pi))
    return vals


def make_atom(center, radius, p, seed, grid, index=0, profile="smooth", max_retries=10):
    """Random atom on B(center, radius) sampled on ``grid``.

    A random smooth field q is drawn on the ball and its weighted L2
    projection onto polynomials of degree <= d is removed, a = w (q - P q),
    with w a smooth bump ("smooth") or the indicator of the ball ("sharp").
    The result is rescaled so that max|a| = |B|^{-1/p}.
    """
    center = np.atleast_1d(np.asarray(center, float))
    n = grid.dim
    if center.size != n:
        raise ValueError("center dimension does not match the grid")
    if np.any(np.abs(center) + 4.0 * radius > grid.half_width + 1e-12):
        raise ValueError("the ball needs a margin of 3r inside the grid box")
    if profile not in ("smooth", "sharp"):
        raise ValueError(f"unknown atom profile {profile!r}")
    d = moment_order(n, p)
    coords = [(m - c) / radius for m, c in zip(grid.mesh(), center)]
    t2 = sum(c ** 2 for c in coords)
    mask = t2 < 1.0
    local = [c[mask] for c in coords]
    weight = _bump(t2[mask]) if profile == "smooth" else np.ones(int(mask.sum()))
    _, V = _monomials(local, d)
    sw = np.sqrt(weight)
    for attempt in range(max_retries + 1):
        rng = substream(seed, "atom", index, attempt)
        q = _random_profile(rng, local)
        coef = np.linalg.lstsq(V * sw[:, None], q * sw, rcond=None)[0]
        resid = q - V @ coef
        # one refinement step keeps the discrete moments at rounding level
        resid -= V @ np.linalg.lstsq(V * sw[:, None], resid * sw, rcond=None)[0]
        vals = weight * resid
        if np.linalg.norm(vals) >= 1e-6 * np.linalg.norm(weight * q):
            break
    else:
        raise DegenerateAtomError(f"{max_retries} retries produced degenerate profiles")
    vals *= ball_volume(n, radius) ** (-1.0 / p) / np.max(np.abs(vals))
    samples = np.zeros(grid.shape, dtype=complex)
    samples[mask] = vals
    return Atom(center, radius, p, GridFunction(grid, samples))


@dataclass
class AtomCheck:
    size_ratio: float
    moment_ratio: float
    support_ok: bool
    size_pass: bool
    moment_pass: bool
    size_tol: float
    moment_tol: float

    @property
    def passed(self):
        return self.size_pass and self.moment_pass and self.support_ok

    @property
    def moment_margin(self):
        """Tolerance over worst normalized moment (inf when all vanish exactly)."""
        return math.inf if self.moment_ratio == 0 else self.moment_tol / self.moment_ratio


def verify_atom(atom, size_tol=SIZE_TOL, moment_tol=MOMENT_TOL):
    """Check size, cancellation (centred moments) and support by grid quadrature."""
    g = atom.samples.grid
    vals = atom.samples.samples
    coords = atom.scaled_coords()
    inside = sum(c ** 2 for c in coords) < 1.0
    sup = float(np.max(np.abs(vals)))
    size_ratio = sup / atom.size_bound
    worst = 0.0
    if sup > 0:
        _, V = _monomials([c[inside] for c in coords], atom.moment_order)
        # int (x-x0)^a a dx = r^{|a|} h^n sum t^a a; normalize by r^{|a|+n} sup|a|
        moments = g.cell_volume * np.abs(V.T @ vals[inside]) / (atom.radius ** atom.dim * sup)
        worst = float(moments.max())
    return AtomCheck(size_ratio, worst, bool(np.all(vals[~inside] == 0)),
                     size_ratio <= 1.0 + size_tol, worst <= moment_tol, size_tol, moment_tol)


# ---------------------------------------------------------------- images

def _atom_box(atom):
    """Axes of the grid sub-box holding the ball, and the atom values on it."""
    g = atom.samples.grid
    axis = g.axis()
    sel = [np.nonzero(np.abs(axis - c) < atom.radius)[0] for c in atom.center]
    block = atom.samples.samples[np.ix_(*sel)]
    return [axis[s] for s in sel], block


def atom_coefficients(kspec, atom, window=None):
    """Blocks (l, j) -> (per-axis k, <a, Psi^l_{j,k}>) for the effective wavelets."""
    window = window or kspec.window
    axes, block = _atom_box(atom)
    g = atom.samples.grid
    n = g.dim
    out = {}
    for l in window.l_set:
        terms = kspec.psi.member(l).terms
        for j in window.scales:
            s = 2.0 ** (-j)
            ks = []
            for a in range(n):
                lo = min(s * axes[a][0] + t.shifts[a] - t.profiles[a].center - t.profiles[a].reach()
                         for t in terms)
                hi = max(s * axes[a][-1] + t.shifts[a] - t.profiles[a].center + t.profiles[a].reach()
                         for t in terms)
                ks.append(np.arange(max(math.floor(lo), -window.k_max),
                                    min(math.ceil(hi), window.k_max) + 1))
            if any(k.size == 0 for k in ks):
                continue
            total = 0.0
            for t in terms:
                mats = [np.conj(t.profiles[a](s * axes[a][:, None] - ks[a][None, :].astype(float)
                                              + t.shifts[a]))
                        for a in range(n)]
                if n == 1:
                    c = mats[0].T @ block
                else:
                    c = mats[0].T @ block @ mats[1]
                total = total + np.conj(t.coefficient) * c
            out[(l, j)] = (ks, g.cell_volume * 2.0 ** (-n * j / 2.0) * total)
    return out


def _weighted(kspec, blocks):
    if kspec.weights is None:
        return blocks
    return {key: (ks, vals * kspec.weights.block(key[0], key[1], ks))
            for key, (ks, vals) in blocks.items()}


def _support_interval(profile, ks, reach):
    """Arguments t outside this interval give |phi(t - k)| below tolerance for every k."""
    return ks[0] + profile.center - reach - 1.0, ks[-1] + profile.center + reach + 1.0


def synthesize_box(kspec, blocks, axes):
    """Sum of coefficient * phi^l_{j,k} on the tensor grid spanned by ``axes``."""
    n = len(axes)
    out = np.zeros(tuple(len(a) for a in axes), dtype=complex)
    for (l, j), (ks, vals) in blocks.items():
        s = 2.0 ** (-j)
        profiles = kspec.phi.member(l).terms[0].profiles
        sel = []
        for a in range(n):
            lo, hi = _support_interval(profiles[a], ks[a], kspec.reach)
            sel.append(np.nonzero((s * axes[a] >= lo) & (s * axes[a] <= hi))[0])
        if any(x.size == 0 for x in sel):
            continue
        mats = [profiles[a](s * axes[a][sel[a], None] - ks[a][None, :].astype(float))
                for a in range(n)]
        scale = 2.0 ** (-n * j / 2.0)
        if n == 1:
            out[sel[0]] += scale * (mats[0] @ vals)
        else:
            out[np.ix_(sel[0], sel[1])] += scale * (mats[0] @ vals @ mats[1].T)
    return out


def synthesize_points(kspec, blocks, points):
    """Sum of coefficient * phi^l_{j,k} at scattered points (rows of ``points``)."""
    points = np.asarray(points, float).reshape(len(points), -1)
    n = points.shape[1]
    out = np.zeros(points.shape[0], dtype=complex)
    for (l, j), (ks, vals) in blocks.items():
        s = 2.0 ** (-j)
        profiles = kspec.phi.member(l).terms[0].profiles
        live = np.ones(points.shape[0], dtype=bool)
        for a in range(n):
            lo, hi = _support_interval(profiles[a], ks[a], kspec.reach)
            live &= (s * points[:, a] >= lo) & (s * points[:, a] <= hi)
        if not live.any():
            continue
        pts = points[live]
        mats = [profiles[a](s * pts[:, a:a + 1] - ks[a][None, :].astype(float)) for a in range(n)]
        scale = 2.0 ** (-n * j / 2.0)
        if n == 1:
            out[live] += scale * (mats[0] @ vals)
        else:
            out[live] += scale * np.sum((mats[0] @ vals) * mats[1], axis=1)
    return out


@dataclass
class AtomImageReport:
    p: float
    radius: float
    near: float
    far: float
    tail: float
    holder_ratio: float
    radii: np.ndarray
    profile: np.ndarray
    exponent: float
    target: float
    fit_points: int
    partial: bool
    l2_coefficients: float
    atom_integral: float

    @property
    def total(self):
        return self.near + self.far

    @property
    def quasi_norm(self):
        return self.total ** (1.0 / self.p)

    @property
    def holder_pass(self):
        return self.holder_ratio <= 1.0 + HOLDER_TOL

    @property
    def exponent_pass(self):
        """Fitted slope at most -(n+k) + 0.15 (n+k)."""
        return self.fit_points >= 3 and self.exponent <= self.target + 0.15 * abs(self.target)

    @property
    def exponent_close(self):
        """Fitted slope within 15% of -(n+k)."""
        return self.fit_points >= 3 and abs(self.exponent - self.target) <= 0.15 * abs(self.target)

    def row(self, atom_id, center):
        return {"atom": atom_id, "center": " ".join(f"{c:.17g}" for c in center),
                "radius": self.radius, "p": self.p, "near": self.near, "far": self.far,
                "quasi_norm": self.quasi_norm, "exponent": self.exponent,
                "holder_pass": self.holder_pass, "exponent_pass": self.exponent_pass,
                "partial": self.partial}


def _shell_axes(center, half, cells):
    step = 2.0 * half / cells
    return [c - half + step * (np.arange(cells) + 0.5) for c in center], step


def _annulus_points(center, rho, radial, angles):
    """Points with rho <= |x - x0| < 2 rho: ``radial`` radii times ``angles`` directions."""
    radii = rho * 2.0 ** (np.arange(radial) / radial)
    if center.size == 1:
        return np.concatenate([center[0] - radii, center[0] + radii]).reshape(-1, 1)
    th = 2.0 * np.pi * np.arange(angles) / angles
    rr, tt = np.meshgrid(radii, th, indexing="ij")
    return np.stack([center[0] + (rr * np.cos(tt)).ravel(),
                     center[1] + (rr * np.sin(tt)).ravel()], axis=1)


def atom_image_report(kspec, atom, window=None, shells=8, cells=64, profile_steps=14, angles=32,
                      radial=None):
    """Near/far p-quasi-norm integrals of Ta and the far-field decay exponent.

    near  h^n sum over grid nodes in B* = B(x0, 2r)
    far   the rest of the near box plus dyadic cube shells up to 2r 2^shells,
          cell-centred sums, and a geometric tail from the last two shells
    The far-field profile at rho = 2r .. 2r 2^(profile_steps-1) is the maximum of
    |Ta| over the dyadic annulus rho <= |x-x0| < 2 rho, so that log-periodic
    zeros of the kernel cannot bias the fitted exponent.
    """
    window = window or kspec.window
    n, r, p, x0 = atom.dim, atom.radius, atom.p, atom.center
    blocks = _weighted(kspec, atom_coefficients(kspec, atom, window))
    l2_coeff = math.sqrt(sum(float(np.sum(np.abs(v) ** 2)) for _, v in blocks.values()))
    g = atom.samples.grid
    axis = g.axis()
    near_axes = [axis[np.abs(axis - c) <= 2.0 * r] for c in x0]
    vals = np.abs(synthesize_box(kspec, blocks, near_axes))
    dist2 = sum(d ** 2 for d in np.meshgrid(*[a - c for a, c in zip(near_axes, x0)], indexing="ij"))
    in_ball = dist2 < (2.0 * r) ** 2
    hv = g.cell_volume
    near = float(hv * np.sum(vals[in_ball] ** p))
    far = float(hv * np.sum(vals[~in_ball] ** p))
    ball_measure = hv * int(in_ball.sum())
    l2_ball = math.sqrt(hv * float(np.sum(vals[in_ball] ** 2)))
    holder = near / (ball_measure ** (1.0 - p / 2.0) * l2_ball ** p) if l2_ball > 0 else 0.0
    shell_sums = []
    for i in range(1, shells + 1):
        half = 2.0 * r * 2.0 ** i
        axes, step = _shell_axes(x0, half, cells)
        box = np.abs(synthesize_box(kspec, blocks, axes))
        inner = np.ones(box.shape, dtype=bool)
        for a in range(n):
            shape = [1] * n
            shape[a] = cells
            inner = inner & (np.abs(axes[a] - x0[a]) < half / 2.0).reshape(shape)
        shell_sums.append(float(step ** n * np.sum(box[~inner] ** p)))
    tail = 0.0
    partial = False
    if len(shell_sums) >= 2 and shell_sums[-2] > 0:
        q = shell_sums[-1] / shell_sums[-2]
        if q < 1.0:
            tail = shell_sums[-1] * q / (1.0 - q)
        else:
            partial = True
    far += sum(shell_sums) + tail
    # the window's coarsest scale must see the outermost shell
    if 2.0 * r * 2.0 ** shells > 2.0 ** window.j_max * kspec.reach:
        partial = True
    radii = 2.0 * r * 2.0 ** np.arange(profile_steps)
    radial = radial or (16 if n == 1 else 4)
    profile = np.array([float(np.max(np.abs(synthesize_points(
        kspec, blocks, _annulus_points(x0, rho, radial, angles))))) for rho in radii])
    # fit until |Ta| drops below ten times the tabulation noise floor
    floor = 10.0 * NOISE_FLOOR * float(vals.max()) if vals.size else 0.0
    keep = profile > floor
    k = decay_index(n, p)
    exponent = fit_slope(radii[keep], profile[keep]) if keep.sum() >= 2 else math.nan
    return AtomImageReport(p, r, near, far, tail, holder, radii, profile, exponent, -(n + k),
                           int(keep.sum()), partial, l2_coeff, atom.quasi_norm_integral())


def atom_window(base, radius):
    """The window ``base`` shifted to the atom's dyadic scale s = round(log2 r)."""
    s = int(round(math.log2(radius)))
    return type(base)(base.j_min + s, base.j_max + s, base.k_max, base.l_set)


@dataclass
class SweepResult:
    rows: list
    reports: list

    @property
    def quasi_norms(self):
        return np.array([rep.quasi_norm for rep in self.reports])

    @property
    def spread(self):
        q = self.quasi_norms
        return float(q.max() / q.min())

    @property
    def exponents(self):
        return np.array([rep.exponent for rep in self.reports])


def atom_sweep(kspec, p, count, seed, radius_range=(-4, 2), per_radius=32, profile="smooth",
               base_window=None, **report_kw):
    """Random atoms with log2-radii uniform in ``radius_range`` and centres within
    2^s of the origin; each image uses ``base_window`` shifted to the atom's scale."""
    base_window = base_window or kspec.window
    n = kspec.dim
    rows, reports = [], []
    for i in range(count):
        rng = substream(seed, "atom-placement", i)
        radius = 2.0 ** rng.uniform(*radius_range)
        s = int(round(math.log2(radius)))
        center = 2.0 ** s * rng.uniform(-1.0, 1.0, n)
        grid = atom_grid(center, radius, per_radius)
        atom = make_atom(center, radius, p, seed, grid, index=i, profile=profile)
        rep = atom_image_report(kspec, atom, atom_window(base_window, radius), **report_kw)
        rows.append(rep.row(i, center))
        reports.append(rep)
    return SweepResult(rows, reports)


SWEEP_COLUMNS = ["atom", "center", "radius", "p", "near", "far", "quasi_norm", "exponent",
                 "holder_pass", "exponent_pass", "partial"]


def write_sweep_csv(rows, path, append=False):
    path = Path(path)
    new = not (append and path.exists())
    with open(path, "a" if append else "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        if new:
            writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
