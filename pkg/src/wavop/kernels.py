"""Kernels K(x, y) = sum w_{j,k} phi_{j,k}(x) conj(Psi_{j,k}(y)) and their decay.

Psi is the effective wavelet that the operator pairs with f: the reflected
conjugate measure convolved with psi, whose spectrum is conj(mu^) psi^.
Kernel sums are truncated to a scale window and, at each scale, to the
integer translates within ``reach`` of the two points.
"""
import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .measures import BorelMeasure, validate_measure
from .wavelets import (BandProfile, MotherFamily, SeparableFunction, SeparableTerm,
                       UnsupportedOrderError, _as_alpha, fit_slope, multi_indices)

CONSTANT_BLOCK_KINDS = ("ones", "alternating", "scale-table")
KERNEL_KINDS = ("plain", "density-convolved", "atom-combined", "tensor-singular", "mixed")


class InadmissibleMeasureError(ValueError):
    pass


class NearDiagonalError(ValueError):
    pass


# ---------------------------------------------------------------- effective wavelets

@dataclass
class EffectiveFamily:
    """Per-member effective wavelets; usable wherever a family is expected."""
    dim: int
    kind: str
    members: list
    regularity: int
    source: dict = field(default_factory=dict)

    @property
    def count(self):
        return len(self.members)

    def member(self, l):
        return self.members[l - 1]


def _classify(mu):
    parts = []
    if mu.density is not None:
        parts.append("density-convolved")
    if mu.singular is not None:
        parts.append("tensor-singular")
    if mu.atoms:
        plain = (len(mu.atoms) == 1 and np.all(mu.atoms[0][1] == 0) and mu.atoms[0][0] == 1)
        parts.append("plain" if plain and not parts else "atom-combined")
    return parts[0] if len(parts) == 1 else "mixed"


def _conj_spectrum(density):
    """xi -> conj(g^(xi)) for a 1-D density."""
    return lambda xi: np.conj(density.fourier(np.asarray(xi, float).reshape(-1, 1)))


def effective_wavelet(measure, family, N=None, eps=None, validate=True, psi_tilde=None):
    """Effective wavelets conj-reflected(mu) * psi^l for every member of ``family``.

    density part    (conj g reflected) * psi, via the spectrum conj(g^) psi^
    atoms           sum conj(c_i) psi(. + x_i)
    hyperplane part (conj h reflected * p_1)(y') p_2(y''), with p_2 replaced by
                    ``psi_tilde`` when given
    """
    if measure.dim != family.dim:
        raise ValueError("measure and family dimensions differ")
    N = family.regularity if N is None else N
    eps = family.epsilon if eps is None else eps
    if validate:
        report = validate_measure(measure, N, eps)
        if not report.passed:
            raise InadmissibleMeasureError("; ".join(report.messages))
    n = family.dim
    factor_cache = {}

    def convolved(profile, density):
        key = (id(profile), id(density))
        if key not in factor_cache:
            real = profile.real and _is_real_density(density)
            factor_cache[key] = profile.with_multiplier(
                _conj_spectrum(density), label=f"{profile.label}*{type(density).__name__}",
                real=real)
        return factor_cache[key]

    members = []
    for l in range(1, family.count + 1):
        base = family.member(l)
        if len(base.terms) != 1:
            raise ValueError("effective wavelets need single-term mother members")
        profiles = base.terms[0].profiles
        terms = []
        if measure.density is not None:
            factors = measure.density.axis_factors() if n > 1 else [measure.density]
            if factors is None:
                raise ValueError("dimension-2 kernels need a separable density (gaussian or box)")
            terms.append(SeparableTerm(1.0, tuple(convolved(profiles[a], factors[a])
                                                  for a in range(n)), (0.0,) * n))
        for c, x in measure.atoms:
            terms.append(SeparableTerm(np.conj(c), profiles, tuple(float(v) for v in x)))
        if measure.singular is not None:
            h = measure.singular.h
            second = profiles[1] if psi_tilde is None else psi_tilde
            terms.append(SeparableTerm(1.0, (convolved(profiles[0], h), second), (0.0, 0.0)))
        members.append(SeparableFunction(n, terms, label=f"effective[{base.label}]"))
    return EffectiveFamily(n, _classify(measure), members, family.regularity,
                           {"measure_parts": _classify(measure)})


def _is_real_density(density):
    center = getattr(density, "center", None)
    return True if center is None else bool(np.all(np.asarray(center) == 0))


# ---------------------------------------------------------------- kernel evaluation

@dataclass
class KernelSpec:
    phi: MotherFamily
    psi: object
    window: object
    weights: object = None
    reach: float = None

    def __post_init__(self):
        if self.reach is None:
            self.reach = max(p.reach() for l in range(1, self.phi.count + 1)
                             for p in self.phi.member(l).terms[0].profiles)
        offsets = [abs(s - p.center) for l in range(1, self.psi.count + 1)
                   for t in self.psi.member(l).terms for p, s in zip(t.profiles, t.shifts)]
        # beyond this per-axis gap every product phi(u-k) Psi(v-k) is below tolerance
        self.skip_distance = 2.0 * self.reach + max(offsets) + 2.0
        if self.weights is not None:
            sup = self.weights.sup_norm(self.window, self.phi.dim)
            if sup > 1.0:
                self.weights = self.weights.scaled(1.0 / sup)

    @property
    def dim(self):
        return self.phi.dim


@dataclass
class KernelValue:
    value: complex
    absolute: float
    pivot: int
    window_ok: bool


def pivot_scale(distance):
    """Integer l with 2^l <= distance < 2^(l+1)."""
    return int(math.floor(math.log2(distance)))


def _orders(alpha, dim, limit):
    alpha = _as_alpha(alpha, dim)
    if sum(alpha) > limit:
        raise UnsupportedOrderError(f"order {alpha} exceeds supported regularity {limit}")
    return alpha


def kernel_derivative_eval(spec, side, order, x, y):
    """Term-wise differentiated kernel; ``side`` is "x" or "y"."""
    n = spec.dim
    x = np.atleast_1d(np.asarray(x, float))
    y = np.atleast_1d(np.asarray(y, float))
    dist = float(np.linalg.norm(x - y))
    if dist <= 1e-6:
        raise NearDiagonalError(f"points are {dist:.2e} apart; the kernel is evaluated off the diagonal")
    if side not in ("x", "y"):
        raise ValueError("side must be 'x' or 'y'")
    limit = spec.phi.regularity if side == "x" else spec.psi.regularity
    alpha = _orders(order, n, limit)
    ax = alpha if side == "x" else (0,) * n
    ay = alpha if side == "y" else (0,) * n
    total = 0.0 + 0.0j
    absolute = 0.0
    w = spec.window
    constant_blocks = spec.weights is None or spec.weights.kind in CONSTANT_BLOCK_KINDS
    for j in w.scales:
        s = 2.0 ** (-j)
        u, v = s * x, s * y
        if np.max(np.abs(u - v)) > spec.skip_distance:
            continue
        scale = 2.0 ** (-n * j) * s ** sum(alpha)
        for l in w.l_set:
            profiles = spec.phi.member(l).terms[0].profiles
            # translates near u only: phi(u - k) is below tolerance elsewhere
            ks = [np.arange(max(math.floor(u[a] - p.center - spec.reach), -w.k_max),
                            min(math.ceil(u[a] - p.center + spec.reach), w.k_max) + 1)
                  for a, p in enumerate(profiles)]
            if any(k.size == 0 for k in ks):
                continue
            A = [p(u[a] - ks[a].astype(float), ax[a]) for a, p in enumerate(profiles)]
            terms = spec.psi.member(l).terms
            B = [(term.coefficient,
                  [term.profiles[a](v[a] - ks[a].astype(float) + term.shifts[a], ay[a])
                   for a in range(n)]) for term in terms]
            if constant_blocks:
                wv = 1.0 if spec.weights is None else complex(
                    spec.weights.block(l, j, [k[:1] for k in ks]).flat[0])
                val = sum(np.conj(c) * math.prod(np.dot(A[a], np.conj(b[a])) for a in range(n))
                          for c, b in B)
                total += scale * wv * val
                if len(B) == 1:
                    c, b = B[0]
                    mag = abs(c) * math.prod(float(np.dot(np.abs(A[a]), np.abs(b[a])))
                                             for a in range(n))
                else:
                    G = sum(c * _outer(b) for c, b in B)
                    mag = float(np.sum(np.abs(_outer(A)) * np.abs(G)))
                absolute += abs(scale) * abs(wv) * mag
                continue
            F = _outer(A)
            G = sum(c * _outer(b) for c, b in B)
            weights = spec.weights.block(l, j, ks)
            total += scale * np.sum(weights * F * np.conj(G))
            absolute += abs(scale) * float(np.sum(np.abs(weights) * np.abs(F) * np.abs(G)))
    piv = pivot_scale(dist)
    return KernelValue(complex(total), absolute, piv, w.j_min <= piv <= w.j_max)


def kernel_eval(spec, x, y):
    return kernel_derivative_eval(spec, "x", None if spec.dim == 1 else (0,) * spec.dim, x, y) \
        if spec.dim > 1 else kernel_derivative_eval(spec, "x", 0, x, y)


def _outer(vectors):
    out = vectors[0]
    for v in vectors[1:]:
        out = np.multiply.outer(out, v)
    return out


# ---------------------------------------------------------------- decay scans

def scan_directions(dim):
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    d = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -1.0]])
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def default_base_points(dim):
    if dim == 1:
        return np.array([[0.0], [0.37], [-0.81], [1.53]])
    return np.array([[0.23, -0.41], [-0.67, 0.38]])


@dataclass
class DecayReport:
    side: str
    order: int
    dim: int
    rows: list
    octave_sups: dict
    sup: float
    slope: float
    spread: float
    target: float
    slope_pass: bool
    spread_pass: bool
    window_insufficient: bool
    tolerance: float = 0.15

    @property
    def passed(self):
        return self.slope_pass and self.spread_pass

    def relative_slope_error(self):
        return abs(self.slope - self.target) / abs(self.target)

    def summary(self):
        return {"side": self.side, "order": self.order, "dim": self.dim, "sup": self.sup,
                "slope": self.slope, "target_slope": self.target, "spread": self.spread,
                "octave_sups": {str(k): v for k, v in sorted(self.octave_sups.items())},
                "slope_pass": self.slope_pass, "spread_pass": self.spread_pass,
                "window_insufficient": self.window_insufficient, "pairs": len(self.rows),
                "slope_tolerance": self.tolerance}


def decay_scan(spec, side, order, separations, directions=None, base_points=None,
               tolerance=0.15, spread_limit=4.0):
    """Scan |d^order K| over pairs (x, x + r theta).

    ``order`` is the total derivative order; each pair records the maximum over
    the multi-indices of that order. The scan passes when the per-octave sups
    of r^{n+order}|d K| stay within ``spread_limit`` of each other and the
    log-log slope of the per-separation maximum is at most -(n+order)+tolerance.
    """
    n = spec.dim
    seps = np.asarray(sorted(separations), float)
    if seps.min() < 2.0 ** -3 - 1e-12 or seps.max() > 2.0 ** 3 + 1e-12:
        raise ValueError("separations must lie in [2^-3, 2^3]")
    directions = scan_directions(n) if directions is None else np.asarray(directions, float)
    base_points = default_base_points(n) if base_points is None else np.asarray(base_points, float)
    alphas = multi_indices(n, order)
    rows = []
    per_sep = []
    insufficient = False
    for r in seps:
        best = 0.0
        for b, x in enumerate(base_points):
            for d_id, theta in enumerate(directions):
                y = x + r * theta
                val = 0.0
                for alpha in alphas:
                    kv = kernel_derivative_eval(spec, side, alpha if n > 1 else alpha[0], x, y)
                    val = max(val, abs(kv.value))
                    insufficient |= not kv.window_ok
                rows.append({"side": side, "order": order, "separation": float(r),
                             "direction": d_id + len(directions) * b, "raw": val,
                             "normalized": val * r ** (n + order)})
                best = max(best, val)
        per_sep.append(best)
    per_sep = np.asarray(per_sep)
    octaves = {}
    for row in rows:
        o = int(math.floor(math.log2(row["separation"]) + 1e-9))
        octaves[o] = max(octaves.get(o, 0.0), row["normalized"])
    if len(octaves) > 1 and max(octaves) == 3:
        # the right endpoint 2^3 closes the last octave rather than opening a new one
        octaves[2] = max(octaves[2], octaves.pop(3))
    vals = np.array(list(octaves.values()))
    spread = float(vals.max() / vals.min()) if vals.min() > 0 else math.inf
    slope = fit_slope(seps, per_sep)
    target = -(n + order)
    return DecayReport(side, order, n, rows, octaves, float(max(octaves.values())), slope, spread,
                       target, bool(slope <= target + tolerance), bool(spread <= spread_limit),
                       insufficient, tolerance)


def write_decay_report(reports, stem):
    """CSV rows (side, order, |x-y|, direction id, raw, normalized) plus a JSON summary."""
    stem = Path(stem)
    with open(stem.with_suffix(".csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["side", "order", "separation", "direction", "raw", "normalized"])
        for rep in reports:
            for row in rep.rows:
                writer.writerow([row["side"], row["order"], repr(row["separation"]),
                                 row["direction"], repr(row["raw"]), repr(row["normalized"])])
    stem.with_suffix(".json").write_text(
        json.dumps([rep.summary() for rep in reports], indent=2, sort_keys=True))


def dyadic_separations(count_per_octave=4, lo=-3, hi=3):
    steps = (hi - lo) * count_per_octave
    return 2.0 ** (lo + np.arange(steps + 1) / count_per_octave)


# ---------------------------------------------------------------- convolved decay

def spectrum_of(obj):
    """Fourier transform of a 1-D object: band profile, density or callable."""
    if isinstance(obj, BandProfile):
        return obj.spectrum
    if hasattr(obj, "fourier"):
        return lambda xi: obj.fourier(np.asarray(xi, float).reshape(-1, 1))
    return obj


def _band_of(obj, default):
    if isinstance(obj, BandProfile):
        return obj.band, obj.breakpoints
    sigma = getattr(obj, "sigma", None)
    if sigma is not None:
        return 12.0 / sigma, [0.0, 12.0 / sigma]
    return default, [0.0]


@dataclass
class ConvolvedDecay:
    sup: float
    peak_location: float
    points: np.ndarray
    values: np.ndarray
    normalized: np.ndarray


def convolved_decay_check(g, psi, j, k, l, m, scan=None, eps=0.5, dim=1, band=math.inf):
    """Normalized sup of |(g_{j,k} * psi_{l,m})(x)| (1+2^{-j}|x - 2^j k - 2^l m|)^{n+eps} / 2^{(l-j)/2}.

    The convolution is evaluated as the inverse Fourier integral of
    2^{(j+l)/2} g^(2^j xi) psi^(2^l xi) exp(-i xi (2^j k + 2^l m)) by composite
    Gauss-Legendre quadrature.
    """
    if l > j:
        raise ValueError(f"the bound needs l <= j, got l={l}, j={j}")
    centre = 2.0 ** j * k + 2.0 ** l * m
    if scan is None:
        # coarse over the tails, resolving 2^l across the core of g_{j,k}
        span = 2.0 ** j * 12.0
        core = 2.0 ** j + 2.0 ** l * 16.0
        fine = centre + np.arange(-core, core, 2.0 ** l / 16.0)
        scan = np.union1d(centre + np.linspace(-span, span, 801), fine)
    scan = np.asarray(scan, float)
    values = convolution_values(g, psi, j, k, l, m, scan, band)
    weight = (1.0 + 2.0 ** (-j) * np.abs(scan - centre)) ** (dim + eps)
    normalized = np.abs(values) * weight / 2.0 ** ((l - j) / 2.0)
    i = int(np.argmax(np.abs(values)))
    return ConvolvedDecay(float(normalized.max()), float(scan[i]), scan, values, normalized)


def convolution_values(g, psi, j, k, l, m, x, band=math.inf, nodes=24):
    g_hat, p_hat = spectrum_of(g), spectrum_of(psi)
    gb, gbp = _band_of(g, band)
    pb, pbp = _band_of(psi, band)
    limit = min(gb * 2.0 ** (-j), pb * 2.0 ** (-l))
    if not math.isfinite(limit):
        raise ValueError("one of the two factors must be band-limited or Gaussian")
    cuts = sorted({b * 2.0 ** (-j) for b in gbp if b * 2.0 ** (-j) <= limit} |
                  {b * 2.0 ** (-l) for b in pbp if b * 2.0 ** (-l) <= limit} | {0.0, limit})
    centre = 2.0 ** j * k + 2.0 ** l * m
    rel = np.asarray(x, float) - centre
    out = np.empty(rel.shape, dtype=complex)
    # points grouped by distance so each group gets just enough frequency pieces
    dist = np.abs(rel)
    edge = max(float(dist.min()), 1.0)
    lower = 0.0
    while lower <= dist.max():
        upper = max(2.0 * lower, edge)
        group = (dist >= lower) & (dist < upper) if lower > 0 else dist < upper
        if np.any(group):
            xi, w = _frequency_nodes(cuts, upper + 1.0, nodes)
            w = w * g_hat(2.0 ** j * xi) * p_hat(2.0 ** l * xi) * 2.0 ** ((j + l) / 2.0) / (2.0 * np.pi)
            idx = np.nonzero(group)[0]
            for s0 in range(0, idx.size, 256):
                sel = idx[s0:s0 + 256]
                out[sel] = np.exp(1j * np.outer(rel[sel], xi)) @ w
        lower = upper
    return out


def _frequency_nodes(cuts, extent, nodes):
    gx, gw = np.polynomial.legendre.leggauss(nodes)
    xs, ws = [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        pieces = max(2, int(np.ceil((b - a) * extent / np.pi)))
        edges = np.linspace(a, b, pieces + 1)
        lo, hi = edges[:-1, None], edges[1:, None]
        for s_lo, s_hi in ((lo, hi), (-hi, -lo)):
            xs.append((0.5 * (s_hi - s_lo) * gx + 0.5 * (s_hi + s_lo)).ravel())
            ws.append((0.5 * (s_hi - s_lo) * gw).ravel())
    return np.concatenate(xs), np.concatenate(ws)
