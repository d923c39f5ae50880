"""Partial sums and bounds for the lattice series sum_{k != 0} |k|^{-(n+eps)}.

Two truncations are provided: the quadratic (cube) partial sum over
``0 < |k|_inf <= N`` and the circular (ball) partial sum over ``0 < |k| <= N``.
Both are accumulated shell by shell with ``math.fsum`` so the result does not
depend on platform summation order.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special


@dataclass(frozen=True)
class SeriesSpec:
    dimension: int
    epsilon: float
    exponent: float = field(init=False)

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.dimension!r}")
        if not (self.epsilon > 0) or not math.isfinite(self.epsilon):
            raise ValueError(f"epsilon must be positive and finite, got {self.epsilon!r}")
        object.__setattr__(self, "exponent", self.dimension + float(self.epsilon))


@dataclass(frozen=True)
class PartialSumResult:
    value: float
    cutoff: int
    mode: str


@dataclass(frozen=True)
class LimitEstimate:
    """Partial sum plus tail estimate, with the half-width of the tail uncertainty."""
    value: float
    partial: float
    tail: float
    uncertainty: float
    cutoff: int
    mode: str


def _spec(spec):
    if isinstance(spec, SeriesSpec):
        return spec
    n, eps = spec
    return SeriesSpec(int(n), float(eps))


def _shell_points(n, s):
    """Points with |k|_inf == s, lexicographic order."""
    if n == 1:
        return np.array([[-s], [s]], dtype=np.float64)
    r = np.arange(-s, s + 1)
    grids = np.meshgrid(*([r] * n), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    keep = np.max(np.abs(pts), axis=1) == s
    return pts[keep].astype(np.float64)


def _cube_shell_sum(n, a, s):
    """Sum of |k|^{-a} over the shell |k|_inf == s."""
    if n == 1:
        return 2.0 * s ** (-a)
    if n == 2:
        # orbit representatives (s, t), 0 <= t <= s, with multiplicities 4/8/4
        t = np.arange(0, s + 1, dtype=np.float64)
        vals = (s * s + t * t) ** (-a / 2.0)
        mult = np.full(s + 1, 8.0)
        mult[0] = 4.0
        mult[-1] = 4.0
        if s == 0:
            return 0.0
        return math.fsum(vals * mult)
    pts = _shell_points(n, s)
    return math.fsum(np.sum(pts * pts, axis=1) ** (-a / 2.0))


def quadratic_partial_sum(spec, N):
    """Sum of |k|^{-(n+eps)} over 0 < |k|_inf <= N."""
    spec = _spec(spec)
    N = int(N)
    if N < 1:
        raise ValueError("cutoff N must be >= 1")
    shells = [_cube_shell_sum(spec.dimension, spec.exponent, s) for s in range(1, N + 1)]
    return PartialSumResult(math.fsum(shells), N, "quadratic")


def circular_partial_sum(spec, N):
    """Sum of |k|^{-(n+eps)} over 0 < |k| <= N (Euclidean ball)."""
    spec = _spec(spec)
    N = int(N)
    if N < 1:
        raise ValueError("cutoff N must be >= 1")
    n, a = spec.dimension, spec.exponent
    if n == 1:
        return PartialSumResult(quadratic_partial_sum(spec, N).value, N, "circular")
    if n != 2:
        pts = np.concatenate([_shell_points(n, s) for s in range(1, N + 1)])
        r2 = np.sum(pts * pts, axis=1)
        return PartialSumResult(math.fsum(r2[r2 <= N * N] ** (-a / 2.0)), N, "circular")
    rows = []
    n2 = N * N
    for k1 in range(0, N + 1):
        m = math.isqrt(n2 - k1 * k1)
        k2 = np.arange(0, m + 1, dtype=np.float64)
        vals = (k1 * k1 + k2 * k2)
        if k1 == 0:
            vals = vals[1:]
            rows.append(2.0 * math.fsum(vals ** (-a / 2.0)))
        else:
            w = np.full(vals.shape, 4.0)
            w[0] = 2.0
            rows.append(math.fsum(w * vals ** (-a / 2.0)))
    return PartialSumResult(math.fsum(rows), N, "circular")


def _hurwitz_tail(a, N):
    # sum_{s > N} s^{-a}
    return float(special.zeta(a, N + 1))


def series_limit(spec, N=10_000, mode="quadratic"):
    """Estimate the full series from a partial sum and a shell-extrapolated tail."""
    spec = _spec(spec)
    n, eps, a = spec.dimension, spec.epsilon, spec.exponent
    N = int(N)
    if mode == "quadratic":
        partial = quadratic_partial_sum(spec, N).value
        # shell(s) ~ c s^{-(1+eps)}; the constant converges as O(s^-2)
        c_hi = _cube_shell_sum(n, a, N) * N ** (1.0 + eps)
        half = max(N // 2, 1)
        c_lo = _cube_shell_sum(n, a, half) * half ** (1.0 + eps)
        t = _hurwitz_tail(1.0 + eps, N)
        tail = c_hi * t
        unc = abs(c_hi - c_lo) * t / 3.0
    elif mode == "circular":
        partial = circular_partial_sum(spec, N).value
        area = 2.0 if n == 1 else 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)
        if n == 1:
            tail = 2.0 * _hurwitz_tail(a, N)
            unc = 0.0
        else:
            tail = area * N ** (n - a) / (a - n)
            unc = area * N ** (n - 1 - a)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return LimitEstimate(partial + tail, partial, tail, unc, N, mode)


def _inner_zeta_upper(s_exp, terms):
    """Rigorous upper bound for sum_{s>=1} s^{-s_exp} with its bracket width."""
    terms = int(terms)
    k = np.arange(terms, 0, -1, dtype=np.float64)
    partial = math.fsum(k ** (-s_exp))
    q = s_exp - 1.0
    # convex decreasing summand: midpoint rule bounds the tail from above,
    # trapezoid rule from below
    upper = (terms + 0.5) ** (-q) / q
    lower = (terms + 1.0) ** (-q) / q + 0.5 * (terms + 1.0) ** (-s_exp)
    return partial + upper, upper - lower


def series_closed_form_bound(spec, zeta_terms=200_000):
    """Closed-form upper bound 2^n n (1 + sum_{s>=1} s^{-1-eps/n})^n."""
    spec = _spec(spec)
    n = spec.dimension
    inner, gap = _inner_zeta_upper(1.0 + spec.epsilon / n, zeta_terms)
    if gap > 1e-8:
        raise ValueError(
            f"zeta_terms={zeta_terms} leaves a tail bracket of {gap:.3e} > 1e-8; increase it")
    return float(2 ** n * n * (1.0 + inner) ** n)


def lattice_shift_constant(spec):
    """Translation-uniform constant 1 + sum_{k != 0} n^{(n+eps)/2} |k|^{-(n+eps)}."""
    spec = _spec(spec)
    n, a = spec.dimension, spec.exponent
    lim = series_limit(spec, N=2000 if n > 1 else 10_000)
    return 1.0 + n ** (a / 2.0) * (lim.value + lim.uncertainty)


def uniform_lattice_decay_sum(x, spec, N):
    """Sum over |k|_inf <= N of (1 + |x - k|)^{-(n+eps)}."""
    spec = _spec(spec)
    n, a = spec.dimension, spec.exponent
    N = int(N)
    if N < 0:
        raise ValueError("cutoff N must be >= 0")
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.shape != (n,):
        raise ValueError(f"point must have {n} coordinates")
    shells = []
    for s in range(0, N + 1):
        pts = np.zeros((1, n)) if s == 0 else _shell_points(n, s)
        d = np.sqrt(np.sum((x - pts) ** 2, axis=1))
        shells.append(math.fsum((1.0 + d) ** (-a)))
    return math.fsum(shells)
