"""The wavelet-generated operator

    T f(x) = sum_{(l,j,k) in window} w^l_{j,k} <mu_j * f, psi^l_{j,k}> phi^l_{j,k}(x)

on sampled grids: analysis, weighted synthesis and the explicit L2 bound.
"""
import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product

import numpy as np

from .grids import GridFunction
from .measures import BorelMeasure, BoundaryMassError, convolve, dilate_measure
from .streams import hash_uniform
from .wavelets import (IndexWindow, MotherFamily, analysis_block, check_resolution,
                       synthesis_block)

WEIGHT_KINDS = ("ones", "alternating", "scale-table", "table", "random-sign", "random-l2")


class UnfilledCoefficientsError(ValueError):
    pass


@dataclass
class WeightRule:
    """Weights as a pure function of the index (l, j, k).

    kinds:
      ones         w = 1
      alternating  w = (-1)^j
      scale-table  w = values[j] (0 for scales not listed)
      table        w = values[(l, j, k...)] (0 elsewhere)
      random-sign  w = +-1 from a hash of (seed, l, j, k)
      random-l2    complex Gaussian from a hash, scaled to unit l2 norm on ``window``
    """
    kind: str = "ones"
    values: dict = field(default_factory=dict)
    seed: int = 0
    window: IndexWindow = None
    dim: int = 1

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise ValueError(f"unknown weight kind {self.kind!r}; expected one of {WEIGHT_KINDS}")
        if self.kind == "random-l2" and self.window is None:
            raise ValueError("random-l2 weights need the window they are normalized on")
        if self.kind == "scale-table":
            self.values = {int(j): complex(v) for j, v in self.values.items()}
        if self.kind == "table":
            self.values = {tuple(int(i) for i in key): complex(v) for key, v in self.values.items()}

    def _mesh(self, ks):
        return np.meshgrid(*ks, indexing="ij")

    def _raw_gaussian(self, l, j, mesh):
        comps = [np.asarray(m) for m in mesh]
        u1 = hash_uniform(self.seed, 1, l, j, *comps)
        u2 = hash_uniform(self.seed, 2, l, j, *comps)
        u3 = hash_uniform(self.seed, 3, l, j, *comps)
        u4 = hash_uniform(self.seed, 4, l, j, *comps)
        re = np.sqrt(-2.0 * np.log(u1)) * np.cos(2 * np.pi * u2)
        im = np.sqrt(-2.0 * np.log(u3)) * np.cos(2 * np.pi * u4)
        return (re + 1j * im) / np.sqrt(2.0)

    def block(self, l, j, ks):
        """Weights on the k-block spanned by the per-axis ranges ``ks``."""
        shape = tuple(len(k) for k in ks)
        if self.kind == "ones":
            return np.ones(shape, dtype=complex)
        if self.kind == "alternating":
            return np.full(shape, (-1.0) ** int(j), dtype=complex)
        if self.kind == "scale-table":
            return np.full(shape, self.values.get(int(j), 0.0), dtype=complex)
        mesh = self._mesh(ks)
        if self.kind == "random-sign":
            u = hash_uniform(self.seed, 0, l, j, *mesh)
            return np.where(u < 0.5, -1.0, 1.0).astype(complex)
        if self.kind == "random-l2":
            return self._raw_gaussian(l, j, mesh) / self._l2_raw
        out = np.zeros(shape, dtype=complex)
        for idx in product(*[range(s) for s in shape]):
            key = (int(l), int(j)) + tuple(int(ks[a][idx[a]]) for a in range(len(ks)))
            out[idx] = self.values.get(key, 0.0)
        return out

    @cached_property
    def _l2_raw(self):
        w = self.window
        ks = [np.arange(-w.k_max, w.k_max + 1)] * self.dim
        total = 0.0
        for l in w.l_set:
            for j in w.scales:
                total += float(np.sum(np.abs(self._raw_gaussian(l, j, self._mesh(ks))) ** 2))
        return math.sqrt(total)

    def l2_norm(self, window, dim):
        """l2 norm of the weights over the whole window."""
        per_scale = (2 * window.k_max + 1) ** dim
        if self.kind in ("ones", "alternating", "random-sign"):
            return math.sqrt(len(window.l_set) * len(window.scales) * per_scale)
        if self.kind == "scale-table":
            return math.sqrt(len(window.l_set) * per_scale *
                             sum(abs(self.values.get(j, 0.0)) ** 2 for j in window.scales))
        ks = [np.arange(-window.k_max, window.k_max + 1)] * dim
        return math.sqrt(sum(float(np.sum(np.abs(self.block(l, j, ks)) ** 2))
                             for l in window.l_set for j in window.scales))

    def sup_norm(self, window=None, dim=1):
        if self.kind in ("ones", "alternating", "random-sign"):
            return 1.0
        if self.kind == "scale-table":
            scales = window.scales if window is not None else self.values.keys()
            return max([abs(self.values.get(j, 0.0)) for j in scales] or [0.0])
        if self.kind == "table":
            return max([abs(v) for v in self.values.values()] or [0.0])
        window = window or self.window
        ks = [np.arange(-window.k_max, window.k_max + 1)] * dim
        return max(float(np.max(np.abs(self.block(l, j, ks))))
                   for l in window.l_set for j in window.scales)

    def scaled(self, factor):
        """Same rule times a positive constant (used for sup normalization)."""
        if self.kind in ("scale-table", "table"):
            return WeightRule(self.kind, {k: v * factor for k, v in self.values.items()},
                              self.seed, self.window, self.dim)
        if factor == 1.0:
            return self
        return ScaledWeightRule(self, factor)

    def to_dict(self):
        out = {"kind": self.kind, "seed": self.seed}
        if self.kind == "scale-table":
            out["values"] = {str(j): [v.real, v.imag] for j, v in sorted(self.values.items())}
        if self.kind == "table":
            out["values"] = [[list(k), [v.real, v.imag]] for k, v in sorted(self.values.items())]
        return out


class ScaledWeightRule:
    def __init__(self, base, factor):
        self.base, self.factor = base, float(factor)
        self.kind = base.kind

    def block(self, l, j, ks):
        return self.factor * self.base.block(l, j, ks)

    def l2_norm(self, window, dim):
        return self.factor * self.base.l2_norm(window, dim)

    def sup_norm(self, window=None, dim=1):
        return self.factor * self.base.sup_norm(window, dim)

    def scaled(self, factor):
        return ScaledWeightRule(self.base, self.factor * factor)

    def to_dict(self):
        out = self.base.to_dict()
        out["factor"] = self.factor
        return out


@dataclass
class CoefficientField:
    """Weights and inner products on a window, stored as per-(l, j) k-blocks.

    Only k-blocks whose members reach the sampling box are stored; all other
    inner products vanish to the tabulation tolerance.
    """
    window: IndexWindow
    dim: int
    weights: object
    blocks: dict = None

    @cached_property
    def l2_weight_norm(self):
        return self.weights.l2_norm(self.window, self.dim)

    @cached_property
    def sup_weight_norm(self):
        return self.weights.sup_norm(self.window, self.dim)

    @property
    def filled(self):
        return self.blocks is not None

    def weighted_blocks(self):
        if not self.filled:
            raise UnfilledCoefficientsError("coefficient values have not been analyzed")
        return {key: (ks, vals * self.weights.block(key[0], key[1], ks))
                for key, (ks, vals) in self.blocks.items()}

    def weighted_l2(self):
        return math.sqrt(sum(float(np.sum(np.abs(v) ** 2))
                             for _, v in self.weighted_blocks().values()))

    def value(self, l, j, k):
        ks, vals = self.blocks[(l, j)]
        pos = tuple(int(np.searchsorted(ks[a], k[a])) for a in range(self.dim))
        for a in range(self.dim):
            if pos[a] >= len(ks[a]) or ks[a][pos[a]] != k[a]:
                return 0.0
        return complex(vals[pos])

    def linear_combination(self, a, other, b):
        if self.blocks.keys() != other.blocks.keys():
            raise ValueError("coefficient fields cover different blocks")
        blocks = {key: (ks, a * vals + b * other.blocks[key][1])
                  for key, (ks, vals) in self.blocks.items()}
        return CoefficientField(self.window, self.dim, self.weights, blocks)


@dataclass
class OperatorSpec:
    measure: BorelMeasure
    analysis: MotherFamily
    synthesis: MotherFamily
    weights: object
    window: IndexWindow
    mode: str = "fft"

    def __post_init__(self):
        if not (self.measure.dim == self.analysis.dim == self.synthesis.dim):
            raise ValueError("measure and families must share the same dimension")
        for l in self.window.l_set:
            if not 1 <= l <= self.analysis.count:
                raise ValueError(f"window member l={l} outside [1, {self.analysis.count}]")

    @property
    def dim(self):
        return self.measure.dim

    def field(self, blocks=None):
        return CoefficientField(self.window, self.dim, self.weights, blocks)


def analyze(f, spec):
    """Inner products <mu_j * f, psi^l_{j,k}>; mu_j * f is computed once per scale."""
    check_resolution(f.grid, spec.window.j_min)
    blocks = {}
    for j in spec.window.scales:
        try:
            u = convolve(dilate_measure(spec.measure, j), f, mode=spec.mode)
        except BoundaryMassError as exc:
            raise BoundaryMassError(f"scale j={j}: {exc}") from exc
        for l in spec.window.l_set:
            blocks[(l, j)] = analysis_block(spec.analysis.member(l), u, j, spec.window.k_max)
    return spec.field(blocks)


def synthesize(coeffs, spec, grid):
    """Sum of w * value * phi^l_{j,k} over the window, in enumeration order."""
    out = np.zeros(grid.shape, dtype=complex)
    for l in spec.window.l_set:
        for j in spec.window.scales:
            if (l, j) not in (coeffs.blocks or {}):
                if not coeffs.filled:
                    raise UnfilledCoefficientsError("coefficient values have not been analyzed")
                continue
            ks, vals = coeffs.blocks[(l, j)]
            w = coeffs.weights.block(l, j, ks)
            out += synthesis_block(spec.synthesis.member(l), ks, w * vals, j, grid)
    return GridFunction(grid, out)


def apply_operator(f, spec):
    return synthesize(analyze(f, spec), spec, f.grid)


def l2_certificate(spec):
    """C = ‖w‖_{l2(window)} (‖g‖_1 + sum |c_i| + ‖h‖_1)."""
    return spec.weights.l2_norm(spec.window, spec.dim) * spec.measure.total_variation()
