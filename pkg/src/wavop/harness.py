"""Configuration-driven experiment runner.

A run reads one YAML file, executes one experiment kind and writes
``summary.json`` (inputs, measured constants and pass/fail criteria),
CSV detail files and ``timing.json`` (wall times and a timestamp, kept out
of the summary so that summaries are byte-identical across reruns).
"""
import copy
import csv
import json
import math
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml
from scipy import special

from . import atoms as atoms_mod
from .grids import Grid, wave_packets
from .kernels import (InadmissibleMeasureError, KernelSpec, convolved_decay_check, decay_scan,
                      dyadic_separations, effective_wavelet, write_decay_report)
from .lattice import (SeriesSpec, lattice_shift_constant, series_closed_form_bound, series_limit)
from .measures import (BorelMeasure, BoundaryMassError, MeasureConfigError, convolve, density_from_dict,
                       dilate_measure, measure_from_dict, measure_to_dict, validate_measure)
from .operator_core import WEIGHT_KINDS, OperatorSpec, WeightRule, apply_operator, l2_certificate
from .streams import substream
from .wavelets import (IndexWindow, SupportOverflowError, build_pair, build_system, gram_matrix,
                       parseval_defect)

SCHEMA_VERSION = 1
EXPERIMENT_KINDS = ("series", "ortho", "l2-bound", "kernel-decay", "hw-decay", "atom-sweep",
                    "transform")
MODES = ("fft", "direct", "both")

SCHEMA = {
    "kind": {"type": "str", "required": True, "choices": list(EXPERIMENT_KINDS)},
    "seed": {"type": "int", "required": True, "help": "unsigned 64-bit seed for every substream"},
    "dimension": {"type": "int", "default": 1, "choices": [1, 2]},
    "mode": {"type": "str", "default": "fft", "choices": list(MODES),
             "help": "convolution path for operator experiments"},
    "grid": {"half_width": {"type": "float", "default": 32.0},
             "points": {"type": "int", "default": 4096, "help": "power of two per axis"}},
    "window": {"j_min": {"type": "int", "default": -3}, "j_max": {"type": "int", "default": 3},
               "k_max": {"type": "int", "default": 64},
               "l_set": {"type": "list[int]", "default": "all members"}},
    "family": {"epsilon": {"type": "float", "default": 0.5},
               "regularity": {"type": "int", "default": 2},
               "resolution": {"type": "int", "default": 1024},
               "ramp": {"type": "str", "default": "beta7", "help": "poly or betaQ"},
               "synthesis_ramp": {"type": "str", "default": "same as ramp"}},
    "measure": {"dim": {"type": "int", "default": "dimension"},
                "density": {"type": "map", "help": "type: gaussian|box|rational-decay|file"},
                "atoms": {"type": "list[[c, x]]"},
                "singular": {"m": {"type": "int"}, "h": {"type": "map (density on R^m)"}}},
    "weights": {"kind": {"type": "str", "default": "ones", "choices": list(WEIGHT_KINDS)},
                "values": {"type": "map"}, "seed": {"type": "int", "default": "run seed"}},
    "p": {"type": "list[float]", "default": [1.0]},
    "samples": {"type": "int", "default": 10, "help": "random test functions"},
    "signal": {"freq_range": {"type": "[float, float]", "default": [2.0, 20.0],
                              "help": "angular frequencies of the random wave packets"},
               "radius": {"type": "float", "default": 2.0, "help": "packet centres lie within"}},
    "series": {"epsilon": {"type": "float", "default": 1.0},
               "cutoff": {"type": "int", "default": 10000}},
    "kernel": {"x_orders": {"type": "list[int]", "default": [0, 1]},
               "y_orders": {"type": "list[int]", "default": [0, 1, 2]},
               "per_octave": {"type": "int", "default": 4}},
    "hw": {"g": {"type": "map (1-D density)", "default": {"type": "box", "half_width": 0.5}},
           "j": {"type": "list[int]", "default": [0, 1]},
           "l": {"type": "list[int]", "default": [-3, -2, -1, 0]},
           "k": {"type": "list[int]", "default": [0, 4]},
           "m": {"type": "list[int]", "default": [0, 4]}},
    "atoms": {"count": {"type": "int", "default": 50},
              "radius_log2": {"type": "[float, float]", "default": [-4, 2]},
              "per_radius": {"type": "int", "default": 32},
              "window_offsets": {"type": "[int, int]", "default": [-4, 20]}},
    "out": {"type": "str", "default": "out"},
}


class ConfigError(ValueError):
    def __init__(self, path, message, line=None):
        self.path, self.line = path, line
        where = f"line {line}, " if line is not None else ""
        super().__init__(f"{where}field '{path}': {message}")


def schema_text():
    return yaml.safe_dump({"schema_version": SCHEMA_VERSION, "fields": SCHEMA}, sort_keys=False)


# ---------------------------------------------------------------- parsing

def _line_map(text):
    """Dotted field path -> 1-based line number."""
    out = {}

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                path = f"{prefix}.{key.value}" if prefix else str(key.value)
                out[path] = key.start_mark.line + 1
                walk(value, path)

    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return out
    walk(root, "")
    return out


@dataclass
class ExperimentConfig:
    raw: dict
    lines: dict = field(default_factory=dict)
    base_dir: Path = None

    def line(self, path):
        return self.lines.get(path)

    def error(self, path, message):
        return ConfigError(path, message, self.line(path))

    def get(self, path, default=None, kind=None):
        node = self.raw
        for part in path.split("."):
            if not isinstance(node, dict) or part not in node or node[part] is None:
                return default
            node = node[part]
        if kind is None:
            return node
        try:
            if kind == "int":
                if isinstance(node, bool) or float(node) != int(node):
                    raise ValueError
                return int(node)
            if kind == "float":
                return float(node)
            if kind == "ints":
                return [int(v) for v in node]
            if kind == "floats":
                return [float(v) for v in node]
        except (TypeError, ValueError):
            raise self.error(path, f"expected {kind}, got {node!r}") from None
        return node

    @property
    def kind(self):
        return self.raw["kind"]

    @property
    def seed(self):
        return int(self.raw["seed"])

    @property
    def dim(self):
        return self.get("dimension", 1, "int")


def parse_config(text, base_dir=None, seed_override=None, mode_override=None):
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError("<document>", f"invalid YAML: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None) from None
    if not isinstance(raw, dict):
        raise ConfigError("<document>", "the config must be a mapping")
    cfg = ExperimentConfig(raw, _line_map(text), Path(base_dir) if base_dir else None)
    if seed_override is not None:
        raw["seed"] = int(seed_override)
    if mode_override is not None:
        raw["mode"] = mode_override
    validate_config(cfg)
    return cfg


def load_config(path, seed_override=None, mode_override=None):
    path = Path(path)
    return parse_config(path.read_text(), path.parent, seed_override, mode_override)


def validate_config(cfg):
    raw = cfg.raw
    for key in raw:
        if key not in SCHEMA:
            raise cfg.error(key, "unknown field (see print-schema)")
    if raw.get("kind") not in EXPERIMENT_KINDS:
        raise cfg.error("kind", f"must be one of {EXPERIMENT_KINDS}")
    if "seed" not in raw or raw["seed"] is None:
        raise cfg.error("seed", "a seed is mandatory")
    seed = cfg.get("seed", kind="int")
    if not 0 <= seed < 2 ** 64:
        raise cfg.error("seed", "must be an unsigned 64-bit integer")
    if cfg.dim not in (1, 2):
        raise cfg.error("dimension", "must be 1 or 2")
    if cfg.get("mode", "fft") not in MODES:
        raise cfg.error("mode", f"must be one of {MODES}")
    for section in ("grid", "window", "family", "measure", "weights", "series", "kernel", "hw",
                    "atoms", "signal"):
        value = raw.get(section)
        if value is not None and not isinstance(value, dict):
            raise cfg.error(section, "must be a mapping")
        for key in (value or {}):
            if key not in SCHEMA[section]:
                raise cfg.error(f"{section}.{key}", "unknown field (see print-schema)")
    # build every referenced object once so errors surface before running
    grid(cfg)
    window(cfg)
    families(cfg)
    if raw.get("measure") is not None or cfg.kind in ("l2-bound", "kernel-decay", "atom-sweep",
                                                      "transform"):
        measure(cfg)
    weights(cfg)
    for p in cfg.get("p", [1.0], "floats"):
        if not 0 < p <= 1:
            raise cfg.error("p", f"exponents must lie in (0, 1], got {p}")


def grid(cfg):
    try:
        return Grid(cfg.get("grid.half_width", 32.0, "float"), cfg.get("grid.points", 4096, "int"),
                    cfg.dim)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise cfg.error("grid", str(exc)) from None


def window(cfg):
    count = 1 if cfg.dim == 1 else 3
    l_set = tuple(cfg.get("window.l_set", list(range(1, count + 1)), "ints"))
    if any(not 1 <= l <= count for l in l_set):
        raise cfg.error("window.l_set", f"members must lie in 1..{count}")
    try:
        return IndexWindow(cfg.get("window.j_min", -3, "int"), cfg.get("window.j_max", 3, "int"),
                           cfg.get("window.k_max", 64, "int"), l_set)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise cfg.error("window", str(exc)) from None


def families(cfg):
    try:
        return build_pair(cfg.dim, cfg.get("family.resolution", 1024, "int"),
                          cfg.get("family.regularity", 2, "int"),
                          cfg.get("family.epsilon", 0.5, "float"),
                          cfg.get("family.ramp", "beta7"), cfg.get("family.synthesis_ramp"))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise cfg.error("family", str(exc)) from None


def measure(cfg):
    spec = copy.deepcopy(cfg.get("measure", {"atoms": [[1.0, [0.0] * cfg.dim]]}))
    spec.setdefault("dim", cfg.dim)
    try:
        mu = measure_from_dict(spec, cfg.base_dir)
    except (MeasureConfigError, OSError, ValueError, TypeError) as exc:
        raise cfg.error("measure", str(exc)) from None
    if mu.dim != cfg.dim:
        raise cfg.error("measure.dim", "does not match dimension")
    return mu


def weights(cfg):
    kind = cfg.get("weights.kind", "ones")
    if kind not in WEIGHT_KINDS:
        raise cfg.error("weights.kind", f"must be one of {WEIGHT_KINDS}")
    values = cfg.get("weights.values", {})
    if kind == "table":
        values = {tuple(int(i) for i in str(key).split(",")): v for key, v in values.items()}
    try:
        return WeightRule(kind, values, cfg.get("weights.seed", cfg.seed, "int"), window(cfg),
                          cfg.dim)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise cfg.error("weights", str(exc)) from None


# ---------------------------------------------------------------- reports

@dataclass
class Criterion:
    name: str
    certifies: str
    value: float
    threshold: float
    comparison: str = "<="

    @property
    def passed(self):
        if isinstance(self.value, float) and math.isnan(self.value):
            return False
        if self.comparison == "<=":
            return self.value <= self.threshold
        if self.comparison == ">=":
            return self.value >= self.threshold
        return self.value == self.threshold

    def to_dict(self):
        return {"name": self.name, "certifies": self.certifies, "value": _clean(self.value),
                "threshold": _clean(self.threshold), "comparison": self.comparison,
                "passed": bool(self.passed)}


def _clean(value):
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_clean(v) for v in value]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isnan(value) or math.isinf(value):
            return repr(value)
        return value
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


@dataclass
class RunResult:
    kind: str
    inputs: dict
    measurements: dict
    criteria: list
    files: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(c.passed for c in self.criteria)

    def failed(self):
        return [c for c in self.criteria if not c.passed]

    def summary(self):
        return {"schema_version": SCHEMA_VERSION, "kind": self.kind, "inputs": _clean(self.inputs),
                "measurements": _clean(self.measurements),
                "criteria": [c.to_dict() for c in self.criteria], "passed": self.passed,
                "files": sorted(self.files)}

    def summary_json(self):
        return json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


# ---------------------------------------------------------------- experiments

def run_series(cfg, out):
    n = cfg.dim
    eps = cfg.get("series.epsilon", 1.0, "float")
    cutoff = cfg.get("series.cutoff", 10000 if n == 1 else 2000, "int")
    try:
        spec = SeriesSpec(n, eps)
    except ValueError as exc:
        raise cfg.error("series.epsilon", str(exc)) from None
    quad = series_limit(spec, cutoff, "quadratic")
    circ = series_limit(spec, cutoff, "circular")
    bound = series_closed_form_bound(spec)
    meas = {"limit": quad.value, "partial": quad.partial, "tail": quad.tail,
            "uncertainty": quad.uncertainty, "circular_limit": circ.value, "bound": bound,
            "shift_constant": lattice_shift_constant(spec), "cutoff": cutoff}
    crit = [Criterion("limit_below_bound", "multiple lattice series is bounded by its closed form",
                      quad.value + quad.uncertainty, bound),
            Criterion("quadratic_matches_circular",
                      "cube-shell and ball truncations share one limit",
                      abs(quad.value - circ.value), 1e-6)]
    if n == 1:
        oracle = 2.0 * float(special.zeta(1.0 + eps))
        meas["zeta_oracle"] = oracle
        crit.append(Criterion("limit_matches_zeta", "one-dimensional series equals 2 zeta(1+eps)",
                              abs(quad.value - oracle), 1e-6))
    return meas, crit, []


def _random_functions(cfg, g, count, name="test-function"):
    freq = tuple(cfg.get("signal.freq_range", [2.0, 20.0], "floats"))
    radius = cfg.get("signal.radius", 2.0, "float")
    if len(freq) != 2 or not 0 < freq[0] < freq[1]:
        raise cfg.error("signal.freq_range", "needs two increasing positive frequencies")
    return [wave_packets(g, substream(cfg.seed, name, i), freq_range=freq, radius=radius)
            for i in range(count)]


def run_ortho(cfg, out):
    g, w = grid(cfg), window(cfg)
    psi, _ = families(cfg)
    indices = list(w.indices(cfg.dim))
    if len(indices) > 500:
        raise cfg.error("window", f"ortho needs at most 500 indices, window has {len(indices)}")
    try:
        G = gram_matrix(psi, w, g, indices)
    except SupportOverflowError as exc:
        raise cfg.error("grid.half_width", str(exc)) from None
    gram_dev = float(np.max(np.abs(G - np.eye(len(indices)))))
    samples = _random_functions(cfg, g, cfg.get("samples", 10, "int"))
    defects = [parseval_defect(psi, f, w) for f in samples]
    meas = {"indices": len(indices), "gram_deviation": gram_dev, "parseval_defects": defects}
    crit = [Criterion("gram_identity", "translates and dilates form an orthonormal system",
                      gram_dev, 1e-4)]
    if defects:
        crit.append(Criterion("parseval", "coefficient energy reproduces the function energy",
                              max(defects), 1e-2))
    return meas, crit, []


def _operator(cfg, mode):
    psi, phi = families(cfg)
    return OperatorSpec(measure(cfg), psi, phi, weights(cfg), window(cfg), mode)


def _is_identity(cfg, spec):
    mu = spec.measure
    return (mu.is_dirac_only() and len(mu.atoms) == 1 and np.all(mu.atoms[0][1] == 0)
            and mu.atoms[0][0] == 1 and spec.weights.kind == "ones"
            and spec.analysis is spec.synthesis)


def run_operator(cfg, out, default_samples):
    mode = cfg.get("mode", "fft")
    g = grid(cfg)
    spec = _operator(cfg, "fft" if mode == "both" else mode)
    cert = l2_certificate(spec)
    count = cfg.get("samples", default_samples, "int")
    ratios, errors, deviations, rows = [], [], [], []
    for i, f in enumerate(_random_functions(cfg, g, count)):
        tf = apply_operator(f, spec)
        ratio = tf.norm() / f.norm()
        err = (tf - f).norm() / f.norm()
        dev = 0.0
        if mode == "both":
            spec.mode = "direct"
            td = apply_operator(f, spec)
            spec.mode = "fft"
            dev = (td - tf).norm() / max(tf.norm(), 1e-300)
        ratios.append(ratio)
        errors.append(err)
        deviations.append(dev)
        rows.append((i, f.norm(), tf.norm(), ratio, err, dev))
    _write_csv(out / "operator.csv", ["sample", "norm_f", "norm_tf", "ratio", "identity_error",
                                      "mode_deviation"], rows)
    meas = {"certificate": cert, "max_ratio": max(ratios), "ratios": ratios,
            "weight_l2": spec.weights.l2_norm(spec.window, spec.dim),
            "total_variation": spec.measure.total_variation()}
    crit = [Criterion("certificate_dominates",
                      "operator norm is bounded by weight l2 norm times measure total variation",
                      max(ratios), cert * (1.0 + 1e-3))]
    if _is_identity(cfg, spec):
        meas["identity_errors"] = errors
        crit.append(Criterion("identity_recovery",
                              "Dirac measure with unit weights reproduces the function",
                              max(errors), 1e-2))
    if mode == "both":
        meas["mode_deviation"] = max(deviations)
        crit.append(Criterion("fft_matches_direct", "fast and direct convolution agree",
                              max(deviations), 1e-10))
    return meas, crit, ["operator.csv"]


def _kernel_spec(cfg, dim=None):
    psi, phi = families(cfg)
    mu = measure(cfg)
    N = cfg.get("family.regularity", 2, "int")
    eps = cfg.get("family.epsilon", 0.5, "float")
    try:
        eff = effective_wavelet(mu, psi, N, eps)
    except InadmissibleMeasureError as exc:
        raise cfg.error("measure", f"inadmissible: {exc}") from None
    except ValueError as exc:
        raise cfg.error("measure", str(exc)) from None
    return KernelSpec(phi, eff, window(cfg), weights(cfg))


def run_kernel_decay(cfg, out):
    kspec = _kernel_spec(cfg)
    n = cfg.dim
    seps = dyadic_separations(cfg.get("kernel.per_octave", 4, "int"))
    reports = []
    for side, key, default in (("x", "kernel.x_orders", [0, 1]), ("y", "kernel.y_orders", [0, 1, 2])):
        for order in cfg.get(key, default, "ints"):
            reports.append(decay_scan(kspec, side, order, seps))
    write_decay_report(reports, out / "kernel_decay")
    meas = {"kernel_kind": kspec.psi.kind, "scans": [r.summary() for r in reports]}
    crit = []
    for r in reports:
        tag = f"{r.side}{r.order}"
        crit.append(Criterion(f"octave_spread_{tag}",
                              f"normalized |x-y|^(n+{r.order}) |dK| stays bounded across octaves",
                              r.spread, 4.0))
        crit.append(Criterion(f"slope_{tag}", f"kernel derivative decays like |x-y|^-(n+{r.order})",
                              r.relative_slope_error(), 0.15))
        crit.append(Criterion(f"window_covers_{tag}", "pivot scale lies inside the window",
                              int(r.window_insufficient), 0, "=="))
    return meas, crit, ["kernel_decay.csv", "kernel_decay.json"]


def run_hw_decay(cfg, out):
    psi, _ = families(cfg)
    if cfg.dim != 1:
        raise cfg.error("dimension", "hw-decay runs in dimension 1")
    try:
        g = density_from_dict(cfg.get("hw.g", {"type": "box", "half_width": 0.5}), 1, cfg.base_dir)
    except (MeasureConfigError, OSError, ValueError) as exc:
        raise cfg.error("hw.g", str(exc)) from None
    wav = psi.profiles["wavelet"]
    rows, sups = [], []
    for j in cfg.get("hw.j", [0, 1], "ints"):
        for l in cfg.get("hw.l", [-3, -2, -1, 0], "ints"):
            if l > j:
                raise cfg.error("hw.l", f"needs l <= j, got l={l}, j={j}")
            for k in cfg.get("hw.k", [0, 4], "ints"):
                for m in cfg.get("hw.m", [0, 4], "ints"):
                    res = convolved_decay_check(g, wav, j, k, l, m, eps=cfg.get("family.epsilon", 0.5, "float"))
                    rows.append((j, l, k, m, res.sup, res.peak_location))
                    sups.append(res.sup)
    _write_csv(out / "hw_decay.csv", ["j", "l", "k", "m", "normalized_sup", "peak"], rows)
    band = max(sups) / min(sups)
    meas = {"sups": sups, "band_ratio": band, "max_sup": max(sups)}
    crit = [Criterion("single_constant_band",
                      "normalized convolved-wavelet sups share one constant over the sweep",
                      band, 4.0)]
    return meas, crit, ["hw_decay.csv"]


def run_atom_sweep(cfg, out):
    kspec = _kernel_spec(cfg)
    lo, hi = cfg.get("atoms.window_offsets", [-4, 20], "ints")
    base = IndexWindow(lo, hi, 2 ** 40, kspec.window.l_set)
    count = cfg.get("atoms.count", 50, "int")
    rmin, rmax = cfg.get("atoms.radius_log2", [-4.0, 2.0], "floats")
    per_radius = cfg.get("atoms.per_radius", 32, "int")
    N = cfg.get("family.regularity", 2, "int")
    prange = atoms_mod.admissible_p_range(cfg.dim, N, cfg.get("p", [1.0], "floats"))
    meas, crit, rows = {"p_range_left": prange.left, "sweeps": {}}, [], []
    for p in cfg.get("p", [1.0], "floats"):
        if not prange.contains(p):
            raise cfg.error("p", f"p={p} is outside the admissible range ({prange.left:g}, inf)")
        sweep = atoms_mod.atom_sweep(kspec, p, count, cfg.seed, (rmin, rmax), per_radius,
                                     base_window=base)
        rows.extend(sweep.rows)
        exps = sweep.exponents
        target = sweep.reports[0].target
        worst = float(np.nanmax(np.abs(exps - target))) / abs(target)
        holder = max(r.holder_ratio for r in sweep.reports)
        meas["sweeps"][str(p)] = {"k": prange.indices[p], "spread": sweep.spread,
                                  "quasi_norms": sweep.quasi_norms, "exponents": exps,
                                  "target_exponent": target, "holder_max": holder}
        crit.append(Criterion(f"uniform_bound_p{p:g}",
                              "atom images have quasi-norms bounded independently of the atom",
                              sweep.spread, 8.0))
        crit.append(Criterion(f"far_exponent_p{p:g}",
                              f"far field decays like |x-x0|^{target:g}", worst, 0.15))
        crit.append(Criterion(f"near_holder_p{p:g}", "near-field Holder bound on the doubled ball",
                              holder, 1.0 + atoms_mod.HOLDER_TOL))
    atoms_mod.write_sweep_csv(rows, out / "atom_sweep.csv")
    return meas, crit, ["atom_sweep.csv"]


RUNNERS = {
    "series": run_series,
    "ortho": run_ortho,
    "l2-bound": lambda cfg, out: run_operator(cfg, out, 50),
    "transform": lambda cfg, out: run_operator(cfg, out, 3),
    "kernel-decay": run_kernel_decay,
    "hw-decay": run_hw_decay,
    "atom-sweep": run_atom_sweep,
}


def run(cfg, out_dir=None):
    out = Path(out_dir or cfg.get("out", "out"))
    if not out.is_absolute() and out_dir is None and cfg.base_dir is not None:
        out = cfg.base_dir / out
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    try:
        meas, crit, files = RUNNERS[cfg.kind](cfg, out)
    except (BoundaryMassError, SupportOverflowError) as exc:
        raise cfg.error("grid", f"grid too small for the window: {exc}") from None
    result = RunResult(cfg.kind, _inputs(cfg), meas, crit, files)
    result.timing = {"timestamp": datetime.now(timezone.utc).isoformat(),
                     "wall_seconds": time.perf_counter() - start}
    (out / "summary.json").write_text(result.summary_json())
    (out / "timing.json").write_text(json.dumps(result.timing, indent=2, sort_keys=True) + "\n")
    return result


def _inputs(cfg):
    inputs = copy.deepcopy(cfg.raw)
    inputs.pop("out", None)
    if cfg.kind in ("l2-bound", "kernel-decay", "atom-sweep", "transform") or "measure" in inputs:
        inputs["measure"] = measure_to_dict(measure(cfg))
    return inputs


def compare_paths(cfg, out_dir=None):
    """Every convolution of the configured window in both FFT and direct mode."""
    g = grid(cfg)
    if g.points > 2 ** 9:
        raise cfg.error("grid.points", "compare-paths needs at most 2^9 points per axis")
    mu = measure(cfg)
    rows, worst, t_fft, t_dir = [], 0.0, 0.0, 0.0
    for i, f in enumerate(_random_functions(cfg, g, cfg.get("samples", 3, "int"), "compare")):
        for j in window(cfg).scales:
            mu_j = dilate_measure(mu, j)
            t0 = time.perf_counter()
            a = convolve(mu_j, f, mode="fft")
            t1 = time.perf_counter()
            b = convolve(mu_j, f, mode="direct")
            t2 = time.perf_counter()
            dev = float(np.max(np.abs(a.samples - b.samples)) / max(np.max(np.abs(b.samples)), 1e-300))
            worst = max(worst, dev)
            t_fft += t1 - t0
            t_dir += t2 - t1
            rows.append((i, j, dev))
    out = Path(out_dir or cfg.get("out", "out"))
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "compare_paths.csv", ["sample", "j", "relative_deviation"], rows)
    crit = [Criterion("fft_matches_direct", "fast and direct convolution agree", worst, 1e-10)]
    result = RunResult("compare-paths", _inputs(cfg), {"max_relative_deviation": worst}, crit,
                       ["compare_paths.csv"])
    result.timing = {"timestamp": datetime.now(timezone.utc).isoformat(), "fft_seconds": t_fft,
                     "direct_seconds": t_dir,
                     "direct_over_fft": t_dir / t_fft if t_fft > 0 else math.inf}
    (out / "summary.json").write_text(result.summary_json())
    (out / "timing.json").write_text(json.dumps(result.timing, indent=2, sort_keys=True) + "\n")
    return result
