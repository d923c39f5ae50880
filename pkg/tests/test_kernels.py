import math

import numpy as np
import pytest
from scipy import integrate

from wavop.kernels import (InadmissibleMeasureError, KernelSpec, NearDiagonalError,
                           convolution_values, convolved_decay_check, decay_scan,
                           dyadic_separations, effective_wavelet, kernel_derivative_eval,
                           kernel_eval, write_decay_report)
from wavop.measures import (BorelMeasure, BoxDensity, GaussianDensity, RationalDecayDensity,
                            SingularPart, dirac)
from wavop.operator_core import WeightRule
from wavop.wavelets import IndexWindow, UnsupportedOrderError, WaveletIndex


def brute_kernel(phi, eff, window, weights, x, y, dim):
    total = 0.0
    ks = np.arange(-window.k_max, window.k_max + 1)
    for l in window.l_set:
        for j in window.scales:
            for k in (ks if dim == 1 else [(a, b) for a in ks for b in ks]):
                idx = WaveletIndex(l, j, k)
                w = weights.block(l, j, [np.array([v]) for v in idx.k]).flat[0]
                s = 2.0 ** -j
                psi_val = 2.0 ** (-dim * j / 2) * eff.member(l).evaluate(
                    (s * np.asarray(y) - np.asarray(idx.k)).reshape(1, dim))[0]
                total += w * phi.eval_member(idx, np.reshape(x, (1, dim)))[0] * np.conj(psi_val)
    return total


@pytest.mark.parametrize("weights", [WeightRule("ones"), WeightRule("alternating"),
                                     WeightRule("random-sign", seed=4)])
def test_kernel_matches_index_sum(family1, weights):
    mu = BorelMeasure(1, GaussianDensity(1, 0.5, 0.5), [(0.5, [0.3])])
    eff = effective_wavelet(mu, family1)
    w = IndexWindow(-2, 2, 120)
    spec = KernelSpec(family1, eff, w, weights)
    for x, y in ((0.3, 1.1), (-0.7, 2.9)):
        expect = brute_kernel(family1, eff, w, weights, x, y, 1)
        assert abs(kernel_eval(spec, x, y).value - expect) < 1e-10


def test_two_dimensional_kernel_matches_index_sum(family2):
    mu = BorelMeasure(2, singular=SingularPart(1, GaussianDensity(1, 1.0, 0.5)))
    eff = effective_wavelet(mu, family2)
    w = IndexWindow(-1, 0, 40, (1, 2, 3))
    weights = WeightRule("alternating")
    spec = KernelSpec(family2, eff, w, weights)
    x, y = np.array([0.2, -0.3]), np.array([1.1, 0.4])
    expect = brute_kernel(family2, eff, w, weights, x, y, 2)
    assert abs(kernel_eval(spec, x, y).value - expect) < 1e-10


def test_effective_wavelet_spectra(family1):
    psi = family1.profiles["wavelet"]
    t = np.linspace(-5, 5, 41)
    plain = effective_wavelet(dirac(1), family1)
    assert plain.kind == "plain"
    assert np.allclose(plain.member(1).evaluate(t), psi(t))
    shifted = effective_wavelet(BorelMeasure(1, atoms=[(2.0, [0.75])]), family1)
    assert shifted.kind == "atom-combined"
    assert np.allclose(shifted.member(1).evaluate(t), 2.0 * psi(t + 0.75))
    g = GaussianDensity(1, 1.0, 0.4)
    dens = effective_wavelet(BorelMeasure(1, g), family1)
    assert dens.kind == "density-convolved"
    prof = dens.member(1).terms[0].profiles[0]
    xi = np.linspace(-9, 9, 37)
    assert np.allclose(prof.spectrum(xi), np.conj(g.fourier(xi)) * psi.spectrum(xi))
    # reflected-conjugate convolution in space: int g(s) psi(t + s) ds
    ref = [integrate.quad(lambda s: g(np.array([s]))[0] * psi(np.array([tt + s]))[0], -4, 4,
                          epsabs=1e-12, limit=200)[0] for tt in t[::8]]
    assert np.allclose(prof(t[::8]), ref, atol=1e-9)


def test_effective_wavelet_kinds(family2):
    sing = BorelMeasure(2, singular=SingularPart(1, GaussianDensity(1, 1.0, 0.5)))
    assert effective_wavelet(sing, family2).kind == "tensor-singular"
    mixed = BorelMeasure(2, GaussianDensity(2, 0.5, 0.5), [(0.5, [0.0, 0.1])])
    eff = effective_wavelet(mixed, family2)
    assert eff.kind == "mixed" and eff.count == 3
    assert len(eff.member(3).terms) == 2


def test_inadmissible_measure_rejected(family1):
    with pytest.raises(InadmissibleMeasureError):
        effective_wavelet(BorelMeasure(1, RationalDecayDensity(1, 1.0, 1.5)), family1)


def test_kernel_is_hermitian_for_plain_identity_family(family1):
    spec = KernelSpec(family1, effective_wavelet(dirac(1), family1), IndexWindow(-6, 6, 2 ** 20),
                      WeightRule("alternating"))
    a = kernel_eval(spec, 0.4, 1.7).value
    b = kernel_eval(spec, 1.7, 0.4).value
    # the per-point k-range cut at the reach tolerance breaks exact symmetry slightly
    assert abs(a - np.conj(b)) < 1e-9 * abs(a)


@pytest.mark.parametrize("side", ["x", "y"])
def test_kernel_derivative_matches_finite_difference(family1, side):
    mu = BorelMeasure(1, GaussianDensity(1, 1.0, 0.5))
    spec = KernelSpec(family1, effective_wavelet(mu, family1), IndexWindow(-5, 5, 2 ** 20),
                      WeightRule("alternating"))
    x, y, h = 0.3, 1.4, 1e-4
    step = (h, 0.0) if side == "x" else (0.0, h)
    plus = kernel_eval(spec, x + step[0], y + step[1]).value
    minus = kernel_eval(spec, x - step[0], y - step[1]).value
    fd = (plus - minus) / (2 * h)
    d1 = kernel_derivative_eval(spec, side, 1, x, y).value
    assert abs(d1 - fd) < 1e-5 * abs(d1)


def test_kernel_guards(family1):
    spec = KernelSpec(family1, effective_wavelet(dirac(1), family1), IndexWindow(-2, 2, 64))
    with pytest.raises(NearDiagonalError):
        kernel_eval(spec, 0.5, 0.5 + 1e-8)
    with pytest.raises(UnsupportedOrderError):
        kernel_derivative_eval(spec, "y", 3, 0.0, 1.0)
    with pytest.raises(ValueError):
        kernel_derivative_eval(spec, "z", 0, 0.0, 1.0)
    with pytest.raises(ValueError):
        decay_scan(spec, "x", 0, [0.01, 1.0])


def test_kernel_spec_normalizes_weights(family1):
    rule = WeightRule("scale-table", {0: 4.0, 1: -2.0})
    spec = KernelSpec(family1, effective_wavelet(dirac(1), family1), IndexWindow(0, 1, 8), rule)
    assert spec.weights.sup_norm(spec.window, 1) == pytest.approx(1.0)


def test_decay_scan_and_report(tmp_path, family1):
    spec = KernelSpec(family1, effective_wavelet(dirac(1), family1), IndexWindow(-10, 10, 2 ** 30),
                      WeightRule("alternating"))
    seps = dyadic_separations(2)
    rep = decay_scan(spec, "y", 1, seps)
    assert len(rep.rows) == len(seps) * 8
    assert rep.passed and not rep.window_insufficient
    assert rep.relative_slope_error() < 0.15
    write_decay_report([rep], tmp_path / "decay")
    assert (tmp_path / "decay.csv").read_text().count("\n") == len(rep.rows) + 1
    narrow = KernelSpec(family1, spec.psi, IndexWindow(-1, 1, 2 ** 30), WeightRule("alternating"))
    assert decay_scan(narrow, "x", 0, seps).window_insufficient


def test_convolved_values_match_spatial_quadrature(family1):
    box = BoxDensity(1, 1.0, 0.5)
    psi = family1.profiles["wavelet"]
    j, k, l, m = 1, 4, -2, 4
    xs = np.array([2.0 ** j * k + 2.0 ** l * m + d for d in (-3.1, -0.4, 0.0, 0.9, 5.2)])
    vals = convolution_values(box, psi, j, k, l, m, xs)

    def spatial(x):
        lo, hi = 2.0 ** j * (k - 0.5), 2.0 ** j * (k + 0.5)
        f = lambda t: 2.0 ** (-j / 2) / (2.0 * 0.5) * 2.0 ** (-l / 2) * psi(
            np.array([2.0 ** -l * (x - t) - m]))[0]
        return integrate.quad(f, lo, hi, limit=400, epsabs=1e-13)[0]

    ref = np.array([spatial(x) for x in xs])
    assert np.max(np.abs(vals.real - ref)) < 1e-9 * np.max(np.abs(ref))


def test_convolved_decay_guards(family1):
    psi = family1.profiles["wavelet"]
    with pytest.raises(ValueError):
        convolved_decay_check(BoxDensity(1), psi, 0, 0, 1, 0)
    res = convolved_decay_check(GaussianDensity(1, 1.0, 0.5), psi, 1, 0, 0, 0)
    assert math.isfinite(res.sup) and res.sup > 0


def nested_increments(family1, weights="alternating", windows=range(2, 12)):
    eff = effective_wavelet(dirac(1), family1)
    vals, absolute = [], []
    for J in windows:
        spec = KernelSpec(family1, eff, IndexWindow(-J, J, 2 ** 40), WeightRule(weights))
        kv = kernel_eval(spec, 0.2, 1.2)
        vals.append(kv.value)
        absolute.append(kv.absolute)
    return np.abs(np.diff(vals)), np.diff(absolute)


def test_nested_windows_converge_geometrically(family1):
    inc, abs_inc = nested_increments(family1)
    ratios = inc[1:] / inc[:-1]
    # each widening adds one coarse scale worth about 2^-J; the rate tends to 1/2
    assert np.all(np.abs(ratios[-3:] - 0.5) < 1e-2)
    assert np.all(abs_inc > 0) and abs_inc[-1] < 1e-3


@pytest.mark.xfail(strict=True, reason="increment ratios approach 1/2 from above, so halving "
                                       "per widening holds only in the limit")
def test_nested_window_increments_halve(family1):
    inc, abs_inc = nested_increments(family1)
    assert np.all(inc[-3:] <= 0.5 * inc[-4:-1])
    assert np.all(abs_inc[-3:] <= 0.5 * abs_inc[-4:-1])


def test_absolute_partial_sums_scale_like_inverse_distance(family1):
    spec = KernelSpec(family1, effective_wavelet(dirac(1), family1), IndexWindow(-12, 12, 2 ** 40),
                      WeightRule("alternating"))
    rng = np.random.default_rng(0)
    scaled = []
    for _ in range(100):
        x = rng.uniform(-2, 2)
        d = 2.0 ** rng.uniform(-3, 3) * rng.choice([-1, 1])
        scaled.append(kernel_eval(spec, x, x + d).absolute * abs(d))
    assert max(scaled) / min(scaled) < 4.0


def test_empty_member_set_gives_zero(family1):
    spec = KernelSpec(family1, effective_wavelet(dirac(1), family1), IndexWindow(0, 2, 8, ()))
    assert kernel_eval(spec, 0.0, 1.0).value == 0


def test_order_zero_derivative_is_the_kernel(family1):
    spec = KernelSpec(family1, effective_wavelet(dirac(1), family1), IndexWindow(-4, 4, 64))
    assert kernel_derivative_eval(spec, "y", 0, 0.1, 0.9).value == kernel_eval(spec, 0.1, 0.9).value


def test_kernel_derivatives_at_random_pairs(family1):
    mu = BorelMeasure(1, GaussianDensity(1, 0.5, 0.5), [(0.5, [0.3])])
    # finest scale 2^-3 keeps the O(h^2) difference error below the tolerance
    spec = KernelSpec(family1, effective_wavelet(mu, family1), IndexWindow(-3, 8, 2 ** 30),
                      WeightRule("alternating"))
    rng = np.random.default_rng(12)
    h = 1e-4
    for _ in range(20):
        x = rng.uniform(-2, 2)
        y = x + 2.0 ** rng.uniform(-2, 2) * rng.choice([-1, 1])
        for side in ("x", "y"):
            dx, dy = (h, 0.0) if side == "x" else (0.0, h)
            fd = (kernel_eval(spec, x + dx, y + dy).value - kernel_eval(spec, x - dx, y - dy).value) / (2 * h)
            d1 = kernel_derivative_eval(spec, side, 1, x, y).value
            assert abs(d1 - fd) <= 1e-4 * abs(d1)


def test_symmetric_atom_pair(family1):
    psi = family1.profiles["wavelet"]
    eff = effective_wavelet(BorelMeasure(1, atoms=[(0.5, [-1.0]), (0.5, [1.0])]), family1)
    t = np.linspace(-4, 4, 33)
    real = eff.member(1).evaluate(t)
    # the Meyer wavelet is symmetric about 1/2, and so is this combination
    assert np.allclose(real, eff.member(1).evaluate(1.0 - t), atol=1e-13)
    assert real[16] == pytest.approx(0.5 * (psi(np.array([-1.0]))[0] + psi(np.array([1.0]))[0]))


@pytest.mark.parametrize("measure", [
    dirac(1),
    BorelMeasure(1, GaussianDensity(1, 1.0, 0.1)),
    BorelMeasure(1, atoms=[(0.5, [-1.0]), (0.5, [1.0])]),
], ids=["plain", "narrow-density", "atoms"])
def test_one_dimensional_effective_wavelets_decay(family1, measure):
    from wavop.wavelets import decay_report
    eff = effective_wavelet(measure, family1)
    rep = decay_report(eff.member(1), 2, 2.0 ** np.linspace(1, 5, 9))
    assert all(rep.passes(o) for o in rep.orders), rep.slopes


@pytest.mark.parametrize("sigma", [0.1, 0.5, 1.0])
def test_density_convolved_wavelet_decays_past_its_stated_rate(family1, sigma):
    from wavop.wavelets import decay_report
    eff = effective_wavelet(BorelMeasure(1, GaussianDensity(1, 1.0, sigma)), family1)
    rep = decay_report(eff.member(1), 2, 2.0 ** np.linspace(1, 5, 9))
    assert all(rep.slopes[o] <= -(1 + 0.5) for o in rep.orders)


@pytest.mark.xfail(strict=True, reason="tensor factors decay like their slowest 1-D factor along "
                                       "the axes, short of the order-dependent 2-D exponent")
def test_tensor_singular_effective_wavelet_decay(family2):
    from wavop.wavelets import decay_report
    mu = BorelMeasure(2, singular=SingularPart(1, GaussianDensity(1, 1.0, 0.5)))
    eff = effective_wavelet(mu, family2)
    for l in (1, 2, 3):
        rep = decay_report(eff.member(l), 2, 2.0 ** np.linspace(1, 5, 9))
        assert all(rep.passes(o) for o in rep.orders), rep.slopes


def test_convolved_peak_locations(family1):
    g = GaussianDensity(1, 1.0, 0.5)
    gauss_profile = GaussianDensity(1, 1.0, 0.7)
    sym = convolved_decay_check(g, gauss_profile, 0, 0, 0, 0)
    assert math.isfinite(sym.sup) and abs(sym.peak_location) < 1e-9
    shifted = convolved_decay_check(g, family1.profiles["wavelet"], 1, 4, 0, 0)
    assert abs(shifted.peak_location - 8.0) < 1.5
