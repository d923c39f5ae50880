import numpy as np
import pytest

from wavop.grids import Grid, wave_packets
from wavop.streams import substream
from wavop.wavelets import (TWO_PI_3, IndexWindow, SupportOverflowError, UnsupportedOrderError,
                            WaveletIndex, beta_ramp, build_pair, build_system, check_resolution,
                            decay_report, gram_matrix, lagrange_eval, load_family, make_ramp,
                            parseval_defect, polynomial_ramp, save_family, scaling_spectrum,
                            wavelet_spectrum)


@pytest.mark.parametrize("name", ["poly", "beta3", "beta7"])
def test_ramp_symmetry(name):
    ramp = make_ramp(name)
    t = np.linspace(-0.5, 1.5, 201)
    assert np.allclose(ramp(t) + ramp(1 - t), 1.0, atol=1e-14)
    assert np.all(ramp(t[t <= 0]) == 0) and np.all(ramp(t[t >= 1]) == 1)


def test_polynomial_ramp_values():
    assert polynomial_ramp(np.array([0.5]))[0] == pytest.approx(0.5)
    assert beta_ramp(np.array([0.5]), 7)[0] == pytest.approx(0.5)


@pytest.mark.parametrize("name", ["poly", "beta7"])
def test_scaling_and_wavelet_spectra_partition_unity(name):
    ramp = make_ramp(name)
    xi = np.linspace(0.01, 40.0, 3001)
    phi2 = np.abs(scaling_spectrum(xi, ramp)) ** 2
    phi2_half = np.abs(scaling_spectrum(xi / 2, ramp)) ** 2
    psi2 = np.abs(wavelet_spectrum(xi, ramp)) ** 2
    # |phi^(xi/2)|^2 = |phi^(xi)|^2 + |psi^(xi)|^2 (two-scale relation)
    assert np.allclose(phi2_half, phi2 + psi2, atol=1e-13)
    total = sum(np.abs(wavelet_spectrum(2.0 ** j * xi, ramp)) ** 2 for j in range(-12, 12))
    inside = (xi > 2 * np.pi / 3 * 2.0 ** -11) & (xi < 4 * np.pi / 3 * 2.0 ** 11)
    assert np.allclose(total[inside], 1.0, atol=1e-13)
    assert np.all(scaling_spectrum(np.array([2 * TWO_PI_3 + 1e-9]), ramp) == 0)


@pytest.mark.parametrize("order", [0, 1, 2])
def test_tabulation_matches_quadrature_oracle(family1, order):
    prof = family1.profiles["wavelet"]
    t = np.linspace(-12.0, 13.0, 157)
    tab = prof(t, order)
    ref = prof.direct(t, order)
    assert np.max(np.abs(tab - ref)) < 1e-9 * np.max(np.abs(ref))


def test_lagrange_interpolation_is_exact_on_nodes_and_cubics():
    table = np.arange(64, dtype=float) ** 3
    t = np.array([10.0, 10.25, 20.5, 31.0])
    assert np.allclose(lagrange_eval(table, 0.0, 1.0, t), t ** 3, rtol=1e-12)


def test_derivative_order_above_regularity_is_rejected(family1):
    with pytest.raises(UnsupportedOrderError):
        family1.profiles["wavelet"](np.zeros(1), 3)
    with pytest.raises(UnsupportedOrderError):
        family1.eval_member_derivative(WaveletIndex(1, 0, 0), 3, np.zeros(1))


def test_member_scaling_convention(family1):
    x = np.linspace(-3, 3, 11)
    idx = WaveletIndex(1, 2, 1)
    direct = 2.0 ** -1 * family1.profiles["wavelet"](x / 4 - 1)
    assert np.allclose(family1.eval_member(idx, x), direct)


def test_gram_matrix_one_dimension(family1):
    w = IndexWindow(-2, 1, 10)
    g = Grid(64.0, 4096)
    G = gram_matrix(family1, w, g)
    assert G.shape == (4 * 21, 4 * 21)
    assert np.max(np.abs(G - np.eye(G.shape[0]))) < 1e-4


def test_gram_matrix_two_dimensions(family2):
    w = IndexWindow(-1, 0, 2, (1, 2, 3))
    g = Grid(32.0, 512, 2)
    G = gram_matrix(family2, w, g)
    assert np.max(np.abs(G - np.eye(G.shape[0]))) < 1e-4


def test_gram_matrix_names_overflowing_member(family1):
    with pytest.raises(SupportOverflowError) as info:
        gram_matrix(family1, IndexWindow(0, 2, 4), Grid(32.0, 4096))
    assert info.value.index == WaveletIndex(1, 1, (-4,))


def test_resolution_check():
    with pytest.raises(ValueError):
        check_resolution(Grid(32.0, 256), -2)
    check_resolution(Grid(32.0, 4096), -2)


def test_parseval_defect_small_for_wide_window(family1):
    g = Grid(32.0, 4096)
    f = wave_packets(g, substream(1, "parseval", 0))
    assert parseval_defect(family1, f, IndexWindow(-3, 3, 64)) < 1e-6
    assert parseval_defect(family1, f, IndexWindow(0, 0, 64)) > 0.05
    assert parseval_defect(family1, f, None) == 1.0


def test_two_dimensional_members_are_tensor_products(family2):
    pts = np.array([[0.3, -1.2], [2.0, 0.5]])
    s, w = family2.profiles["scaling"], family2.profiles["wavelet"]
    expect = [s(pts[:, 0]) * w(pts[:, 1]), w(pts[:, 0]) * s(pts[:, 1]), w(pts[:, 0]) * w(pts[:, 1])]
    for l in (1, 2, 3):
        assert np.allclose(family2.eval_member(WaveletIndex(l, 0, (0, 0)), pts), expect[l - 1])


def test_decay_report_flags(family1):
    radii = 2.0 ** np.arange(2, 6)
    rep = decay_report(family1.member(1), 2, radii)
    assert all(rep.passes(o) for o in rep.orders)
    assert rep.constants[0] < np.inf


def test_family_round_trip(tmp_path, family1):
    stem = save_family(family1, tmp_path / "meyer")
    again = load_family(stem)
    x = np.linspace(-4, 4, 33)
    assert np.array_equal(again.profiles["wavelet"](x), family1.profiles["wavelet"](x))
    meta = (tmp_path / "meyer.json").read_text().replace('"regularity": 2', '"regularity": 1')
    (tmp_path / "meyer.json").write_text(meta)
    assert load_family(stem).regularity == 1


def test_build_validation():
    with pytest.raises(ValueError):
        build_system(3)
    with pytest.raises(ValueError):
        build_system(1, frequency_resolution=1000)
    with pytest.raises(ValueError):
        IndexWindow(2, 1, 4)
    a, b = build_pair(1, synthesis_ramp="poly")
    assert a is not b and b.ramp == "poly"


def test_index_window_enumeration():
    w = IndexWindow(0, 1, 1, (1, 2))
    idx = list(w.indices(2))
    assert len(idx) == w.size(2) == 2 * 2 * 9
    assert idx[0] == WaveletIndex(1, 0, (-1, -1))


def test_one_dimensional_mother_decay_certified(family1):
    rep = decay_report(family1.member(1), family1.regularity, 2.0 ** np.linspace(1, 5, 9))
    assert all(rep.passes(o) for o in rep.orders), rep.slopes


def test_two_dimensional_mothers_decay_at_order_zero(family2):
    for l in (1, 2, 3):
        rep = decay_report(family2.member(l), 0, 2.0 ** np.linspace(1, 5, 9))
        assert rep.passes(0), rep.slopes


@pytest.mark.xfail(strict=True, reason="along the axes a tensor member decays like one 1-D factor "
                                       "(about r^-6.7 on [2, 32]), short of r^-(2n+2|alpha|+2eps) "
                                       "for |alpha| >= 1")
def test_two_dimensional_mother_derivative_decay(family2):
    for l in (1, 2, 3):
        rep = decay_report(family2.member(l), 2, 2.0 ** np.linspace(1, 5, 9))
        assert all(rep.passes(o) for o in rep.orders), rep.slopes


def test_decay_report_flags_constant_and_clears_gaussian():
    from wavop.wavelets import CallableMember
    radii = 2.0 ** np.linspace(0, 5, 6)
    const = CallableMember(1, lambda pts, a: np.ones(len(pts)) if a[0] == 0 else np.zeros(len(pts)))
    rep = decay_report(const, 0, radii)
    assert not rep.passes(0)
    assert rep.normalized[0][-1] > 100 * rep.normalized[0][0]

    def gauss(pts, a):
        x = pts[:, 0]
        return [np.exp(-x ** 2), -2 * x * np.exp(-x ** 2), (4 * x ** 2 - 2) * np.exp(-x ** 2)][a[0]]

    rep = decay_report(CallableMember(1, gauss), 2, 2.0 ** np.linspace(-1, 2, 4))
    assert all(np.isfinite(rep.constants[o]) for o in rep.orders)


@pytest.mark.parametrize("order", [1, 2])
def test_spectral_derivatives_match_finite_differences(family1, order):
    rng = np.random.default_rng(order)
    h = 1e-4
    for name in ("scaling", "wavelet"):
        prof = family1.profiles[name]
        t = rng.uniform(-6, 6, 100)
        if order == 1:
            fd = (prof(t + h) - prof(t - h)) / (2 * h)
        else:
            # second differences of first derivatives keep the step at 1e-4
            fd = (prof(t + h, 1) - prof(t - h, 1)) / (2 * h)
        spec = prof(t, order)
        assert np.max(np.abs(spec - fd)) <= 1e-5 * np.max(np.abs(spec))


def test_derivative_parity(family1):
    t = np.linspace(0.05, 6, 60)
    scal, wav = family1.profiles["scaling"], family1.profiles["wavelet"]
    assert np.allclose(scal(-t, 1), -scal(t, 1), atol=1e-9)
    # the wavelet is symmetric about 1/2
    assert np.allclose(wav(0.5 - t, 1), -wav(0.5 + t, 1), atol=1e-9)


def test_scaling_identity_at_random_indices(family2):
    rng = np.random.default_rng(3)
    for _ in range(20):
        j = int(rng.integers(-4, 5))
        k = tuple(int(v) for v in rng.integers(-5, 6, 2))
        l = int(rng.integers(1, 4))
        x = rng.uniform(-8, 8, (5, 2))
        base = family2.eval_member(WaveletIndex(l, 0, (0, 0)), 2.0 ** -j * x - np.array(k))
        assert np.allclose(family2.eval_member(WaveletIndex(l, j, k), x), 2.0 ** -j * base,
                           rtol=0, atol=1e-15 * max(1.0, 2.0 ** -j))


def test_single_member_window(family1):
    g = Grid(32.0, 4096)
    G = gram_matrix(family1, IndexWindow(0, 0, 1), g, [WaveletIndex(1, 0, 0)])
    assert G.shape == (1, 1) and abs(G[0, 0] - 1) < 1e-4
    f = g.sample(lambda x: family1.eval_member(WaveletIndex(1, 0, 0), x))
    assert parseval_defect(family1, f, IndexWindow(0, 0, 4)) < 1e-6
    with pytest.raises(ValueError):
        parseval_defect(family1, g.zeros(), IndexWindow(0, 0, 4))
