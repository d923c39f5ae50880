"""Scan the off-diagonal decay of a density-convolved kernel and print the
fitted log-log slope and octave spread for each derivative order."""
from wavop import BorelMeasure, GaussianDensity, IndexWindow, KernelSpec, WeightRule, build_system
from wavop.kernels import decay_scan, dyadic_separations, effective_wavelet


def main():
    family = build_system(1)
    mu = BorelMeasure(1, GaussianDensity(1, 1.0, 0.5))
    spec = KernelSpec(family, effective_wavelet(mu, family), IndexWindow(-10, 10, 2 ** 30),
                      WeightRule("alternating"))
    seps = dyadic_separations(2)
    for side, order in (("x", 0), ("x", 1), ("y", 2)):
        rep = decay_scan(spec, side, order, seps)
        print(f"{side}-derivative order {order}: slope {rep.slope:.2f} (target {rep.target:g}), "
              f"spread {rep.spread:.2f}")


if __name__ == "__main__":
    main()
