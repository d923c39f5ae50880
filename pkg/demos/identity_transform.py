"""Apply the operator with a Dirac measure and unit weights to a wave packet and
print the relative reconstruction error for three nested scale windows."""
from wavop import Grid, IndexWindow, OperatorSpec, WeightRule, apply_operator, build_system, dirac
from wavop.grids import wave_packets
from wavop.streams import substream


def main():
    family = build_system(1)
    grid = Grid(32.0, 4096)
    f = wave_packets(grid, substream(1, "demo"))
    for J in (1, 2, 3):
        spec = OperatorSpec(dirac(1), family, family, WeightRule("ones"), IndexWindow(-J, J, 64))
        err = (apply_operator(f, spec) - f).norm() / f.norm()
        print(f"scales j in [{-J}, {J}]: relative error {err:.2e}")


if __name__ == "__main__":
    main()
