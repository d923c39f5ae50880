"""Command line interface: ``wavop run|validate|compare-paths|print-schema``.

Exit status 0 when every criterion passes, 1 when a numeric criterion
fails, 2 for configuration errors.
"""
import argparse
import sys

from . import harness


def _parser():
    parser = argparse.ArgumentParser(prog="wavop", description=__doc__.splitlines()[0])
    parser.add_argument("--print-schema", action="store_true", help="print the config schema")
    sub = parser.add_subparsers(dest="verb")
    for verb, text in (("run", "run the configured experiment"),
                       ("validate", "parse and validate a config without running it"),
                       ("compare-paths", "compare FFT and direct convolution on every scale")):
        p = sub.add_parser(verb, help=text)
        p.add_argument("--config", required=True, help="YAML experiment file")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--seed", type=int, help="unsigned 64-bit seed (overrides the config)")
        p.add_argument("--mode", choices=harness.MODES, help="convolution path")
    sub.add_parser("print-schema", help="print the config schema")
    return parser


def _report(result):
    for c in result.criteria:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status} {c.name}: {c.value!r} {c.comparison} {c.threshold!r}  ({c.certifies})")


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.print_schema or args.verb == "print-schema":
        sys.stdout.write(harness.schema_text())
        return 0
    if args.verb is None:
        _parser().print_help()
        return 2
    try:
        cfg = harness.load_config(args.config, args.seed, args.mode)
        if args.verb == "validate":
            print(f"ok: {cfg.kind} experiment, seed {cfg.seed}")
            return 0
        if args.verb == "compare-paths":
            result = harness.compare_paths(cfg, args.out)
        else:
            result = harness.run(cfg, args.out)
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    _report(result)
    if not result.passed:
        names = ", ".join(c.name for c in result.failed())
        print(f"failed criteria: {names}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
