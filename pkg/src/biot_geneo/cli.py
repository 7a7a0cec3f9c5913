"""``biot-geneo`` command-line entry point."""

import argparse
import dataclasses
import logging
import sys

from .block_precond import DISPLACEMENT_SOLVERS
from .harness import EXPERIMENTS, PATTERNS, ExperimentConfig, run_experiment

EXIT_OK, EXIT_USAGE, EXIT_NOT_CONVERGED = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _coerce(key, value):
    """Convert a config-file string to the type of the matching field."""
    default = _FIELDS[key].default
    if key == "tau":
        return None if value.lower() in ("", "none") else float(value)
    if key == "csv":
        return value or None
    if isinstance(default, bool):
        low = value.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return value


def read_config_file(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in _FIELDS:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                out[key] = _coerce(key, value)
            except ValueError as exc:
                raise UsageError(f"{path}:{lineno}: {exc}") from None
    return out


def build_parser():
    p = _Parser(prog="biot-geneo", description="Biot poroelasticity with GenEO-preconditioned GMRES.")
    S = argparse.SUPPRESS
    p.add_argument("--experiment", choices=EXPERIMENTS, default=S)
    p.add_argument("--n", type=int, default=S, help="mesh cells per side")
    p.add_argument("--kx", type=int, default=S)
    p.add_argument("--ky", type=int, default=S)
    p.add_argument("--overlap", type=int, default=S, help="overlap in element layers")
    p.add_argument("--nu", type=float, default=S)
    p.add_argument("--kappa", type=float, default=S)
    p.add_argument("--dstab", type=float, default=S)
    p.add_argument("--dt", type=float, default=S)
    p.add_argument("--t-end", dest="t_end", type=float, default=S)
    p.add_argument("--rtol", type=float, default=S)
    p.add_argument("--deflation", type=int, default=S, help="eigenvectors per subdomain")
    p.add_argument("--tau", type=float, default=S, help="eigenvalue threshold (overrides --deflation)")
    p.add_argument("--precond", choices=DISPLACEMENT_SOLVERS, default=S)
    p.add_argument("--pattern", choices=PATTERNS, default=S)
    p.add_argument("--threads", type=int, default=S)
    p.add_argument("--scale-down", dest="scale_down", action="store_true", default=S,
                   help="halve H/h in the overlap study (recommended on a workstation)")
    p.add_argument("--csv", default=S, help="output CSV path (default: stdout)")
    p.add_argument("--config", default=None, help="file of 'key = value' lines")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def parse_config(argv=None):
    """Merge defaults < config file < command line into an ExperimentConfig."""
    args = vars(build_parser().parse_args(argv))
    verbose = args.pop("verbose")
    path = args.pop("config")
    merged = read_config_file(path) if path else {}
    merged.update(args)
    try:
        return ExperimentConfig(**merged), verbose
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def main(argv=None):
    try:
        config, verbose = parse_config(argv)
    except UsageError as exc:
        print(f"biot-geneo: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"biot-geneo: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")
    report = run_experiment(config)
    if config.csv:
        report.to_csv(config.csv)
    else:
        report.to_csv(sys.stdout)
    return EXIT_OK if report.all_converged else EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
