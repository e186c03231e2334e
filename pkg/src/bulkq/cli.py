"""Command-line front end: ``bulkq <solve|simulate|spectral|verify> --config FILE``.

Exit codes: 0 success, 1 failed checks, 2 configuration error, 3 runtime fault.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import verify
from .config import ConfigError, load

OUT_ENV = "BULKQ_OUT"
EXIT_OK, EXIT_CHECKS, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def run(subcommand, scenario, out_dir, workers=1):
    """Run one workflow and return ``(exit_code, checks)``."""
    if subcommand == "solve":
        verify.run_solve(scenario, out_dir)
        return EXIT_OK, []
    if subcommand == "simulate":
        verify.run_simulate(scenario, out_dir, workers)
        return EXIT_OK, []
    if subcommand == "spectral":
        checks = verify.run_spectral(scenario, out_dir)
    elif subcommand == "verify":
        checks = verify.run_verify(scenario, out_dir, workers)
    else:
        raise ValueError(f"unknown subcommand {subcommand!r}")
    failed = any(c.status == "FAIL" for c in checks)
    return (EXIT_CHECKS if failed else EXIT_OK), checks


def main(argv=None):
    parser = argparse.ArgumentParser(prog="bulkq", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=["solve", "simulate", "spectral", "verify"])
    parser.add_argument("--config", required=True, help="scenario file")
    parser.add_argument("--out", help=f"output directory (default: ${OUT_ENV}, the "
                                      "scenario's run.out, or ./bulkq_out)")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker processes for simulation replications")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    try:
        sc = load(args.config)
    except (ConfigError, OSError) as e:
        print(f"bulkq: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = args.out or os.environ.get(OUT_ENV) or sc.out or "bulkq_out"

    try:
        code, checks = run(args.command, sc, out_dir, max(1, args.threads))
    except Exception as e:  # noqa: BLE001 - any fault maps to exit 3
        print(f"bulkq: runtime fault: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    for c in checks:
        print(c.line())
        if c.status == "WARN":
            print(f"bulkq: warning: {c.name} (see closed_form_report.csv)", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
