"""Command-line front end.

    wqed-sim run <config.toml>       execute the engine named in the config
    wqed-sim compare <config.toml>   run both engines and report discrepancies
    wqed-sim fig3 <config.toml>      export the pair-spectrum interference maps

Exit status: 0 all requested work done and all tolerances met, 1 a
comparison exceeded its tolerance, 2 configuration or engine error.
The output directory resolves as: --out-dir flag, else $WQED_SIM_OUTDIR,
else the config's out_dir key.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .errors import WqedError
from .harness import (
    CompareReport,
    export_fig3_maps,
    load_config,
    run,
    run_compare,
)

_COMMANDS = {
    "run": "execute the engine selected by the config's 'engine' key",
    "compare": "run the frequency-domain and time-bin engines and compare",
    "fig3": "export Re/Im interference maps for the configured pulse widths",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wqed-sim",
        description="pulsed few-photon scattering on a 1D-waveguide emitter",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in _COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", type=Path, help="flat TOML run configuration")
        p.add_argument(
            "-o", "--out-dir", default=None,
            help="override the output directory (also: $WQED_SIM_OUTDIR)",
        )
        p.add_argument(
            "-v", "--verbose", action="count", default=0,
            help="-v logs artifacts, -vv debug detail",
        )
        p.add_argument(
            "-j", "--workers", type=int, default=1,
            help="parallel workers for independent map exports",
        )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    out_override = args.out_dir or os.environ.get("WQED_SIM_OUTDIR")
    try:
        config = load_config(args.config, out_override)
        if args.command == "compare":
            report = run_compare(config)
            sys.stdout.write(report.to_text())
            return 0 if report.passed else 1
        if args.command == "fig3":
            paths = export_fig3_maps(config, workers=max(1, args.workers))
        else:
            result = run(config)
            if isinstance(result, CompareReport):
                sys.stdout.write(result.to_text())
                return 0 if result.passed else 1
            paths = result
        for path in paths:
            print(path)
        return 0
    except WqedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
