#!/usr/bin/env python3
"""Cross-validate the frequency-domain and time-bin engines.

Runs every compare config passed on the command line (defaults to the
three shipped ones) and prints the per-observable discrepancy tables.
Exits nonzero if any observable misses its tolerance.
"""

import argparse
import sys
from pathlib import Path

from wqed.harness import load_config, run_compare

REPO = Path(__file__).resolve().parent.parent
DEFAULT_CONFIGS = [
    REPO / "configs" / "compare_n1_symmetric.toml",
    REPO / "configs" / "compare_n2_symmetric.toml",
    REPO / "configs" / "compare_n2_chiral.toml",
]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("configs", nargs="*", type=Path, default=None)
    parser.add_argument("-o", "--out-dir", default=None,
                        help="redirect all artifacts below this directory")
    args = parser.parse_args(argv)
    configs = args.configs or DEFAULT_CONFIGS

    failures = 0
    for path in configs:
        override = None
        if args.out_dir is not None:
            override = Path(args.out_dir) / path.stem
        config = load_config(path, out_dir_override=override)
        print(f"== {path.name} ==")
        report = run_compare(config)
        sys.stdout.write(report.to_text())
        print()
        if not report.passed:
            failures += 1
    if failures:
        print(f"{failures} config(s) FAILED", file=sys.stderr)
        return 1
    print("all comparisons passed")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
