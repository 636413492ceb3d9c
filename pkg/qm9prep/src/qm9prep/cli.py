"""Command line for the QM9 feature extractor.

    qm9prep extract --raw <dir> --out features.csv [--energy u298|u0]
                    [--smiles-source relaxed|original] [--protected-prefix N]
    qm9prep verify  --file features.csv [--first-n N] [--hist-out h.csv] [--bins N]
"""

from __future__ import annotations

import argparse
import json
import sys

from qm9prep.extract import (
    ExtractError,
    VerifyError,
    export_fe_histograms,
    extract,
    verify,
)
from qm9prep.qm9 import Qm9FormatError
from qm9prep.smiles import SmilesError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qm9prep", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_extract = sub.add_parser("extract", help="raw .xyz directory -> canonical CSV")
    p_extract.add_argument("--raw", required=True, help="directory of QM9 .xyz files")
    p_extract.add_argument("--out", required=True, help="output CSV path")
    p_extract.add_argument("--energy", choices=("u298", "u0"), default="u298")
    p_extract.add_argument("--smiles-source", choices=("relaxed", "original"), default="relaxed")
    p_extract.add_argument("--protected-prefix", type=int, default=1000,
                           help="rows in which a skip aborts instead (subset indexing)")

    p_verify = sub.add_parser("verify", help="independent re-validation of a CSV")
    p_verify.add_argument("--file", required=True)
    p_verify.add_argument("--first-n", type=int, default=1000)
    p_verify.add_argument("--hist-out", help="also export FE density histograms")
    p_verify.add_argument("--bins", type=int, default=60)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "extract":
            result = extract(
                args.raw, args.out,
                energy=args.energy,
                smiles_source=args.smiles_source,
                protected_prefix=args.protected_prefix,
            )
            print(f"wrote {result.rows_written} rows to {args.out}")
            if result.skipped:
                print(f"skipped {len(result.skipped)} molecules (see manifest)")
            return 0
        report = verify(args.file, first_n=args.first_n)
        print(json.dumps(report, indent=2, sort_keys=True))
        if args.hist_out:
            export_fe_histograms(args.file, args.hist_out, first_n=args.first_n, bins=args.bins)
            print(f"wrote histograms to {args.hist_out}")
        return 0
    except (ExtractError, VerifyError, Qm9FormatError, SmilesError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
