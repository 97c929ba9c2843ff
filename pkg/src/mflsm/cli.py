"""Command-line harness: ``mflsm {config,forward,invert,report,reproduce}``.

Progress goes to stderr; results go to files under ``--out``. Exit status is 0
on success, 2 on invalid configuration and 3 on numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import experiment
from .errors import DatasetError, NumericalError, SceneValidationError, UnsupportedConfiguration

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


def _snr(text):
    return None if text.lower() in ("inf", "none", "clean") else float(text)


def _common(p):
    p.add_argument("--config", type=Path, help="experiment JSON file")
    p.add_argument("--seed", type=int, help="noise seed")
    p.add_argument("--solver", choices=["series", "mom"])
    p.add_argument("--alpha-mlsm", type=float, help="override every MLSM alpha")
    p.add_argument("--alpha-mf", type=float, help="override every MF-MLSM alpha")
    p.add_argument("--threshold", help="'otsu' or 'fixed:<tau>'")
    p.add_argument("--mf-mode", choices=["per_frequency", "stacked", "phase_corrected"])
    p.add_argument("--methods", nargs="+", help="e.g. MLSM MF_MLSM LSM")
    p.add_argument("--aperture", type=float, action="append", help="aperture in degrees (repeatable)")
    p.add_argument("--snr", type=_snr, action="append", help="SNR in dB, or 'inf' (repeatable)")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--workers", type=int, default=1, help="threads for the pixel loop")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="mflsm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("config", help="print the default experiment JSON")
    for name, help_ in [
        ("forward", "synthesise the full-ring dataset and its noisy copies"),
        ("invert", "compute indicator maps for every configured run"),
        ("report", "score maps against ground truth and write the coverage table"),
        ("reproduce", "forward + invert + report + figures"),
    ]:
        p = sub.add_parser(name, help=help_)
        _common(p)
        if name == "invert":
            p.add_argument("--data", type=Path, help="directory holding *.lsmd files")
        if name == "report":
            p.add_argument("--maps", type=Path, help="directory holding map *.json/*.csv")
        if name == "reproduce":
            p.add_argument("--no-figures", action="store_true")
    return parser


def resolve_spec(args) -> experiment.ExperimentSpec:
    spec = experiment.load_spec(args.config) if args.config else experiment.ExperimentSpec()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.solver:
        changes["solver"] = args.solver
    if args.threshold:
        changes["threshold"] = args.threshold
    if args.mf_mode:
        changes["mf_mode"] = args.mf_mode
    if args.methods is not None:
        changes["methods"] = tuple(args.methods)
    if args.out:
        changes["out_dir"] = str(args.out)
    alphas = json.loads(json.dumps(spec.alphas))
    if args.alpha_mlsm is not None:
        alphas["MLSM_parallel"] = args.alpha_mlsm
        alphas["LSM_single"] = args.alpha_mlsm
    if args.alpha_mf is not None:
        alphas["MF_MLSM"] = args.alpha_mf
    changes["alphas"] = alphas
    if args.aperture or args.snr:
        aps = tuple(args.aperture) if args.aperture else tuple(a for a, _ in spec.cells())
        snrs = tuple(args.snr) if args.snr else tuple(s for _, s in spec.cells())
        aps, snrs = tuple(dict.fromkeys(aps)), tuple(dict.fromkeys(snrs))
        changes.update(apertures=aps, snrs=snrs, settings=None)
    return replace(spec, **changes).validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.command == "config":
            print(json.dumps(experiment.ExperimentSpec().to_dict(), indent=2))
            return EXIT_OK
        spec = resolve_spec(args)
        out = Path(spec.out_dir)
        if args.command == "forward":
            for p in experiment.cmd_forward(spec, out):
                print(p, file=sys.stderr)
        elif args.command == "invert":
            experiment.cmd_invert(spec, args.data, out, workers=args.workers)
        elif args.command == "report":
            maps = experiment.load_maps(args.maps or out / "maps")
            reports = experiment.cmd_report(spec, maps, out)
            print(experiment.format_table(experiment.table_rows(reports)))
        elif args.command == "reproduce":
            reports = experiment.cmd_reproduce(spec, out, figures=not args.no_figures, workers=args.workers)
            print(experiment.format_table(experiment.table_rows(reports)))
    except (SceneValidationError, UnsupportedConfiguration, DatasetError, ValueError) as exc:
        print(f"mflsm: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"mflsm: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"mflsm: {exc}", file=sys.stderr)
        return 1
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
