import sys
import argparse
import logging
import os

from . import __version__
from .errors import LeverageError
from .mcd import DEFAULT_SEED, McdConfig
from .pipeline import RunConfig, run
from .reference import reproduce

def env_default(name, fallback):
    return os.environ[name] if name in os.environ else fallback

def names(arg):
    return tuple(n.strip() for n in arg.split(",") if n.strip())

def get_parser():
    parser = argparse.ArgumentParser(prog="roblev",
                                     description="Robust leverage diagnostics for linear model designs")
    parser.add_argument('--data', metavar='CSV',
                        help='CSV file with a header row')
    parser.add_argument('--formula', metavar='FORMULA',
                        help='Model formula, e.g. "~ Age10 + Base4 * Trt"')
    parser.add_argument('--categorical', metavar='NAME,...', type=names, default=(),
                        help='Treat these numeric columns as categorical')
    parser.add_argument('--alpha', type=float, default=0.5,
                        help='MCD coverage in [0.5, 1], 0.5 gives maximal breakdown')
    parser.add_argument('--ntrials', type=int, default=env_default("ROBLEV_NTRIALS", 500),
                        help='Random elemental subsets to draw (default $ROBLEV_NTRIALS or 500)')
    parser.add_argument('--reweight-prob', type=float, default=0.975,
                        help='Chi-square probability of the reweighting cutoff')
    parser.add_argument('--seed', type=int, default=env_default("ROBLEV_SEED", DEFAULT_SEED),
                        help='Seed of the subset search (default $ROBLEV_SEED or 1)')
    parser.add_argument('--no-small-sample', action='store_true',
                        help='Disable the small sample correction of the MCD scatter')
    parser.add_argument('--c-override', type=float, metavar='C',
                        help='Use C as rescale factor of the reweighted scatter')
    parser.add_argument('--format', choices=['csv', 'json'], default='csv',
                        help='Report format')
    parser.add_argument('--out', metavar='FILE',
                        help='Write the report to FILE instead of stdout')
    parser.add_argument('--flag-cutoff', type=float, metavar='H',
                        help='Flag robust hat values above H (default 2p/n)')
    parser.add_argument('--reproduce-paper', action='store_true',
                        help='Compare a run on the bundled epilepsy data with published values')
    parser.add_argument('-v', '--verbose', action='count', default=0,
                        help='Log progress to stderr, twice for debug output')
    parser.add_argument('--version', action='version', version=F"%(prog)s {__version__}")

    return parser

def main(argv=None):
    parser = get_parser()
    args = parser.parse_args(argv)

    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="%(name)s: %(levelname)s: %(message)s", force=True)

    try:
        mcd = McdConfig(alpha=args.alpha, n_trials=args.ntrials,
                        reweight_prob=args.reweight_prob, seed=args.seed,
                        use_small_sample_correction=not args.no_small_sample,
                        c_override=args.c_override)

        if args.reproduce_paper:
            return 0 if reproduce(mcd) else 1
        elif args.data is None or args.formula is None:
            parser.error("--data and --formula are required")

        config = RunConfig(args.formula, args.data, args.categorical, mcd,
                           args.format, args.out, args.flag_cutoff)
        run(config)
    except LeverageError as e:
        print(F"roblev: {e}", file=sys.stderr)
        return e.exit_code

    return 0

if __name__ == "__main__":
    sys.exit(main())
