"""
Command-line interface for polypack

Usage: python src/run_polypack.py <command> [options]

Exit codes: 0 ok, 1 other failure, 2 parse error or malformed input,
3 audit failure, 4 store conflict.
"""

import argparse
import logging
import sys

from polypack import commands, config
from polypack.exceptions import AuditFailure, PolypackError, RecordFormatError, StoreConflictError

# Set up logging
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_PARSE = 2
EXIT_AUDIT = 3
EXIT_STORE = 4


def _sigma(value):
    sigma = int(value)
    if sigma < 3:
        raise argparse.ArgumentTypeError(f"sigma must be >= 3, got {value}")
    return sigma


def _positive(value):
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return number


def _non_negative_float(value):
    number = float(value)
    if number < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {value}")
    return number


def build_parser():
    parser = argparse.ArgumentParser(prog='polypack', description='Congruent disk packings in regular polygons')
    sub = parser.add_subparsers(dest='command', required=True)

    def container(p, required=True):
        p.add_argument('--sigma', type=_sigma, required=required, help='number of polygon sides')

    def source(p):
        p.add_argument('--in', dest='path', required=True, help='record JSON or index x y point list')
        container(p, required=False)

    p = sub.add_parser('solve', help='multi-restart annealing')
    container(p)
    p.add_argument('--n', type=_positive, required=True)
    p.add_argument('--convention', choices=['I', 'II', 'III'], default='I')
    p.add_argument('--restarts', type=_positive, default=config.RESTARTS)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--out')
    p.add_argument('--store')
    p.add_argument('--log', help='line-delimited JSON run log')

    p = sub.add_parser('refine', help='shake, variance refinement or hole filling')
    source(p)
    p.add_argument('--method', choices=['shake', 'variance', 'holes'], required=True)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--extra', type=int, default=0, help='disks to add into holes')
    p.add_argument('--out')
    p.add_argument('--store')

    p = sub.add_parser('analyze', help='packing metrics')
    source(p)
    p.add_argument('--tol', type=_non_negative_float, help='contact tolerance relative to r')

    p = sub.add_parser('voronoi', help='topological charge ledger')
    source(p)
    p.add_argument('--tol', type=_non_negative_float, help='vertex merge tolerance')
    p.add_argument('--svg')

    p = sub.add_parser('bounds', help='closed-form density bounds')
    container(p)
    p.add_argument('--n', type=_positive, required=True)
    p.add_argument('--r', type=float, help='measured convention-I radius')

    p = sub.add_parser('necklace', help='shortest closed tour and necklace test')
    source(p)
    p.add_argument('--tol', type=_non_negative_float)

    p = sub.add_parser('sample', help='uniform points in the polygon')
    container(p)
    p.add_argument('--n', type=_positive, required=True)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--out')

    p = sub.add_parser('fit', help='asymptotic coefficients from a batch summary')
    p.add_argument('--in', dest='path', required=True)
    p.add_argument('--out')

    p = sub.add_parser('render', help='SVG drawing')
    source(p)
    p.add_argument('--convention', choices=['I', 'II', 'III'])
    p.add_argument('--voronoi', action='store_true')
    p.add_argument('--svg')

    p = sub.add_parser('batch', help='sweep sigma and N into a record store')
    p.add_argument('--sigma', type=_sigma, nargs=2, metavar=('MIN', 'MAX'))
    p.add_argument('--n', type=_positive, nargs=2, metavar=('MIN', 'MAX'))
    p.add_argument('--restarts', type=_positive, default=config.RESTARTS)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--store', default=config.STORE_ROOT)
    p.add_argument('--out', help='summary CSV')

    p = sub.add_parser('verify', help='audit a record file')
    p.add_argument('--in', dest='path', required=True)
    p.add_argument('--tol', type=_non_negative_float)

    return parser


def _write(text, out=None):
    if out:
        with open(out, 'w', encoding='utf-8') as f:
            f.write(text)
        commands.status(f"✅ Wrote {out}")
    else:
        sys.stdout.write(text)


def dispatch(args):
    """Run the selected command and write its output."""
    name = args.command
    if name == 'solve':
        payload = commands.solve(args.sigma, args.n, args.convention, args.restarts, args.seed,
                                 out=args.out, store=args.store, log=args.log)
        if not args.out:
            _write(commands.to_json(payload))
    elif name == 'refine':
        payload = commands.refine(args.path, args.method, args.seed, args.extra, args.sigma,
                                  out=args.out, store=args.store)
        if not args.out:
            _write(commands.to_json(payload))
    elif name == 'analyze':
        _write(commands.to_json(commands.analyze(args.path, args.sigma, args.tol)))
    elif name == 'voronoi':
        _write(commands.to_json(commands.voronoi(args.path, args.sigma, args.tol, args.svg)))
    elif name == 'bounds':
        _write(commands.to_json(commands.bounds(args.sigma, args.n, args.r)))
    elif name == 'necklace':
        _write(commands.to_json(commands.necklace(args.path, args.sigma, args.tol)))
    elif name == 'sample':
        _write(commands.sample(args.sigma, args.n, args.seed), args.out)
    elif name == 'fit':
        _write(commands.fit(args.path), args.out)
    elif name == 'render':
        svg = commands.render(args.path, args.sigma, args.convention, args.voronoi, args.svg)
        if not args.svg:
            _write(svg)
    elif name == 'batch':
        text = commands.batch(args.sigma, args.n, args.restarts, args.seed, args.store, args.out)
        if not args.out:
            _write(text)
    elif name == 'verify':
        _write(commands.to_json(commands.verify(args.path, args.tol)))


def main(argv=None):
    """
    Parse argv, run the command and map failures to exit codes.

    Returns:
    --------
    int
        Process exit code
    """
    logging.basicConfig(level=getattr(logging, config.LOG_LEVEL, logging.INFO),
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_PARSE

    try:
        dispatch(args)
    except AuditFailure as e:
        commands.status(f"❌ Audit failed: {e}")
        return EXIT_AUDIT
    except StoreConflictError as e:
        commands.status(f"❌ Store conflict: {e}")
        return EXIT_STORE
    except RecordFormatError as e:
        commands.status(f"❌ Malformed input: {e}")
        return EXIT_PARSE
    except PolypackError as e:
        commands.status(f"❌ {type(e).__name__}: {e}")
        return EXIT_FAILURE
    except ValueError as e:
        commands.status(f"❌ Invalid argument: {e}")
        return EXIT_PARSE
    return EXIT_OK
