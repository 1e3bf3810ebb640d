"""percolab command line: generators, theory calculators, analyses and sweeps.

Run as `python -m percolab.main <subcommand> [flags]`. Human-readable
summaries go to standard output, logs to standard error, machine output only
to the `--out` path.

Exit codes: 0 success, 1 usage or parameter error, 2 runtime failure.
"""

import argparse
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import analysis, experiments, renorm
from .generators import FREE_PARAMETER, SAMPLING_METHODS, generate, nsw_degree_law, sampler_options
from .graph import components, graph_distance, read_edge_list, write_edge_list
from .params import NswParams, ParameterError, spec_from_mapping
from .rng import RngStream, fresh_seed
from .theory import (benjamini_bound, classify_homogeneous, classify_regime, distance_exponent,
                     giant_fraction, homogeneous_distance_regime, poisson_law, truncation_sensitivity,
                     typical_distance_order)

log = logging.getLogger('app')

# config key -> command-line flag, where they differ
FLAG_FOR_KEY = {'k_max': '--kmax', 'r_star': '--rstar', 'theta_renorm': '--theta-renorm',
                'stages': '--stages', 'kappa0': '--kappa0'}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text):
    try:
        return [float(t) for t in text.split(',') if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(t) for t in text.split(',') if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _flag(key: str) -> str:
    return FLAG_FOR_KEY.get(key, f"--{key}")


# --- parser ------------------------------------------------------------------------

def _common_parent():
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument('-d', '--debug', action='store_true', help='Enable debug logging')
    return parent


def _model_parent():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group('model')
    g.add_argument('--model', choices=['er', 'nsw', 'nn', 'hom', 'het', 'continuum', 'sitebond', 'poisson'],
                   help='Model family (poisson: theory only)')
    g.add_argument('--d', type=int, default=2, help='Dimension (default: 2)')
    g.add_argument('--n', type=int, default=1000, help='Node count for er/nsw (default: 1000)')
    g.add_argument('--side', type=int, default=64, help='Lattice box side N in sites (default: 64)')
    g.add_argument('--boundary', choices=['free', 'torus'], default='free', help='Box boundary (default: free)')
    g.add_argument('--p', type=float, help='Edge probability (er), bond probability (nn), '
                                            'nearest-neighbour probability (hom; default 1-exp(-lambda))')
    g.add_argument('--vartheta', type=float, help='ER mean degree, p = vartheta/n')
    g.add_argument('--lambda', dest='lam', type=float, help='Edge intensity lambda (hom, het, continuum, sitebond)')
    g.add_argument('--alpha', type=float, help='Distance decay exponent alpha')
    g.add_argument('--beta', type=float, help='Pareto weight tail beta (het, continuum; default inf for continuum)')
    g.add_argument('--nu', type=float, help='Continuum intensity, points per unit volume')
    g.add_argument('--L', type=float, help='Continuum box side length, in length units')
    g.add_argument('--tau', type=float, help='NSW degree tail parameter tau')
    g.add_argument('--kmax', type=int, help='NSW degree cutoff (default: 1000000)')
    g.add_argument('--rstar', type=float, help='Site occupation probability r* (sitebond)')
    g.add_argument('--homogeneous-marks', action='store_true', help='Continuum: force unit marks')
    g.add_argument('--plant-origin', action='store_true', help='Continuum: add a particle at the origin as node 0')
    g.add_argument('--method', choices=['exhaustive', 'binomial', 'shells'],
                   help='Pair sampler: binomial for hom/sitebond, shells for het in free 1-d boxes '
                        '(default: exhaustive)')
    g.add_argument('--in', dest='infile', type=Path, help='Read the graph from an edge-list file instead')
    return p


def _run_parent():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group('run')
    g.add_argument('--seed', type=int, help='Base seed (default: fresh random seed, printed)')
    g.add_argument('--stream', type=int, default=0, help='Stream index (default: 0)')
    g.add_argument('--replicates', type=int, default=1, help='Independent replicates (default: 1)')
    g.add_argument('--out', type=Path, help='Output path')
    g.add_argument('--threads', type=int, help='Worker processes (default: available cores)')
    return p


def build_arg_parser():
    common, model, run = _common_parent(), _model_parent(), _run_parent()
    parser = _Parser(prog='percolab', description='Random-graph and percolation laboratory')
    sub = parser.add_subparsers(dest='command', metavar='COMMAND', parser_class=_Parser)
    sub.required = True

    def add(name, help_text, *parents):
        return sub.add_parser(name, help=help_text, description=help_text, parents=[common, *parents])

    p = add('gen', 'Sample one graph and write it as an edge list', model, run)
    p.set_defaults(func=cmd_gen)

    p = add('theory', 'Branching-theory and regime predictions', model)
    p.add_argument('--theta', type=float, help='Poisson mean for --model poisson')
    p.add_argument('--out', type=Path, help='Write the report as JSON')
    p.set_defaults(func=cmd_theory)

    p = add('degrees', 'Degree histogram and Hill tail fit', model, run)
    p.add_argument('--fraction', type=float, default=0.05, help='Hill top-order fraction (default: 0.05)')
    p.set_defaults(func=cmd_degrees)

    p = add('components', 'Connected components and the largest-component fraction', model, run)
    p.set_defaults(func=cmd_components)

    p = add('distance', 'Chemical-distance profile by Euclidean radius', model, run)
    p.add_argument('--radii', type=_floats, help='Comma-separated radii, in lattice units')
    p.add_argument('--pairs', type=int, default=100, help='Pairs per radius (default: 100)')
    p.add_argument('--source', type=int, help='Instead of a profile, hop counts from this node')
    p.add_argument('--targets', type=_ints, help='Target nodes for --source')
    p.set_defaults(func=cmd_distance)

    p = add('crossing', 'Left-right crossing probability of a lattice box', model, run)
    p.set_defaults(func=cmd_crossing)

    p = add('bisect', 'Bisect p or lambda for a target crossing probability', model, run)
    p.add_argument('--lo', type=float, default=0.0, help='Lower end of the bracket (default: 0)')
    p.add_argument('--hi', type=float, default=1.0, help='Upper end of the bracket (default: 1)')
    p.add_argument('--target', type=float, default=0.5, help='Target crossing probability (default: 0.5)')
    p.add_argument('--tol', type=float, default=1e-3, help='Bracket width to stop at (default: 0.001)')
    p.set_defaults(func=cmd_bisect)

    renorm_flags = argparse.ArgumentParser(add_help=False)
    g = renorm_flags.add_argument_group('boxes')
    g.add_argument('--M', type=int, default=4, help='Base box side, in sites (default: 4)')
    g.add_argument('--K', type=int, default=1, help='Enlargement width, in sites (default: 1)')

    p = add('semicluster', 'Semi-clusters of one box', model, run, renorm_flags)
    p.add_argument('--ell', type=int, default=2, help='Minimum semi-cluster size, in sites (default: 2)')
    p.add_argument('--origin', type=_ints, help='Box corner coordinates (default: all zeros)')
    p.set_defaults(func=cmd_semicluster)

    p = add('renorm', 'Renormalisation goodness of the stage-n boxes', model, run, renorm_flags)
    p.add_argument('--delta', type=float, default=1.5, help='Blocking exponent delta (default: 1.5)')
    p.add_argument('--theta-renorm', type=float, default=1.2, help='Density exponent (default: 1.2)')
    p.add_argument('--kappa0', type=float, help='Stage-0 density (default: half the largest-component density)')
    p.add_argument('--stages', type=int, default=1, help='Stage to evaluate (default: 1)')
    p.set_defaults(func=cmd_renorm)

    p = add('sweep', 'Run a config-file parameter sweep', run)
    p.add_argument('--config', type=Path, required=True, help='Flat key = value config file')
    p.set_defaults(func=cmd_sweep)

    p = add('phase', 'Phase-diagram signatures of lambda_c for heterogeneous long-range percolation', run)
    p.add_argument('--d', type=int, default=1, help='Dimension (default: 1)')
    p.add_argument('--alphas', type=_floats, required=True, help='Comma-separated alpha values')
    p.add_argument('--betas', type=_floats, required=True, help='Comma-separated beta values')
    p.add_argument('--lambdas', type=_floats, required=True, help='Comma-separated lambda values')
    p.add_argument('--sides', type=_ints, required=True, help='Comma-separated box sides N, in sites')
    p.set_defaults(func=cmd_phase)

    p = add('distances', 'Growth-law fit of chemical distances for one model cell', model, run)
    p.add_argument('--radii', type=_floats, required=True, help='Comma-separated radii (at least 3)')
    p.add_argument('--pairs', type=int, default=100, help='Pairs per radius (default: 100)')
    p.set_defaults(func=cmd_distances)
    return parser


# --- helpers -----------------------------------------------------------------------

def _mapping(args) -> dict:
    keys = {'model': args.model, 'd': args.d, 'n': args.n, 'side': args.side, 'boundary': args.boundary,
            'p': args.p, 'vartheta': args.vartheta, 'lambda': args.lam, 'alpha': args.alpha,
            'beta': args.beta, 'nu': args.nu, 'L': args.L, 'tau': args.tau, 'k_max': args.kmax,
            'r_star': args.rstar, 'homogeneous_marks': args.homogeneous_marks,
            'plant_origin': args.plant_origin}
    return {k: v for k, v in keys.items() if v is not None}


def _spec(args):
    if args.model is None:
        raise UsageError("--model is required")
    return spec_from_mapping(_mapping(args))


def _base_seed(args) -> int:
    if args.seed is None:
        args.seed = fresh_seed()
        print(f"seed = {args.seed}")
    for key in ('seed', 'stream'):
        value = getattr(args, key)
        if not 0 <= value < 2 ** 64:
            raise ParameterError(key, f"must be a 64-bit unsigned integer, got {value}")
    return args.seed


def _seed(args) -> RngStream:
    return RngStream(_base_seed(args), args.stream)


def _options(args, spec) -> dict:
    offered = SAMPLING_METHODS.get(spec.model)
    if args.method and offered and args.method not in offered:
        raise ParameterError('method', f"model {spec.model} samples with {' or '.join(offered)}, "
                                       f"got {args.method!r}")
    return sampler_options(spec, args.method)


def _graph(args):
    """The graph named by --in, or one sample of the model flags."""
    if args.infile is not None:
        return read_edge_list(args.infile), None, None
    spec, box = _spec(args)
    return generate(spec, box, _seed(args), **_options(args, spec)), spec, box


def _show(mapping: dict):
    for key, val in mapping.items():
        print(f"{key} = {val}")


def _write_frame(frame, path: Path):
    experiments.write_csv(frame, path)
    log.info('wrote %s', path)


# --- subcommands -------------------------------------------------------------------

def cmd_gen(args, outputs):
    if args.out is None:
        raise UsageError("gen needs --out")
    g, spec, _ = _graph(args)
    outputs.append(args.out)
    write_edge_list(g, args.out)
    _show({'model': spec.model if spec else 'file', 'nodes': g.num_nodes, 'edges': g.num_edges,
           'out': args.out})


def cmd_theory(args, outputs):
    report = {}
    model = (args.model or '').lower()
    if model in ('er', 'poisson'):
        theta = args.theta if model == 'poisson' else (
            args.vartheta if args.vartheta is not None else (args.p or math.nan) * (args.n - 1))
        if theta is None or not theta > 0:
            raise ParameterError('vartheta' if model == 'er' else 'theta', "need a positive mean degree")
        k_max = args.kmax or max(50, int(theta * 10 + 50))
        rep = truncation_sensitivity(lambda k: poisson_law(theta, k), k_max)
        report.update(rep.as_dict())
        report['typical_distance_order'] = typical_distance_order(poisson_law(theta, k_max), args.n)
    elif model == 'nsw':
        params = NswParams(n=max(args.n, 2), tau=args.tau if args.tau is not None else math.nan,
                           k_max=args.kmax or 10 ** 6)
        rep = truncation_sensitivity(lambda k: nsw_degree_law(NswParams(params.n, params.tau, k)), params.k_max)
        report.update(rep.as_dict())
        tail = params.tau if 1.0 < params.tau < 2.0 else None
        report['typical_distance_order'] = typical_distance_order(nsw_degree_law(params), params.n, tail)
    elif model:
        raise ParameterError('model', f"theory covers er, nsw and poisson, got {model!r}")
    if args.alpha is not None:
        d, alpha = args.d, args.alpha
        if args.beta is not None:
            report.update({f"regime.{k}": v for k, v in classify_regime(d, alpha, args.beta).as_dict().items()})
        else:
            report['homogeneous.cluster'] = classify_homogeneous(d, alpha, args.lam).value
            report['homogeneous.distance'] = homogeneous_distance_regime(d, alpha).value
        if d < alpha < 2 * d:
            report['delta'] = distance_exponent(d, alpha)
        if alpha < d:
            report['benjamini_bound'] = benjamini_bound(d, alpha)
    if not report:
        raise UsageError("theory needs --model er|nsw|poisson or --alpha (with --d, --beta)")
    _show(report)
    if args.out:
        outputs.append(args.out)
        args.out.write_text(json.dumps(report, indent=2, sort_keys=True, default=str) + '\n', encoding='utf-8')


def cmd_degrees(args, outputs):
    g, spec, _ = _graph(args)
    summary = analysis.degree_summary(g)
    info = {'nodes': summary.num_nodes, 'mean_degree': summary.mean,
            'max_degree': summary.histogram.size - 1}
    rng = RngStream(_base_seed(args) if args.seed is not None else 0, args.stream)
    try:
        fit = analysis.degree_tail(g, rng, args.fraction)
        info.update(tau_hat=fit.tau_hat, k_count=fit.k_count, threshold=fit.threshold)
    except ValueError as exc:
        info['tau_hat'] = f"n/a ({exc})"
    _show(info)
    if args.out:
        frame = pd.DataFrame({'degree': np.arange(summary.histogram.size), 'count': summary.histogram,
                              'survival': summary.survival})
        outputs.append(args.out)
        _write_frame(frame, args.out)


def cmd_components(args, outputs):
    g, spec, _ = _graph(args)
    lab = components(g)
    info = {'nodes': g.num_nodes, 'components': lab.num_components, 'largest_size': lab.largest_size,
            'largest_fraction': lab.largest_size / g.num_nodes if g.num_nodes else 0.0}
    if spec is not None and spec.model == 'er':
        info['theory_chi'] = giant_fraction(poisson_law(spec.edge_prob * spec.n, 200)).chi
    elif spec is not None and spec.model == 'nsw':
        info['theory_chi'] = giant_fraction(nsw_degree_law(spec)).chi
    _show(info)


def cmd_distance(args, outputs):
    if args.source is not None:
        g, _, _ = _graph(args)
        targets = args.targets if args.targets else range(g.num_nodes)
        dist = graph_distance(g, args.source, targets)
        for t in sorted(dist):
            v = dist[t]
            print(f"{args.source} {t} {v if isinstance(v, int) else ''}")
        return
    if not args.radii:
        raise UsageError("distance needs --radii, or --source for single-source hop counts")
    spec, box = _spec(args)
    profile = analysis.chemical_distance_profile(spec, box, args.radii, args.pairs, _seed(args),
                                                 replicates=args.replicates, **_options(args, spec))
    for p in profile:
        print(f"r = {p.radius:g}: pairs {p.count}, median {p.median:g}, quartiles {p.q1:g}..{p.q3:g}")
    if args.out:
        frame = pd.DataFrame([{'radius': p.radius, 'pairs': p.count,
                               'median': p.median if p.count else None,
                               'q1': p.q1 if p.count else None, 'q3': p.q3 if p.count else None}
                              for p in profile])
        outputs.append(args.out)
        _write_frame(frame, args.out)


def cmd_crossing(args, outputs):
    spec, box = _spec(args)
    if box is None:
        raise ParameterError('model', "crossing needs a lattice model")
    est = analysis.crossing_probability(spec, box, args.replicates, _seed(args), **_options(args, spec))
    _show({'crossing_probability': est.probability, 'ci_low': est.lo, 'ci_high': est.hi,
           'replicates': est.replicates})


def cmd_bisect(args, outputs):
    if args.model is None:
        raise UsageError("--model is required")
    values = _mapping(args)
    # the bisected parameter only needs a placeholder
    free = FREE_PARAMETER.get(args.model)
    if free is not None:
        values.setdefault(free, args.hi)
    spec, box = spec_from_mapping(values)
    if box is None:
        raise ParameterError('model', "bisection needs a lattice model")
    res = analysis.bisect_critical(spec, box, _seed(args), args.lo, args.hi, args.replicates,
                                   args.target, args.tol)
    _show({'free': res.free, 'estimate': res.estimate, 'lo': res.lo, 'hi': res.hi,
           'steps': res.steps, 'replicates': res.replicates})


def cmd_semicluster(args, outputs):
    g, _, _ = _graph(args)
    d = g.dimension
    origin = args.origin if args.origin else [0] * d
    found = renorm.find_semi_clusters(g, origin, args.M, args.K, args.ell)
    print(f"semi_clusters = {len(found)}")
    for s in found:
        print(f"size {len(s)}: {' '.join(str(x) for x in s.members.tolist())}")


def cmd_renorm(args, outputs):
    g, _, _ = _graph(args)
    if g.positions is None:
        raise ParameterError('model', "renormalisation needs a lattice graph")
    kappa0 = args.kappa0 if args.kappa0 is not None else renorm.default_kappa0(g)
    schedule = renorm.RenormSchedule(args.M, args.K, args.delta, args.theta_renorm, kappa0, args.stages)
    side = int(g.positions.max()) + 1
    boxes = renorm.stage_boxes(side, g.dimension, schedule, args.stages)
    if not boxes:
        raise ParameterError('stages', f"a stage-{args.stages} box has side {schedule.side(args.stages)}, "
                                       f"larger than the lattice ({side})")
    certs = [renorm.renorm_goodness(g, schedule, args.stages, v) for v in boxes]
    good = sum(c.good for c in certs)
    _show({'kappa0': kappa0, 'stage': args.stages, 'box_side': schedule.side(args.stages),
           'boxes': len(certs), 'good': good})
    for c in certs:
        print(f"box {c.index}: {c.reason}")


def cmd_sweep(args, outputs):
    config = experiments.ExperimentConfig.from_file(args.config)
    if args.out:
        config = dataclasses.replace(config, out=args.out)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=_base_seed(args))
    outputs.extend(experiments.output_paths(config.out))
    result = experiments.run_sweep(config, args.threads)
    _show({'rows': len(result.records), 'failed': sum(r.error is not None for r in result.records),
           'csv': result.csv_path, 'summary': result.summary_path})


def cmd_phase(args, outputs):
    _base_seed(args)
    frame = experiments.phase_diagram(args.d, args.alphas, args.betas, args.lambdas, args.sides,
                                      args.replicates, args.seed, args.threads)
    cells = frame.drop_duplicates(['alpha', 'beta'])
    for row in cells.itertuples():
        print(f"alpha = {row.alpha:g}, beta = {row.beta:g}: {row.signature} (predicted {row.predicted})")
    if args.out:
        outputs.append(args.out)
        _write_frame(frame, args.out)


def cmd_distances(args, outputs):
    spec, box = _spec(args)
    if box is None:
        raise ParameterError('model', "distance regimes need a lattice model")
    _base_seed(args)
    _options(args, spec)
    frame = experiments.distance_regimes([experiments.DistanceCell(spec, box)], args.radii, args.pairs,
                                         args.replicates, args.seed, method=args.method)
    row = frame.iloc[0]
    _show({'status': row['status'], 'best': row['best'], 'predicted': row['predicted'],
           'delta': row['delta']})
    if args.out:
        outputs.append(args.out)
        _write_frame(frame, args.out)


# --- entry point -------------------------------------------------------------------

def main(argv=None) -> int:
    parser = build_arg_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.DEBUG if args.debug else logging.INFO,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    outputs: list[Path] = []
    out = getattr(args, 'out', None)
    existed = {Path(out)} if out is not None and Path(out).exists() else set()
    code = 0
    try:
        args.func(args, outputs)
    except UsageError as exc:
        print(f"percolab {args.command}: {exc}", file=sys.stderr)
        code = 1
    except ParameterError as exc:
        print(f"percolab {args.command}: {_flag(exc.key)}: {str(exc).split(': ', 1)[-1]}", file=sys.stderr)
        code = 1
    except Exception as exc:
        log.error('%s failed: %s', args.command, exc)
        log.debug('traceback', exc_info=True)
        code = 2
    if code:
        for path in outputs:
            path = Path(path)
            if path not in existed:
                path.unlink(missing_ok=True)
    return code


if __name__ == '__main__':
    sys.exit(main())
