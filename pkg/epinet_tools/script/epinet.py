"""
Command line interface for simulating epidemics on latent networks, fitting the network models and summarising fits.

Examples:
epinet simulate --out sim --m 30 --beta 0.4 --mu 6 --seed 1
epinet fit --data sim/epidemic.csv --out fit --iterations 2000 --burnin 1000 --seed 2
epinet predict --data sim/epidemic.csv --trace fit/trace.csv --out fit --seed 3
epinet study --config study.txt --out study

Every file uses 1-based node labels.
"""

import os
import argparse
import logging
from typing import Any, Dict

import numpy as np

from epinet_tools.io import make_directory
from epinet_tools.data import files
from epinet_tools.data.config import load_config, MCMC_KEYS, RunConfig
from epinet_tools.data.dataset import clamp_known_proportion, with_known_edges
from epinet_tools.data.types import DataException, NetworkOrder
from epinet_tools.analysis.summary import summarize_trace, summarize_brg_trace, edge_posterior
from epinet_tools.analysis.predictive import posterior_predictive_curves
from epinet_tools.epidemic.simulate import simulate_si, cumulative_curve, default_grid
from epinet_tools.inference.mcmc import run_chain, BRG, PA
from epinet_tools.inference.brg import run_brg_chain
from epinet_tools.network.generate import generate_pa_network, generate_brg
from epinet_tools.script.file_util import check_valid_file, check_output_directory
from epinet_tools.study import run_study


logger = logging.getLogger(__name__)


def main() -> None:
    args = parse_arguments()
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s %(name)s %(levelname)s: %(message)s',
    )
    try:
        args.func(args)
    except DataException as e:
        logger.error(str(e))
        raise SystemExit(1)


def config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides: Dict[str, Any] = {}
    for key in ('iterations', 'burnin', 'seed', 'model'):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, 'fix_gamma', None) is not None:
        overrides['fix_gamma'] = MCMC_KEYS['fix_gamma'](args.fix_gamma)
    return load_config(getattr(args, 'config', None), overrides)


def simulate(args: argparse.Namespace) -> None:
    """Simulate a network and an SI epidemic on it."""
    rng = np.random.default_rng(args.seed)
    if args.model == BRG:
        truth = generate_brg(args.m, args.p, rng)
        if not truth.is_connected():
            raise DataException("The simulated Bernoulli random graph is disconnected; increase p or change the seed.")
    else:
        truth, _ = generate_pa_network(args.m, args.mu, args.gamma, NetworkOrder(rng.permutation(args.m)), rng)
    epidemic = simulate_si(truth, args.beta, rng)
    data = epidemic.to_data()
    known = clamp_known_proportion(epidemic.graph, epidemic.tree, args.known_proportion, rng)
    if known:
        data = with_known_edges(data, known)

    make_directory(args.out)
    files.write_epidemic_csv(os.path.join(args.out, 'epidemic.csv'), data)
    files.write_edges_csv(os.path.join(args.out, 'network.csv'), epidemic.graph)
    files.write_known_edges_csv(os.path.join(args.out, 'known_edges.csv'), known)
    logger.info("Simulated an epidemic over %d nodes with %d network edges.", data.m, epidemic.graph.edge_count)


def fit(args: argparse.Namespace) -> None:
    """Fit the PA or BRG model to an epidemic."""
    config = config_from_args(args)
    data = files.load_epidemic_csv(args.data, args.known_edges)
    make_directory(args.out)

    if config.mcmc.model == BRG:
        trace = run_brg_chain(data, config.priors, config.mcmc, brg_priors=config.brg_priors,
                              progress_bar=args.progress)
        row = files.brg_summary_row(args.name, data.m, summarize_brg_trace(trace, data.m))
    else:
        trace = run_chain(data, config.priors, config.mcmc, progress_bar=args.progress)
        row = files.summary_row(args.name, data.m, summarize_trace(trace))

    files.write_trace(os.path.join(args.out, 'trace.csv'), trace)
    files.write_summary(os.path.join(args.out, 'summary.csv'), [row])
    files.write_edge_probs(os.path.join(args.out, 'edge_probs.csv'), edge_posterior(trace))
    logger.info("Kept %d iterations. Summary: %s", trace.kept_n, row)


def predict(args: argparse.Namespace) -> None:
    """Posterior predictive band of the cumulative infection curve, alongside the observed curve."""
    data = files.load_epidemic_csv(args.data)
    trace = files.read_trace(args.trace)
    grid = default_grid(data.times, n_points=args.grid_points)
    gamma = MCMC_KEYS['fix_gamma'](args.fix_gamma) if args.fix_gamma is not None else None

    band = posterior_predictive_curves(trace, data.m, grid, args.n_sims, np.random.default_rng(args.seed), gamma)
    band['observed'] = cumulative_curve(data.times, grid)

    make_directory(args.out)
    files.write_table(os.path.join(args.out, 'predictive.csv'), band)


def summary(args: argparse.Namespace) -> None:
    """Summarise an existing trace file."""
    trace = files.read_trace(args.trace)
    m = files.load_epidemic_csv(args.data).m
    if trace.model == BRG:
        row = files.brg_summary_row(args.name, m, summarize_brg_trace(trace, m))
    else:
        row = files.summary_row(args.name, m, summarize_trace(trace))
    make_directory(args.out)
    files.write_summary(os.path.join(args.out, 'summary.csv'), [row])
    print(','.join(str(v) for v in row.values()))


def study(args: argparse.Namespace) -> None:
    """Run a simulation study grid."""
    config = config_from_args(args)
    grid = config.study_grid()
    if args.seed is not None:
        grid = grid._replace(base_seed=args.seed)
    report = run_study(grid, args.out, max_workers=args.max_workers, progress_bar=args.progress)
    logger.info("Study finished: %d cells, %d failed.", len(report), int((report['error'] != '').sum()))


def parse_arguments() -> argparse.Namespace:
    parser = configure_parser()
    args = parser.parse_args()
    validate_arguments(parser, args)
    return args


def configure_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Bayesian inference of latent contact networks from SI epidemics.")
    parser.add_argument('--verbose', action='store_true', help="Enable debug logging.")
    subparsers = parser.add_subparsers(dest='command', required=True)

    p = subparsers.add_parser('simulate', help=simulate.__doc__)
    add_output_argument(p)
    p.add_argument('--m', type=int, required=True, help="Number of individuals.")
    p.add_argument('--beta', type=float, required=True, help="Infection rate per edge per day.")
    p.add_argument('--mu', type=float, default=6.0, help="PA censored Poisson parameter.")
    p.add_argument('--gamma', type=float, default=0.0, help="PA recency weight.")
    p.add_argument('--p', type=float, default=0.1, help="BRG edge probability.")
    p.add_argument('--model', choices=[PA, BRG], default=PA, help="Network model to simulate from.")
    p.add_argument('--known-proportion', type=float, default=0.0, help="Fraction of non-tree pairs to reveal.")
    p.add_argument('--seed', type=int, default=None, help="Random seed.")
    p.set_defaults(func=simulate)

    p = subparsers.add_parser('fit', help=fit.__doc__)
    add_data_arguments(p)
    add_output_argument(p)
    add_chain_arguments(p)
    p.add_argument('--model', choices=[PA, BRG], default=None, help="Network model to fit.")
    p.set_defaults(func=fit)

    p = subparsers.add_parser('predict', help=predict.__doc__)
    add_data_arguments(p, known_edges=False)
    add_output_argument(p)
    p.add_argument('--trace', type=str, required=True, help="Trace CSV written by the fit command.")
    p.add_argument('--n-sims', type=int, default=200, help="Number of predictive simulations.")
    p.add_argument('--grid-points', type=int, default=200, help="Number of time grid points.")
    p.add_argument('--fix-gamma', type=str, default=None,
                   help="Recency weight for the simulations (default: the gamma of each draw).")
    p.add_argument('--seed', type=int, default=None, help="Random seed.")
    p.set_defaults(func=predict)

    p = subparsers.add_parser('summary', help=summary.__doc__)
    add_data_arguments(p, known_edges=False)
    add_output_argument(p)
    p.add_argument('--trace', type=str, required=True, help="Trace CSV written by the fit command.")
    p.set_defaults(func=summary)

    p = subparsers.add_parser('study', help=study.__doc__)
    add_output_argument(p)
    add_chain_arguments(p)
    p.add_argument('--max-workers', type=int, default=None, help="Worker processes (default: EPINET_THREADS).")
    p.set_defaults(func=study)

    return parser


def add_output_argument(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--out', type=str, required=True, help="Output directory.")
    parser.add_argument('--name', type=str, default='epidemic', help="Label for the epidemic column of summaries.")


def add_data_arguments(parser: argparse.ArgumentParser, known_edges: bool = True) -> None:
    group = parser.add_argument_group(title="Data")
    group.add_argument('--data', type=str, required=True, help="Epidemic CSV (node_id,infection_time,infector_id).")
    if known_edges:
        group.add_argument('--known-edges', type=str, default=None, help="Known edges CSV (i,j,present).")


def add_chain_arguments(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group(title="Sampler", description="Command line values override the config file.")
    group.add_argument('--config', type=str, default=None, help="Flat key=value configuration file.")
    group.add_argument('--seed', type=int, default=None, help="Random seed.")
    group.add_argument('--iterations', type=int, default=None, help="Total iterations.")
    group.add_argument('--burnin', type=int, default=None, help="Burn-in iterations (discarded).")
    group.add_argument('--fix-gamma', type=str, default=None, help="Pin gamma to a value, or 'none' to sample it.")
    group.add_argument('--progress', action='store_true', help="Display a progress bar.")


def validate_arguments(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    """Perform input validation checks on command line arguments."""
    args.out = check_output_directory(parser, args.out)
    if hasattr(args, 'data'):
        args.data = check_valid_file(parser, args.data)
    if hasattr(args, 'known_edges'):
        args.known_edges = check_valid_file(parser, args.known_edges)
    if hasattr(args, 'trace'):
        args.trace = check_valid_file(parser, args.trace)
    if hasattr(args, 'config'):
        args.config = check_valid_file(parser, args.config)

    if getattr(args, 'fix_gamma', None) is not None:
        try:
            MCMC_KEYS['fix_gamma'](args.fix_gamma)
        except ValueError:
            parser.error(f"--fix-gamma expects a number or 'none' (received {args.fix_gamma}).")
    if args.command == 'simulate':
        if args.m < 2:
            parser.error("--m must be at least 2.")
        if not 0 <= args.known_proportion <= 1:
            parser.error("--known-proportion must lie in [0, 1].")
    if args.command == 'predict' and args.n_sims < 1:
        parser.error("--n-sims must be positive.")


if __name__ == '__main__':
    main()
