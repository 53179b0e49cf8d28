import argparse
import logging
import os
import sys
from dataclasses import fields

import numpy as np

from experiments import DEFAULT_RESERVOIR, MemoryBudgetError, c_sweep, figure2_sweep, frame_to_csv, quantiles, \
    records_to_json, run_batch, run_streaming
from rates import ZERO_RATE_TOLERANCE, log_grid, rate_report
from run_config import RunConfig
from validation import Suite

logger = logging.getLogger("csa_lab")

# Dimensions of the relative-std-against-c curves
FIGURE2_DIMENSIONS = (2, 20, 200, 2000)
C_GRID_POINTS = 200


def parse_config_file(file_path):
    """
    Read a run configuration file into a dict of RunConfig field values

    One record per line, # starts a comment:
        alg  lambda n c dsigma seed
        run  runs steps workers
        lvl  level ...
        pol  constant|alpha value
        grid n_min n_max points
        out  path csv|json
        mem  entries
        mode marginal|full
    """
    values = {}
    policies = []
    with open(file_path, 'r') as f:
        for line in f:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            record_type = parts[0]
            params = parts[1:]
            try:
                if record_type == "alg":
                    values.update(lam=int(params[0]), n=int(params[1]), c=float(params[2]),
                                  d_sigma=float(params[3]), seed=int(params[4]))
                elif record_type == "run":
                    values.update(runs=int(params[0]), steps=int(params[1]), workers=int(params[2]))
                elif record_type == "lvl":
                    values["levels"] = tuple(float(p) for p in params)
                elif record_type == "pol":
                    policies.append("{}:{}".format(params[0], params[1]))
                elif record_type == "grid":
                    values["grid"] = (int(float(params[0])), int(float(params[1])), int(params[2]))
                elif record_type == "out":
                    values.update(out=params[0], fmt=params[1])
                elif record_type == "mem":
                    values["memory_budget"] = int(float(params[0]))
                elif record_type == "mode":
                    values["mode"] = params[0]
                else:
                    raise ValueError("Unknown record type: {}".format(record_type))
            except IndexError:
                raise ValueError("Too few values in record: {}".format(line)) from None
    if policies:
        values["policies"] = tuple(policies)
    return values


def _flag_values(args):
    """Command-line values that were actually given"""
    names = {f.name for f in fields(RunConfig)} - {"command"}
    values = {name: value for name, value in vars(args).items() if name in names and value is not None}
    if args.policy:
        values["policies"] = tuple(args.policy)
    if args.levels:
        values["levels"] = tuple(float(p) for p in args.levels.split(","))
    if args.grid:
        values["grid"] = (int(float(args.grid[0])), int(float(args.grid[1])), int(args.grid[2]))
    if not args.quick:
        values.pop("quick", None)
    return values


def build_config(args, environ=os.environ):
    """Built-in defaults, then the config file, then flags"""
    values = parse_config_file(args.config) if args.config else {}
    values.update(_flag_values(args))
    if "seed" not in values and environ.get("CSA_LAB_SEED"):
        try:
            values["seed"] = int(environ["CSA_LAB_SEED"])
        except ValueError:
            raise ValueError("CSA_LAB_SEED is not an integer: {!r}".format(environ["CSA_LAB_SEED"])) from None
    return RunConfig(command=args.command, **values).validate()


def write_output(text, config):
    if config.out:
        with open(config.out, 'w', newline='') as f:
            f.write(text)
        logger.info("Output saved to: %s", config.out)
    else:
        sys.stdout.write(text)


def _frame_text(frame, config):
    if config.output_format == "json":
        return records_to_json(frame.to_dict("records"))
    return frame_to_csv(frame)


def cmd_rates(config):
    """Closed-form rates and variance breakdown as key/value records"""
    report = rate_report(config.params())
    breakdown = report.variance
    record = {
        "lambda": report.params.lam,
        "n": report.params.n,
        "c": report.params.c,
        "d_sigma": report.params.d_sigma,
        # Zero rates print as 0 rather than as a rounding residue
        "rate_no_cumulation": 0.0 if abs(report.rate_no_cumulation) <= ZERO_RATE_TOLERANCE
        else report.rate_no_cumulation,
        "rate_with_cumulation": 0.0 if breakdown.rate_is_zero else report.rate_with_cumulation,
    }
    for f in fields(breakdown):
        record[f.name] = getattr(breakdown, f.name)
    record["outside_hypothesis"] = report.outside_hypothesis
    if config.output_format == "csv":
        text = "key,value\n" + "".join(
            "{},{}\n".format(key, "%.17g" % value if isinstance(value, float) else value)
            for key, value in record.items()
        )
    else:
        text = records_to_json(record)
    write_output(text, config)
    return 0


def cmd_simulate(config):
    """Quantiles of ln(sigma_t / sigma_0) over a batch of runs, one row per (t, level)"""
    params = config.params()
    try:
        batch = run_batch(params, config.runs, config.steps, mode=config.mode, workers=config.workers,
                          memory_budget=config.memory_budget)
        table = quantiles(batch, config.levels)
    except MemoryBudgetError as e:
        reservoir = max(1, min(DEFAULT_RESERVOIR, config.memory_budget // (config.steps + 1)))
        logger.warning("%s; aggregating a reservoir of %d trajectories instead", e, reservoir)
        summary = run_streaming(params, config.runs, config.steps, levels=config.levels, reservoir=reservoir,
                                mode=config.mode, workers=config.workers, memory_budget=config.memory_budget,
                                burn_in=min(params.default_burn_in(), config.steps - 1))
        table = summary.quantiles
    write_output(_frame_text(table.to_frame(), config), config)
    return 0


def cmd_sweep(config):
    """Closed-form relative standard deviation, against n per policy or against c per dimension"""
    if config.against == "c":
        c_grid = np.linspace(1.0 / C_GRID_POINTS, 1.0, C_GRID_POINTS)
        frame = c_sweep(config.lam, config.d_sigma, FIGURE2_DIMENSIONS, c_grid)
    else:
        frame = figure2_sweep(config.lam, config.d_sigma, config.cumulation_policies(), log_grid(*config.grid))
    write_output(_frame_text(frame, config), config)
    return 0


def cmd_validate(config):
    """Acceptance suite; 0 when every check passes, 1 otherwise"""
    suite = Suite(seed=config.seed, quick=config.quick, workers=config.workers,
                  perturb_dsigma=config.perturb_dsigma)
    results = suite.run()
    lines = ["{} {}: {}\n".format("PASS" if r.passed else "FAIL", r.name, r.detail) for r in results]
    failed = sum(not r.passed for r in results)
    lines.append("{} of {} checks passed\n".format(len(results) - failed, len(results)))
    write_output("".join(lines), config)
    return 1 if failed else 0


COMMAND_HANDLERS = {
    "rates": cmd_rates,
    "simulate": cmd_simulate,
    "validate": cmd_validate,
    "sweep": cmd_sweep,
}


def build_parser():
    parser = argparse.ArgumentParser(description='(1,lambda)-CSA-ES on a linear function')
    parser.add_argument('command', choices=sorted(COMMAND_HANDLERS), help='What to compute')
    parser.add_argument('--config', type=str, help='Run configuration file')
    parser.add_argument('--lambda', dest='lam', type=int, help='Offspring per iteration')
    parser.add_argument('--n', type=int, help='Search space dimension')
    parser.add_argument('--c', type=float, help='Cumulation parameter in (0, 1] (default 1/sqrt(n))')
    parser.add_argument('--dsigma', dest='d_sigma', type=float, help='Damping')
    parser.add_argument('--seed', type=int, help='Base seed (fallback: CSA_LAB_SEED)')
    parser.add_argument('--runs', type=int, help='Independent runs')
    parser.add_argument('--steps', type=int, help='Iterations per run')
    parser.add_argument('--levels', type=str, help='Comma-separated quantile levels')
    parser.add_argument('--policy', action='append', help='constant:<c> or alpha:<alpha> (repeatable)')
    parser.add_argument('--grid', nargs=3, metavar=('N_MIN', 'N_MAX', 'POINTS'), help='Dimension grid of sweep')
    parser.add_argument('--against', choices=['n', 'c'], help='Sweep axis')
    parser.add_argument('--format', dest='fmt', choices=['csv', 'json'], help='Output format')
    parser.add_argument('--out', type=str, help='Output file (default stdout)')
    parser.add_argument('--workers', type=int, help='Worker processes')
    parser.add_argument('--mode', choices=['marginal', 'full'], help='Selected-step sampling')
    parser.add_argument('--memory-budget', dest='memory_budget', type=int,
                        help='Largest trajectory matrix, in entries')
    parser.add_argument('--quick', action='store_true', help='Smaller validation batches')
    parser.add_argument('--perturb-dsigma', dest='perturb_dsigma', type=float, help=argparse.SUPPRESS)
    parser.add_argument('-v', '--verbose', action='store_true', help='Debug logging')
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        config = build_config(args)
    except (ValueError, OSError) as e:
        parser.error(str(e))

    logger.info("Command: %s (lambda=%d, n=%d, c=%.6g, d_sigma=%g, seed=%d)",
                config.command, config.lam, config.n, config.cumulation, config.d_sigma, config.seed)
    try:
        return COMMAND_HANDLERS[config.command](config)
    except (ValueError, MemoryBudgetError) as e:
        parser.error(str(e))


if __name__ == '__main__':
    sys.exit(main())
