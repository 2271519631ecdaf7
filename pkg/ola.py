#!/usr/bin/env python
# -*- coding: utf-8 -*-

#
#   ola - Optimized Layerwise Approximation.
#   Distribution-aware polynomial replacement of activation functions
#   under a private-inference runtime budget.
#
#    This program is free software: you can redistribute it and/or modify
#    it under the terms of the GNU General Public License as published by
#    the Free Software Foundation, either version 3 of the License, or
#    (at your option) any later version.
#
#    This program is distributed in the hope that it will be useful,
#    but WITHOUT ANY WARRANTY; without even the implied warranty of
#    MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#    GNU General Public License for more details.
#
#    You should have received a copy of the GNU General Public License
#    along with this program.  If not, see <http://www.gnu.org/licenses/>.
#

import argparse
import json
import logging
from multiprocessing import freeze_support
import sys

from ola_core.approx import GaussianWeight, ScalarActivation, mse_report
from ola_core.bug_reporter import CrashReport
import ola_core.constants as c
from ola_core.netsim import (load_model, save_model, load_dataset, save_dataset,
                             accuracy, mean_loss)
from ola_core.optimizer import BoundUnreachableError
from ola_core.pipeline import (PipelineConfig, run_pipeline, optimize, run_probe,
                               probe_summary, parse_r_grid, write_report)
from ola_core.runtime import (DegreeSpace, load_profile, synthetic_profile, save_profile,
                              synthetic_comments)
from ola_core.scan import ChildProcessException
from ola_core.sensitivity import collect_stats, save_profile_json, load_profile_json
from ola_core.toy import make_blobs, make_spiral, init_model, train
from ola_core.util import OlaError, ConfigError, entitle, table, get_processes, float_str
from ola_core.version import version_string


ERROR_MSG = "\n\nOps! Something went really wrong and ola crashed.\n"


def parse_int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError("Bad integer list {0!r}".format(text))


def degree_space(text):
    try:
        return DegreeSpace.parse(text) if text else DegreeSpace()
    except ValueError as e:
        raise ConfigError(str(e))


def cmd_make_data(args):
    if args.kind == "spiral":
        data = make_spiral(args.samples, args.classes, args.seed)
    else:
        data = make_blobs(args.samples, args.classes, c.TOY_FEATURES, args.seed,
                          args.heavy_tail)
    save_dataset(data, args.output)
    print("Wrote {0} samples to {1}".format(len(data), args.output))
    return c.RV_OK


def cmd_make_profile(args):
    profile = synthetic_profile(args.layers, degree_space(args.degrees),
                                not args.bootstrap_first_layer)
    save_profile(profile, args.output, synthetic_comments(profile.first_layer_no_bootstrap))
    print("Wrote a synthetic profile for {0} layers to {1}".format(args.layers, args.output))
    return c.RV_OK


def cmd_train(args):
    dataset = load_dataset(args.dataset)
    sizes = [dataset.dim] + parse_int_list(args.hidden) + [dataset.n_classes]
    model = init_model(sizes, args.activation, args.seed)
    print(entitle("Training {0}".format("-".join(str(s) for s in sizes)), 1))
    model = train(model, dataset, args.epochs, args.lr, args.batch_size, args.seed)
    print("Train accuracy {0:.4f}, loss {1:.6g}".format(accuracy(model, dataset),
                                                        mean_loss(model, dataset)))
    save_model(model, args.output)
    print("Model saved in {0}".format(args.output))
    return c.RV_OK


def cmd_stats(args):
    model = load_model(args.model)
    dataset = load_dataset(args.dataset, model.n_classes)
    profile = collect_stats(model, dataset, get_processes(), True, args.verbose)
    rows = [l.to_json() for l in profile.layers]
    print("")
    print(table([["Layer"] + [r["layer"] for r in rows],
                 ["mu"] + ["{0:.6g}".format(r["mu"]) for r in rows],
                 ["sigma"] + ["{0:.6g}".format(r["sigma"]) for r in rows],
                 ["A"] + ["{0:.6g}".format(r["A"]) for r in rows]]))
    if args.output:
        save_profile_json(profile, args.output)
        print("Statistics saved in {0}".format(args.output))
    return c.RV_OK


def cmd_fit(args):
    f = ScalarActivation.from_json(args.activation)
    w = GaussianWeight(args.mu, args.sigma, args.r)
    space = degree_space(args.degrees)
    report, series = mse_report(f, w, space.degrees)
    print(entitle("{0} under N({1}, ({2} * {3})^2)".format(args.activation, args.mu,
                                                          args.r, args.sigma), 1))
    print(table([["Degree"] + list(report), ["MSE"] + [float_str(report[d]) for d in report]]))
    if args.output:
        with open(args.output, 'w') as fobj:
            json.dump(series.to_json(), fobj, indent=1)
            fobj.write('\n')
        print("Degree {0} series saved in {1}".format(series.degree, args.output))
    return c.RV_OK


def cmd_optimize(args):
    model = load_model(args.model)
    stats = load_profile_json(args.stats)
    space = degree_space(args.degrees)
    if args.profile:
        runtime = load_profile(args.profile, space)
    else:
        runtime = synthetic_profile(model.n_activation_layers, space)
        print("NOTE: using the SYNTHETIC runtime profile")
    solution = optimize(model, stats, runtime, args.nu, space, args.budget)
    print("Degrees {0}, cost {1} of {2}, V = {3!r}".format(
        list(solution.degrees), solution.cost, solution.budget, solution.objective))
    if solution.has_sentinel:
        print("WARNING: some layers got no affordable degree")
    if args.output:
        write_report(solution.to_json(), args.output)
    return c.RV_OK


def cmd_eval(args):
    model = load_model(args.model)
    dataset = load_dataset(args.dataset, model.n_classes)
    print("Accuracy {0:.4f}, loss {1:.6g}".format(accuracy(model, dataset),
                                                  mean_loss(model, dataset)))
    return c.RV_OK


def cmd_run(args):
    config = PipelineConfig.from_args(args)
    config.validate()
    print(entitle("Optimized layerwise approximation"))
    try:
        report = run_pipeline(config, console=True)
    except BoundUnreachableError as e:
        if hasattr(e, "report"):
            print(e.report.summary())
        raise
    print(report.summary())
    if config.output_path:
        print("Report saved in {0}".format(config.output_path))
    return c.RV_OK


def cmd_probe(args):
    model = load_model(args.model)
    dataset = load_dataset(args.dataset, model.n_classes)
    stats = collect_stats(model, dataset, get_processes(), True, args.verbose)
    r_grid = parse_r_grid(args.r_grid) if args.r_grid else None
    result = run_probe(model, dataset, stats, args.layer, args.degree, r_grid)
    print(probe_summary(result))
    if args.output:
        write_report(result, args.output)
    return c.RV_OK


def build_parser():
    epilog = ('This program comes with ABSOLUTELY NO WARRANTY. This is free '
              'software, and you are welcome to redistribute it under the '
              'terms of the GNU GPL v3.')
    parser = argparse.ArgumentParser(description=('Replace the activations of a trained '
                                                  'network with Hermite polynomial fits, '
                                                  'choosing a degree per layer under a '
                                                  'runtime budget.'),
                                     prog='ola', epilog=epilog)
    parser.add_argument('--version', action='version',
                        version='%(prog)s ' + version_string)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--verbose', '-v',
                        help='Log progress and print a line per scanned chunk '
                             'instead of a progress bar.',
                        action='store_true', default=False)
    common.add_argument('--debug', help='Log everything.', action='store_true',
                        default=False)

    sub = parser.add_subparsers(dest='command', metavar='command')
    sub.required = True

    p = sub.add_parser('make-data', parents=[common], help='Write the toy dataset CSV.')
    p.add_argument('--kind', choices=['blobs', 'spiral'], default='blobs')
    p.add_argument('--samples', type=int, default=c.TOY_SAMPLES)
    p.add_argument('--classes', type=int, default=c.TOY_CLASSES)
    p.add_argument('--heavy-tail', type=float, default=c.TOY_HEAVY_TAIL_FRACTION,
                   dest='heavy_tail',
                   help='Fraction of blob samples pushed far out (default %(default)s).')
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--output', '-o', required=True)
    p.set_defaults(func=cmd_make_data)

    p = sub.add_parser('make-profile', parents=[common],
                       help='Write a synthetic runtime profile CSV.')
    p.add_argument('--layers', type=int, required=True)
    p.add_argument('--bootstrap-first-layer', action='store_true', default=False,
                   dest='bootstrap_first_layer',
                   help='Charge the first layer for bootstrapping too.')
    p.add_argument('--degrees', default=None)
    p.add_argument('--output', '-o', required=True)
    p.set_defaults(func=cmd_make_profile)

    p = sub.add_parser('train', parents=[common], help='Train a model on a dataset CSV.')
    p.add_argument('--dataset', required=True)
    p.add_argument('--hidden', default=",".join(str(h) for h in c.TOY_HIDDEN),
                   help='Hidden layer widths (default %(default)s).')
    p.add_argument('--activation', default=c.ACT_RELU,
                   choices=[c.ACT_RELU, c.ACT_GELU, c.ACT_IDENTITY])
    p.add_argument('--epochs', type=int, default=c.TRAIN_EPOCHS)
    p.add_argument('--lr', type=float, default=c.TRAIN_LEARNING_RATE)
    p.add_argument('--batch-size', type=int, default=c.TRAIN_BATCH_SIZE, dest='batch_size')
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--output', '-o', required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser('stats', parents=[common],
                       help='Input statistics and sensitivities per layer.')
    p.add_argument('--model', required=True)
    p.add_argument('--dataset', required=True)
    p.add_argument('--output', '-o', default=None)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser('fit', parents=[common], help='Fit one activation, print its MSE.')
    p.add_argument('--activation', default=c.ACT_RELU,
                   choices=[c.ACT_RELU, c.ACT_GELU, c.ACT_IDENTITY])
    p.add_argument('--mu', type=float, default=0.0)
    p.add_argument('--sigma', type=float, default=1.0)
    p.add_argument('--r', type=float, default=1.0)
    p.add_argument('--degrees', default=None)
    p.add_argument('--output', '-o', default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser('optimize', parents=[common],
                       help='Degree allocation for a budget, no accuracy search.')
    p.add_argument('--model', required=True)
    p.add_argument('--stats', required=True, help='JSON written by the stats command.')
    p.add_argument('--profile', default=None)
    p.add_argument('--nu', type=float, default=c.DEFAULT_NU)
    p.add_argument('--degrees', default=None)
    p.add_argument('--budget', type=int, default=None)
    p.add_argument('--output', '-o', default=None)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser('eval', parents=[common], help='Accuracy and loss of a model.')
    p.add_argument('--model', required=True)
    p.add_argument('--dataset', required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser('run', parents=[common], help='The full pipeline.')
    p.add_argument('--model', required=True)
    p.add_argument('--dataset', required=True)
    p.add_argument('--profile', default=None,
                   help='Runtime profile CSV, the synthetic profile is used if missing.')
    p.add_argument('--nu', type=float, default=c.DEFAULT_NU)
    p.add_argument('--degrees', default=None,
                   help='Comma separated degree space (default {0}).'.format(
                       ",".join(str(d) for d in c.DEFAULT_DEGREES)))
    p.add_argument('--budget', type=int, default=None)
    p.add_argument('--acc-drop', type=float, default=c.DEFAULT_ACC_DROP_PCT,
                   dest='acc_drop', help='Allowed accuracy drop in percentage points.')
    p.add_argument('--r-grid', default=None, dest='r_grid')
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--output', '-o', default=None)
    p.add_argument('--series-dir', default=None, dest='series_dir')
    p.add_argument('--curve-csv', default=None, dest='curve_csv')
    p.add_argument('--compare-uniform', action='store_true', default=False,
                   dest='compare_uniform',
                   help='Also report the uniform degree baselines.')
    p.add_argument('--no-timestamps', action='store_true', default=False,
                   dest='no_timestamps')
    p.set_defaults(func=cmd_run)

    p = sub.add_parser('probe', parents=[common],
                       help='Loss with the polynomial installed on one region only.')
    p.add_argument('--model', required=True)
    p.add_argument('--dataset', required=True)
    p.add_argument('--layer', type=int, default=1)
    p.add_argument('--degree', type=int, default=c.PROBE_DEGREE)
    p.add_argument('--r-grid', default=None, dest='r_grid')
    p.add_argument('--output', '-o', default=None)
    p.set_defaults(func=cmd_probe)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    level = logging.DEBUG if args.debug else logging.INFO if args.verbose else logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s: %(message)s")

    try:
        return args.func(args)
    except OlaError as e:
        if isinstance(e, ChildProcessException):
            raise
        print("Error ({0}): {1}".format(args.command, e))
        return e.return_value


def console_main(argv=None):
    """ main() plus the crash report, the console script entry point. """

    try:
        freeze_support()
        return main(argv)

    except SystemExit as e:
        # sys.exit() was called within the program
        return e.code

    except ChildProcessException as e:
        crash = CrashReport(e.printable_traceback)

    except Exception:
        # Traceback will be taken in init
        crash = CrashReport()

    print(ERROR_MSG)
    print("Bug report:")
    print("")
    print(crash.error_str)
    print("Saved in {0}".format(crash.save()))
    return c.RV_CRASH


if __name__ == '__main__':
    sys.exit(console_main())
