# Copyright 2026 The pyh2iad Authors. All rights reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""
Command-line front end: `h2iad train`, `h2iad score`, `h2iad eval` and `h2iad synth`.

Exit codes are 0 on success, 1 on usage errors, 2 on data errors (unreadable or
malformed datasets, corrupted checkpoints) and 3 on numeric failures.
"""


from __future__ import absolute_import, division, print_function

import argparse
import io
import json
import logging
import os
import sys

import numpy as np
import torch

from h2iad.__version__ import __version__
from h2iad.checkpoint import load_checkpoint, save_checkpoint
from h2iad.config import PE_ALIASES, RunConfig, config_fingerprint, thread_count
from h2iad.data import SCENARIOS, load_dataset, synth_mixture, write_dataset
from h2iad.ddm import dynamic_distance_maps
from h2iad.evaluation import benchmark, parse_ablation
from h2iad.exceptions import DataError, NumericError
from h2iad.train import train_one_class

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

# `--lr` keeps the default ratio between the first and the last epoch.
LR_DECAY = 1e-2


class ArgumentParser(argparse.ArgumentParser):
    """Exits with the usage code instead of argparse's default of 2."""
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, '{}: error: {}\n'.format(self.prog, message))


def _common_parser():
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument('--config', help='JSON run configuration.')
    parser.add_argument('--seed', type=int)
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('--verbose', '-v', action='store_true')
    verbosity.add_argument('--quiet', '-q', action='store_true')
    return parser


def _model_flags(parser):
    parser.add_argument('--epochs', type=int)
    parser.add_argument('--lr', type=float,
                        help='Initial learning rate; 0 freezes all parameters.')
    parser.add_argument('--pe-mode', choices=sorted(PE_ALIASES))
    parser.add_argument('--no-drem', action='store_true',
                        help='Disables the distance-based relational encoding.')
    parser.add_argument('--no-share', action='store_true',
                        help='Gives each person stream its own parameters.')


def build_parser():
    common = _common_parser()
    parser = ArgumentParser(prog='h2iad',
                            description='Two-person interaction anomaly detection.')
    parser.add_argument('--version', action='version', version=__version__)
    commands = parser.add_subparsers(dest='command', parser_class=ArgumentParser)
    commands.required = True

    train = commands.add_parser('train', parents=[common],
                                help='Trains a one-class detector.')
    train.add_argument('--data')
    train.add_argument('--category', required=True,
                       help='Normal category the detector is trained on.')
    train.add_argument('--out', help='Checkpoint path.')
    _model_flags(train)

    score = commands.add_parser('score', parents=[common],
                                help='Scores every sample of a dataset.')
    score.add_argument('--model', '--checkpoint', dest='model', required=True)
    score.add_argument('--data')
    score.add_argument('--out', help='JSON-lines output file; stdout by default.')

    evaluate = commands.add_parser('eval', parents=[common],
                                   help='Runs the one-class benchmark.')
    evaluate.add_argument('--data')
    evaluate.add_argument('--category', action='append',
                          help='Normal category to benchmark; repeatable. Defaults to '
                               'every category of the dataset.')
    evaluate.add_argument('--out', help='Report directory.')
    evaluate.add_argument('--ablate', metavar='AXIS=V1,V2',
                          help='Runs one benchmark per value of pe_mode, use_drem or '
                               'share_params.')
    evaluate.add_argument('--stat', choices=['dsp'], action='append', default=[])
    evaluate.add_argument('--roc', action='store_true',
                          help='Writes ROC points as CSV and PNG.')
    evaluate.add_argument('--ddm-strips', action='store_true',
                          help='Exports the distance maps of the first test sample of '
                               'each category as PNG strips.')
    _model_flags(evaluate)

    synth = commands.add_parser('synth', parents=[common],
                                help='Writes a synthetic dataset.')
    synth.add_argument('--out', required=True)
    synth.add_argument('--scenario', action='append', choices=SCENARIOS,
                       help='Repeatable; defaults to every scenario.')
    synth.add_argument('--count', type=int, default=100,
                       help='Training samples per scenario.')
    synth.add_argument('--test-count', type=int, default=50,
                       help='Test samples per scenario.')
    synth.add_argument('--frames', type=int, default=16)
    synth.add_argument('--joints', type=int, default=6)
    synth.add_argument('--noise', type=float)
    return parser


def _overrides(args):
    """Maps command-line flags onto config sections; unset flags are left out."""
    tasm, train, paths = {}, {}, {}
    if getattr(args, 'epochs', None) is not None:
        train['epochs'] = args.epochs
    if getattr(args, 'lr', None) is not None:
        train['initial_lr'] = args.lr
        train['final_lr'] = args.lr * LR_DECAY
    if getattr(args, 'pe_mode', None):
        tasm['pe_mode'] = PE_ALIASES[args.pe_mode]
    if getattr(args, 'no_drem', False):
        tasm['use_drem'] = False
    if getattr(args, 'no_share', False):
        tasm['share_params'] = False
    if getattr(args, 'data', None):
        paths['data'] = args.data
    if getattr(args, 'out', None):
        paths['out'] = args.out
    overrides = {'tasm': tasm, 'train': train, 'paths': paths}
    if args.seed is not None:
        overrides['seed'] = args.seed
    return overrides


def _run_config(args):
    if args.config:
        return RunConfig.from_file(args.config, [_overrides(args)])
    return RunConfig(overrides=[_overrides(args)])


def _required_path(run, key):
    path = run['paths'][key]
    if not path:
        raise ValueError('--{} is required (or paths.{} in the config).'.format(key, key))
    return path


def _write_loss_history(model, path):
    columns = [np.arange(1, len(model.loss_history) + 1), model.loss_history]
    header = 'epoch,nll'
    if model.val_history:
        columns.append(model.val_history)
        header += ',val_nll'
    np.savetxt(path, np.column_stack(columns), fmt=['%d'] + ['%.8f'] * (len(columns) - 1),
               delimiter=',', header=header, comments='')


def cmd_train(args, run):
    data_path = _required_path(run, 'data')
    out = _required_path(run, 'out')
    dataset = load_dataset(data_path, expected_joints=run['tasm']['D'])
    config = run.train_config(args.category, joint_count=dataset.joint_count,
                              progress=sys.stderr.isatty())
    print(run.to_json(joint_count=dataset.joint_count))
    # Only records tagged "test" are kept out of training.
    train = dataset.subset([p for p in dataset if p.split != 'test'])
    model = train_one_class(train, config)
    save_checkpoint(model, out)
    _write_loss_history(model, out + '.loss.csv')
    logger.info('Saved checkpoint to %s (final nll %.4f).', out, model.final_nll)
    return EXIT_OK


def cmd_score(args, run):
    model = load_checkpoint(args.model)
    if args.config:
        expected = config_fingerprint(run.train_config(
            '', joint_count=model.config.tasm.D))
        if expected != config_fingerprint(model.config):
            raise DataError('Checkpoint {} does not match config {} (shape '
                            'fingerprint).'.format(args.model, args.config))
    dataset = load_dataset(_required_path(run, 'data'),
                           expected_joints=model.config.tasm.D)
    scores = model.score_many(list(dataset))
    lines = [json.dumps({'index': i, 'category': pair.category, 'score': s},
                        sort_keys=True)
             for i, (pair, s) in enumerate(zip(dataset, scores))]
    if args.out:
        with io.open(args.out, 'w', encoding='utf-8') as f:
            f.write(u''.join(line + u'\n' for line in lines))
    else:
        for line in lines:
            print(line)
    return EXIT_OK


def _export_strips(dataset, run, directory):
    _, test = dataset.split(run['data']['test_fraction'], run.seed)
    for category in test.categories:
        pair = test.by_category(category)[0]
        dynamic_distance_maps(pair).export_strip(os.path.join(directory, category))


def cmd_eval(args, run):
    dataset = load_dataset(_required_path(run, 'data'), expected_joints=run['tasm']['D'])
    out = run['paths']['out'] or 'report'
    categories = args.category or dataset.categories
    if len(dataset.categories) < 2:
        raise DataError('The benchmark needs at least two categories.')
    base = run.train_config(categories[0], joint_count=dataset.joint_count)
    ablation = parse_ablation(args.ablate) if args.ablate else None
    suite = benchmark(dataset, categories, base, ablation=ablation,
                      test_fraction=run['data']['test_fraction'],
                      stat_dsp='dsp' in args.stat, workers=thread_count())
    if not os.path.isdir(out):
        os.makedirs(out)
    report = suite.summary('report')
    with io.open(os.path.join(out, 'report.json'), 'w', encoding='utf-8') as f:
        f.write(suite.summary('json') + u'\n')
    with io.open(os.path.join(out, 'report.txt'), 'w', encoding='utf-8') as f:
        f.write(report + u'\n')
    with io.open(os.path.join(out, 'config.json'), 'w', encoding='utf-8') as f:
        f.write(run.to_json(joint_count=dataset.joint_count) + u'\n')
    if args.roc:
        suite.write_roc_csv(out)
        for r in suite.reports:
            suite.plot_roc(os.path.join(out, 'roc_{}.png'.format(
                r.variant.replace('=', '-'))), variant=r.variant)
    if args.ddm_strips:
        _export_strips(dataset, run, os.path.join(out, 'ddm'))
    print(report)
    return EXIT_OK


def cmd_synth(args, run):
    kwargs = {} if args.noise is None else {'noise': args.noise}
    dataset = synth_mixture(args.scenario or list(SCENARIOS), args.count, run.seed,
                            args.frames, args.joints, args.test_count, **kwargs)
    write_dataset(dataset, args.out)
    logger.info('Wrote %d samples to %s.', len(dataset), args.out)
    return EXIT_OK


COMMANDS = {
    'train': cmd_train,
    'score': cmd_score,
    'eval': cmd_eval,
    'synth': cmd_synth,
}


def _fail(code, message):
    sys.stderr.write('h2iad: error: {}\n'.format(message))
    return code


def main(argv=None):
    """
    Runs one command.

    Args
    ----
      argv: list of str, optional.
          Defaults to `sys.argv[1:]`.

    Returns
    -------
      int: exit code.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code
    level = logging.DEBUG if args.verbose else (
        logging.WARNING if args.quiet else logging.INFO)
    logging.basicConfig(level=level, stream=sys.stderr,
                        format='%(levelname)s %(name)s: %(message)s')
    try:
        threads = thread_count()
        if threads:
            torch.set_num_threads(threads)
        run = _run_config(args)
        return COMMANDS[args.command](args, run)
    except NumericError as e:
        return _fail(EXIT_NUMERIC, e)
    except (DataError, IOError, OSError) as e:
        return _fail(EXIT_DATA, e)
    except ValueError as e:
        return _fail(EXIT_USAGE, e)
