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
AUROC and the one-class benchmark protocol: every listed category in turn is the
normal class, a model is trained on its training samples and the whole test split is
scored, with every other category labeled anomalous.
"""


from __future__ import absolute_import, division, print_function

import collections
import dataclasses
import logging
import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from scipy.stats import rankdata

from h2iad.config import config_fingerprint, full_fingerprint
from h2iad.ddm import displacement_statistic
from h2iad.exceptions import DataError
from h2iad.plot import Plot
from h2iad.summary import Summary

logger = logging.getLogger(__name__)

ScoredSample = collections.namedtuple('ScoredSample', ['score', 'label', 'category'])
ScoredSample.__doc__ = """
One scored test sample: `score` is the NLL, `label` is 1 for anomalous (category other
than the normal class) and 0 for normal.
"""

ABLATION_AXES = ('pe_mode', 'use_drem', 'share_params')


def label_samples(scores, categories, normal_category):
    """Builds `ScoredSample`s, labeling every category but `normal_category` as 1."""
    return [ScoredSample(float(s), int(c != normal_category), c)
            for s, c in zip(scores, categories)]


def _scores_labels(samples):
    scores = np.array([s.score for s in samples], dtype=np.float64)
    labels = np.array([s.label for s in samples], dtype=int)
    if not np.all(np.isin(labels, (0, 1))):
        raise ValueError('Labels must be 0 (normal) or 1 (anomalous).')
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == len(labels):
        raise ValueError('AUROC needs at least one normal and one anomalous sample.')
    return scores, labels, n_pos


def auroc(samples):
    """
    Area under the ROC curve, computed as the rank statistic: the probability that a
    random anomalous sample scores higher than a random normal one, ties counted 1/2.

    Args
    ----
      samples: list of ScoredSample.

    Returns
    -------
      float in [0, 1].

    Raises
    ------
      ValueError: if only one label is present.
    """
    scores, labels, n_pos = _scores_labels(samples)
    n_neg = len(labels) - n_pos
    ranks = rankdata(scores)  # midranks for ties
    u_statistic = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.
    return float(u_statistic / (n_pos * n_neg))


def roc_curve(samples):
    """
    ROC points swept over every distinct score, from the strictest threshold down.

    Returns
    -------
      tuple of np.array: (fpr, tpr), both starting at 0 and ending at 1. Their
      trapezoidal area equals `auroc(samples)`.
    """
    scores, labels, n_pos = _scores_labels(samples)
    n_neg = len(labels) - n_pos
    order = np.argsort(-scores, kind='mergesort')
    scores, labels = scores[order], labels[order]
    # Last index of each run of equal scores.
    distinct = np.r_[np.nonzero(np.diff(scores))[0], len(scores) - 1]
    tps = np.cumsum(labels)[distinct]
    fps = (distinct + 1) - tps
    tpr = np.r_[0., tps / n_pos]
    fpr = np.r_[0., fps / n_neg]
    return fpr, tpr


class BenchmarkReport(object):
    """
    Result of one benchmark run.

    Args
    ----
      variant: str.
          Name of the configuration, e.g. "pe_mode=sinusoidal".
      rows: OrderedDict.
          Per normal category: `auc`, `n_test`, `mean_scores` (mean score per test
          category) and optionally `dsp` and `roc` (fpr, tpr lists).
      config: dict.
          Configuration the run used, shared by every category.
    """
    def __init__(self, variant, rows, config):
        self.variant = variant
        self.rows = collections.OrderedDict(rows)
        self.config = config
        self.fingerprint = full_fingerprint(config)

    @property
    def categories(self):
        return list(self.rows)

    @property
    def aucs(self):
        return collections.OrderedDict((c, r['auc']) for c, r in self.rows.items())

    @property
    def average(self):
        values = list(self.aucs.values())
        return float(sum(values) / len(values))

    @property
    def dsp(self):
        if not all('dsp' in r for r in self.rows.values()):
            return None
        return collections.OrderedDict((c, r['dsp']) for c, r in self.rows.items())

    def to_dict(self, include_roc=False):
        rows = collections.OrderedDict()
        for category, row in self.rows.items():
            row = dict(row)
            if not include_roc:
                row.pop('roc', None)
            rows[category] = row
        return {
            'variant': self.variant,
            'rows': rows,
            'average_auc': self.average,
            'config': self.config,
            'fingerprint': self.fingerprint,
        }


def _run_category(train_pairs, test_pairs, category, config):
    from h2iad.train import train_one_class
    model = train_one_class(train_pairs, config)
    scores = model.score_many(test_pairs)
    samples = label_samples(scores, [p.category for p in test_pairs], category)
    fpr, tpr = roc_curve(samples)
    by_category = collections.defaultdict(list)
    for sample in samples:
        by_category[sample.category].append(sample.score)
    return {
        'auc': auroc(samples),
        'n_test': len(samples),
        'mean_scores': collections.OrderedDict(
            (c, float(np.mean(v))) for c, v in sorted(by_category.items())),
        'final_nll': model.final_nll,
        'roc': {'fpr': fpr.tolist(), 'tpr': tpr.tolist()},
    }


def run_benchmark(dataset, categories, base_config, test_fraction=0.2, stat_dsp=False,
                  workers=None, variant='default'):
    """
    Runs the one-class protocol for each category of `categories`.

    Args
    ----
      dataset: InteractionDataset.
      categories: list of str.
      base_config: TrainConfig.
          Its `normal_category` is replaced for each run.
      test_fraction: float.
          Used for records without a split tag.
      stat_dsp: bool.
          Adds the displacement statistic of each category.
      workers: int, optional.
          Categories run in this many processes; sequentially when `None` or 1.
      variant: str.

    Returns
    -------
      BenchmarkReport, rows sorted by category name.

    Raises
    ------
      DataError: if a category is absent or has no test sample to compare with.
    """
    categories = sorted(set(categories))
    if not categories:
        raise ValueError('At least one category is required.')
    present = set(dataset.categories)
    missing = [c for c in categories if c not in present]
    if missing:
        raise DataError('Categories absent from the dataset: {}.'.format(
            ', '.join(missing)))
    train, test = dataset.split(test_fraction, base_config.seed)
    test_pairs = list(test)
    test_categories = set(p.category for p in test_pairs)
    for category in categories:
        if category not in test_categories or len(test_categories) < 2:
            raise DataError('Test split needs samples of "{}" and of another '
                            'category.'.format(category))

    jobs = [(list(train), test_pairs, c,
             dataclasses.replace(base_config, normal_category=c, progress=False))
            for c in categories]
    if workers and workers > 1 and len(jobs) > 1:
        context = multiprocessing.get_context('spawn')
        with ProcessPoolExecutor(max_workers=workers, mp_context=context) as pool:
            results = list(pool.map(_run_category, *zip(*jobs)))
    else:
        results = [_run_category(*job) for job in jobs]

    rows = collections.OrderedDict()
    for category, row in zip(categories, results):
        if stat_dsp:
            row['dsp'] = displacement_statistic(dataset.by_category(category))
        logger.info('[%s] normal=%s auc=%.4f', variant, category, row['auc'])
        rows[category] = row
    config = base_config.to_dict()
    config.pop('normal_category')
    config['test_fraction'] = test_fraction
    config['shape_fingerprint'] = config_fingerprint(base_config)
    return BenchmarkReport(variant, rows, config)


def parse_ablation(text):
    """
    Parses `axis=value1,value2,...` into (axis, [values]). Boolean axes accept
    true/false/on/off/1/0.

    Raises
    ------
      ValueError: if the axis is unknown or a value cannot be parsed.
    """
    if '=' not in text:
        raise ValueError('Ablation must look like axis=value1,value2.')
    axis, raw = text.split('=', 1)
    axis = axis.strip().replace('-', '_')
    if axis not in ABLATION_AXES:
        raise ValueError('Unknown ablation axis "{}". Valid axes are: {}.'.format(
            axis, ', '.join(ABLATION_AXES)))
    values = [v.strip() for v in raw.split(',') if v.strip()]
    if not values:
        raise ValueError('Ablation of {} lists no values.'.format(axis))
    if axis == 'pe_mode':
        from h2iad.config import PE_ALIASES
        parsed = []
        for value in values:
            if value in PE_ALIASES:
                value = PE_ALIASES[value]
            parsed.append(value)
        return axis, parsed
    truthy = {'true': True, 'on': True, '1': True, 'false': False, 'off': False,
              '0': False}
    try:
        return axis, [truthy[v.lower()] for v in values]
    except KeyError as e:
        raise ValueError('{} values must be booleans, got {}.'.format(axis, e))


def run_ablation(dataset, categories, base_config, axis, values, **kwargs):
    """
    Runs `run_benchmark` once per value of one encoder switch.

    Returns
    -------
      list of BenchmarkReport, in the order of `values`.
    """
    reports = []
    for value in values:
        tasm = dataclasses.replace(base_config.tasm, **{axis: value})
        config = dataclasses.replace(base_config, tasm=tasm)
        variant = '{}={}'.format(axis, str(value).lower() if isinstance(value, bool)
                                 else value)
        reports.append(run_benchmark(dataset, categories, config, variant=variant,
                                     **kwargs))
    return reports


def drem_gain(reports):
    """
    Per-category AUC with distance encoding minus AUC without, when `reports` holds
    both `use_drem` variants; `None` otherwise.
    """
    by_variant = dict((r.variant, r) for r in reports)
    with_drem = by_variant.get('use_drem=true')
    without = by_variant.get('use_drem=false')
    if with_drem is None or without is None:
        return None
    return collections.OrderedDict(
        (c, with_drem.aucs[c] - without.aucs[c]) for c in with_drem.categories)


class BenchmarkSuite(Summary, Plot):
    """
    Reports of one or more benchmark runs over the same normal categories, one per
    variant, with the rendering and plotting of `Summary` and `Plot`.

    Args
    ----
      reports: list of BenchmarkReport.

    Raises
    ------
      ValueError: if `reports` is empty or the reports cover different categories.
    """
    def __init__(self, reports):
        reports = list(reports)
        if not reports:
            raise ValueError('A benchmark suite needs at least one report.')
        if any(r.categories != reports[0].categories for r in reports):
            raise ValueError('All reports must cover the same normal categories.')
        self.reports = reports

    @property
    def categories(self):
        return self.reports[0].categories

    @property
    def fingerprint(self):
        return full_fingerprint([r.fingerprint for r in self.reports])

    @property
    def dsp(self):
        return self.reports[0].dsp

    @property
    def delta_auc(self):
        if self.dsp is None:
            return None
        return drem_gain(self.reports)

    def report(self, variant=None):
        if variant is None:
            return self.reports[0]
        for report in self.reports:
            if report.variant == variant:
                return report
        raise ValueError('Unknown variant "{}". Valid variants are: {}.'.format(
            variant, ', '.join(r.variant for r in self.reports)))

    def to_dict(self, include_roc=False):
        return {
            'categories': self.categories,
            'fingerprint': self.fingerprint,
            'reports': [r.to_dict(include_roc) for r in self.reports],
            'dsp': self.dsp,
            'delta_auc': self.delta_auc,
        }

    def write_roc_csv(self, directory):
        """
        Writes `roc_<variant>_<category>.csv` files with `fpr,tpr` columns.

        Returns
        -------
          list of str: written paths.
        """
        if not os.path.isdir(directory):
            os.makedirs(directory)
        paths = []
        for report in self.reports:
            tag = report.variant.replace('=', '-').replace(os.sep, '_')
            for category, row in report.rows.items():
                path = os.path.join(directory, 'roc_{}_{}.csv'.format(tag, category))
                points = np.column_stack([row['roc']['fpr'], row['roc']['tpr']])
                np.savetxt(path, points, fmt='%.8f', delimiter=',', header='fpr,tpr',
                           comments='')
                paths.append(path)
        return paths


def benchmark(dataset, categories, base_config, ablation=None, **kwargs):
    """
    Runs the plain benchmark, or one run per value of `ablation`, an (axis, values)
    tuple as returned by `parse_ablation`.

    Returns
    -------
      BenchmarkSuite.
    """
    if ablation is None:
        return BenchmarkSuite([run_benchmark(dataset, categories, base_config, **kwargs)])
    axis, values = ablation
    return BenchmarkSuite(run_ablation(dataset, categories, base_config, axis, values,
                                       **kwargs))
