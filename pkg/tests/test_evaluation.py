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

"""Tests for module evaluation.py"""


from __future__ import absolute_import, division, print_function

import itertools
import os

import numpy as np
import pytest

from h2iad.data import synth_mixture
from h2iad.evaluation import (BenchmarkReport, BenchmarkSuite, ScoredSample, auroc,
                              benchmark, drem_gain, label_samples, parse_ablation,
                              roc_curve, run_ablation, run_benchmark)
from h2iad.exceptions import DataError
from h2iad.tasm import TASMConfig
from h2iad.train import TrainConfig


def _samples(scores, labels):
    return [ScoredSample(s, l, 'c') for s, l in zip(scores, labels)]


def _pair_count(scores, labels):
    wins = 0.
    positives = [s for s, l in zip(scores, labels) if l == 1]
    negatives = [s for s, l in zip(scores, labels) if l == 0]
    for p in positives:
        for n in negatives:
            wins += 1. if p > n else (0.5 if p == n else 0.)
    return wins / (len(positives) * len(negatives))


def test_auroc_examples():
    assert auroc(_samples([1, 2, 3, 4], [0, 0, 1, 1])) == 1.0
    assert auroc(_samples([5, 5, 5, 5], [0, 1, 0, 1])) == 0.5
    assert auroc(_samples([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0])) == 0.75


def test_auroc_matches_pair_counting_exhaustively():
    rng = np.random.default_rng(0)
    for n in range(2, 13):
        # Few distinct values so that most labelings contain ties.
        scores = rng.integers(0, max(2, n // 2), n).astype(float).tolist()
        for labels in itertools.product((0, 1), repeat=n):
            if 0 < sum(labels) < n:
                assert auroc(_samples(scores, labels)) == _pair_count(scores, labels)


def test_auroc_invariances():
    rng = np.random.default_rng(1)
    scores = rng.normal(size=40)
    labels = rng.integers(0, 2, 40)
    value = auroc(_samples(scores, labels))
    assert auroc(_samples(np.exp(3. * scores) + 7., labels)) == value
    assert auroc(_samples(scores, 1 - labels)) == pytest.approx(1. - value, abs=1e-12)
    order = rng.permutation(40)
    assert auroc(_samples(scores[order], labels[order])) == value


def test_auroc_requires_both_classes():
    with pytest.raises(ValueError):
        auroc(_samples([1, 2, 3], [1, 1, 1]))
    with pytest.raises(ValueError):
        auroc(_samples([1, 2], [0, 2]))


def test_roc_curve_area_equals_auroc():
    rng = np.random.default_rng(2)
    scores = rng.integers(0, 6, 30).astype(float)
    labels = rng.integers(0, 2, 30)
    samples = _samples(scores, labels)
    fpr, tpr = roc_curve(samples)
    assert (fpr[0], tpr[0]) == (0., 0.)
    assert (fpr[-1], tpr[-1]) == (1., 1.)
    assert np.all(np.diff(fpr) >= 0) and np.all(np.diff(tpr) >= 0)
    area = np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.)
    assert area == pytest.approx(auroc(samples), abs=1e-12)


def test_label_samples():
    samples = label_samples([1., 2., 3.], ['a', 'b', 'a'], 'a')
    assert [s.label for s in samples] == [0, 1, 0]
    assert samples[1] == ScoredSample(2., 1, 'b')


def test_parse_ablation():
    assert parse_ablation('pe_mode=sync,unsync,sinusoidal') == (
        'pe_mode', ['synchronized', 'unsynchronized', 'sinusoidal'])
    assert parse_ablation('use-drem=true,false') == ('use_drem', [True, False])
    assert parse_ablation('share_params=on,0') == ('share_params', [True, False])
    for text in ('pe_mode', 'heads=1,2', 'use_drem=maybe', 'use_drem='):
        with pytest.raises(ValueError):
            parse_ablation(text)


def test_run_benchmark_report(synth_dataset, tiny_train):
    report = run_benchmark(synth_dataset, ['strike', 'handshake'], tiny_train,
                           stat_dsp=True)
    assert report.categories == ['handshake', 'strike']
    for category, row in report.rows.items():
        assert 0. <= row['auc'] <= 1.
        assert row['n_test'] == 9
        assert sorted(row['mean_scores']) == ['handshake', 'idle', 'strike']
        assert row['dsp'] >= 0.
        assert len(row['roc']['fpr']) == len(row['roc']['tpr'])
    assert abs(report.average - np.mean(list(report.aucs.values()))) < 1e-12
    values = report.to_dict()
    assert 'roc' not in values['rows']['strike']
    assert 'normal_category' not in values['config']
    assert values['fingerprint'] == report.fingerprint


def test_single_category_report(synth_dataset, tiny_train):
    report = run_benchmark(synth_dataset, ['idle'], tiny_train)
    assert len(report.rows) == 1
    assert report.average == report.aucs['idle']
    assert report.dsp is None


def test_benchmark_is_reproducible(synth_dataset, tiny_train):
    first = run_benchmark(synth_dataset, ['handshake'], tiny_train).to_dict(True)
    second = run_benchmark(synth_dataset, ['handshake'], tiny_train).to_dict(True)
    assert first == second


def test_test_order_does_not_change_auc(synth_dataset, tiny_train):
    train = [s for s in synth_dataset if s.split == 'train']
    test = [s for s in synth_dataset if s.split == 'test']
    shuffled = synth_dataset.subset(train + test[::-1])
    assert (run_benchmark(synth_dataset, ['strike'], tiny_train).aucs ==
            run_benchmark(shuffled, ['strike'], tiny_train).aucs)


def test_benchmark_errors(synth_dataset, tiny_train):
    with pytest.raises(DataError, match='hug'):
        run_benchmark(synth_dataset, ['hug'], tiny_train)
    with pytest.raises(ValueError):
        run_benchmark(synth_dataset, [], tiny_train)
    only_idle = synth_dataset.subset(synth_dataset.by_category('idle'))
    with pytest.raises(DataError):
        run_benchmark(only_idle, ['idle'], tiny_train)


def test_ablation_and_drem_gain(synth_dataset, tiny_train):
    reports = run_ablation(synth_dataset, ['handshake', 'strike'], tiny_train,
                           'use_drem', [True, False], stat_dsp=True)
    assert [r.variant for r in reports] == ['use_drem=true', 'use_drem=false']
    assert reports[0].config['tasm']['use_drem'] is True
    assert reports[1].config['tasm']['use_drem'] is False
    gain = drem_gain(reports)
    for category in ('handshake', 'strike'):
        assert gain[category] == pytest.approx(
            reports[0].aucs[category] - reports[1].aucs[category])
    suite = BenchmarkSuite(reports)
    assert suite.delta_auc == gain
    assert drem_gain(reports[:1]) is None


def test_suite(tmp_path, synth_dataset, tiny_train):
    suite = benchmark(synth_dataset, ['handshake', 'idle'], tiny_train,
                      ablation=('pe_mode', ['synchronized', 'sinusoidal']))
    assert [r.variant for r in suite.reports] == ['pe_mode=synchronized',
                                                  'pe_mode=sinusoidal']
    assert suite.dsp is None and suite.delta_auc is None
    assert suite.report('pe_mode=sinusoidal') is suite.reports[1]
    with pytest.raises(ValueError):
        suite.report('pe_mode=learned')
    values = suite.to_dict()
    assert values['categories'] == ['handshake', 'idle']
    assert len(values['reports']) == 2

    paths = suite.write_roc_csv(str(tmp_path / 'roc'))
    assert len(paths) == 4
    assert os.path.basename(paths[0]) == 'roc_pe_mode-synchronized_handshake.csv'
    points = np.loadtxt(paths[0], delimiter=',', skiprows=1)
    assert points[0].tolist() == [0., 0.]
    assert points[-1].tolist() == [1., 1.]
    with open(paths[0]) as f:
        assert f.readline().strip() == 'fpr,tpr'


def test_suite_validation():
    with pytest.raises(ValueError):
        BenchmarkSuite([])
    a = BenchmarkReport('a', {'x': {'auc': 1.}}, {})
    b = BenchmarkReport('b', {'y': {'auc': 1.}}, {})
    with pytest.raises(ValueError):
        BenchmarkSuite([a, b])


@pytest.mark.slow
def test_parallel_benchmark_matches_sequential(synth_dataset, tiny_train):
    categories = ['handshake', 'idle', 'strike']
    sequential = run_benchmark(synth_dataset, categories, tiny_train)
    parallel = run_benchmark(synth_dataset, categories, tiny_train, workers=2)
    assert parallel.categories == sequential.categories
    for category in categories:
        assert parallel.aucs[category] == pytest.approx(sequential.aucs[category],
                                                        abs=1e-6)


@pytest.fixture(scope='module')
def desk_scale():
    dataset = synth_mixture(['handshake', 'strike', 'idle'], 100, seed=0, T=16, D=6,
                            test_count_each=50)
    config = TrainConfig(epochs=50, seed=0, tasm=TASMConfig(N=2, E=32, T=16, D=6))
    return dataset, config


@pytest.mark.slow
def test_desk_scale_handshake_benchmark(desk_scale):
    dataset, config = desk_scale
    report = run_benchmark(dataset, ['handshake'], config)
    assert report.aucs['handshake'] >= 0.9


@pytest.mark.slow
def test_positional_embedding_ablation_direction(desk_scale):
    dataset, config = desk_scale
    reports = run_ablation(dataset, ['handshake'], config, 'pe_mode',
                           ['synchronized', 'unsynchronized', 'sinusoidal'])
    sync, unsync, sinusoidal = [r.average for r in reports]
    assert sync >= unsync - 0.05
    assert unsync >= sinusoidal - 0.05


@pytest.mark.slow
@pytest.mark.parametrize('axis', ['use_drem', 'share_params'])
def test_switch_ablation_direction(desk_scale, axis):
    dataset, config = desk_scale
    enabled, disabled = run_ablation(dataset, ['handshake'], config, axis,
                                     [True, False])
    assert enabled.average >= disabled.average - 0.02
