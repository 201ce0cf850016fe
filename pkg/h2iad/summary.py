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
Renders benchmark results as a plain-text table or as JSON.
"""


from __future__ import absolute_import, division, print_function

import io
import json
import os

from jinja2 import Template

_here = os.path.dirname(os.path.abspath(__file__))
report_tmpl_path = os.path.join(_here, 'templates', 'report')

with io.open(report_tmpl_path, 'r', encoding='utf-8') as _f:
    REPORT_TMPL = Template(_f.read())

AVERAGE_COLUMN = 'Avg.'
BEST_MARK = '*'


def _fmt(value, digits=4):
    return '-' if value is None else '{:.{}f}'.format(value, digits)


def _mean(values):
    values = [v for v in values if v is not None]
    return sum(values) / len(values) if values else None


def _auc_rows(reports, categories):
    """One row per variant; the best value of each column is marked when comparing."""
    table = []
    for report in reports:
        aucs = report.aucs
        table.append([aucs.get(c) for c in categories] + [report.average])
    best = [max(v for v in column if v is not None) for column in zip(*table)]
    rows = []
    for report, values in zip(reports, table):
        cells = []
        for value, top in zip(values, best):
            mark = BEST_MARK if len(reports) > 1 and value == top else ''
            cells.append(_fmt(value) + mark)
        rows.append({'label': report.variant, 'cells': cells})
    return rows


def _extra_row(label, values, categories):
    values = [values.get(c) for c in categories]
    return {'label': label, 'cells': [_fmt(v) for v in values] + [_fmt(_mean(values))]}


def _score_blocks(reports):
    blocks = []
    for report in reports:
        tested = sorted(set(c for row in report.rows.values()
                            for c in row['mean_scores']))
        rows = [{'label': 'normal=' + normal,
                 'cells': [_fmt(row['mean_scores'].get(c), 2) for c in tested]}
                for normal, row in report.rows.items()]
        blocks.append({'title': report.variant, 'columns': tested, 'rows': rows})
    return blocks


class Summary(object):
    """
    Prepares the final benchmark report from `self.reports`, a list of
    `BenchmarkReport` sharing the same normal categories.
    """
    def summary(self, output='report'):
        """
        Returns the benchmark results.

        Args
        ----
          output: str.
              Either "report", a plain-text AUC table with one row per variant and an
              "Avg." column followed by optional dsp and delta_auc rows and the mean
              anomaly score of each test category, or "json".

        Returns
        -------
          summary: str.

        Raises
        ------
          RuntimeError: if no report has been computed yet.
          ValueError: if `output` is neither "report" nor "json".
        """
        if not self.reports:
            raise RuntimeError('Benchmark must be first run before summarizing.')
        if output not in {'report', 'json'}:
            raise ValueError('Please choose either report or json for output.')
        if output == 'json':
            return json.dumps(self.to_dict(), sort_keys=True, indent=2)

        categories = self.categories
        columns = categories + [AVERAGE_COLUMN]
        labels = [r.variant for r in self.reports] + ['dsp', 'delta_auc']
        names = columns + [c for b in _score_blocks(self.reports) for c in b['columns']]
        extra_rows = []
        if self.dsp is not None:
            extra_rows.append(_extra_row('dsp', self.dsp, categories))
        if self.delta_auc is not None:
            extra_rows.append(_extra_row('delta_auc', self.delta_auc, categories))
        return REPORT_TMPL.render(
            fingerprint=self.fingerprint,
            label_width=max(len(label) for label in labels + ['normal=' + c
                                                              for c in categories]) + 2,
            width=max(10, max(len(name) for name in names) + 2),
            columns=columns,
            auc_rows=_auc_rows(self.reports, categories),
            extra_rows=extra_rows,
            score_blocks=_score_blocks(self.reports),
        )
