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
Static figures: distance-map image strips and ROC curves of a benchmark.
"""


from __future__ import absolute_import, division, print_function

import os

import numpy as np


def _load_pyplot():  # pragma: no cover
    """
    Some environments do not have matplotlib, so it is imported on first use only. The
    Agg backend is selected as figures are only ever written to files.

    Returns
    -------
      plotter: `matplotlib.pyplot`.
    """
    import matplotlib
    matplotlib.use('Agg')
    import matplotlib.pyplot as plt
    return plt


def distance_map_grayscale(maps):
    """
    Maps distance entries affinely to [0, 1] so that 0 becomes black (0.) and the most
    negative entry of the whole sequence becomes white (1.).

    Args
    ----
      maps: DistanceMapSequence or array of shape (T, D, D).

    Returns
    -------
      np.array of float32 with the same shape.
    """
    values = np.asarray(getattr(maps, 'maps', maps), dtype=np.float32)
    lowest = float(values.min()) if values.size else 0.
    if lowest == 0.:
        return np.zeros_like(values)
    return values / lowest


def save_distance_map_strip(maps, directory, prefix='ddm', plotter=None):
    """
    Writes one grayscale PNG per frame, named `<prefix>_<t>.png` with a zero-padded
    frame index.

    Args
    ----
      maps: DistanceMapSequence.
      directory: str.
          Created when missing.
      prefix: str.
      plotter: optional `matplotlib.pyplot`-like object.

    Returns
    -------
      list of str: written paths, in frame order.
    """
    plt = plotter or _load_pyplot()
    gray = distance_map_grayscale(maps)
    if not os.path.isdir(directory):
        os.makedirs(directory)
    digits = len(str(max(len(gray) - 1, 0)))
    paths = []
    for t, frame in enumerate(gray):
        path = os.path.join(directory, '{}_{}.png'.format(prefix, str(t).zfill(digits)))
        plt.imsave(path, frame, cmap='gray', vmin=0., vmax=1.)
        paths.append(path)
    return paths


class Plot(object):
    """Draws the ROC curves held by the benchmark reports of `self.reports`."""
    def plot_roc(self, path, variant=None, figsize=(6, 6)):
        """
        Plots the ROC curve of every normal category of one variant into a PNG file.

        Args
        ----
          path: str.
          variant: str, optional.
              Defaults to the first report.
          figsize: tuple.

        Raises
        ------
          RuntimeError: if no report has been computed yet.
          ValueError: if `variant` is unknown or reports carry no ROC points.
        """
        if not self.reports:
            raise RuntimeError('Please first run the benchmark before plotting results.')
        report = self.report(variant)
        plt = self._get_plotter()
        fig = plt.figure(figsize=figsize)
        ax = fig.add_subplot(1, 1, 1)
        for category, row in report.rows.items():
            if 'roc' not in row:
                raise ValueError('Report "{}" has no ROC points.'.format(report.variant))
            ax.plot(row['roc']['fpr'], row['roc']['tpr'],
                    label='{} (AUC {:.3f})'.format(category, row['auc']))
        ax.plot([0, 1], [0, 1], 'k--')
        ax.set_xlabel('False positive rate')
        ax.set_ylabel('True positive rate')
        ax.set_title(report.variant)
        ax.grid(True, linestyle='--')
        ax.legend()
        fig.savefig(path)
        plt.close(fig)
        return path

    def _get_plotter(self):  # pragma: no cover
        return _load_pyplot()
