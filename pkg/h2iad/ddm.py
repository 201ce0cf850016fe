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
Dynamic distance maps between the joints of two interacting persons and the
displacement statistic derived from them.
"""


from __future__ import absolute_import, division, print_function

import numpy as np

from h2iad.exceptions import DataError


class DistanceMapSequence(object):
    """
    Per-frame D x D matrices whose (i, j) entry is the negated Euclidean distance
    between joint `i` of person x and joint `j` of person y. Entries are never positive
    and reach zero only where two joints coincide.

    Args
    ----
      maps: array-like of shape (T, D, D).
    """
    def __init__(self, maps):
        maps = np.asarray(maps, dtype=np.float32)
        if maps.ndim != 3 or maps.shape[1] != maps.shape[2]:
            raise DataError('Distance maps must have shape T x D x D, got {}.'.format(
                maps.shape))
        self.maps = maps

    @property
    def T(self):
        return self.maps.shape[0]

    @property
    def D(self):
        return self.maps.shape[1]

    def __len__(self):
        return self.T

    def __getitem__(self, t):
        return self.maps[t]

    def flattened(self):
        """Returns the maps as a (T, D * D) array, row-major over (i, j)."""
        return self.maps.reshape(self.T, -1)

    def export_strip(self, directory, prefix='ddm'):
        """Writes one grayscale PNG per frame, see `plot.save_distance_map_strip`."""
        from h2iad.plot import save_distance_map_strip
        return save_distance_map_strip(self, directory, prefix)


def _pairwise_distances(x, y):
    """(T, D, 3) x (T, D, 3) -> (T, D, D) distances, accumulated in float64."""
    diff = x.astype(np.float64)[:, :, None, :] - y.astype(np.float64)[:, None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def dynamic_distance_maps(pair):
    """
    Computes the map sequence of one pair.

    Args
    ----
      pair: InteractionPair.

    Returns
    -------
      DistanceMapSequence with T maps, `maps[t][i][j] = -||x_t(i) - y_t(j)||`.
    """
    return DistanceMapSequence(
        -_pairwise_distances(pair.person_x.frames, pair.person_y.frames))


def displacement_statistic(samples):
    """
    Mean over samples of the largest temporal range of any inter-person joint
    distance. For one sample, each joint pair (i, j) contributes
    `max_t d_ij(t) - min_t d_ij(t)` and the sample keeps the maximum over pairs.

    Args
    ----
      samples: list of InteractionPair.

    Returns
    -------
      float: displacement in the units of the coordinates (meters).

    Raises
    ------
      DataError: if `samples` is empty.
    """
    samples = list(samples)
    if not samples:
        raise DataError('Displacement statistic needs at least one sample.')
    per_sample = []
    for pair in samples:
        distances = _pairwise_distances(pair.person_x.frames, pair.person_y.frames)
        ranges = distances.max(axis=0) - distances.min(axis=0)
        per_sample.append(ranges.max())
    return float(np.mean(per_sample))
