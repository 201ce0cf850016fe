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
Paired 3D skeleton sequences: validation, the line-delimited JSON dataset format,
pair-level normalization, temporal resampling and the synthetic interaction scenarios.

Joint 0 is the root of every skeleton and joint 1 is the "hand" used by the synthetic
scenarios. Importers of other skeleton formats must map their joints to this convention.
"""


from __future__ import absolute_import, division, print_function

import io
import json
import logging

import numpy as np

from h2iad.exceptions import DataError

logger = logging.getLogger(__name__)

SCENARIOS = ('handshake', 'strike', 'idle', 'approach')
SPLITS = ('train', 'test')
# Upper bound of the displacement any non-root joint makes between two consecutive
# frames because of the synthetic jitter.
IDLE_NOISE_BOUND = 0.02
DEFAULT_FPS = 30.0


class PoseSequence(object):
    """
    Sequence of `T` skeleton frames with `D` joints each, stored as a float32 array of
    shape (T, D, 3) in meters.

    Args
    ----
      frames: array-like of shape (T, D, 3).
      fps: float.
          Frames per second, must be positive.

    Raises
    ------
      DataError: if shape is not (T, D, 3) with T >= 2 and D >= 1.
                 if any coordinate is not finite.
                 if `fps` is not positive.
    """
    def __init__(self, frames, fps=DEFAULT_FPS):
        try:
            frames = np.array(frames, dtype=np.float32)
        except (TypeError, ValueError):
            raise DataError('Frames must be a rectangular T x D x 3 array of numbers.')
        if frames.ndim != 3 or frames.shape[2] != 3:
            raise DataError('Frames must have shape T x D x 3, got {}.'.format(
                frames.shape))
        if frames.shape[0] < 2:
            raise DataError('A pose sequence needs at least 2 frames.')
        if frames.shape[1] < 1:
            raise DataError('A pose sequence needs at least 1 joint.')
        if not np.all(np.isfinite(frames)):
            raise DataError('Pose coordinates must be finite.')
        fps = float(fps)
        if not np.isfinite(fps) or fps <= 0:
            raise DataError('fps must be a positive number.')
        frames.setflags(write=False)
        self._frames = frames
        self.fps = fps

    @property
    def frames(self):
        return self._frames

    @property
    def T(self):
        return self._frames.shape[0]

    @property
    def D(self):
        return self._frames.shape[1]

    def __eq__(self, other):
        return (isinstance(other, PoseSequence) and self.fps == other.fps and
                np.array_equal(self._frames, other._frames))

    def __ne__(self, other):
        return not self == other

    def __repr__(self):
        return 'PoseSequence(T={}, D={}, fps={})'.format(self.T, self.D, self.fps)


class InteractionPair(object):
    """
    Two time-aligned persons performing one interaction.

    Args
    ----
      person_x: PoseSequence.
      person_y: PoseSequence.
      category: str.
          Interaction label.
      split: str, optional.
          Either "train", "test" or `None` when the record carries no split tag.

    Raises
    ------
      DataError: if both persons do not share frame and joint counts.
                 if `split` is not a known tag.
    """
    def __init__(self, person_x, person_y, category, split=None):
        if person_x.T != person_y.T:
            raise DataError('Persons have different frame counts: {} and {}.'.format(
                person_x.T, person_y.T))
        if person_x.D != person_y.D:
            raise DataError('Persons have different joint counts: {} and {}.'.format(
                person_x.D, person_y.D))
        if split is not None and split not in SPLITS:
            raise DataError('Unknown split tag "{}".'.format(split))
        self.person_x = person_x
        self.person_y = person_y
        self.category = str(category)
        self.split = split

    @property
    def T(self):
        return self.person_x.T

    @property
    def D(self):
        return self.person_x.D

    @property
    def fps(self):
        return self.person_x.fps

    def swapped(self):
        """Returns the same interaction with the roles of both persons exchanged."""
        return InteractionPair(self.person_y, self.person_x, self.category, self.split)

    def __eq__(self, other):
        return (isinstance(other, InteractionPair) and
                self.category == other.category and self.split == other.split and
                self.person_x == other.person_x and self.person_y == other.person_y)

    def __ne__(self, other):
        return not self == other

    def __repr__(self):
        return 'InteractionPair(category={!r}, T={}, D={})'.format(
            self.category, self.T, self.D)


class InteractionDataset(object):
    """
    Collection of interaction pairs sharing one joint count.

    Args
    ----
      samples: list of InteractionPair.
      joint_count: int, optional.
          Expected `D` of every sample. Inferred from the first sample if `None`.
      categories: iterable of str, optional.
          Declared labels. Defaults to the labels found in `samples`.

    Raises
    ------
      DataError: if samples disagree on the joint count.
                 if a sample label is not declared.
                 if the dataset is empty and no `joint_count` is given.
    """
    def __init__(self, samples, joint_count=None, categories=None):
        samples = list(samples)
        if joint_count is None:
            if not samples:
                raise DataError('Empty dataset needs an explicit joint_count.')
            joint_count = samples[0].D
        for idx, sample in enumerate(samples):
            if sample.D != joint_count:
                raise DataError('Sample {} has {} joints, expected {}.'.format(
                    idx, sample.D, joint_count))
        found = set(s.category for s in samples)
        declared = found if categories is None else set(categories)
        undeclared = found - declared
        if undeclared:
            raise DataError('Undeclared categories: {}.'.format(
                ', '.join(sorted(undeclared))))
        self.samples = samples
        self.joint_count = int(joint_count)
        self.declared_categories = declared

    @property
    def categories(self):
        """Sorted list of labels actually present in the samples."""
        return sorted(set(s.category for s in self.samples))

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __getitem__(self, idx):
        return self.samples[idx]

    def __eq__(self, other):
        return (isinstance(other, InteractionDataset) and
                self.joint_count == other.joint_count and
                self.declared_categories == other.declared_categories and
                self.samples == other.samples)

    def __ne__(self, other):
        return not self == other

    def by_category(self, category):
        return [s for s in self.samples if s.category == category]

    def subset(self, samples):
        """Builds a dataset with the same joint count and declared labels."""
        return InteractionDataset(samples, self.joint_count, self.declared_categories)

    def split(self, test_fraction=0.2, seed=0):
        """
        Divides samples into train and test subsets.

        Records carrying a split tag keep it. Untagged records are assigned per category
        by a seeded shuffle so that `test_fraction` of each category (rounded, at least
        one sample when the category has two or more) goes to test.

        Args
        ----
          test_fraction: float.
              Share of untagged samples of each category that goes to the test split.
          seed: int.

        Returns
        -------
          tuple of InteractionDataset: (train, test).

        Raises
        ------
          ValueError: if `test_fraction` is not within [0, 1).
        """
        if not 0 <= test_fraction < 1:
            raise ValueError('test_fraction must be within [0, 1).')
        train, test = [], []
        untagged = {}
        for idx, sample in enumerate(self.samples):
            if sample.split == 'train':
                train.append((idx, sample))
            elif sample.split == 'test':
                test.append((idx, sample))
            else:
                untagged.setdefault(sample.category, []).append((idx, sample))
        for offset, category in enumerate(sorted(untagged)):
            members = untagged[category]
            rng = np.random.default_rng([seed, offset])
            order = rng.permutation(len(members))
            n_test = int(round(test_fraction * len(members)))
            if test_fraction > 0 and len(members) > 1:
                n_test = min(max(n_test, 1), len(members) - 1)
            test_idx = set(order[:n_test].tolist())
            for pos, member in enumerate(members):
                (test if pos in test_idx else train).append(member)
        # Keep the file order inside each split.
        train = [s for _, s in sorted(train, key=lambda e: e[0])]
        test = [s for _, s in sorted(test, key=lambda e: e[0])]
        return self.subset(train), self.subset(test)


def _parse_person(value, joints, name, line_no):
    try:
        frames = np.array(value, dtype=np.float64)
    except (TypeError, ValueError):
        raise DataError('Line {}: {} is not a T x D x 3 array of numbers.'.format(
            line_no, name))
    if frames.ndim != 3 or frames.shape[1:] != (joints, 3):
        raise DataError('Line {}: {} has shape {}, expected T x {} x 3.'.format(
            line_no, name, frames.shape, joints))
    if not np.all(np.isfinite(frames)):
        raise DataError('Line {}: {} contains a non-finite coordinate.'.format(
            line_no, name))
    return frames


def _parse_record(line, line_no):
    try:
        record = json.loads(line)
    except ValueError as e:
        raise DataError('Line {}: malformed JSON ({}).'.format(line_no, e))
    if not isinstance(record, dict):
        raise DataError('Line {}: record must be a JSON object.'.format(line_no))
    missing = [k for k in ('category', 'fps', 'joints', 'person_x', 'person_y')
               if k not in record]
    if missing:
        raise DataError('Line {}: missing field(s) {}.'.format(
            line_no, ', '.join(missing)))
    joints = record['joints']
    if isinstance(joints, bool) or not isinstance(joints, int) or joints < 1:
        raise DataError('Line {}: joints must be a positive integer.'.format(line_no))
    x = _parse_person(record['person_x'], joints, 'person_x', line_no)
    y = _parse_person(record['person_y'], joints, 'person_y', line_no)
    if x.shape[0] != y.shape[0]:
        raise DataError('Line {}: person_x has {} frames but person_y has {}.'.format(
            line_no, x.shape[0], y.shape[0]))
    try:
        return InteractionPair(
            PoseSequence(x, record['fps']),
            PoseSequence(y, record['fps']),
            record['category'],
            record.get('split')
        )
    except DataError as e:
        raise DataError('Line {}: {}'.format(line_no, e))


def load_dataset(path, expected_joints=None):
    """
    Reads a line-delimited JSON dataset. Each non-blank line holds one object with the
    fields `category`, `fps`, `joints`, `person_x`, `person_y` and optionally `split`.

    Args
    ----
      path: str.
      expected_joints: int, optional.
          When given, every record must have exactly this many joints.

    Returns
    -------
      InteractionDataset.

    Raises
    ------
      DataError: if the file does not exist.
                 if a record is malformed; the message names its line number.
                 if joint counts disagree with `expected_joints` or between records.
    """
    samples = []
    try:
        with io.open(path, 'r', encoding='utf-8') as f:
            for line_no, line in enumerate(f, 1):
                if not line.strip():
                    continue
                pair = _parse_record(line, line_no)
                if expected_joints is not None and pair.D != expected_joints:
                    raise DataError('Line {}: record has {} joints, expected {}.'.format(
                        line_no, pair.D, expected_joints))
                if samples and pair.D != samples[0].D:
                    raise DataError('Line {}: record has {} joints, previous records '
                                    'have {}.'.format(line_no, pair.D, samples[0].D))
                samples.append(pair)
    except (IOError, OSError) as e:
        raise DataError('Cannot read dataset {}: {}'.format(path, e))
    if not samples:
        if expected_joints is None:
            raise DataError('Dataset {} has no records.'.format(path))
        return InteractionDataset([], joint_count=expected_joints)
    logger.debug('Loaded %d samples from %s (categories: %s).', len(samples), path,
                 ', '.join(sorted(set(s.category for s in samples))))
    return InteractionDataset(samples)


def _record(pair):
    record = {
        'category': pair.category,
        'fps': pair.fps,
        'joints': pair.D,
        'person_x': pair.person_x.frames.tolist(),
        'person_y': pair.person_y.frames.tolist(),
    }
    if pair.split is not None:
        record['split'] = pair.split
    return record


def write_dataset(dataset, path):
    """
    Writes `dataset` in the format read by `load_dataset`. Coordinates are emitted from
    their float32 values so that reading the file back is lossless.

    Args
    ----
      dataset: InteractionDataset or iterable of InteractionPair.
      path: str.
    """
    with io.open(path, 'w', encoding='utf-8') as f:
        for pair in dataset:
            f.write(json.dumps(_record(pair), sort_keys=True))
            f.write(u'\n')


def normalize_pair(pair):
    """
    Translates both persons by one shared vector so that the midpoint of their root
    joints at the first frame becomes the origin. Rotation and scale are untouched, so
    every inter-person joint distance is preserved.

    Args
    ----
      pair: InteractionPair.

    Returns
    -------
      InteractionPair.
    """
    x = pair.person_x.frames
    y = pair.person_y.frames
    offset = (x[0, 0].astype(np.float64) + y[0, 0].astype(np.float64)) / 2.
    if not np.any(offset):
        return pair
    return InteractionPair(
        PoseSequence(x - offset, pair.person_x.fps),
        PoseSequence(y - offset, pair.person_y.fps),
        pair.category,
        pair.split
    )


def resample_to_length(seq, target_T):
    """
    Linearly interpolates a sequence in time to `target_T` uniformly spaced frames.
    First and last frames are kept exactly; the frame rate is rescaled so that the clip
    keeps its duration.

    Args
    ----
      seq: PoseSequence.
      target_T: int.
          Number of output frames, at least 2.

    Returns
    -------
      PoseSequence.

    Raises
    ------
      ValueError: if `target_T` is smaller than 2.
    """
    if int(target_T) != target_T or target_T < 2:
        raise ValueError('target_T must be an integer of at least 2.')
    target_T = int(target_T)
    if target_T == seq.T:
        return seq
    frames = seq.frames.astype(np.float64)
    positions = np.linspace(0., seq.T - 1, target_T)
    lower = np.minimum(np.floor(positions).astype(int), seq.T - 2)
    weight = (positions - lower)[:, None, None]
    out = (1. - weight) * frames[lower] + weight * frames[lower + 1]
    out[0] = frames[0]
    out[-1] = frames[-1]
    fps = seq.fps * (target_T - 1) / (seq.T - 1)
    return PoseSequence(out, fps)


def prepare_pair(pair, target_T, normalize=True):
    """
    Brings a pair into model input form: shared translation (optional) followed by
    resampling of both persons to `target_T` frames.
    """
    if normalize:
        pair = normalize_pair(pair)
    if pair.T == target_T:
        return pair
    return InteractionPair(
        resample_to_length(pair.person_x, target_T),
        resample_to_length(pair.person_y, target_T),
        pair.category,
        pair.split
    )


def _smoothstep(u):
    u = np.clip(u, 0., 1.)
    return u * u * (3. - 2. * u)


def _body_template(rng, D):
    """Random rest offsets of joints 2..D-1 relative to the root, facing +x."""
    offsets = np.zeros((D, 3))
    n_body = D - 2
    if n_body > 0:
        offsets[2:, 0] = rng.uniform(-0.15, 0.15, n_body)
        offsets[2:, 1] = rng.uniform(-0.25, 0.25, n_body)
        offsets[2:, 2] = rng.uniform(-0.9, 0.7, n_body)
    return offsets


def _place(roots, offsets, facing):
    """
    Builds (T, D, 3) joint positions from root trajectories and per-frame offsets.
    `facing` is +1 for a person looking along +x and -1 for the opposite direction,
    which mirrors the x and y components of the offsets.
    """
    mirror = np.array([facing, facing, 1.])
    return roots[:, None, :] + offsets * mirror


def _jitter(rng, T, D, noise):
    # Uniform noise per coordinate of half-width h moves a joint between frames by at
    # most 2 * h * sqrt(3) = noise. The root stays noise free.
    half_width = noise / (2. * np.sqrt(3.))
    jitter = rng.uniform(-half_width, half_width, (T, D, 3))
    jitter[:, 0] = 0.
    return jitter


def _synth_pair(scenario, rng, T, D, noise):
    u = np.linspace(0., 1., T)
    body_x = _body_template(rng, D)
    body_y = _body_template(rng, D)
    height = 1.0
    rest_hand = np.array([0., rng.uniform(0.45, 0.5), -rng.uniform(0.45, 0.5)])

    if scenario == 'handshake':
        start, end = rng.uniform(2.0, 2.5), rng.uniform(0.9, 1.0)
        gap = rng.uniform(0.02, 0.06)
        phase = _smoothstep(u / 0.6)
        standoff = start + (end - start) * phase
        reach = 0.2 + ((end - gap) / 2. - 0.2) * phase
        hand_x = np.stack([reach, np.zeros(T), np.zeros(T)], axis=1)
        hand_y = hand_x
    elif scenario == 'strike':
        standoff = np.full(T, rng.uniform(1.6, 2.0))
        rest = np.array([0.2, 0., 0.])
        # Stops 0.2 m in front of the other person's root.
        target = np.array([standoff[0] - 0.2, 0., 0.])
        hand_x = rest + (u ** 2)[:, None] * (target - rest)
        hand_y = np.tile(rest_hand, (T, 1))
    elif scenario == 'idle':
        standoff = np.full(T, rng.uniform(1.5, 2.5))
        hand_x = np.tile(rest_hand, (T, 1))
        hand_y = hand_x
    elif scenario == 'approach':
        start, end = rng.uniform(3.0, 3.5), rng.uniform(1.4, 1.6)
        standoff = start + (end - start) * u
        hand_x = np.tile(rest_hand, (T, 1))
        hand_y = hand_x
    else:
        raise DataError('Unknown scenario "{}". Valid scenarios are: {}.'.format(
            scenario, ', '.join(SCENARIOS)))

    origin = np.array([rng.uniform(-1., 1.), rng.uniform(-1., 1.), height])
    root_x = origin + np.outer(-standoff / 2., [1., 0., 0.])
    root_y = origin + np.outer(standoff / 2., [1., 0., 0.])

    offsets_x = np.tile(body_x, (T, 1, 1))
    offsets_y = np.tile(body_y, (T, 1, 1))
    offsets_x[:, 1] = hand_x
    offsets_y[:, 1] = hand_y
    x = _place(root_x, offsets_x, 1.) + _jitter(rng, T, D, noise)
    y = _place(root_y, offsets_y, -1.) + _jitter(rng, T, D, noise)
    return x, y


def _generate(scenario, count, rng, T, D, noise, split=None):
    samples = []
    for _ in range(count):
        x, y = _synth_pair(scenario, rng, T, D, noise)
        samples.append(InteractionPair(PoseSequence(x), PoseSequence(y), scenario, split))
    return samples


def _check_synth_args(count, T, D):
    if count < 1:
        raise ValueError('count must be a positive integer.')
    if T < 2:
        raise ValueError('T must be at least 2.')
    if D < 2:
        raise ValueError('D must be at least 2 (root and hand joints).')


def synth_generate(scenario, count, seed, T, D, noise=IDLE_NOISE_BOUND):
    """
    Generates `count` synthetic interactions of one scenario.

    Scenarios:
      handshake: both actors converge until their hand joints nearly touch, then hold.
      strike: at a large standoff, one hand accelerates toward the other's root.
      idle: static poses with small jitter.
      approach: root-to-root distance decreases monotonically, hands stay at rest.

    Args
    ----
      scenario: str.
      count: int.
      seed: int.
          Seeds a dedicated generator, so results do not depend on global state.
      T: int.
          Frames per sequence.
      D: int.
          Joints per person, at least 2.
      noise: float.
          Maximum displacement the jitter causes on any joint between two frames.

    Returns
    -------
      InteractionDataset.

    Raises
    ------
      DataError: if `scenario` is unknown.
      ValueError: if `count`, `T` or `D` are out of range.
    """
    if scenario not in SCENARIOS:
        raise DataError('Unknown scenario "{}". Valid scenarios are: {}.'.format(
            scenario, ', '.join(SCENARIOS)))
    _check_synth_args(count, T, D)
    rng = np.random.default_rng(seed)
    return InteractionDataset(_generate(scenario, count, rng, T, D, noise))


def synth_mixture(scenarios, count_each, seed, T, D, test_count_each=0,
                  noise=IDLE_NOISE_BOUND):
    """
    Concatenates several scenarios into one dataset. Each scenario draws from its own
    generator derived from (`seed`, scenario position), and samples are tagged "train"
    or, for the last `test_count_each` of each scenario, "test".
    """
    _check_synth_args(count_each + test_count_each, T, D)
    samples = []
    for offset, scenario in enumerate(scenarios):
        if scenario not in SCENARIOS:
            raise DataError('Unknown scenario "{}".'.format(scenario))
        rng = np.random.default_rng([seed, offset])
        samples.extend(_generate(scenario, count_each, rng, T, D, noise, 'train'))
        samples.extend(_generate(scenario, test_count_each, rng, T, D, noise, 'test'))
    return InteractionDataset(samples, joint_count=D)
