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
One-class training of the encoder and the flow, and anomaly scoring with the trained
model.
"""


from __future__ import absolute_import, division, print_function

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import torch
import torch.nn as nn
from tqdm import tqdm

from h2iad.data import prepare_pair
from h2iad.exceptions import DataError, NumericError
from h2iad.flow import DEFAULT_LAYERS, FlowModel
from h2iad.misc import seed_everything
from h2iad.tasm import TASM, TASMConfig, pair_tensors

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig(object):
    """
    Training settings.

    Args
    ----
      epochs: int.
      initial_lr: float.
          Learning rate of the first epoch.
      final_lr: float.
          Learning rate of the last epoch. The rate decays geometrically in between.
          Must be smaller than `initial_lr`; both may be 0 to freeze parameters.
      batch_size: int.
      seed: int.
          Seeds parameter initialization, the holdout slice and batch shuffling.
      normal_category: str.
          The only category used for training.
      tasm: TASMConfig.
      flow_layers: int.
      normalize: bool.
          Whether pairs are translated to the shared origin before encoding.
      holdout_fraction: float.
          Share of normal samples held out to track a validation NLL per epoch.
      grad_clip: float, optional.
          Max gradient norm; no clipping when `None`.
      progress: bool.
          Shows a progress bar over epochs.
    """
    epochs: int = 50
    initial_lr: float = 1e-3
    final_lr: float = 1e-5
    batch_size: int = 32
    seed: int = 0
    normal_category: str = ''
    tasm: TASMConfig = field(default_factory=TASMConfig)
    flow_layers: int = DEFAULT_LAYERS
    normalize: bool = True
    holdout_fraction: float = 0.
    grad_clip: float = None
    progress: bool = False

    def __post_init__(self):
        if isinstance(self.tasm, dict):
            self.tasm = TASMConfig(**self.tasm)
        if self.epochs < 1:
            raise ValueError('epochs must be at least 1.')
        if self.batch_size < 1:
            raise ValueError('batch_size must be at least 1.')
        if self.flow_layers < 1:
            raise ValueError('flow_layers must be at least 1.')
        if self.initial_lr < 0 or self.final_lr < 0:
            raise ValueError('Learning rates cannot be negative.')
        if self.initial_lr == 0:
            if self.final_lr != 0:
                raise ValueError('final_lr must be 0 when initial_lr is 0.')
        elif not 0 < self.final_lr < self.initial_lr:
            raise ValueError('final_lr must be positive and smaller than initial_lr.')
        if not 0 <= self.holdout_fraction < 1:
            raise ValueError('holdout_fraction must be within [0, 1).')
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ValueError('grad_clip must be positive.')

    def to_dict(self):
        """Plain dict of every field; `progress` is a display setting and left out."""
        result = asdict(self)
        result.pop('progress')
        return result


def learning_rate(epoch, config):
    """
    Learning rate of a 1-based `epoch`: geometric interpolation from `initial_lr` at
    epoch 1 to `final_lr` at the last epoch.
    """
    if config.initial_lr == 0:
        return 0.
    if config.epochs == 1:
        return config.initial_lr
    fraction = (epoch - 1) / (config.epochs - 1)
    return config.initial_lr * (config.final_lr / config.initial_lr) ** fraction


class AnomalyDetector(nn.Module):
    """Encoder followed by the flow; `forward` returns the per-sample NLL."""
    def __init__(self, tasm_config, flow_layers=DEFAULT_LAYERS):
        super(AnomalyDetector, self).__init__()
        self.encoder = TASM(tasm_config)
        self.flow = FlowModel(self.encoder.output_dim, flow_layers)

    def forward(self, x, y, maps):
        return self.flow.nll(self.encoder(x, y, maps))


def build_detector(config):
    """Builds a freshly initialized detector for `config`, seeded by `config.seed`."""
    seed_everything(config.seed)
    return AnomalyDetector(config.tasm, config.flow_layers)


class TrainedModel(object):
    """
    A detector together with everything needed to rebuild and audit it.

    Args
    ----
      detector: AnomalyDetector.
      config: TrainConfig.
      loss_history: list of float.
          Mean training NLL of every epoch, accumulated while parameters move.
      val_history: list of float.
          Mean NLL of the held-out normal samples after every epoch; empty without a
          holdout.
      final_nll: float, optional.
          Mean NLL of the training samples under the final parameters.
    """
    def __init__(self, detector, config, loss_history=None, val_history=None,
                 final_nll=None):
        self.detector = detector
        self.config = config
        self.loss_history = list(loss_history or [])
        self.val_history = list(val_history or [])
        self.final_nll = final_nll

    @property
    def dtype(self):
        return next(self.detector.parameters()).dtype

    def prepare(self, pair):
        """Normalizes and resamples `pair` as the model was trained."""
        tasm = self.config.tasm
        if pair.D != tasm.D:
            raise DataError('Pair has {} joints but the model expects {}.'.format(
                pair.D, tasm.D))
        return prepare_pair(pair, tasm.T, self.config.normalize)

    def score_many(self, pairs, batch_size=None):
        """Anomaly scores (NLL, higher is more anomalous) of several pairs, in order."""
        pairs = [self.prepare(p) for p in pairs]
        batch_size = batch_size or self.config.batch_size
        scores = []
        self.detector.eval()
        with torch.no_grad():
            for start in range(0, len(pairs), batch_size):
                x, y, maps = pair_tensors(pairs[start:start + batch_size], self.dtype)
                scores.extend(self.detector(x, y, maps).tolist())
        return scores

    def score(self, pair):
        return self.score_many([pair])[0]


def score(model, pair):
    """
    Anomaly score of one pair: its NLL under the trained flow.

    Args
    ----
      model: TrainedModel.
      pair: InteractionPair.

    Returns
    -------
      float.
    """
    return model.score(pair)


def _holdout(samples, fraction, seed):
    if fraction <= 0:
        return samples, []
    order = np.random.default_rng([seed, 1]).permutation(len(samples))
    n_hold = min(int(round(fraction * len(samples))), len(samples) - 1)
    held = set(order[:n_hold].tolist())
    train = [s for i, s in enumerate(samples) if i not in held]
    return train, [s for i, s in enumerate(samples) if i in held]


def _mean_nll(detector, tensors, batch_size):
    x, y, maps = tensors
    total = 0.
    with torch.no_grad():
        for start in range(0, x.shape[0], batch_size):
            stop = start + batch_size
            total += float(detector(x[start:stop], y[start:stop], maps[start:stop]).sum())
    return total / x.shape[0]


def train_one_class(dataset, config):
    """
    Trains a detector on the samples of `config.normal_category` only, minimizing the
    mean NLL end to end through the flow and the encoder with Adam.

    Args
    ----
      dataset: InteractionDataset or list of InteractionPair.
      config: TrainConfig.

    Returns
    -------
      TrainedModel.

    Raises
    ------
      DataError: if no sample belongs to the normal category.
                 if samples do not have `config.tasm.D` joints.
      NumericError: if the loss becomes non-finite.
    """
    normal = [s for s in dataset if s.category == config.normal_category]
    if not normal:
        raise DataError('No samples of the normal category "{}".'.format(
            config.normal_category))
    tasm = config.tasm
    for pair in normal:
        if pair.D != tasm.D:
            raise DataError('Sample has {} joints but the encoder expects {}.'.format(
                pair.D, tasm.D))
    prepared = [prepare_pair(p, tasm.T, config.normalize) for p in normal]
    train_pairs, held_pairs = _holdout(prepared, config.holdout_fraction, config.seed)

    detector = build_detector(config)
    dtype = next(detector.parameters()).dtype
    # Distance maps do not depend on parameters, so they are computed once.
    x, y, maps = pair_tensors(train_pairs, dtype)
    held = pair_tensors(held_pairs, dtype) if held_pairs else None
    optimizer = torch.optim.Adam(detector.parameters(), lr=config.initial_lr)
    generator = torch.Generator().manual_seed(config.seed)
    n = x.shape[0]
    logger.info('Training on %d "%s" samples (%d held out) for %d epochs.', n,
                config.normal_category, len(held_pairs), config.epochs)

    loss_history, val_history = [], []
    for epoch in tqdm(range(1, config.epochs + 1), disable=not config.progress,
                      desc=config.normal_category or 'train'):
        lr = learning_rate(epoch, config)
        for group in optimizer.param_groups:
            group['lr'] = lr
        detector.train()
        order = torch.randperm(n, generator=generator)
        total = 0.
        for batch, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            try:
                losses = detector(x[idx], y[idx], maps[idx])
            except NumericError as e:
                raise NumericError(str(e), epoch, batch)
            loss = losses.mean()
            if not torch.isfinite(loss):
                raise NumericError('Training loss is not finite', epoch, batch)
            optimizer.zero_grad()
            loss.backward()
            if config.grad_clip is not None:
                nn.utils.clip_grad_norm_(detector.parameters(), config.grad_clip)
            optimizer.step()
            total += float(losses.detach().sum())
        loss_history.append(total / n)
        detector.eval()
        if held is not None:
            val_history.append(_mean_nll(detector, held, config.batch_size))
        logger.info('epoch %d/%d lr=%.3g nll=%.4f%s', epoch, config.epochs, lr,
                    loss_history[-1],
                    ' val_nll=%.4f' % val_history[-1] if val_history else '')
        if not math.isfinite(loss_history[-1]):
            raise NumericError('Training loss is not finite', epoch, None)

    detector.eval()
    final_nll = _mean_nll(detector, (x, y, maps), config.batch_size)
    return TrainedModel(detector, config, loss_history, val_history, final_nll)
