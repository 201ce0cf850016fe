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
Two-stream interaction encoder.

Each person is embedded frame by frame, receives a positional embedding and then goes
through `N` stacked temporal attention sharing units (TASUs). A unit runs, per stream,
self-attention, motion cross-attention toward the other stream, distance
cross-attention toward the embedded distance maps and a feed-forward block, each
sub-block pre-normalized and wrapped in a residual connection. A final perceptron and
mean pooling over time give one vector per person; both are concatenated into the
feature handed to the flow.
"""


from __future__ import absolute_import, division, print_function

import collections
import math
from dataclasses import asdict, dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from h2iad.ddm import dynamic_distance_maps
from h2iad.exceptions import DataError
from h2iad.misc import LAYER_NORM_EPS, FeedForward, MultiHeadAttention

PE_MODES = ('synchronized', 'unsynchronized', 'sinusoidal')

StreamFeatures = collections.namedtuple(
    'StreamFeatures', ['f_s', 'f_m', 'f_md', 'f_r', 'f'])
StreamFeatures.__doc__ = """
Intermediate features of the last unit. `f_s`, `f_m` and `f_md` are (x, y) tuples of
(B, T, E) tensors after self-attention, motion cross-attention and the full unit; `f_r`
is the (B, T, E) distance embedding or `None`; `f` is the fused (B, 2E) feature.
"""


@dataclass
class TASMConfig(object):
    """
    Shape and ablation switches of the encoder.

    Args
    ----
      N: int.
          Number of stacked units.
      E: int.
          Embedding width.
      T: int.
          Frames per sequence.
      D: int.
          Joints per person.
      pe_mode: str.
          "synchronized" (one learnable table for both persons), "unsynchronized" (one
          learnable table per person) or "sinusoidal" (fixed).
      use_drem: bool.
          Whether units attend to the embedded distance maps.
      share_params: bool.
          Whether both streams use one parameter set.
      heads: int.
          Attention heads, must divide `E`.
    """
    N: int = 8
    E: int = 64
    T: int = 16
    D: int = 6
    pe_mode: str = 'synchronized'
    use_drem: bool = True
    share_params: bool = True
    heads: int = 4

    def __post_init__(self):
        for name in ('N', 'E', 'T', 'D', 'heads'):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ValueError('{} must be a positive integer.'.format(name))
        if self.T < 2:
            raise ValueError('T must be at least 2.')
        if self.E % self.heads:
            raise ValueError('E ({}) must be divisible by heads ({}).'.format(
                self.E, self.heads))
        if self.pe_mode not in PE_MODES:
            raise ValueError('pe_mode must be one of: {}.'.format(', '.join(PE_MODES)))
        for name in ('use_drem', 'share_params'):
            if not isinstance(getattr(self, name), bool):
                raise ValueError('{} must be a boolean.'.format(name))

    def to_dict(self):
        return asdict(self)


def sinusoid_table(length, width):
    """Fixed sine/cosine table over positions 0..length-1."""
    positions = np.arange(length, dtype=np.float64)[:, None]
    frequencies = np.exp(np.arange(0, width, 2) * (-math.log(10000.) / width))
    table = np.zeros((length, width))
    table[:, 0::2] = np.sin(positions * frequencies)
    table[:, 1::2] = np.cos(positions * frequencies[:width // 2])
    return torch.tensor(table, dtype=torch.float32)


class PositionalEmbedding(nn.Module):
    """
    Per-frame offsets added to the pose embeddings. In synchronized mode both persons
    read the same learnable T x E table, so identical time steps are marked
    identically in both streams.
    """
    def __init__(self, mode, length, width):
        super(PositionalEmbedding, self).__init__()
        self.mode = mode
        if mode == 'synchronized':
            self.table = nn.Parameter(torch.randn(length, width) * 0.02)
        elif mode == 'unsynchronized':
            self.table_x = nn.Parameter(torch.randn(length, width) * 0.02)
            self.table_y = nn.Parameter(torch.randn(length, width) * 0.02)
        elif mode == 'sinusoidal':
            self.register_buffer('table', sinusoid_table(length, width), persistent=False)
        else:
            raise ValueError('Unknown positional embedding mode "{}".'.format(mode))

    def forward(self, stream):
        """Returns the T x E table of `stream` ("x" or "y")."""
        if self.mode == 'unsynchronized':
            return self.table_x if stream == 'x' else self.table_y
        return self.table

    def num_learnable(self):
        return sum(p.numel() for p in self.parameters())


class PoseEmbedding(nn.Module):
    """Two-layer perceptron from the flattened 3D joints of a frame to width E."""
    def __init__(self, joints, width):
        super(PoseEmbedding, self).__init__()
        self.inner = nn.Linear(3 * joints, width)
        self.outer = nn.Linear(width, width)

    def forward(self, poses):
        return self.outer(F.gelu(self.inner(poses.flatten(-2))))


class DistanceEncoder(nn.Module):
    """Per-frame perceptron from a flattened D x D distance map to width E."""
    def __init__(self, joints, width):
        super(DistanceEncoder, self).__init__()
        self.inner = nn.Linear(joints * joints, width)
        self.outer = nn.Linear(width, width)

    def forward(self, maps):
        return self.outer(F.gelu(self.inner(maps.flatten(-2))))


class StreamBlock(nn.Module):
    """Parameters one stream of a unit uses for its four sub-blocks."""
    def __init__(self, width, heads, use_drem):
        super(StreamBlock, self).__init__()
        self.self_norm = nn.LayerNorm(width, eps=LAYER_NORM_EPS)
        self.self_attention = MultiHeadAttention(width, heads)
        self.motion_norm = nn.LayerNorm(width, eps=LAYER_NORM_EPS)
        self.motion_attention = MultiHeadAttention(width, heads)
        if use_drem:
            self.distance_norm = nn.LayerNorm(width, eps=LAYER_NORM_EPS)
            self.relation_norm = nn.LayerNorm(width, eps=LAYER_NORM_EPS)
            self.distance_attention = MultiHeadAttention(width, heads)
        self.feed_norm = nn.LayerNorm(width, eps=LAYER_NORM_EPS)
        self.feed_forward = FeedForward(width)

    def attend_self(self, f):
        h = self.self_norm(f)
        return f + self.self_attention(h, h)

    def attend_motion(self, f_s, f_s_other):
        return f_s + self.motion_attention(
            self.motion_norm(f_s), self.motion_norm(f_s_other))

    def attend_distance(self, f_m, f_r):
        return f_m + self.distance_attention(
            self.distance_norm(f_m), self.relation_norm(f_r))

    def feed(self, f):
        return f + self.feed_forward(self.feed_norm(f))


class TASU(nn.Module):
    """
    One temporal attention sharing unit. With `share_params` both streams hold the same
    `StreamBlock` object; otherwise each stream owns one. The distance encoder is owned
    by the unit and serves both streams.
    """
    def __init__(self, config):
        super(TASU, self).__init__()
        self.use_drem = config.use_drem
        self.stream_x = StreamBlock(config.E, config.heads, config.use_drem)
        if config.share_params:
            self.stream_y = self.stream_x
        else:
            self.stream_y = StreamBlock(config.E, config.heads, config.use_drem)
        self.drem = DistanceEncoder(config.D, config.E) if config.use_drem else None

    def run(self, fx, fy, maps):
        """Returns the intermediate features of the unit as a dict."""
        if fx.shape != fy.shape:
            raise ValueError('Stream shapes differ: {} and {}.'.format(
                tuple(fx.shape), tuple(fy.shape)))
        fx_s = self.stream_x.attend_self(fx)
        fy_s = self.stream_y.attend_self(fy)
        fx_m = self.stream_x.attend_motion(fx_s, fy_s)
        fy_m = self.stream_y.attend_motion(fy_s, fx_s)
        f_r = None
        if self.use_drem:
            if maps is None or maps.shape[:2] != fx.shape[:2]:
                raise ValueError('Distance maps do not match the streams: {}.'.format(
                    None if maps is None else tuple(maps.shape)))
            f_r = self.drem(maps)
            fx_d = self.stream_x.attend_distance(fx_m, f_r)
            fy_d = self.stream_y.attend_distance(fy_m, f_r)
        else:
            fx_d, fy_d = fx_m, fy_m
        # Every sub-block adds onto the unit input, so the unit itself is residual.
        return {
            'f_s': (fx_s, fy_s),
            'f_m': (fx_m, fy_m),
            'f_r': f_r,
            'f_md': (self.stream_x.feed(fx_d), self.stream_y.feed(fy_d)),
        }

    def forward(self, fx, fy, maps=None):
        """
        Args
        ----
          fx, fy: torch.Tensor of shape (B, T, E).
          maps: torch.Tensor of shape (B, T, D, D); ignored without DREM.

        Returns
        -------
          tuple of torch.Tensor: updated (fx, fy).
        """
        return self.run(fx, fy, maps)['f_md']


def tasu_forward(fx, fy, dmap, unit):
    """Applies `unit` to one unbatched pair of (T, E) streams and its distance maps."""
    maps = None
    if dmap is not None:
        maps = torch.as_tensor(np.asarray(getattr(dmap, 'maps', dmap)), dtype=fx.dtype)
        maps = maps.unsqueeze(0)
    out_x, out_y = unit(fx.unsqueeze(0), fy.unsqueeze(0), maps)
    return out_x[0], out_y[0]


class OutputHead(nn.Module):
    """Final normalization and one linear layer with a nonlinearity."""
    def __init__(self, width):
        super(OutputHead, self).__init__()
        self.norm = nn.LayerNorm(width, eps=LAYER_NORM_EPS)
        self.linear = nn.Linear(width, width)

    def forward(self, f):
        return F.gelu(self.linear(self.norm(f)))


class TASM(nn.Module):
    """
    The full encoder. `forward(x, y, maps)` maps batches of paired poses of shape
    (B, T, D, 3) and distance maps of shape (B, T, D, D) to fused features (B, 2E).

    Args
    ----
      config: TASMConfig.
    """
    def __init__(self, config):
        super(TASM, self).__init__()
        self.config = config
        self.pose_x = PoseEmbedding(config.D, config.E)
        self.head_x = OutputHead(config.E)
        if config.share_params:
            self.pose_y = self.pose_x
            self.head_y = self.head_x
        else:
            self.pose_y = PoseEmbedding(config.D, config.E)
            self.head_y = OutputHead(config.E)
        self.positional = PositionalEmbedding(config.pe_mode, config.T, config.E)
        self.units = nn.ModuleList([TASU(config) for _ in range(config.N)])

    @property
    def output_dim(self):
        return 2 * self.config.E

    def _check(self, poses):
        if poses.dim() != 4 or tuple(poses.shape[1:]) != (
                self.config.T, self.config.D, 3):
            raise ValueError('Poses must have shape B x {} x {} x 3, got {}.'.format(
                self.config.T, self.config.D, tuple(poses.shape)))

    def embed_poses(self, poses, stream='x'):
        """
        Pose perceptron plus the positional table of `stream`.

        Args
        ----
          poses: torch.Tensor of shape (B, T, D, 3).
          stream: str, "x" or "y".

        Returns
        -------
          torch.Tensor of shape (B, T, E).
        """
        self._check(poses)
        embedding = self.pose_x if stream == 'x' else self.pose_y
        return embedding(poses) + self.positional(stream)

    def encode(self, x, y, maps=None):
        """Runs the encoder and returns `StreamFeatures` of the last unit."""
        self._check(x)
        self._check(y)
        if self.config.use_drem:
            expected = (x.shape[0], self.config.T, self.config.D, self.config.D)
            if maps is None or tuple(maps.shape) != expected:
                raise ValueError('Distance maps must have shape {}.'.format(expected))
        fx = self.embed_poses(x, 'x')
        fy = self.embed_poses(y, 'y')
        features = None
        for unit in self.units:
            features = unit.run(fx, fy, maps)
            fx, fy = features['f_md']
        pooled_x = self.head_x(fx).mean(dim=1)
        pooled_y = self.head_y(fy).mean(dim=1)
        return StreamFeatures(
            f_s=features['f_s'],
            f_m=features['f_m'],
            f_md=(fx, fy),
            f_r=features['f_r'],
            f=torch.cat([pooled_x, pooled_y], dim=-1)
        )

    def forward(self, x, y, maps=None):
        return self.encode(x, y, maps).f


def count_parameters(module):
    """Counts learnable scalars, each shared tensor once."""
    return sum(p.numel() for p in module.parameters() if p.requires_grad)


def pair_tensors(pairs, dtype=torch.float32):
    """
    Stacks prepared pairs into model inputs.

    Returns
    -------
      tuple of torch.Tensor: x (B, T, D, 3), y (B, T, D, 3), maps (B, T, D, D).
    """
    x = np.stack([p.person_x.frames for p in pairs])
    y = np.stack([p.person_y.frames for p in pairs])
    maps = np.stack([dynamic_distance_maps(p).maps for p in pairs])
    return (torch.as_tensor(x, dtype=dtype), torch.as_tensor(y, dtype=dtype),
            torch.as_tensor(maps, dtype=dtype))


def tasm_forward(pair, model):
    """
    Encodes one prepared pair.

    Args
    ----
      pair: InteractionPair already resampled to `model.config.T` frames.
      model: TASM.

    Returns
    -------
      torch.Tensor of shape (2E,).

    Raises
    ------
      DataError: if the pair length or joint count differ from the model config.
    """
    config = model.config
    if pair.T != config.T or pair.D != config.D:
        raise DataError('Pair has T={}, D={} but the encoder expects T={}, D={}.'.format(
            pair.T, pair.D, config.T, config.D))
    dtype = next(model.parameters()).dtype
    x, y, maps = pair_tensors([pair], dtype)
    return model(x, y, maps)[0]
