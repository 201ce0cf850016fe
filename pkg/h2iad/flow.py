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
Exact-likelihood normalizing flow used for anomaly scoring.

Every layer maps `z -> prelu(exp(log_scale) * (Q z) + bias)` where `Q` is the
orthogonal factor of an unconstrained square matrix. The orthogonal factor contributes
nothing to the log-determinant, so the Jacobian term is the sum of the log-scales plus
the log-slopes of the channels falling on the negative side of the rectifier.
"""


from __future__ import absolute_import, division, print_function

import math

import torch
import torch.nn as nn

from h2iad.exceptions import NumericError

MIN_SLOPE = 1e-3
INITIAL_SLOPE = 0.25
DEFAULT_LAYERS = 10


class FlowLayer(nn.Module):
    """
    One invertible layer of width `dim`.

    Args
    ----
      dim: int.
      activation: bool.
          Whether the layer ends with a PReLU. The last layer of a flow has none, so the
          latent support is the whole space.
    """
    def __init__(self, dim, activation=True):
        super(FlowLayer, self).__init__()
        self.dim = dim
        self.activation = activation
        self.weight = nn.Parameter(torch.linalg.qr(torch.randn(dim, dim))[0].contiguous())
        self.log_scale = nn.Parameter(torch.zeros(dim))
        self.bias = nn.Parameter(torch.zeros(dim))
        if activation:
            self.slope = nn.Parameter(torch.full((dim,), INITIAL_SLOPE))

    def orthogonal(self):
        """
        Orthogonal factor of `weight`, recomputed on every call so it stays exact after
        any optimizer step. Columns are sign-fixed by the diagonal of R, which makes the
        factor unique.
        """
        q, r = torch.linalg.qr(self.weight)
        signs = torch.where(torch.diagonal(r) < 0, -torch.ones_like(self.log_scale),
                            torch.ones_like(self.log_scale))
        return q * signs

    def slopes(self):
        return self.slope.clamp(min=MIN_SLOPE)

    def forward(self, z):
        """
        Args
        ----
          z: torch.Tensor of shape (B, dim).

        Returns
        -------
          tuple: output (B, dim) and log-determinant (B,).
        """
        h = torch.matmul(z, self.orthogonal().t()) * torch.exp(self.log_scale) + self.bias
        logdet = self.log_scale.sum().expand(z.shape[0])
        if not self.activation:
            return h, logdet
        slopes = self.slopes()
        negative = h < 0
        out = torch.where(negative, h * slopes, h)
        logdet = logdet + (negative.to(h.dtype) * torch.log(slopes)).sum(dim=-1)
        return out, logdet

    def inverse(self, s):
        if self.activation:
            # Positive slopes keep the sign, so the branch is read off the output.
            s = torch.where(s < 0, s / self.slopes(), s)
        h = (s - self.bias) * torch.exp(-self.log_scale)
        return torch.matmul(h, self.orthogonal())

    def reset_identity(self):
        """Sets Q = I, scale = 1, bias = 0 and slope = 1."""
        with torch.no_grad():
            self.weight.copy_(torch.eye(self.dim))
            self.log_scale.zero_()
            self.bias.zero_()
            if self.activation:
                self.slope.fill_(1.)
        return self


class FlowModel(nn.Module):
    """
    Stack of `layers` flow layers of constant width `dim`.

    Args
    ----
      dim: int.
      layers: int.
    """
    def __init__(self, dim, layers=DEFAULT_LAYERS):
        super(FlowModel, self).__init__()
        if dim < 1 or layers < 1:
            raise ValueError('Flow dimension and layer count must be positive.')
        self.dim = dim
        self.layers = nn.ModuleList(
            [FlowLayer(dim, activation=(idx < layers - 1)) for idx in range(layers)])

    @classmethod
    def identity(cls, dim, layers=DEFAULT_LAYERS):
        model = cls(dim, layers)
        for layer in model.layers:
            layer.reset_identity()
        return model

    def _check(self, t):
        if t.shape[-1] != self.dim:
            raise ValueError('Flow expects dimension {}, got {}.'.format(
                self.dim, t.shape[-1]))

    def forward(self, f):
        self._check(f)
        logdet = torch.zeros(f.shape[0], dtype=f.dtype, device=f.device)
        s = f
        for layer in self.layers:
            s, layer_logdet = layer(s)
            logdet = logdet + layer_logdet
        if not (torch.isfinite(s).all() and torch.isfinite(logdet).all()):
            raise NumericError('Flow produced a non-finite value.')
        return s, logdet

    def inverse(self, s):
        self._check(s)
        f = s
        for layer in reversed(self.layers):
            f = layer.inverse(f)
        return f

    def nll(self, f):
        """Per-sample negative log-likelihood under the standard Gaussian prior."""
        s, logdet = self(f)
        return 0.5 * self.dim * math.log(2. * math.pi) + 0.5 * (s * s).sum(-1) - logdet


def _batched(t):
    if t.dim() == 1:
        return t.unsqueeze(0), True
    return t, False


def flow_forward(f, model):
    """
    Maps `f` (shape (d,) or (B, d)) to the latent `s`.

    Returns
    -------
      tuple: `s` with the shape of `f` and the log-determinant (scalar or (B,)).
    """
    batch, single = _batched(f)
    s, logdet = model(batch)
    if single:
        return s[0], logdet[0]
    return s, logdet


def flow_inverse(s, model):
    """Maps latents back to features, layer by layer."""
    batch, single = _batched(s)
    f = model.inverse(batch)
    return f[0] if single else f


def nll(f, model):
    """`d/2 ln(2 pi) + |s|^2 / 2 - logdet` for `f` of shape (d,) or (B, d)."""
    batch, single = _batched(f)
    values = model.nll(batch)
    return values[0] if single else values
