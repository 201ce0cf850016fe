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

"""Differentiable building blocks shared by the encoder and the flow, plus gradient
verification against central finite differences."""


from __future__ import absolute_import, division, print_function

import math

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from h2iad.exceptions import NumericError

LAYER_NORM_EPS = 1e-5


def scaled_dot_attention(q, k, v):
    """
    softmax(Q K^T / sqrt(C)) V over the last two dimensions, where C is the width of
    the query and key projections.

    Args
    ----
      q: torch.Tensor of shape (..., T_q, C).
      k: torch.Tensor of shape (..., T_k, C).
      v: torch.Tensor of shape (..., T_k, C_v).

    Returns
    -------
      torch.Tensor of shape (..., T_q, C_v).

    Raises
    ------
      ValueError: if widths of `q` and `k` differ or `k` and `v` lengths differ.
    """
    if q.dim() < 2 or k.dim() < 2 or v.dim() < 2:
        raise ValueError('Attention inputs need at least two dimensions.')
    if q.shape[-1] != k.shape[-1] or q.shape[-1] < 1:
        raise ValueError('Query and key widths differ: {} and {}.'.format(
            q.shape[-1], k.shape[-1]))
    if k.shape[-2] != v.shape[-2]:
        raise ValueError('Key and value lengths differ: {} and {}.'.format(
            k.shape[-2], v.shape[-2]))
    logits = torch.matmul(q, k.transpose(-2, -1)) / math.sqrt(q.shape[-1])
    # softmax subtracts the row maximum before exponentiating.
    weights = torch.softmax(logits, dim=-1)
    return torch.matmul(weights, v)


class MultiHeadAttention(nn.Module):
    """
    Multi-head attention with separate query, key, value and output projections. Each
    head attends in a space of width `width // heads`.
    """
    def __init__(self, width, heads):
        super(MultiHeadAttention, self).__init__()
        if width % heads:
            raise ValueError('Width {} is not divisible by {} heads.'.format(
                width, heads))
        self.heads = heads
        self.query = nn.Linear(width, width)
        self.key = nn.Linear(width, width)
        self.value = nn.Linear(width, width)
        self.out = nn.Linear(width, width)

    def _split(self, t):
        batch, length, width = t.shape
        return t.view(batch, length, self.heads, width // self.heads).transpose(1, 2)

    def forward(self, queries, context):
        """
        Args
        ----
          queries: torch.Tensor of shape (B, T_q, E).
          context: torch.Tensor of shape (B, T_k, E), source of keys and values.
        """
        q = self._split(self.query(queries))
        k = self._split(self.key(context))
        v = self._split(self.value(context))
        heads = scaled_dot_attention(q, k, v)
        batch, _, length, head_width = heads.shape
        merged = heads.transpose(1, 2).reshape(batch, length, self.heads * head_width)
        return self.out(merged)


class FeedForward(nn.Module):
    """Position-wise two-layer perceptron."""
    def __init__(self, width, hidden=None):
        super(FeedForward, self).__init__()
        hidden = hidden or 4 * width
        self.inner = nn.Linear(width, hidden)
        self.outer = nn.Linear(hidden, width)

    def forward(self, x):
        return self.outer(F.gelu(self.inner(x)))


def _as_tensors(inputs):
    if torch.is_tensor(inputs):
        return [inputs]
    return list(inputs)


def gradient_check(scalar_fn, inputs, epsilon=1e-6, max_checks=None, seed=0):
    """
    Compares autograd gradients of `scalar_fn` with central finite differences.

    The error of one element is `|a - n| / max(1, |a|, |n|)` where `a` is the analytic
    and `n` the numerical derivative. Inputs are copied, so callers' tensors are never
    modified. Run in float64 for meaningful results.

    Args
    ----
      scalar_fn: callable.
          Receives one tensor per entry of `inputs` and returns a single real.
      inputs: torch.Tensor or list of torch.Tensor.
      epsilon: float.
          Finite-difference step, within [1e-6, 1e-3].
      max_checks: int, optional.
          Checks at most this many elements per input, chosen by a seeded generator.
          All elements are checked when `None`.
      seed: int.

    Returns
    -------
      float: maximum relative error over the checked elements.

    Raises
    ------
      ValueError: if `epsilon` is out of range.
                  if `scalar_fn` does not return a single value.
      NumericError: if `scalar_fn` or a gradient is not finite.
    """
    if not 1e-6 <= epsilon <= 1e-3:
        raise ValueError('epsilon must be within [1e-6, 1e-3].')
    leaves = [t.detach().clone(memory_format=torch.contiguous_format).requires_grad_(True)
              for t in _as_tensors(inputs)]
    output = scalar_fn(*leaves)
    if output.numel() != 1:
        raise ValueError('scalar_fn must return a single value.')
    if not torch.isfinite(output).all():
        raise NumericError('scalar_fn returned a non-finite value.')
    analytic = torch.autograd.grad(output.reshape(()), leaves, allow_unused=True)

    rng = np.random.default_rng(seed)
    worst = 0.
    with torch.no_grad():
        for leaf, grad in zip(leaves, analytic):
            grad = torch.zeros_like(leaf) if grad is None else grad
            if not torch.isfinite(grad).all():
                raise NumericError('Analytic gradient is not finite.')
            flat = leaf.view(-1)
            flat_grad = grad.reshape(-1)
            indices = np.arange(flat.numel())
            if max_checks is not None and max_checks < flat.numel():
                indices = np.sort(rng.choice(flat.numel(), max_checks, replace=False))
            for idx in indices.tolist():
                original = flat[idx].item()
                flat[idx] = original + epsilon
                upper = float(scalar_fn(*leaves))
                flat[idx] = original - epsilon
                lower = float(scalar_fn(*leaves))
                flat[idx] = original
                if not (math.isfinite(upper) and math.isfinite(lower)):
                    raise NumericError(
                        'scalar_fn is not finite around element {}.'.format(idx))
                numeric = (upper - lower) / (2. * epsilon)
                exact = flat_grad[idx].item()
                error = abs(exact - numeric) / max(1., abs(exact), abs(numeric))
                worst = max(worst, error)
    return worst


def seed_everything(seed):
    """Seeds the torch and numpy global generators used by parameter initialization."""
    torch.manual_seed(seed)
    np.random.seed(seed % (2 ** 32))
