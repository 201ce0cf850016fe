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

"""Tests for module tasm.py"""


from __future__ import absolute_import, division, print_function

import numpy as np
import pytest
import torch
from numpy.testing import assert_allclose

from h2iad.data import InteractionPair, PoseSequence
from h2iad.ddm import dynamic_distance_maps
from h2iad.exceptions import DataError
from h2iad.misc import gradient_check
from h2iad.tasm import (TASM, TASU, OutputHead, PoseEmbedding, StreamBlock,
                        TASMConfig, count_parameters, pair_tensors, sinusoid_table,
                        tasm_forward, tasu_forward)


def _config(**kwargs):
    values = dict(N=2, E=8, T=6, D=3, heads=2)
    values.update(kwargs)
    return TASMConfig(**values)


def _inputs(config, batch=2, seed=0):
    rng = np.random.default_rng(seed)
    pairs = [InteractionPair(PoseSequence(rng.uniform(-1, 1, (config.T, config.D, 3))),
                             PoseSequence(rng.uniform(-1, 1, (config.T, config.D, 3))),
                             'idle')
             for _ in range(batch)]
    return pairs, pair_tensors(pairs)


@pytest.mark.parametrize('kwargs', [
    dict(N=0), dict(E=6, heads=4), dict(T=1), dict(pe_mode='learned'),
    dict(use_drem=1), dict(D=0),
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        _config(**kwargs)


def test_config_to_dict():
    assert _config().to_dict() == {
        'N': 2, 'E': 8, 'T': 6, 'D': 3, 'pe_mode': 'synchronized', 'use_drem': True,
        'share_params': True, 'heads': 2}


@pytest.mark.parametrize('mode,expected', [
    ('sinusoidal', 0), ('synchronized', 6 * 8), ('unsynchronized', 2 * 6 * 8)])
def test_positional_parameter_counts(mode, expected):
    model = TASM(_config(pe_mode=mode))
    assert model.positional.num_learnable() == expected
    assert model.positional('x').shape == (6, 8)


def test_sinusoid_table_values():
    table = sinusoid_table(4, 6).numpy()
    assert_allclose(table[0, 0::2], 0., atol=1e-7)
    assert_allclose(table[0, 1::2], 1., atol=1e-7)
    assert_allclose(table[1, 0], np.sin(1.), atol=1e-6)


def test_unsynchronized_streams_use_their_own_table():
    model = TASM(_config(pe_mode='unsynchronized'))
    poses = torch.zeros(1, 6, 3, 3)
    diff = model.embed_poses(poses, 'x') - model.embed_poses(poses, 'y')
    expected = model.positional.table_x - model.positional.table_y
    assert_allclose(diff[0].detach().numpy(), expected.detach().numpy(), atol=1e-6)


def test_embed_poses_is_additive_in_positional_table():
    torch.manual_seed(0)
    model = TASM(_config())
    frame = torch.randn(3, 3)
    poses = frame.expand(1, 6, 3, 3)
    out = model.embed_poses(poses)
    table = model.positional.table
    assert out.shape == (1, 6, 8)
    assert_allclose((out[0, 1] - out[0, 0]).detach().numpy(),
                    (table[1] - table[0]).detach().numpy(), atol=1e-6)


def test_embed_zero_map_gives_positional_table():
    model = TASM(_config())
    with torch.no_grad():
        for p in model.pose_x.parameters():
            p.zero_()
    out = model.embed_poses(torch.zeros(1, 6, 3, 3))
    assert_allclose(out[0].detach().numpy(), model.positional.table.detach().numpy())


def test_embed_poses_rejects_wrong_shape():
    model = TASM(_config())
    with pytest.raises(ValueError):
        model.embed_poses(torch.zeros(1, 5, 3, 3))
    with pytest.raises(ValueError):
        model.embed_poses(torch.zeros(1, 6, 4, 3))


def test_shared_parameters_are_one_object():
    model = TASM(_config())
    for unit in model.units:
        assert unit.stream_x is unit.stream_y
    assert model.pose_x is model.pose_y
    assert model.head_x is model.head_y
    separate = TASM(_config(share_params=False))
    for unit in separate.units:
        assert unit.stream_x is not unit.stream_y


def test_sharing_halves_stream_parameters():
    config = _config()
    shared = count_parameters(TASM(config))
    separate = count_parameters(TASM(_config(share_params=False)))
    per_stream = (config.N * count_parameters(StreamBlock(config.E, config.heads, True)) +
                  count_parameters(PoseEmbedding(config.D, config.E)) +
                  count_parameters(OutputHead(config.E)))
    assert separate > shared
    assert separate - per_stream == shared


def test_drem_adds_parameters():
    assert count_parameters(TASM(_config(use_drem=False))) < count_parameters(
        TASM(_config()))


def test_forward_shapes_and_features():
    config = _config()
    model = TASM(config)
    _, (x, y, maps) = _inputs(config, batch=3)
    features = model.encode(x, y, maps)
    assert features.f.shape == (3, 16)
    assert features.f_r.shape == (3, 6, 8)
    for part in (features.f_s, features.f_m, features.f_md):
        assert part[0].shape == part[1].shape == (3, 6, 8)
    assert torch.isfinite(features.f).all()
    assert model.output_dim == 16


def test_forward_requires_maps_with_drem():
    config = _config()
    model = TASM(config)
    _, (x, y, maps) = _inputs(config)
    with pytest.raises(ValueError):
        model(x, y)
    with pytest.raises(ValueError):
        model(x, y, maps[:, :, :2])


def test_stream_symmetry_for_identical_persons():
    torch.manual_seed(3)
    config = _config()
    model = TASM(config)
    rng = np.random.default_rng(1)
    person = PoseSequence(rng.uniform(-1, 1, (6, 3, 3)))
    pair = InteractionPair(person, person, 'idle')
    f = tasm_forward(pair, model).detach().numpy()
    assert np.abs(f[:8] - f[8:]).max() < 1e-5


def test_tasu_stream_symmetry_and_shapes():
    torch.manual_seed(0)
    config = _config()
    unit = TASU(config)
    f = torch.randn(6, 8)
    rng = np.random.default_rng(2)
    person = PoseSequence(rng.normal(size=(6, 3, 3)))
    dmap = dynamic_distance_maps(InteractionPair(person, person, 'idle'))
    out_x, out_y = tasu_forward(f, f.clone(), dmap, unit)
    assert out_x.shape == (6, 8)
    assert (out_x - out_y).abs().max() < 1e-5


def test_tasu_without_drem_ignores_maps():
    torch.manual_seed(0)
    unit = TASU(_config(use_drem=False))
    fx, fy = torch.randn(6, 8), torch.randn(6, 8)
    first = tasu_forward(fx, fy, -np.ones((6, 3, 3)), unit)
    second = tasu_forward(fx, fy, -5. * np.ones((6, 3, 3)), unit)
    assert torch.equal(first[0], second[0])
    assert torch.equal(first[1], second[1])


def test_tasm_without_drem_ignores_maps():
    config = _config(use_drem=False)
    model = TASM(config)
    _, (x, y, maps) = _inputs(config)
    assert torch.equal(model(x, y, maps), model(x, y, maps * 3.))
    assert torch.equal(model(x, y, maps), model(x, y))


def test_tasu_rejects_mismatched_streams():
    unit = TASU(_config())
    with pytest.raises(ValueError):
        unit(torch.zeros(1, 6, 8), torch.zeros(1, 5, 8), torch.zeros(1, 6, 3, 3))


def test_tasu_gradient_check():
    torch.manual_seed(0)
    unit = TASU(_config()).double()
    maps = -torch.rand(1, 6, 3, 3, dtype=torch.float64)

    def readout(fx, fy):
        out_x, out_y = unit(fx, fy, maps)
        return (out_x.sin().sum() + out_y.cos().sum())

    fx = torch.randn(1, 6, 8, dtype=torch.float64)
    fy = torch.randn(1, 6, 8, dtype=torch.float64)
    assert gradient_check(readout, [fx, fy]) < 1e-4


def test_batch_permutation_permutes_outputs():
    config = _config()
    model = TASM(config)
    _, (x, y, maps) = _inputs(config, batch=4)
    out = model(x, y, maps)
    perm = torch.tensor([2, 0, 3, 1])
    permuted = model(x[perm], y[perm], maps[perm])
    assert_allclose(permuted.detach().numpy(), out[perm].detach().numpy(), atol=1e-6)


def test_tasm_forward_contract():
    config = _config()
    model = TASM(config)
    pairs, _ = _inputs(config, batch=1)
    assert tasm_forward(pairs[0], model).shape == (16,)
    short = InteractionPair(PoseSequence(np.zeros((4, 3, 3))),
                            PoseSequence(np.ones((4, 3, 3))), 'idle')
    with pytest.raises(DataError):
        tasm_forward(short, model)


def test_forward_is_finite_over_coordinate_range():
    config = _config(N=3)
    model = TASM(config)
    rng = np.random.default_rng(5)
    for scale in (0.01, 1., 10.):
        person_x = PoseSequence(rng.uniform(-scale, scale, (6, 3, 3)))
        person_y = PoseSequence(rng.uniform(-scale, scale, (6, 3, 3)))
        f = tasm_forward(InteractionPair(person_x, person_y, 'idle'), model)
        assert torch.isfinite(f).all()
