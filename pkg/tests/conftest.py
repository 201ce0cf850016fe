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
General fixtures for tests.
"""
import os

import numpy as np
import pytest

from h2iad.data import (InteractionPair, PoseSequence, synth_mixture,
                        write_dataset)
from h2iad.tasm import TASMConfig
from h2iad.train import TrainConfig


@pytest.fixture
def fix_path():
    p = os.path.dirname(os.path.abspath(__file__))
    return os.path.join(p, 'fixtures')


@pytest.fixture
def make_pair():
    def _make(x, y, category='handshake', split=None, fps=30.):
        return InteractionPair(PoseSequence(x, fps), PoseSequence(y, fps), category,
                               split)
    return _make


@pytest.fixture
def random_pair(make_pair):
    rng = np.random.default_rng(7)
    return make_pair(rng.normal(size=(8, 4, 3)), rng.normal(size=(8, 4, 3)))


@pytest.fixture
def tiny_tasm():
    return TASMConfig(N=1, E=8, T=8, D=4, heads=2)


@pytest.fixture
def tiny_train(tiny_tasm):
    return TrainConfig(epochs=3, initial_lr=1e-3, final_lr=1e-4, batch_size=4, seed=0,
                       normal_category='handshake', tasm=tiny_tasm, flow_layers=2)


@pytest.fixture
def synth_dataset():
    return synth_mixture(['handshake', 'strike', 'idle'], 6, seed=0, T=8, D=4,
                         test_count_each=3)


@pytest.fixture
def dataset_file(tmp_path, synth_dataset):
    path = str(tmp_path / 'data.jsonl')
    write_dataset(synth_dataset, path)
    return path


@pytest.fixture
def tiny_config_file(tmp_path):
    path = str(tmp_path / 'config.json')
    with open(path, 'w') as f:
        f.write('{"tasm": {"N": 1, "E": 8, "T": 8, "heads": 2}, '
                '"train": {"epochs": 2, "batch_size": 4, "flow_layers": 2, '
                '"initial_lr": 0.001, "final_lr": 0.0001}}')
    return path
