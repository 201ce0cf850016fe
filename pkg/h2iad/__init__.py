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

from h2iad.__version__ import __version__  # noqa: F401
from h2iad.checkpoint import load_checkpoint, save_checkpoint  # noqa: F401
from h2iad.data import (InteractionDataset, InteractionPair, PoseSequence,  # noqa: F401
                        load_dataset, synth_generate, synth_mixture, write_dataset)
from h2iad.ddm import displacement_statistic, dynamic_distance_maps  # noqa: F401
from h2iad.evaluation import auroc, benchmark, run_benchmark  # noqa: F401
from h2iad.train import TrainConfig, score, train_one_class  # noqa: F401
