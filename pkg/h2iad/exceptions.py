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

"""Exceptions raised by the toolkit. The command line maps each family to an exit code."""


from __future__ import absolute_import, division, print_function


class H2IADError(Exception):
    """Base class for every error raised on purpose by `h2iad`."""


class DataError(H2IADError, ValueError):
    """Input data is malformed, inconsistent or missing."""


class CheckpointError(DataError):
    """Checkpoint file fails its integrity or shape checks."""


class NumericError(H2IADError, ArithmeticError):
    """
    A forward pass or the training loss became non-finite.

    Args
    ----
      message: str.
      epoch: int, optional.
          1-based epoch in which the failure happened.
      batch: int, optional.
          0-based batch index inside `epoch`.
    """
    def __init__(self, message, epoch=None, batch=None):
        if epoch is not None:
            message = '{} (epoch {}, batch {})'.format(message, epoch, batch)
        super(NumericError, self).__init__(message)
        self.epoch = epoch
        self.batch = batch
