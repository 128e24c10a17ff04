# Copyright 2026 The ctxhourglass Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Hourglass networks with contextual convolutions."""

from ._core import (
    ConfigError,
    Error,
    FormatError,
    Network,
    NumericalError,
    ShapeError,
    context_index_map,
    contextual_conv,
    conv2d_same,
    gradcheck,
    load_checkpoint,
    maxpool2,
    selu,
    synth,
    train,
    transposed_conv2d,
    unet,
)

__all__ = [
    "ConfigError",
    "Error",
    "FormatError",
    "Network",
    "NumericalError",
    "ShapeError",
    "context_index_map",
    "contextual_conv",
    "conv2d_same",
    "gradcheck",
    "load_checkpoint",
    "maxpool2",
    "selu",
    "synth",
    "train",
    "transposed_conv2d",
    "unet",
]
