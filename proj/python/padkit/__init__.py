# Copyright 2026 The padkit Authors.
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


"""Patch-stitching presentation attack detection.

The heavy lifting lives in the native ``_core`` extension; this package
re-exports it.
"""

from padkit._core import (
    FACE_SIZE,
    GRID_SIZE,
    MAP_SIZE,
    PATCH_SIZE,
    Model,
    PadkitError,
    ScoreRecord,
    derive_seed,
    eer_threshold,
    evaluate,
    evaluate_checkpoint,
    lr_at_epoch,
    metrics_from_scores,
    pixelwise_bce,
    prepare,
    read_scores,
    save_weights,
    score_map,
    stitch,
    synth_generate,
    train,
    write_scores,
)

__version__ = "0.1.0"

__all__ = [
    "FACE_SIZE",
    "GRID_SIZE",
    "MAP_SIZE",
    "PATCH_SIZE",
    "Model",
    "PadkitError",
    "ScoreRecord",
    "derive_seed",
    "eer_threshold",
    "evaluate",
    "evaluate_checkpoint",
    "lr_at_epoch",
    "metrics_from_scores",
    "pixelwise_bce",
    "prepare",
    "read_scores",
    "save_weights",
    "score_map",
    "stitch",
    "synth_generate",
    "train",
    "write_scores",
]
