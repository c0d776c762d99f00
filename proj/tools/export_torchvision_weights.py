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


"""Exports torchvision DenseNet-161 feature weights for the dense_truncated backbone.

Usage:
    python tools/export_torchvision_weights.py out.bin            # ImageNet weights
    python tools/export_torchvision_weights.py out.bin --random   # untrained init

The output is a padkit weight container holding every ``features.*`` tensor of
the first eight feature children; pass it to ``padkit train
--pretrained-weights``.
"""

import argparse

import numpy as np

PREFIX_CHILDREN = 8


def feature_arrays(features):
    """Maps a torchvision ``features`` module to padkit tensor names."""
    prefix = features[:PREFIX_CHILDREN]
    arrays = {}
    for name, tensor in prefix.state_dict().items():
        if name.endswith("num_batches_tracked"):
            continue
        arrays["features." + name] = np.ascontiguousarray(tensor.detach().cpu().numpy(), dtype=np.float32)
    return arrays


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("out", help="output weight file")
    parser.add_argument("--random", action="store_true", help="skip the ImageNet download")
    args = parser.parse_args()

    import torchvision

    import padkit

    weights = None if args.random else torchvision.models.DenseNet161_Weights.IMAGENET1K_V1
    net = torchvision.models.densenet161(weights=weights)
    arrays = feature_arrays(net.features)
    padkit.save_weights(args.out, arrays)
    print(f"wrote {len(arrays)} tensors to {args.out}")


if __name__ == "__main__":
    main()
