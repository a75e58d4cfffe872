#!/usr/bin/env python3
"""Write torchvision's ImageNet VGG16 trunk (through pool4) as a plain state dict.

    python3 tools/export_vgg16.py vgg16_features.pt

Then set "perception": "vgg16_features.pt" and "perception_divisor": 1 in the
model section of a training config.  Needs network access for the weights.
"""
import argparse

import torch
import torchvision


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("out")
    args = parser.parse_args()
    model = torchvision.models.vgg16(weights=torchvision.models.VGG16_Weights.IMAGENET1K_V1)
    state = {k: v.detach().clone() for k, v in model.state_dict().items()
             if k.startswith("features.") and int(k.split(".")[1]) < 23}
    torch.save(state, args.out)
    print(f"wrote {len(state)} tensors to {args.out}")


if __name__ == "__main__":
    main()
