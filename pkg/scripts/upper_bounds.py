#!/usr/bin/env python3
"""Upper-bound study: how much of the tracking error is association vs pose.

Given the tracker's own output, substitute ground truth for one part at a
time: copy ground-truth ids onto matched predictions (perfect association),
replace matched poses with labels (perfect keypoints), then both. The gap to
each bound shows where the remaining headroom is.
"""

import argparse

import numpy as np

from poselink.linking import LinkerConfig, track_video
from poselink.metrics import evaluate_mot
from poselink.model import filter_detections
from poselink.oracles import apply_oracle
from poselink.synth import NoiseModel, ScenarioConfig, generate_scenario

NOISE = NoiseModel(
    keypoint_jitter=4.0,
    box_jitter=2.0,
    miss_probability=0.08,
    false_positive_rate=1.0,
    tp_score_range=(0.95, 1.0),
)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--frames", type=int, default=40)
    parser.add_argument("--actors", type=int, default=4)
    args = parser.parse_args()

    rows = {"tracker output": [], "perfect association": [],
            "perfect keypoints": [], "both": []}
    for seed in range(args.seeds):
        cfg = ScenarioConfig(seed=seed, frames=args.frames, actors=args.actors, noise=NOISE)
        gt, pred = generate_scenario(cfg)
        tracked = track_video(filter_detections(pred, 0.95, 1.95), LinkerConfig())
        rows["tracker output"].append(evaluate_mot(gt, tracked).mota_total)
        for label, mode in (("perfect association", "perfect_association"),
                            ("perfect keypoints", "perfect_keypoints"),
                            ("both", "both")):
            fixed = apply_oracle(gt, tracked, mode)
            rows[label].append(evaluate_mot(gt, fixed).mota_total)

    print(f"{'variant':>22} {'MOTA':>7}")
    for label, values in rows.items():
        print(f"{label:>22} {np.mean(values):7.1f}")


if __name__ == "__main__":
    main()
