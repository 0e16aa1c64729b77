"""Count > 1 px disparity jumps as the large-jump penalty grows.

Prints raw winner-take-all counts and final (checked) map counts for a plane
and for a plane with an occluding box.

    python scripts/sweep_p2.py [--seeds 20]
"""

import argparse

import numpy as np

from freespace.scene import Box, Plane, Pose, Scene, StereoRig, ValueNoise, render_stereo
from freespace.stereo import (DisparityMap, MatchParams, aggregate_paths, cost_volume, discontinuity_count,
                              select_disparity)

P2 = (80.0, 160.0, 320.0, 640.0, 1280.0)


def counts(scene, rig, seed, D=24):
    frame = render_stereo(scene, rig, Pose(), noise_std=6.0, rng=seed)
    C = cost_volume(frame.left, frame.right, D, 1)
    wta, final = [], []
    for p2 in P2:
        p = MatchParams(max_disparity=D, p1=72.0, p2=p2)
        S = aggregate_paths(C, p)
        d0 = S.argmin(axis=2)[:, D:].astype(float)
        wta.append(discontinuity_count(DisparityMap(d0, np.ones(d0.shape, bool), D)))
        final.append(discontinuity_count(select_disparity(S, p, cost=C)))
    return wta, final


def monotone(c):
    return all(b <= a for a, b in zip(c, c[1:]))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=20)
    args = ap.parse_args()
    rig = StereoRig(focal_px=150.0, baseline_m=0.12, width=96, height=64)
    print("p2 values:", P2)
    for name in ("plane", "plane+box"):
        bad_wta = bad_final = 0
        for seed in range(args.seeds):
            prims = [Plane((0.0, 0.0, -1.0), -3.5, ValueNoise(scale=0.1, amplitude=30, seed=seed))]
            if name == "plane+box":
                prims.append(Box((-0.3, -0.3, 1.5), (0.3, 0.3, 1.8), ValueNoise(scale=0.05, seed=seed + 1)))
            wta, final = counts(Scene(prims), rig, seed)
            bad_wta += not monotone(wta)
            bad_final += not monotone(final)
            print(f"{name:10s} seed {seed:3d}  wta {wta}  final {final}")
        print(f"{name}: non-monotone wta {bad_wta}/{args.seeds}, final {bad_final}/{args.seeds}\n")


if __name__ == "__main__":
    main()
