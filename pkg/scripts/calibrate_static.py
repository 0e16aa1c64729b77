"""Repeat the static-wall calibration and report chi-square interval coverage.

    python scripts/calibrate_static.py [--reps 100] [--samples 150]
"""

import argparse

from scipy.stats import chi2

from freespace.fusion import CALIBRATED_LIDAR_VARIANCE, CALIBRATED_STEREO_VARIANCE, calibrate
from freespace.measure import SensorNoise
from freespace.scene import LidarModel, Plane, Pose, Scene, StereoRig, ValueNoise
from freespace.stereo import MatchParams


def interval(var, n, level=0.95):
    k = n - 1
    return var * chi2.ppf((1 - level) / 2, k) / k, var * chi2.ppf(1 - (1 - level) / 2, k) / k


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=100)
    ap.add_argument("--samples", type=int, default=150)
    ap.add_argument("--image-noise", type=float, default=0.0,
                    help="gray-level noise; > 0 reruns the matcher for every sample")
    args = ap.parse_args()

    rig = StereoRig(focal_px=150.0, baseline_m=0.12, width=160, height=120)
    scene = Scene([Plane((0.0, 0.0, -1.0), -4.0, ValueNoise(scale=0.2, amplitude=90.0, octaves=3))])
    lidar = LidarModel(noise_variance_m2=CALIBRATED_LIDAR_VARIANCE)
    noise = SensorNoise(image_noise_std=args.image_noise, stereo_depth_noise_variance=CALIBRATED_STEREO_VARIANCE)
    s_iv = interval(CALIBRATED_STEREO_VARIANCE, args.samples)
    l_iv = interval(CALIBRATED_LIDAR_VARIANCE + lidar.resolution_m**2 / 12, args.samples)

    hits = [0, 0]
    for rep in range(args.reps):
        vs, vl = calibrate(scene, rig, Pose(), n=args.samples, seed=rep, lidar=lidar,
                           match=MatchParams(max_disparity=24), noise=noise)
        hits[0] += s_iv[0] <= vs <= s_iv[1]
        hits[1] += l_iv[0] <= vl <= l_iv[1]
        print(f"rep {rep:3d}: stereo {vs:.6f}  lidar {vl:.7f}")
    print(f"stereo inside [{s_iv[0]:.4f}, {s_iv[1]:.4f}]: {hits[0]}/{args.reps}")
    print(f"lidar  inside [{l_iv[0]:.6f}, {l_iv[1]:.6f}]: {hits[1]}/{args.reps}")


if __name__ == "__main__":
    main()
