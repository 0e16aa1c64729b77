"""Free-corridor estimation for quadrotors from simulated stereo and 1D-LiDAR.

Pipeline per frame: render a stereo pair, semi-global matching, WLS hole
filling, depth from disparity, Kalman fusion of the window-centroid depth with
the LiDAR range, and a Free/Blocked decision for the projected UAV window.
"""

from .config import ScenarioConfig, Trajectory, load_config
from .fusion import DistanceFilter, FusionConfig, KalmanState, Measurement, calibrate, kf_predict, kf_update
from .pipeline import FrameLog, report, run_scenario
from .scene import Box, Checker, LidarModel, Plane, Pose, Scene, Sphere, StereoRig, ValueNoise
from .stereo import DisparityMap, MatchParams, compute_disparity
from .window import Verdict, WindowSpec
from .wls import WlsParams, wls_smooth

__version__ = "0.1.0"
