"""teleopsim: a desk-scale simulator of latency-decoupled teleoperation.

The robot camera streams RGB-D into a persistent world-frame point cloud;
the operator's view is re-rendered from that cloud at display rate, so
what the user sees tracks their own head instantly while scene content
refreshes at sensor rate.  A direct video-streaming baseline, a simulated
6R neck, episode recording/playback, latency metrics, and a WebSocket
bridge round out the package.
"""

from .geometry import Intrinsics, Pose
from .pipeline import MetricsLog, PipelineConfig, run

__all__ = ["Intrinsics", "Pose", "MetricsLog", "PipelineConfig", "run"]
__version__ = "0.1.0"
