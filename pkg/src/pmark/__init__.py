"""pmark: sentence-level statistical text watermarking.

Embeds a zero-bit watermark by steering sentence-by-sentence sampling with
cosine scores against secret orthogonal pivot directions, and detects it
with a soft-count z-test. Ships an online mode (per-step median estimated by
resampling), an offline mode (zero prior median, no model access at detection
time), a synthetic simulation harness, and executable checks for the
statistical guarantees the scheme relies on.
"""

from pmark import errors
from pmark.detection import (
    DetectionReport,
    detect_offline,
    detect_online,
    soft_count,
    z_statistic,
    z_threshold,
)
from pmark.geometry import angle_density, cosine, generate_pivots, normalize, sample_sphere
from pmark.keys import ChannelSeeds, MasterKey, PivotSet, read_key_file, write_key_file
from pmark.proxies import cluster_proxy, lsh_proxy, pivot_proxy, simmark_proxy
from pmark.rng import BACKEND, Stream, stream
from pmark.selection import (
    CandidateSet,
    hd_median,
    median_partition,
    offline_select,
    offline_signature,
    online_select,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CandidateSet",
    "ChannelSeeds",
    "DetectionReport",
    "MasterKey",
    "PivotSet",
    "Stream",
    "angle_density",
    "cluster_proxy",
    "cosine",
    "detect_offline",
    "detect_online",
    "errors",
    "generate_pivots",
    "hd_median",
    "lsh_proxy",
    "median_partition",
    "normalize",
    "offline_select",
    "offline_signature",
    "online_select",
    "pivot_proxy",
    "read_key_file",
    "sample_sphere",
    "simmark_proxy",
    "soft_count",
    "stream",
    "write_key_file",
    "z_statistic",
    "z_threshold",
]
