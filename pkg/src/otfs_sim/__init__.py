"""Link-level delay-Doppler (OTFS) simulation workbench.

Transmit chain, multipath channel, pilot-aided channel estimation, BPIC and
untrained-network detectors, and a reproducible Monte Carlo SER harness.
"""

__version__ = "0.1.0"

from .frame import (  # noqa: F401
    ConfigError,
    DDFrame,
    IndexMaps,
    OTFSConfig,
    Region,
    build_frame,
    index_maps,
    qam_alphabet_1d,
    qam_demodulate,
    qam_modulate,
    vectorize,
    devectorize,
)
from .channel import (  # noqa: F401
    ChannelPath,
    ChannelRealization,
    NoiseSpec,
    dd_domain_channel_matrix,
    sample_channel,
    time_domain_channel_matrix,
    transmit,
)
from .chanest import (  # noqa: F401
    EstimatedChannel,
    RealLinearModel,
    build_effective_model,
    estimate_channel,
    realify,
)
from .bpic import bpic_detect, mmse_init  # noqa: F401
from .gdunn import (  # noqa: F401
    GdunnArchitecture,
    StoppingMonitor,
    build_adjacency,
    default_architecture,
    gdunn_run,
)
from .harness import (  # noqa: F401
    CampaignSpec,
    DetectorSpec,
    detect,
    run_campaign,
    run_trial,
    ser_with_ci,
)
