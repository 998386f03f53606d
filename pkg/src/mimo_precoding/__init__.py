"""Multi-user MIMO precoding under per-antenna power constraints.

Closed-form precoders (MRT, ZF, RZF, ARZF), linear detection (MMSE, MMSE-IRC,
conjugate), spectral-efficiency quality measures, a projected quasi-Newton
maximizer with analytic complex gradients, and a benchmark harness with
reproducible synthetic channels.
"""

from .baselines import BaselineConfig, arzf, compute_baseline, mrt, normalize_power, rzf, zf
from .channel_io import file_size, read_channels, write_channels
from .channels import generate_channels
from .detection import (
    DetectionSet,
    conjugate,
    conjugate_detection_set,
    irc_detection_set,
    mmse,
    mmse_detection_set,
    mmse_irc,
)
from .errors import (
    ChannelFileError,
    ConfigError,
    DegenerateChannelError,
    DimensionError,
    InfiniteSusinrError,
    MimoError,
    NumericalFailureError,
    SingularMatrixError,
    UndefinedSinrError,
    ZeroPrecoderError,
)
from .harness import (
    ALGORITHMS,
    RunRecord,
    RunReport,
    ScenarioConfig,
    TimingReport,
    export_report,
    run_scenario,
    timing_report,
)
from .model import (
    ChannelSet,
    SystemDims,
    SystemParams,
    UserChannel,
    build_channel_set,
    decompose_user,
    noise_from_susinr,
    stack,
)
from .optimizer import (
    CustomObjective,
    ObjectiveSpec,
    OptimizationTrace,
    OptimizerConfig,
    SoftmaxParams,
    gradient,
    lbfgs_maximize,
    objective,
    project,
    softmax_maximize,
)
from .quality import (
    PrecodingMatrix,
    SinrReport,
    effective_sinr,
    se_conjugate,
    sinr_conjugate,
    spectral_efficiency,
    spectral_efficiency_irc,
    susinr,
    symbol_sinr,
)

__version__ = "0.1.0"
