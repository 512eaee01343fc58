"""Simulator and optimizer for network-assisted full-duplex cell-free mmWave
massive MIMO with DAC quantization and capacity-limited fronthaul."""

from .beamforming import (BeamformerSet, RankDeficientError,
                          associate_and_receive, build_beamformers,
                          design_analog, design_digital_zf)
from .channel import (ChannelSet, LargeScale, draw_channels, iri_channel,
                      pathloss_db, steering_vector)
from .convex_core import (ConvexProblem, InfeasibleStartError, SolveResult,
                          SolveStatus, check_kkt, solve)
from .harness import (ExperimentSpec, TrialRecord, empirical_cdf,
                      run_bit_sweep, run_cdf_compare, run_convergence,
                      run_trial)
from .link_metrics import (OptVars, QuantModel, RateReport, downlink_rate,
                           fronthaul_dl, fronthaul_ul, quant_covariance,
                           rate_report, rho_for_bits, transmit_power,
                           uplink_rate)
from .sca import (AffineModel, InfeasibleInitError, ScaState, build_state,
                  init_vars, linearize_dl_fronthaul, linearize_h,
                  linearize_ul_fronthaul, run_sca)
from .scenario import (ConfigError, Layout, SystemConfig, generate_layout,
                       load_config, noise_power_dbm)

__all__ = [n for n in dir() if not n.startswith("_")]
__version__ = "0.1.0"
