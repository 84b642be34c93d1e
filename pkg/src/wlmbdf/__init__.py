"""Widely-linear multi-branch decision-feedback detection for multiuser
large-MIMO uplinks with receiver I/Q imbalance."""

from .baselines import (DetectorKind, las_detect, ml_detect, mmse_detect,
                        rmf_detect, sic_detect)
from .coding import ConvCode, Interleaver
from .harness import (BerRecord, SimConfig, load_config, run_sweep,
                      snr_to_noise_variance, wilson_interval)
from .idd import run_idd
from .mbdf import (BranchFilterBank, DetectorConfig, design_branch_filters,
                   detect_frame, euclidean_cost_model, plain_domain, wl_domain)
from .numerics import SeededRng, complex_gaussian_sample, hermitian_solve, pseudo_inverse
from .signal_model import (AugmentedStatistics, ChannelRealization, Frame,
                           IqImbalance, Modulation, SystemDims,
                           apply_iq_imbalance, augment, build_second_order_stats,
                           generate_channel, make_iq_matrices, transmit)

__version__ = "0.1.0"
