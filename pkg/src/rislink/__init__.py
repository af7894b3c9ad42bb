"""Link-level simulator for RIS-assisted MIMO systems."""

from .beamforming import (
    DecoupledSolution,
    RegulationMatrix,
    capacity,
    decouple_bd_svd,
    exhaustive_oracle,
    project_constraint,
    single_antenna_reorder,
    tuning_loss,
)
from .channels import ChannelSet, WidebandChannelSet, block_diag_users, cascade, gen_channel, gen_wideband
from .config import SimulationConfig, load_config
from .harness import derive_seed, run

__version__ = "0.1.0"
