"""Physics-preserving optimal transport between operator-learning domains."""

from .dual import (PottConfig, PushforwardDataset, DualResult, DualTrainer, TransportDiverged,
                   dual_train, pushforward)
from .maps import DualPotential, ResidualMLP, TransportMap
from .objective import (batch_cost, conservation_variance, consistency_penalty, phys_reg_conservation,
                        phys_reg_generic, transport_cost)
from .oracles import gaussian_monge_oracle, kantorovich_lp, semi_dual_value
from .transfer import transfer_train

__all__ = [
    "DualPotential", "DualResult", "DualTrainer", "PottConfig", "PushforwardDataset",
    "ResidualMLP", "TransportDiverged", "TransportMap", "batch_cost", "conservation_variance",
    "consistency_penalty", "dual_train", "gaussian_monge_oracle", "kantorovich_lp",
    "phys_reg_conservation", "phys_reg_generic", "pushforward", "semi_dual_value",
    "transfer_train", "transport_cost",
]
