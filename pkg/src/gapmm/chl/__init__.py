from .inference import cd_backend_name, cd_dual_pass, cd_primal_pass, set_backend
from .net import (
    DualState,
    LayeredNet,
    PrimalState,
    Sample,
    clamped_dual,
    clamped_energy,
    ff_init,
    free_dual,
    free_energy,
    readout,
    zero_dual,
)
from .problem import (
    CHLProblem,
    LowerState,
    UpperState,
    contrastive_lower,
    contrastive_upper,
    estimate_lipschitz,
    grad_params_upper_single,
)

__all__ = [
    "CHLProblem", "DualState", "LayeredNet", "LowerState", "PrimalState",
    "Sample", "UpperState", "cd_backend_name", "cd_dual_pass",
    "cd_primal_pass", "clamped_dual", "clamped_energy", "contrastive_lower",
    "contrastive_upper", "estimate_lipschitz", "ff_init", "free_dual",
    "free_energy", "grad_params_upper_single", "readout", "set_backend",
    "zero_dual",
]
