from .bal import BALParseError, parse_bal, serialize_bal
from .idx import IDXParseError, load_idx_dataset, parse_idx, write_idx
from .synth import (
    ClassificationSpec,
    SyntheticBASpec,
    perturb_ba_theta,
    synth_ba,
    synth_classification,
)

__all__ = [
    "BALParseError", "ClassificationSpec", "IDXParseError",
    "SyntheticBASpec", "load_idx_dataset", "parse_bal", "parse_idx",
    "perturb_ba_theta", "serialize_bal", "synth_ba", "synth_classification",
    "write_idx",
]
