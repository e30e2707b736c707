"""Module-style frontend for the snnaccel deployment toolkit.

Define networks with `snn.Sequential(snn.Linear(...), snn.LIF(...))`,
export one deployment artifact with `deploy.export`, and run batches on it
with `SNNAccelerator(...)(...)`. All execution is delegated to the toolkit
CLI, so frontend-defined and toolkit-defined networks with identical
parameters produce byte-identical artifacts and identical predictions.
"""

from . import deploy, snn
from ._io import CliError
from .runtime import SNNAccelerator
from .snn import LIF, Linear, Sequential, SNN

__all__ = [
    "CliError",
    "LIF",
    "Linear",
    "SNN",
    "SNNAccelerator",
    "Sequential",
    "deploy",
    "snn",
]
__version__ = "0.1.0"
