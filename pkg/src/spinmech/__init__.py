"""Spin-mechanical conversion in a levitated microdiamond: NV spin physics,
libration dynamics, photon readout, spectrum fitting and noise budgets."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from . import dicke, fokker_planck, libration, mdmr, noise_budget, protocols, pulse_engine, readout, spin_core, vector3
from .errors import (
    BoundaryError,
    DegenerateLabelingError,
    FitError,
    IntegrationError,
    InvalidInputError,
    NumericalError,
    SpinmechError,
    StepSizeError,
)

__all__ = [
    "__version__",
    "dicke",
    "fokker_planck",
    "libration",
    "mdmr",
    "noise_budget",
    "protocols",
    "pulse_engine",
    "readout",
    "spin_core",
    "vector3",
    "SpinmechError",
    "InvalidInputError",
    "NumericalError",
    "DegenerateLabelingError",
    "IntegrationError",
    "StepSizeError",
    "BoundaryError",
    "FitError",
]
