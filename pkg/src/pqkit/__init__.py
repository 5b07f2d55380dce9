"""Numerical torsion and integrability checks for almost para-quaternionic structures."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .geometry import PqStructure, flat_model, propo_structure  # noqa: E402
from .report import Report, Verdict  # noqa: E402

__all__ = ["PqStructure", "Report", "Verdict", "flat_model", "propo_structure", "__version__"]
