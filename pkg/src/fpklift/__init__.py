"""Particle solvers, coordinate charts and residual audits for nonlinear Fokker-Planck equations and their lifts."""

__version__ = "0.1.0"

from .config import ExperimentConfig
from .exceptions import ConfigError, InvalidArgumentError, ModelInconsistencyError, NumericalError
from .generator import CoefficientField, preset
from .measure import CoordinatePath, MeasurePath, ParticleMeasure, chart_G, chart_H
from .testfn import Bump, TestFamily, enumerate_family

__all__ = [
    "Bump",
    "CoefficientField",
    "ConfigError",
    "CoordinatePath",
    "ExperimentConfig",
    "InvalidArgumentError",
    "MeasurePath",
    "ModelInconsistencyError",
    "NumericalError",
    "ParticleMeasure",
    "TestFamily",
    "chart_G",
    "chart_H",
    "enumerate_family",
    "preset",
]
