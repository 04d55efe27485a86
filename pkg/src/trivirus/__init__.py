"""Numerical laboratory for the competitive tri-virus networked SIS model."""

from .model import DomainError, DomainViolation, TriVirusParams, jacobian, validate_state, vector_field
from .sim import SimConfig, Trajectory, integrate, paper_random_initial_condition

__version__ = "0.1.0"

__all__ = [
    "DomainError",
    "DomainViolation",
    "SimConfig",
    "Trajectory",
    "TriVirusParams",
    "integrate",
    "jacobian",
    "paper_random_initial_condition",
    "validate_state",
    "vector_field",
]
