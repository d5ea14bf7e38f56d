"""Bregman-divergence Arimoto-Blahut rate-distortion solvers."""

from ._core import (
    ArgumentError,
    ConvergenceError,
    DomainError,
    expected_distortion,
    mutual_information,
    rd_objective,
    solve,
)

__all__ = [
    "ArgumentError",
    "ConvergenceError",
    "DomainError",
    "expected_distortion",
    "mutual_information",
    "rd_objective",
    "solve",
]
