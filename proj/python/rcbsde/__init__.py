"""Penalized-BSDE solver for HJB equations with controlled jump intensity."""

from rcbsde._core import (
    Model,
    bs_closed_form,
    make_benchmark,
    penalty_sweep,
    poisson_series_value,
    radial_profile,
    solve_fd,
    surjection,
    value_at,
)

__all__ = [
    "Model",
    "bs_closed_form",
    "make_benchmark",
    "penalty_sweep",
    "poisson_series_value",
    "radial_profile",
    "solve_fd",
    "surjection",
    "value_at",
]
