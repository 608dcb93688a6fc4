"""Gross-Pitaevskii ground states with energy-adaptive Riemannian CG and U-Net acceleration."""

import numpy as np

from ._core import (
    ArchiveError,
    DatasetError,
    Error,
    GpeParams,
    accelerated_solve,
    energy,
    expected_tensors,
    forward,
    generate,
    grid_points,
    parameter_count,
    prepare_input,
    random_archive,
    random_state,
    read_archive,
    read_dataset,
    read_spec,
    read_state,
    solve,
    tolerance_schedule,
    write_archive,
    write_dataset,
    write_spec,
    write_state,
)

__all__ = [
    "ArchiveError",
    "DatasetError",
    "Error",
    "GpeParams",
    "accelerated_solve",
    "density_l1_error",
    "energy",
    "expected_tensors",
    "forward",
    "generate",
    "grid_points",
    "impr_rho",
    "parameter_count",
    "prepare_input",
    "random_archive",
    "random_state",
    "read_archive",
    "read_dataset",
    "read_spec",
    "read_state",
    "solve",
    "to_complex",
    "tolerance_schedule",
    "write_archive",
    "write_dataset",
    "write_spec",
    "write_state",
]


def to_complex(pairs):
    """(..., n, n, 2) real/imaginary channels -> complex (..., n, n)."""
    pairs = np.asarray(pairs)
    return pairs[..., 0].astype(np.complex128) + 1j * pairs[..., 1]


def density_l1_error(psi, ref, a=20.0):
    """Cell-area weighted L1 distance between |psi|^2 and |ref|^2."""
    psi, ref = np.asarray(psi), np.asarray(ref)
    h = a / psi.shape[-1]
    return float(np.sum(np.abs(np.abs(psi) ** 2 - np.abs(ref) ** 2)) * h * h)


def impr_rho(psi_in, psi_out, ref, a=20.0):
    """Relative density-error reduction; None when psi_in already matches ref."""
    before = density_l1_error(psi_in, ref, a)
    if before == 0.0:
        return None
    return (before - density_l1_error(psi_out, ref, a)) / before
