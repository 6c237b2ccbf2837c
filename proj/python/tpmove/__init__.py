# Copyright 2026 The tpmove Authors
# SPDX-License-Identifier: Apache-2.0

"""Task-parameterized movement learning with frame-parameter policy search."""

from ._core import (
    Error,
    Experiment,
    em_fit,
    forward_kinematics,
    gaussian_product,
    home_posture,
    jacobian,
    pi2_weights,
    track,
)

__all__ = [
    "Error",
    "Experiment",
    "em_fit",
    "forward_kinematics",
    "gaussian_product",
    "home_posture",
    "jacobian",
    "pi2_weights",
    "track",
]
