"""Taylor-Hood discretization of the Robin-controlled Oseen system."""

from .assembly import (assemble_convection, assemble_divergence, assemble_h1,
                       assemble_input, assemble_mass, assemble_output,
                       assemble_robin_boundary, assemble_scalar_mass,
                       assemble_stokes_robin, assemble_stokes_volume,
                       eliminate_dirichlet, h1_norm)
from .kernels import BACKEND
from .space import (BoundaryShape, FemSpace, ObservationPatch, build_spaces,
                    check_shape, control_shapes, inflow_lift, interpolate,
                    parabolic_bump, zero_shape)

__all__ = [
    "BACKEND", "BoundaryShape", "FemSpace", "ObservationPatch",
    "assemble_convection", "assemble_divergence", "assemble_h1",
    "assemble_input", "assemble_mass", "assemble_output",
    "assemble_robin_boundary", "assemble_scalar_mass", "assemble_stokes_robin",
    "assemble_stokes_volume", "build_spaces", "check_shape", "control_shapes",
    "eliminate_dirichlet", "h1_norm", "inflow_lift", "interpolate",
    "parabolic_bump", "zero_shape",
]
