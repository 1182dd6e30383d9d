import numpy as np
import pytest
import scipy.linalg as la

from oseencpf.fem import ObservationPatch, build_spaces, control_shapes, parabolic_bump
from oseencpf.lti import StateSpace, assemble_descriptor, project
from oseencpf.mesh import ChannelParams, Tag, generate_channel_mesh
from oseencpf.steady import solve_steady

COARSE = ChannelParams(h=0.5, sides=8)
PATCHES = (ObservationPatch(1.5, 0.3, 1.8, 0.45, "y"),
           ObservationPatch(1.5, 0.55, 1.8, 0.7, "y"))
GAMMA = 0.1


def random_stable(rng, n=8, m=2, k=2, margin=0.1):
    """Random dense system shifted so that its abscissa is ``-margin``."""
    A = rng.standard_normal((n, n))
    A -= (la.eigvals(A).real.max() + margin) * np.eye(n)
    return StateSpace(A, rng.standard_normal((n, m)), rng.standard_normal((k, n)))


@pytest.fixture(scope="session")
def coarse_mesh():
    return generate_channel_mesh(COARSE)


@pytest.fixture(scope="session")
def space(coarse_mesh):
    return build_spaces(coarse_mesh)


@pytest.fixture(scope="session")
def inflow(space):
    return parabolic_bump(space, Tag.INFLOW)


@pytest.fixture(scope="session")
def controls(space):
    return control_shapes(space)


@pytest.fixture(scope="session")
def steady_001(space, inflow):
    return solve_steady(space, 0.01, GAMMA, inflow, tol=1e-12)


@pytest.fixture(scope="session")
def descriptor(space, steady_001, controls):
    g1, g2 = controls
    return assemble_descriptor(space, 0.01, GAMMA, steady_001.velocity, g1, g2, PATCHES)


@pytest.fixture(scope="session")
def oseen(descriptor):
    return project(descriptor)
