import numpy as np
import pytest
import scipy.linalg as la

from oseencpf.fem import (assemble_convection, assemble_mass, assemble_robin_boundary,
                          assemble_stokes_robin)
from oseencpf.hinf import hinf_norm
from oseencpf.lti import (DescriptorSystem, ProjectionError, SingularShiftError, StateSpace,
                          assemble_descriptor, eval_transfer, frequency_response, project,
                          simulate, spectral_abscissa)
from oseencpf.experiments import band_limited_inputs

from conftest import GAMMA, PATCHES, random_stable


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_stokes_descriptor_symmetric_negative(space, controls):
    g1, g2 = controls
    d = assemble_descriptor(space, 0.05, GAMMA, np.zeros(space.n_velocity), g1, g2, PATCHES)
    A = d.A.toarray()
    assert np.array_equal(A, A.T)
    assert la.eigvalsh(A).max() < 0
    assert spectral_abscissa(project(d)) < 0


def test_descriptor_additivity(space, controls, steady_001, descriptor):
    g1, g2 = controls
    d0 = assemble_descriptor(space, 0.01, GAMMA, np.zeros(space.n_velocity), g1, g2, PATCHES)
    N = assemble_convection(space, steady_001.velocity)[space.free][:, space.free]
    assert abs((descriptor.A - d0.A) + N).max() <= 1e-13


def test_descriptor_boundary_entry(space, descriptor):
    # the boundary mass of one control-arc midpoint DOF enters A with weight -1/gamma
    from oseencpf.mesh import Tag
    k = np.nonzero(space.boundary_edge_mask(Tag.CONTROL1))[0][0]
    m = space.bnd_nodes[k][2]
    h = space.bnd_lengths[k]
    vol = assemble_stokes_robin(space, 0.01, np.inf)
    full = assemble_stokes_robin(space, 0.01, GAMMA)
    assert (full - vol)[m, m] == pytest.approx(16 * h / 30 / GAMMA, rel=1e-12)
    assert assemble_robin_boundary(space)[m, m] == pytest.approx(16 * h / 30, rel=1e-12)


def test_projected_invariants(space, descriptor, oseen):
    theta = oseen.basis
    assert np.abs(descriptor.D @ theta).max() <= 1e-10
    gram = theta.T @ (descriptor.E @ theta)
    assert np.abs(gram - np.eye(oseen.n_states)).max() <= 1e-10
    assert oseen.n_states == space.n_free - space.n_pressure
    assert 100 <= oseen.n_states <= 300


def test_projector_idempotent(descriptor, oseen):
    theta = oseen.basis
    rng = np.random.default_rng(1)
    v = rng.standard_normal(theta.shape[0])
    P = lambda x: theta @ (theta.T @ (descriptor.E @ x))  # noqa: E731
    assert np.linalg.norm(P(P(v)) - P(v)) <= 1e-10 * np.linalg.norm(v)


def test_projection_rank_error():
    E = np.eye(3)
    import scipy.sparse as sp
    d = DescriptorSystem(sp.csr_matrix(E), sp.csr_matrix(-E),
                         sp.csr_matrix([[1.0, 0, 0], [2.0, 0, 0]]), np.ones((3, 1)), np.ones((1, 3)))
    with pytest.raises(ProjectionError):
        project(d)


def test_transfer_paths_agree(descriptor, oseen):
    rng = np.random.default_rng(2)
    pts = [1 + 1j] + list(rng.uniform(0.01, 5, 10) + 1j * rng.uniform(-5, 5, 10))
    for s in pts:
        assert rel(eval_transfer(oseen, s).G, eval_transfer(descriptor, s).G) <= 1e-8


def test_scalar_transfer():
    g = StateSpace([[-1.0]], [[1.0]], [[1.0]])
    assert eval_transfer(g, 0).G[0, 0] == 1.0
    a, b = eval_transfer(g, 1 + 2j).G, eval_transfer(g, 1 - 2j).G
    assert np.array_equal(np.conj(a), b)
    with pytest.raises(SingularShiftError) as err:
        eval_transfer(g, -1.0)
    assert err.value.nearest == pytest.approx(-1.0)


def test_frequency_response_threads(oseen):
    w = np.linspace(0.1, 3, 7)
    assert np.array_equal(frequency_response(oseen, w, workers=3), frequency_response(oseen, w))


def test_abscissa():
    assert spectral_abscissa(np.diag([-1.0, -2.0])) == -1.0
    assert spectral_abscissa(StateSpace([[0.5]], [[1.0]], [[1.0]])) == 0.5


def test_simulate_zero_and_step():
    g = StateSpace([[-1.0]], [[1.0]], [[1.0]])
    T, dt = 10.0, 1e-3
    n = int(round(T / dt)) + 1
    assert not simulate(g, np.zeros(n), T, dt).y.any()
    y = simulate(g, np.ones(n), T, dt).y[:, 0]
    assert abs(y[-1] - 1) <= 1e-4
    t = np.arange(n) * dt
    assert np.abs(y - (1 - np.exp(-t))).max() <= 1e-6
    with pytest.raises(ValueError):
        simulate(g, np.ones((n, 2)), T, dt)


def test_l2_gain_bounded_by_hinf():
    rng = np.random.default_rng(3)
    sys = random_stable(rng, n=6, m=2, k=2, margin=0.3)
    bound = hinf_norm(sys).value
    T, dt = 30.0, 1e-2
    for u in band_limited_inputs(rng, 5, 2, T, dt, 10.0):
        y = simulate(sys, u, T, dt).y
        assert np.sqrt(dt * (y ** 2).sum()) <= 1.05 * bound


def test_sinusoidal_steady_state(oseen):
    w = 1.3
    T, dt = 40.0, 5e-3
    t = np.arange(int(round(T / dt)) + 1) * dt
    u = np.column_stack([np.sin(w * t), np.zeros_like(t)])
    y = simulate(oseen, u, T, dt).y
    G = eval_transfer(oseen, 1j * w).G[:, 0]
    tail = t > T - 2 * np.pi / w * 3
    amp = np.sqrt(2 * np.mean(y[tail] ** 2, axis=0))
    assert np.allclose(amp, np.abs(G), rtol=1e-2)


def test_state_matrix_negative_of_stiffness(space, descriptor):
    K = assemble_stokes_robin(space, 0.01, GAMMA)[space.free][:, space.free]
    M = assemble_mass(space)[space.free][:, space.free]
    assert abs(descriptor.E - M).max() == 0
    sym = 0.5 * (descriptor.A + descriptor.A.T)
    # the reaction part is not symmetric; the Stokes-Robin part is its symmetric core
    assert abs(sym + K).max() < abs(K).max()
