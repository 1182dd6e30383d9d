import numpy as np
import pytest

from oseencpf.hinf import HinfError, gain, hamiltonian, hinf_norm
from oseencpf.lti import StateSpace

from conftest import random_stable


def test_first_order_lowpass():
    r = hinf_norm(StateSpace([[-1.0]], [[1.0]], [[1.0]]))
    assert r.value == pytest.approx(1.0, rel=1e-4) and r.peak_frequency == 0.0
    assert r.bracket <= 1e-4


def test_first_order_highpass():
    r = hinf_norm(StateSpace([[-1.0]], [[1.0]], [[-1.0]], [[1.0]]))
    assert r.value == pytest.approx(1.0, rel=1e-4)


def test_resonant_second_order():
    z, w0 = 0.05, 2.0
    sys = StateSpace([[0, 1], [-w0 ** 2, -2 * z * w0]], [[0], [1]], [[w0 ** 2, 0]])
    peak = 1 / (2 * z * np.sqrt(1 - z ** 2))
    r = hinf_norm(sys)
    assert r.value == pytest.approx(peak, rel=1e-4)
    assert r.peak_frequency == pytest.approx(w0 * np.sqrt(1 - 2 * z ** 2), rel=1e-3)


@pytest.mark.parametrize("seed", range(4))
def test_fine_grid_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    sys = random_stable(rng, n=8, m=2, k=2, margin=0.05)
    r = hinf_norm(sys)
    grid = np.concatenate([[0.0], np.logspace(-3, 3, 10_000)])
    fine = max(gain(sys, w) for w in grid)
    assert fine <= r.value * (1 + 1e-10)
    assert r.value <= fine * (1 + 1e-4)


def test_hamiltonian_crossing():
    sys = StateSpace([[-1.0]], [[1.0]], [[1.0]])
    g = 0.5  # |G(i w)| = 0.5 at w = sqrt(3)
    ev = np.linalg.eigvals(hamiltonian(sys, g))
    assert np.min(np.abs(ev - 1j * np.sqrt(3))) <= 1e-12


def test_unstable_rejected():
    with pytest.raises(HinfError, match="not stable"):
        hinf_norm(StateSpace([[0.5]], [[1.0]], [[1.0]]))


def test_zero_system():
    assert hinf_norm(StateSpace(-np.eye(3), np.ones((3, 1)), np.zeros((1, 3)))).value == 0.0
