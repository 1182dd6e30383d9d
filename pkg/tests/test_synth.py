import numpy as np
import pytest

from oseencpf.cpf import output_injection
from oseencpf.hinf import hinf_norm
from oseencpf.lti import StateSpace
from oseencpf.synth import (Controller, SynthesisError, balanced_truncation, closed_loop,
                            four_block_gain, load_controller, ncf_controller, ncf_margin,
                            save_controller)

from conftest import random_stable

SCALAR = StateSpace([[-1.0]], [[1.0]], [[1.0]])


def test_scalar_margin():
    assert ncf_margin(SCALAR) == pytest.approx((4 - 2 * np.sqrt(2)) ** -0.5, abs=1e-12)


def test_margin_basis_invariant():
    rng = np.random.default_rng(4)
    sys = random_stable(rng, n=6, margin=-0.3)
    T = rng.standard_normal((6, 6)) + 3 * np.eye(6)
    assert abs(ncf_margin(sys) - ncf_margin(sys.similarity(T))) <= 1e-8
    assert 0 < ncf_margin(sys) < 1


@pytest.mark.parametrize("seed", range(3))
def test_controller_meets_margin(seed):
    rng = np.random.default_rng(20 + seed)
    sys = random_stable(rng, n=6, margin=-0.5)  # open-loop unstable
    b = 0.8 * ncf_margin(sys)
    K = ncf_controller(sys, b)
    assert closed_loop(sys, K).stable
    assert K.achieved_gain <= (1 + 1e-3) / b
    assert four_block_gain(sys, K) == pytest.approx(K.achieved_gain, rel=1e-3)


def test_margin_bounds():
    with pytest.raises(SynthesisError):
        ncf_controller(SCALAR, 0.95)
    with pytest.raises(SynthesisError):
        ncf_controller(SCALAR, -0.1)


def test_scalar_design_stabilizes():
    K = ncf_controller(SCALAR, 0.9 * ncf_margin(SCALAR))
    assert closed_loop(SCALAR, K).stable


def test_open_loop_with_zero_controller():
    zero = StateSpace([[-1.0]], [[0.0]], [[0.0]])
    rep = closed_loop(SCALAR, zero)
    assert rep.abscissa == pytest.approx(-1.0) and rep.stable


def test_unstable_plant_observer_stabilizer():
    plant = StateSpace([[0.5]], [[1.0]], [[1.0]])
    L = output_injection(plant)
    F = -2.0
    # observer-based controller u = F xhat in negative-feedback form
    K = StateSpace(plant.A + plant.B * F + L @ plant.C, -L, -np.array([[F]]))
    assert closed_loop(plant, K).stable
    assert closed_loop(plant, ncf_controller(plant)).stable


def test_ill_posed_loop():
    plant = StateSpace([[-1.0]], [[1.0]], [[1.0]], [[1.0]])
    K = StateSpace([[-1.0]], [[0.0]], [[0.0]], [[-1.0]])
    with pytest.raises(ValueError, match="ill-posed"):
        closed_loop(plant, K)


def test_small_gain_certificate(plant_pair):
    # design on A + dA, certify against the nominal A
    nominal, design, size = plant_pair
    K = ncf_controller(design)
    if size < K.margin:
        assert closed_loop(nominal, K).stable


@pytest.fixture
def plant_pair():
    from oseencpf.cpf import perturbation_realization
    rng = np.random.default_rng(9)
    nominal = random_stable(rng, n=6, margin=-0.2)
    dA = 1e-2 * rng.standard_normal((6, 6))
    design = StateSpace(nominal.A + dA, nominal.B, nominal.C)
    Ld = output_injection(design)
    size = hinf_norm(perturbation_realization(design, -dA, Ld)).value
    return nominal, design, size


def test_balanced_truncation_bound():
    rng = np.random.default_rng(12)
    sys = random_stable(rng, n=12, margin=0.5)
    red, bound = balanced_truncation(sys, order=6)
    err = StateSpace(np.block([[sys.A, np.zeros((12, 6))], [np.zeros((6, 12)), red.A]]),
                     np.vstack([sys.B, red.B]), np.hstack([sys.C, -red.C]))
    assert hinf_norm(err).value <= bound * (1 + 1e-6)
    full, tail = balanced_truncation(sys)
    assert tail <= 1e-8 * hinf_norm(sys).value


def test_controller_bundle(tmp_path):
    K = ncf_controller(SCALAR)
    save_controller(K, tmp_path / "k.txt")
    back = load_controller(tmp_path / "k.txt")
    assert isinstance(back, Controller)
    assert np.array_equal(back.A, K.A) and back.margin == K.margin
