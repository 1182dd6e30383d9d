"""Acceptance suite.

Every criterion runs at its stated tolerance and prints one line of the form
``PASS criterion N (name): detail``.  Run it on its own with

    python3 -m pytest tests/test_acceptance.py -s -q
"""

import time

import numpy as np
import pytest
import scipy.linalg as la

from oseencpf.cli import selftest
from oseencpf.config import ExperimentConfig
from oseencpf.cpf import (coprime_realization, factor_sample, hinf_norm, output_injection,
                          perturbation_realization, perturbation_sample, solve_filter_riccati)
from oseencpf.experiments import (band_limited_inputs, run_robustness, run_scaling,
                                  simulated_gain)
from oseencpf.fem import (assemble_divergence, assemble_mass, build_spaces, parabolic_bump)
from oseencpf.hinf import gain
from oseencpf.lti import StateSpace, eval_transfer, project_perturbation, spectral_abscissa
from oseencpf.mesh import Tag, generate_channel_mesh
from oseencpf.steady import divergence_free_projection, solve_steady, vortex_field

from conftest import COARSE, random_stable


@pytest.fixture
def report(capsys):
    def emit(number, name, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number} ({name}): {detail}")
        assert ok, detail
    return emit


def rel(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


def _stable_perturbation(rng, sys, L, size=1e-2):
    dA = size * rng.standard_normal(sys.A.shape)
    while spectral_abscissa(sys.A + L @ sys.C + dA) >= 0:
        dA *= 0.5
    return dA


@pytest.fixture(scope="module")
def oseen_dA(space, oseen):
    direction = divergence_free_projection(space, vortex_field(space), assemble_mass(space),
                                           assemble_divergence(space))
    return project_perturbation(space, oseen, 1e-2 * direction)


def test_criterion_01_cascade_matches_formula(report):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(20):
        sys = random_stable(rng, n=8, m=2, k=2, margin=0.1)
        L = output_injection(sys)
        dA = _stable_perturbation(rng, sys, L)
        fac = perturbation_realization(sys, dA, L)
        for w in np.logspace(-2, 2, 20):
            ref = perturbation_sample(sys, dA, L, 1j * w)
            worst = max(worst, rel(eval_transfer(fac, 1j * w).G, ref))
    report(1, "cascade = formula", worst <= 1e-8, f"max rel err {worst:.2e} (tol 1e-8)")


def _identity_errors(sys, dA, L, omegas):
    k, m = sys.n_outputs, sys.n_inputs
    pert = StateSpace(sys.A + dA, sys.B, sys.C)
    e1 = e2 = 0.0
    for w in omegas:
        s = 1j * w
        N, M = factor_sample(sys, L, s)
        G = eval_transfer(sys, s).G
        Gd = eval_transfer(pert, s).G
        dNM = perturbation_sample(sys, dA, L, s)
        dN, dM = dNM[:, :m], dNM[:, m:]
        e1 = max(e1, rel(M @ G, N))
        e2 = max(e2, rel((M + dM) @ Gd, N + dN))
    assert dNM.shape == (k, m + k)
    return e1, e2


def test_criterion_02_factorization_identities(report, oseen, oseen_dA):
    rng = np.random.default_rng(11)
    omegas = np.logspace(-2, 2, 10)
    worst = [0.0, 0.0]
    for _ in range(5):
        sys = random_stable(rng, n=8, m=2, k=2, margin=0.1)
        L = output_injection(sys)
        e = _identity_errors(sys, _stable_perturbation(rng, sys, L), L, omegas)
        worst = [max(a, b) for a, b in zip(worst, e)]
    e_os = _identity_errors(oseen, oseen_dA, output_injection(oseen), omegas)
    ok = max(worst + list(e_os)) <= 1e-8 and 100 <= oseen.n_states <= 300
    report(2, "factorization identities", ok,
           f"random N=MG {worst[0]:.1e}, perturbed {worst[1]:.1e}; "
           f"Oseen (n={oseen.n_states}) {e_os[0]:.1e}, {e_os[1]:.1e} (tol 1e-8)")


def test_criterion_03_zero_perturbation(report, oseen):
    L = output_injection(oseen)
    fac = perturbation_realization(oseen, np.zeros_like(oseen.A), L)
    val = hinf_norm(fac).value
    rng = np.random.default_rng(3)
    sys = random_stable(rng)
    val2 = hinf_norm(perturbation_realization(sys, np.zeros((8, 8)), output_injection(sys))).value
    report(3, "zero perturbation", val == 0.0 and val2 == 0.0,
           f"Oseen {val!r}, random {val2!r}")


def test_criterion_04_scaling_law(report):
    start = time.perf_counter()
    details, ok = [], True
    for nu in (0.05, 0.01):
        rep = run_scaling(ExperimentConfig(nu=nu, scales=(1e-1, 1e-2, 1e-3, 1e-4, 0.0)),
                          write=False)
        ok &= 0.8 <= rep.slope <= 1.2 and rep.r2 >= 0.98
        ok &= rep.rows[-1].dNdM_hinf == 0.0
        details.append(f"nu={nu}: slope {rep.slope:.4f}, r2 {rep.r2:.6f}")
    elapsed = time.perf_counter() - start
    ok &= elapsed <= 600
    report(4, "scaling law", bool(ok), "; ".join(details) + f"; {elapsed:.0f} s")


def test_criterion_05_hinf_oracle(report):
    rng = np.random.default_rng(55)
    grid = np.concatenate([[0.0], np.logspace(-3, 3, 10_000)])
    worst = 0.0
    for _ in range(10):
        sys = random_stable(rng, n=8, m=2, k=2, margin=0.05)
        h = hinf_norm(sys).value
        fine = max(gain(sys, w) for w in grid)
        worst = max(worst, abs(h - fine) / fine)
    lo = hinf_norm(StateSpace([[-1.0]], [[1.0]], [[1.0]])).value
    hi = hinf_norm(StateSpace([[-1.0]], [[1.0]], [[-1.0]], [[1.0]])).value
    ok = worst <= 1e-4 and abs(lo - 1) <= 1e-4 and abs(hi - 1) <= 1e-4
    report(5, "H-infinity oracle", ok,
           f"max rel dev from fine grid {worst:.2e}; 1/(s+1) -> {lo:.8f}, s/(s+1) -> {hi:.8f}")


def test_criterion_06_riccati_quality(report, oseen):
    r = solve_filter_riccati(oseen)
    rel_res = r.residual / np.abs(r.X).max()
    a = spectral_abscissa(oseen.A + output_injection(oseen, r) @ oseen.C)
    x = solve_filter_riccati(StateSpace([[-1.0]], [[1.0]], [[1.0]])).X[0, 0]
    ok = rel_res <= 1e-8 and a < 0 and abs(x - (np.sqrt(2) - 1)) <= 1e-10
    report(6, "Riccati quality", ok,
           f"residual/|X| {rel_res:.1e}, abscissa(A+LC) {a:.4f}, scalar err {abs(x - np.sqrt(2) + 1):.1e}")


def test_criterion_07_time_domain_gain(report, oseen, oseen_dA):
    fac = perturbation_realization(oseen, oseen_dA, output_injection(oseen))
    h = hinf_norm(fac).value
    T, dt = 20.0, 1e-2
    inputs = band_limited_inputs(np.random.default_rng(7), 20, fac.n_inputs, T, dt, 10.0)
    ratios = [simulated_gain(fac, [u], T, dt) for u in inputs]
    worst = max(ratios) / h
    report(7, "time-domain gain bound", worst <= 1.05,
           f"max |y|/|u| = {max(ratios):.4e}, hinf {h:.4e}, ratio {worst:.4f} (tol 1.05)")


def test_criterion_08_eventual_stabilization(report):
    rep = run_robustness(ExperimentConfig(source="newton", count=6), write=False)
    v = rep.verdicts
    monotone = v == sorted(v) and bool(v) and v[-1]
    bad = [r.member for r in rep.rows if r.dNdM_hinf < r.b_margin and not r.stabilizes_nominal]
    ok = monotone and rep.tail_start is not None and not bad
    report(8, "eventual stabilization", ok,
           f"{len(v)} members, verdicts {''.join('T' if x else 'F' for x in v)}, "
           f"tail from {rep.tail_start}, certified-but-unstable {bad}")


def test_criterion_09_fem_sanity(report, descriptor, oseen):
    space = build_spaces(generate_channel_mesh(COARSE))
    g0 = parabolic_bump(space, Tag.INFLOW)
    D = assemble_divergence(space)
    nodes = np.unique(space.bnd_nodes[space.boundary_edge_mask(Tag.CONTROL1, Tag.CONTROL2)])
    div, traces = 0.0, []
    for nu in (0.05, 0.01):
        for gamma in (1e-1, 1e-2, 1e-3, 1e-4):
            st = solve_steady(space, nu, gamma, g0, tol=1e-12)
            for v, _, _ in st.history:
                div = max(div, np.linalg.norm(D @ v))
            if nu == 0.01:
                v = st.velocity
                traces.append(np.hypot(v[nodes], v[nodes + space.n_nodes]).mean())
    rng = np.random.default_rng(9)
    pts = rng.uniform(0.01, 5, 10) + 1j * rng.uniform(-5, 5, 10)
    tf = max(rel(eval_transfer(oseen, s).G, eval_transfer(descriptor, s).G) for s in pts)
    decreasing = all(b < a for a, b in zip(traces, traces[1:]))
    ok = div <= 1e-10 and tf <= 1e-8 and decreasing
    report(9, "FEM sanity", ok,
           f"max |Dv| {div:.1e}; transfer paths {tf:.1e}; Robin trace means "
           + ", ".join(f"{t:.2e}" for t in traces))


def _outputs(rep):
    return rep.csv_path.read_bytes() + rep.summary_path.read_bytes()


def test_criterion_10_determinism(report, tmp_path):
    logs = [[], []]
    for buf in logs:
        selftest(out=buf.append)
    same_selftest = logs[0] == logs[1]
    same = {}
    for kind, runner, extra in (("scaling", run_scaling, dict(scales=(1e-2, 1e-3, 0.0),
                                                              gain_checks=2, gain_horizon=5.0)),
                                ("robustness", run_robustness, dict(source="newton", count=3))):
        outs = [_outputs(runner(ExperimentConfig(name=kind, output_dir=str(tmp_path / f"run{i}"),
                                                 **extra)))
                for i in range(2)]
        same[kind] = outs[0] == outs[1]
    ok = same_selftest and all(same.values())
    report(10, "determinism", ok,
           f"selftest identical {same_selftest}, scaling identical {same['scaling']}, "
           f"robustness identical {same['robustness']}")
