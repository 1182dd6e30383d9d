import numpy as np
import pytest

from oseencpf import experiments
from oseencpf.config import ExperimentConfig
from oseencpf.experiments import (ExperimentError, band_limited_inputs, fit_loglog,
                                  run_scaling, stable_tail)


def test_fit_exact():
    x = np.logspace(-4, -1, 6)
    s, c, r2 = fit_loglog(x, x)
    assert s == pytest.approx(1.0) and c == pytest.approx(0.0, abs=1e-12) and r2 == pytest.approx(1.0)
    assert fit_loglog(x, 3 * x ** 2)[0] == pytest.approx(2.0)


def test_fit_noisy():
    rng = np.random.default_rng(0)
    x = np.logspace(-4, 0, 40)
    y = 2.0 * x ** 1.5 * np.exp(0.05 * rng.standard_normal(40))
    assert abs(fit_loglog(x, y)[0] - 1.5) <= 0.05


@pytest.mark.parametrize("xs,ys", [([1, 2, 0], [1, 2, 3]), ([1, 2, 3], [1, -2, 3]), ([1, 2], [1, 2])])
def test_fit_rejects(xs, ys):
    with pytest.raises(ValueError):
        fit_loglog(xs, ys)


def test_band_limited_inputs():
    rng = np.random.default_rng(1)
    T, dt = 10.0, 1e-2
    for u in band_limited_inputs(rng, 3, 2, T, dt, 5.0):
        assert u.shape == (1001, 2)
        assert dt * np.sum(u ** 2) == pytest.approx(1.0)
        spec = np.abs(np.fft.rfft(u, axis=0))
        freqs = 2 * np.pi * np.fft.rfftfreq(1001, dt)
        assert spec[freqs > 5.0].max() <= 1e-10 * spec.max()


def test_stable_tail():
    assert stable_tail([False, True, True]) == 1
    assert stable_tail([True, False, True]) == 2
    assert stable_tail([True, False]) is None
    assert stable_tail([True, True]) == 0


def test_zero_family(tmp_path):
    cfg = ExperimentConfig(name="z", output_dir=str(tmp_path), scales=(0.0,))
    rep = run_scaling(cfg)
    assert len(rep.rows) == 1
    r = rep.rows[0]
    assert r.dv_h1 == 0.0 and r.dA_norm2 == 0.0 and r.dNdM_hinf == 0.0
    lines = rep.csv_path.read_text().splitlines()
    assert lines[0] == ",".join(experiments.SCALING_COLUMNS) and len(lines) == 2
    assert "slope: nan" in rep.summary_path.read_text()


def test_dA_proportional_to_scale(tmp_path):
    cfg = ExperimentConfig(name="p", output_dir=str(tmp_path), scales=(1e-2, 1e-3, 1e-4))
    rep = run_scaling(cfg, write=False)
    dA = rep.column("dA_norm2")
    assert dA[0] / dA[1] == pytest.approx(10.0, rel=1e-12)
    assert dA[1] / dA[2] == pytest.approx(10.0, rel=1e-12)
    assert 0.8 <= rep.slope <= 1.2


def test_partial_failure_keeps_rows(tmp_path, monkeypatch):
    calls = {"n": 0}
    real = experiments.cpf.hinf_norm

    def flaky(fac, tol):
        calls["n"] += 1
        if calls["n"] == 3:
            raise RuntimeError("injected failure")
        return real(fac, tol=tol)

    monkeypatch.setattr(experiments.cpf, "hinf_norm", flaky)
    cfg = ExperimentConfig(name="f", output_dir=str(tmp_path), scales=(1e-2, 1e-3, 1e-4, 0.0))
    with pytest.raises(ExperimentError) as err:
        run_scaling(cfg)
    assert err.value.stage == "cpf" and "injected failure" in str(err.value)
    lines = (tmp_path / "f_scaling.csv").read_text().splitlines()
    assert len(lines) == 1 + 2


def test_stage_tag_for_bad_mesh(tmp_path):
    f = tmp_path / "m.txt"
    f.write_text("# VERTICES 0\n")
    cfg = ExperimentConfig(output_dir=str(tmp_path), mesh_path=str(f))
    with pytest.raises(ExperimentError) as err:
        run_scaling(cfg)
    assert err.value.stage == "mesh"


def test_threads_match_serial(tmp_path):
    base = dict(scales=(1e-2, 1e-3, 0.0), gain_checks=2, gain_horizon=5.0)
    one = run_scaling(ExperimentConfig(name="a", output_dir=str(tmp_path), **base))
    two = run_scaling(ExperimentConfig(name="b", output_dir=str(tmp_path), workers=2, **base))
    assert one.csv_path.read_bytes() == two.csv_path.read_bytes()
    ratios = [r.sim_gain_ratio for r in one.rows if r.sim_gain_ratio is not None]
    assert ratios and max(ratios) <= 1.05
