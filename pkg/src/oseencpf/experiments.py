"""Scaling and robustness experiments over families of linearization points.

Both drivers run the pipeline mesh -> fem -> steady -> lti once for the
nominal linearization, then process every family member: the projected
perturbation ``dA`` of the state matrix, the H-infinity size of the induced
coprime-factor perturbation and, for the robustness experiment, a robust
controller designed on the perturbed model and tested on the nominal plant.

Rows are written to CSV in member order as soon as they are available.
"""

from __future__ import annotations

import contextlib
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as la

from . import cpf, lti, synth
from .config import ExperimentConfig
from .fem import (ObservationPatch, assemble_divergence, assemble_h1, assemble_mass,
                  build_spaces, control_shapes, parabolic_bump)
from .mesh import Tag, generate_channel_mesh, load_mesh, validate_mesh
from .steady import (divergence_free_projection, linearization_family, solve_steady,
                     synthetic_family, vortex_field)

logger = logging.getLogger(__name__)

__all__ = [
    "ExperimentError",
    "Pipeline",
    "ScalingRow",
    "ScalingReport",
    "RobustnessRow",
    "RobustnessReport",
    "prepare",
    "run_scaling",
    "run_robustness",
    "fit_loglog",
    "band_limited_inputs",
    "simulated_gain",
    "SCALING_COLUMNS",
    "ROBUSTNESS_COLUMNS",
]

SCALING_COLUMNS = ("member", "dv_h1", "dA_norm2", "dNdM_hinf", "peak_freq",
                   "b_margin", "stabilizes_nominal", "sim_gain_ratio")
ROBUSTNESS_COLUMNS = ("member", "dv_h1", "dA_norm2", "dNdM_hinf", "b_margin", "b_opt",
                      "four_block", "cl_abscissa", "stabilizes_nominal", "certified")


class ExperimentError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@contextlib.contextmanager
def _stage(name: str):
    try:
        yield
    except ExperimentError:
        raise
    except Exception as exc:  # noqa: BLE001 - re-tagged with the stage
        raise ExperimentError(name, f"{type(exc).__name__}: {exc}") from exc


@dataclass(eq=False)
class Pipeline:
    config: ExperimentConfig
    space: object
    state: object
    nominal: lti.ProjectedLti
    family: object
    injection: np.ndarray = field(repr=False)


def prepare(config: ExperimentConfig) -> Pipeline:
    """Nominal system, output injection and the linearization family."""
    with _stage("mesh"):
        if config.mesh_path:
            mesh = load_mesh(config.mesh_path)
            problems = validate_mesh(mesh, require_control=True)
            if problems:
                raise ValueError(problems[0])
        else:
            mesh = generate_channel_mesh(config.mesh)
    with _stage("fem"):
        space = build_spaces(mesh)
        g0 = parabolic_bump(space, Tag.INFLOW, config.inflow)
        g1, g2 = control_shapes(space, config.control)
        patches = [ObservationPatch(*p) for p in config.patches]
    with _stage("steady"):
        state = solve_steady(space, config.nu, config.gamma, g0, tol=config.steady_tol,
                             picard_switch=config.picard_switch)
    with _stage("lti"):
        desc = lti.assemble_descriptor(space, config.nu, config.gamma, state.velocity,
                                       g1, g2, patches)
        nominal = lti.project(desc)
    with _stage("family"):
        gram = assemble_h1(space)
        if config.source == "newton":
            family = linearization_family(space, state, config.count, gram=gram)
        else:
            M, D = assemble_mass(space), assemble_divergence(space)
            direction = divergence_free_projection(
                space, vortex_field(space, config.vortex_center, config.vortex_width), M, D)
            family = synthetic_family(space, state.velocity, direction, config.scales,
                                      gram=gram, div=D)
    with _stage("cpf"):
        L = cpf.output_injection(nominal)
    return Pipeline(config, space, state, nominal, family, L)


def fit_loglog(xs, ys):
    """Least-squares line through ``(log x, log y)``: ``(slope, intercept, r2)``."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("xs and ys must be 1-D arrays of equal length")
    if len(x) < 3:
        raise ValueError("need at least 3 points")
    if not (np.all(x > 0) and np.all(y > 0) and np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("log-log fit needs positive finite data")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def band_limited_inputs(rng, count: int, channels: int, T: float, dt: float,
                        bandwidth: float) -> list:
    """Random inputs with spectrum below ``bandwidth`` rad/time and unit discrete L2 norm."""
    steps = int(round(T / dt))
    freqs = 2 * np.pi * np.fft.rfftfreq(steps + 1, dt)
    out = []
    for _ in range(count):
        spec = np.fft.rfft(rng.standard_normal((steps + 1, channels)), axis=0)
        spec[freqs > bandwidth] = 0.0
        u = np.fft.irfft(spec, n=steps + 1, axis=0)
        u /= np.sqrt(dt * np.sum(u ** 2))
        out.append(u)
    return out


def simulated_gain(sys, inputs, T: float, dt: float) -> float:
    """Largest discrete L2 gain ``|y| / |u|`` over the given inputs."""
    best = 0.0
    for u in inputs:
        y = lti.simulate(sys, u, T, dt).y
        ratio = np.sqrt(dt * np.sum(y ** 2)) / np.sqrt(dt * np.sum(u ** 2))
        best = max(best, float(ratio))
    return best


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return "NA"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


class _Appender:
    """Single writer keeping rows in member order; flushes after every row."""

    def __init__(self, path: Path, columns):
        path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(path, "w", newline="")
        self._fh.write(",".join(columns) + "\n")
        self._fh.flush()

    def write(self, values) -> None:
        self._fh.write(",".join(_fmt(v) for v in values) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def _process(members, worker, appender, workers: int):
    """Map ``worker`` over members (possibly in threads), appending rows in order."""
    rows = []
    if workers <= 1:
        for k, m in enumerate(members):
            row = worker(k, m)
            appender.write(row.values())
            rows.append(row)
        return rows
    with ThreadPoolExecutor(workers) as ex:
        futures = [ex.submit(worker, k, m) for k, m in enumerate(members)]
        try:
            for fut in futures:
                row = fut.result()
                appender.write(row.values())
                rows.append(row)
        except BaseException:
            for fut in futures:
                fut.cancel()
            raise
    return rows


def _outputs(config: ExperimentConfig, kind: str):
    out = Path(config.output_dir)
    return out / f"{config.name}_{kind}.csv", out / f"{config.name}_{kind}_summary.txt"


def _hinf_or_inf(base, dA, L, tol):
    """H-infinity size of ``[dN dM]``; ``(inf, nan)`` when a cascade stage is unstable."""
    try:
        fac = cpf.perturbation_realization(base, dA, L)
    except cpf.FactorError as exc:
        logger.info("perturbation not realizable with a stable cascade: %s", exc)
        return math.inf, math.nan, None
    res = cpf.hinf_norm(fac, tol=tol)
    return res.value, res.peak_frequency, fac


# -- scaling ------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingRow:
    member: int
    dv_h1: float
    dA_norm2: float
    dNdM_hinf: float
    peak_freq: float
    b_margin: float
    stabilizes_nominal: bool | None
    sim_gain_ratio: float | None

    def values(self):
        return (self.member, self.dv_h1, self.dA_norm2, self.dNdM_hinf, self.peak_freq,
                self.b_margin, self.stabilizes_nominal, self.sim_gain_ratio)


@dataclass(frozen=True)
class ScalingReport:
    rows: tuple
    slope: float
    intercept: float
    r2: float
    csv_path: Path | None = None
    summary_path: Path | None = None
    n_states: int = 0

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)


def _fit_rows(rows, x="dv_h1", y="dNdM_hinf"):
    pts = [(getattr(r, x), getattr(r, y)) for r in rows
           if getattr(r, x) > 0 and 0 < getattr(r, y) < math.inf]
    if len(pts) < 3:
        return math.nan, math.nan, math.nan
    xs, ys = zip(*pts)
    return fit_loglog(xs, ys)


def run_scaling(config: ExperimentConfig, write: bool = True) -> ScalingReport:
    """``|[dN dM]|_Hinf`` against ``|dv|`` along the configured family."""
    pipe = prepare(config)
    nominal, L, space = pipe.nominal, pipe.injection, pipe.space
    csv_path, summary_path = _outputs(config, "scaling")
    if write and config.save_system:
        with _stage("output"):
            lti.save_system(nominal, csv_path.with_name(f"{config.name}_nominal.txt"),
                            {"nu": repr(config.nu), "gamma": repr(config.gamma)})

    def worker(k, member):
        with _stage("cpf"):
            dA = lti.project_perturbation(space, nominal, member.dv)
            dA_norm = float(la.norm(dA, 2)) if dA.any() else 0.0
            value, peak, fac = _hinf_or_inf(nominal, dA, L, config.hinf_tol)
        with _stage("synth"):
            perturbed = lti.StateSpace(nominal.A + dA, nominal.B, nominal.C)
            b = config.fraction * synth.ncf_margin(perturbed)
            verdict = None
            if config.synthesize:
                ctrl = synth.ncf_controller(perturbed, b)
                verdict = synth.closed_loop(nominal, ctrl).stable
        ratio = None
        if config.gain_checks and fac is not None and value > 0:
            with _stage("simulate"):
                rng = np.random.default_rng([config.seed, k])
                inputs = band_limited_inputs(rng, config.gain_checks, fac.n_inputs,
                                             config.gain_horizon, config.gain_dt,
                                             config.gain_bandwidth)
                ratio = simulated_gain(fac, inputs, config.gain_horizon, config.gain_dt) / value
        return ScalingRow(k, float(member.size), dA_norm, float(value), float(peak), float(b),
                          verdict, ratio)

    appender = _Appender(csv_path, SCALING_COLUMNS) if write else _NullAppender()
    try:
        rows = _process(list(pipe.family), worker, appender, config.workers)
    finally:
        appender.close()
    with _stage("fit"):
        slope, intercept, r2 = _fit_rows(rows)
    report = ScalingReport(tuple(rows), slope, intercept, r2,
                           csv_path if write else None, summary_path if write else None,
                           nominal.n_states)
    if write:
        with _stage("output"):
            summary_path.write_text(_scaling_summary(config, report))
    return report


def _scaling_summary(config, report: ScalingReport) -> str:
    lines = [
        "experiment: scaling",
        f"name: {config.name}",
        f"nu: {config.nu!r}",
        f"gamma: {config.gamma!r}",
        f"family: {config.source}",
        f"members: {len(report.rows)}",
        f"projected_states: {report.n_states}",
        f"slope: {report.slope!r}",
        f"intercept: {report.intercept!r}",
        f"r2: {report.r2!r}",
    ]
    unstable = sum(1 for r in report.rows if r.dNdM_hinf == math.inf)
    lines.append(f"unrealizable_members: {unstable}")
    return "\n".join(lines) + "\n"


class _NullAppender:
    def write(self, values):
        pass

    def close(self):
        pass


# -- robustness ---------------------------------------------------------------


@dataclass(frozen=True)
class RobustnessRow:
    member: int
    dv_h1: float
    dA_norm2: float
    dNdM_hinf: float
    b_margin: float
    b_opt: float
    four_block: float
    cl_abscissa: float
    stabilizes_nominal: bool
    certified: bool

    def values(self):
        return (self.member, self.dv_h1, self.dA_norm2, self.dNdM_hinf, self.b_margin,
                self.b_opt, self.four_block, self.cl_abscissa, self.stabilizes_nominal,
                self.certified)


@dataclass(frozen=True)
class RobustnessReport:
    rows: tuple
    tail_start: int | None     # first index of the all-stable tail
    violations: int            # certified members that fail to stabilize
    csv_path: Path | None = None
    summary_path: Path | None = None
    n_states: int = 0

    @property
    def verdicts(self) -> list:
        return [r.stabilizes_nominal for r in self.rows]


def stable_tail(verdicts) -> int | None:
    """Index from which every verdict is true, or ``None`` if the last one is false."""
    start = None
    for k in range(len(verdicts) - 1, -1, -1):
        if not verdicts[k]:
            break
        start = k
    return start


def run_robustness(config: ExperimentConfig, write: bool = True) -> RobustnessReport:
    """Controllers designed on perturbed models, tested on the nominal plant."""
    pipe = prepare(config)
    nominal, space = pipe.nominal, pipe.space
    csv_path, summary_path = _outputs(config, "robustness")

    def worker(k, member):
        with _stage("cpf"):
            dA = lti.project_perturbation(space, nominal, member.dv)
            dA_norm = float(la.norm(dA, 2)) if dA.any() else 0.0
            design = lti.StateSpace(nominal.A + dA, nominal.B, nominal.C)
            # factors of the design model are normalized with the filter injection
            Ld = cpf.output_injection(design)
            value, _, _ = _hinf_or_inf(design, -dA, Ld, config.hinf_tol)
        with _stage("synth"):
            X = cpf.solve_control_riccati(design).X
            Y = cpf.solve_filter_riccati(design).X
            b_opt = synth.ncf_margin(design, (X, Y))
            b = config.fraction * b_opt
            ctrl = synth.ncf_controller(design, b, verify=False)
            four = synth.four_block_gain(design, ctrl, tol=config.hinf_tol)
            cl = synth.closed_loop(nominal, ctrl, perturbation_size=value)
        return RobustnessRow(k, float(member.size), dA_norm, float(value), float(b),
                             float(b_opt), float(four), float(cl.abscissa), cl.stable,
                             cl.certified)

    appender = _Appender(csv_path, ROBUSTNESS_COLUMNS) if write else _NullAppender()
    try:
        rows = _process(list(pipe.family), worker, appender, config.workers)
    finally:
        appender.close()
    verdicts = [r.stabilizes_nominal for r in rows]
    violations = sum(1 for r in rows if r.certified and not r.stabilizes_nominal)
    report = RobustnessReport(tuple(rows), stable_tail(verdicts), violations,
                              csv_path if write else None, summary_path if write else None,
                              nominal.n_states)
    if write:
        with _stage("output"):
            summary_path.write_text(_robustness_summary(config, report))
    return report


def _robustness_summary(config, report: RobustnessReport) -> str:
    certified = sum(1 for r in report.rows if r.certified)
    stable = sum(1 for r in report.rows if r.stabilizes_nominal)
    lines = [
        "experiment: robustness",
        f"name: {config.name}",
        f"nu: {config.nu!r}",
        f"gamma: {config.gamma!r}",
        f"family: {config.source}",
        f"members: {len(report.rows)}",
        f"projected_states: {report.n_states}",
        f"stabilizing_members: {stable}",
        f"certified_members: {certified}",
        f"certificate_violations: {report.violations}",
        f"stable_tail_start: {'none' if report.tail_start is None else report.tail_start}",
    ]
    return "\n".join(lines) + "\n"
