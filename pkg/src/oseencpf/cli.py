"""Command-line entry point ``oseencpf``.

Subcommands::

    oseencpf run scaling --config exp.toml
    oseencpf run robustness --config exp.toml
    oseencpf mesh generate --out mesh.txt [--h 0.25 --sides 16 ...]
    oseencpf selftest

Failures exit nonzero with a message of the form ``error [stage]: ...``.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

__all__ = ["main", "selftest"]

EXIT_STAGE = 1
EXIT_CONFIG = 2


def _err(stage: str, msg: str) -> None:
    print(f"oseencpf: error [{stage}]: {msg}", file=sys.stderr)


def _cmd_run(args) -> int:
    from .config import ConfigError, load_config
    from .experiments import ExperimentError, run_robustness, run_scaling

    try:
        cfg = load_config(args.config)
        over = {}
        if args.workers is not None:
            over["workers"] = args.workers
        if args.output_dir is not None:
            over["output_dir"] = args.output_dir
        if over:
            cfg = cfg.with_overrides(**over)
    except ConfigError as exc:
        _err("config", str(exc))
        return EXIT_CONFIG
    try:
        if args.experiment == "scaling":
            rep = run_scaling(cfg)
            print(f"scaling: {len(rep.rows)} members, slope {rep.slope:.4f}, "
                  f"r2 {rep.r2:.4f}")
        else:
            rep = run_robustness(cfg)
            tail = "none" if rep.tail_start is None else rep.tail_start
            print(f"robustness: {len(rep.rows)} members, stable tail from {tail}, "
                  f"{rep.violations} certificate violations")
    except ExperimentError as exc:
        _err(exc.stage, str(exc).split("] ", 1)[-1])
        return EXIT_STAGE
    print(f"csv: {rep.csv_path}")
    print(f"summary: {rep.summary_path}")
    return 0


def _cmd_mesh(args) -> int:
    from .mesh import ChannelParams, MeshError, generate_channel_mesh, save_mesh

    if args.config:
        from .config import ConfigError, load_config
        try:
            params = load_config(args.config).mesh
        except ConfigError as exc:
            _err("config", str(exc))
            return EXIT_CONFIG
    else:
        params = ChannelParams()
    kw = {k: getattr(args, k) for k in ("length", "height", "radius", "sides", "h")
          if getattr(args, k) is not None}
    if args.center is not None:
        kw["center"] = tuple(args.center)
    try:
        params = ChannelParams(**{**params.__dict__, **kw})
        mesh = generate_channel_mesh(params)
    except MeshError as exc:
        _err("mesh", str(exc))
        return EXIT_STAGE
    try:
        save_mesh(mesh, args.out)
    except OSError as exc:
        _err("output", str(exc))
        return EXIT_STAGE
    census = mesh.tag_census()
    tags = " ".join(f"{t.value}={census.get(t, 0)}" for t in sorted(census, key=lambda t: t.value))
    print(f"mesh: {mesh.n_vertices} vertices, {mesh.n_triangles} triangles; {tags}")
    return 0


def selftest(out=print) -> bool:
    """Run the analytic scalar-system checks; returns True when all pass."""
    from .cpf import (coprime_realization, factor_sample, hinf_norm, output_injection,
                      perturbation_realization, solve_filter_riccati)
    from .lti import StateSpace, eval_transfer, simulate, spectral_abscissa
    from .synth import closed_loop, ncf_controller, ncf_margin

    g = StateSpace([[-1.0]], [[1.0]], [[1.0]])
    r2 = np.sqrt(2.0) - 1.0
    checks = []

    def check(name, value, expected, tol):
        ok = bool(abs(value - expected) <= tol)
        checks.append(ok)
        out(f"{'PASS' if ok else 'FAIL'} {name}: {value:.12g} (expected {expected:.12g}, tol {tol:g})")

    check("transfer G(0) of 1/(s+1)", eval_transfer(g, 0).G[0, 0].real, 1.0, 1e-14)
    X = solve_filter_riccati(g).X[0, 0]
    check("filter Riccati root", X, r2, 1e-10)
    L = output_injection(g)
    check("output injection", L[0, 0], -r2, 1e-10)
    N0, M0 = factor_sample(g, [[-1.0]], 0)
    check("N(0) with L=-1", N0[0, 0].real, 0.5, 1e-14)
    check("M(0) with L=-1", M0[0, 0].real, 0.5, 1e-14)
    fac = coprime_realization(g, [[-1.0]])
    check("feedthrough of M", fac.D[0, 1], 1.0, 0.0)
    check("norm of 1/(s+1)", hinf_norm(g).value, 1.0, 1e-4)
    check("norm of s/(s+1)", hinf_norm(StateSpace([[-1.0]], [[1.0]], [[-1.0]], [[1.0]])).value,
          1.0, 1e-4)
    zero = perturbation_realization(g, [[0.0]], L)
    check("zero perturbation norm", hinf_norm(zero).value, 0.0, 0.0)
    check("NCF margin", ncf_margin(g), (4.0 - 2.0 * np.sqrt(2.0)) ** -0.5, 1e-10)
    T, dt = 10.0, 1e-3
    y = simulate(g, np.ones(int(round(T / dt)) + 1), T, dt).y
    check("step response at t=10", y[-1, 0], 1.0, 1e-4)
    ctrl = ncf_controller(g, 0.9 * ncf_margin(g))
    check("closed loop abscissa sign (stable plant)",
          float(closed_loop(g, ctrl).abscissa < 0), 1.0, 0.0)
    u = StateSpace([[0.5]], [[1.0]], [[1.0]])
    check("closed loop abscissa sign (unstable plant)",
          float(closed_loop(u, ncf_controller(u)).abscissa < 0), 1.0, 0.0)
    check("open-loop abscissa", spectral_abscissa(g), -1.0, 0.0)
    passed = sum(checks)
    out(f"selftest: {passed}/{len(checks)} passed")
    return passed == len(checks)


def _cmd_selftest(args) -> int:
    try:
        ok = selftest()
    except Exception as exc:  # noqa: BLE001
        _err("selftest", f"{type(exc).__name__}: {exc}")
        return EXIT_STAGE
    return 0 if ok else EXIT_STAGE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oseencpf",
                                description="Coprime-factor perturbation experiments "
                                            "for the Robin-controlled Oseen system.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment")
    run.add_argument("experiment", choices=("scaling", "robustness"))
    run.add_argument("--config", required=True)
    run.add_argument("--workers", type=int)
    run.add_argument("--output-dir")
    run.set_defaults(func=_cmd_run)

    mesh = sub.add_parser("mesh", help="mesh utilities")
    msub = mesh.add_subparsers(dest="action", required=True)
    gen = msub.add_parser("generate", help="write a channel mesh")
    gen.add_argument("--out", required=True)
    gen.add_argument("--config", help="take channel parameters from an experiment config")
    gen.add_argument("--length", type=float)
    gen.add_argument("--height", type=float)
    gen.add_argument("--center", type=float, nargs=2)
    gen.add_argument("--radius", type=float)
    gen.add_argument("--sides", type=int)
    gen.add_argument("--h", type=float)
    gen.set_defaults(func=_cmd_mesh)

    st = sub.add_parser("selftest", help="analytic scalar-system checks")
    st.set_defaults(func=_cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
