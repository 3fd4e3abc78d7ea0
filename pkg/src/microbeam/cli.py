"""Command-line entry points: serve, headless, verify, replay."""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import model, service, solver
from .errors import MicrobeamError


def _load_config(path):
    if path is None:
        return service.build_session_config(dict(service.CONFIG_DEFAULTS))
    return service.load_config(path)


def cmd_serve(args):
    config = _load_config(args.config)
    from . import server
    report = server.serve(config, host=args.host, port=args.port,
                          duration=args.duration)
    if report is not None:
        print(report.stats.to_text(), end="")
    return 0


def cmd_headless(args):
    config = _load_config(args.config)
    schedule = service.load_trace(args.trace, config.options.dt) if args.trace else {}
    report = service.run_headless(
        config, args.duration, trace_schedule=schedule, csv_path=args.out,
        record_path=args.record, realtime=not args.no_realtime)
    print(report.stats.to_text(), end="")
    return 0


def cmd_replay(args):
    try:
        report = service.replay_session(args.infile, csv_path=args.out)
    except MicrobeamError as exc:
        print(f"replay failed: {exc}", file=sys.stderr)
        return 1
    print(report.stats.to_text(), end="")
    return 0


def cmd_verify(args):
    """Oracle suite: statics, spectrum, buckling, energy conservation."""
    config = _load_config(args.config)
    beam = config.beam
    ei = beam.material.youngs_modulus * beam.section.second_moment
    rho_a = beam.material.density * beam.section.area
    length = beam.length

    def freq(beta_l):
        return beta_l ** 2 / (2 * math.pi) * math.sqrt(ei / rho_a) / length ** 2

    def mk(n, boundary):
        return model.BeamConfig(length=length, material=beam.material,
                                section=beam.section, n_elements=n,
                                boundary=boundary)

    checks = []

    cantilever = mk(max(16, beam.n_elements), model.BoundaryCondition.CLAMPED_FREE)
    force = 1e-6
    tip = solver.static_solve(cantilever, solver.LoadSet.at_node(
        cantilever.n_elements, force)).q[-2]
    checks.append(("static cantilever tip FL^3/3EI", tip,
                   force * length ** 3 / (3 * ei), 0.01))

    bridge = mk(max(16, beam.n_elements), model.BoundaryCondition.CLAMPED_CLAMPED)
    force = 1e-8
    mid = bridge.n_elements // 2
    midspan = solver.static_solve(bridge, solver.LoadSet.at_node(mid, force)).q[2 * mid]
    checks.append(("static microbridge midspan FL^3/192EI", midspan,
                   force * length ** 3 / (192 * ei), 0.01))

    cant32 = mk(max(32, beam.n_elements), model.BoundaryCondition.CLAMPED_FREE)
    freqs, _ = solver.natural_frequencies(cant32, 3)
    for i, beta_l in enumerate((1.87510, 4.69409, 7.85476)):
        checks.append((f"cantilever mode {i + 1} frequency", freqs[i],
                       freq(beta_l), 0.005))
    bridge32 = mk(max(32, beam.n_elements), model.BoundaryCondition.CLAMPED_CLAMPED)
    fb, _ = solver.natural_frequencies(bridge32, 1)
    checks.append(("microbridge mode 1 frequency", fb[0], freq(4.73004), 0.005))

    checks.append(("buckling clamped-clamped 4pi^2EI/L^2",
                   solver.buckling_load(bridge),
                   4 * math.pi ** 2 * ei / length ** 2, 0.02))
    checks.append(("buckling clamped-free pi^2EI/4L^2",
                   solver.buckling_load(cantilever),
                   math.pi ** 2 * ei / (4 * length ** 2), 0.02))

    # undamped free vibration must conserve the energy functional
    matrices = model.assemble_system(cantilever)
    released = solver.static_solve(cantilever,
                                   solver.LoadSet.at_node(cantilever.n_elements, 1e-6))
    state = solver.consistent_accelerations(
        model.BeamState(released.q, np.zeros_like(released.q),
                        np.zeros_like(released.q)),
        cantilever, solver.LoadSet.empty(), matrices=matrices)
    stepper = solver.TransientSolver(cantilever, solver.SolveOptions(dt=1e-6))
    e0 = solver.energy(state, cantilever, matrices)
    for _ in range(1000):
        state = stepper.step(state, solver.LoadSet.empty())
    drift = abs(solver.energy(state, cantilever, matrices) - e0) / e0
    checks.append(("energy drift over 1000 undamped steps", drift, 0.0, 0.001))

    failures = 0
    for name, got, want, tol in checks:
        if want == 0.0:
            ok = abs(got) <= tol
            detail = f"value {got: .3e}  limit {tol:g}"
        else:
            rel = abs(got - want) / abs(want)
            ok = rel <= tol
            detail = f"value {got: .6e}  oracle {want: .6e}  rel {rel:.2e}  tol {tol:g}"
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        failures += 0 if ok else 1
    print(f"{len(checks) - failures}/{len(checks)} checks passed")
    return 0 if failures == 0 else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="microbeam",
        description="Real-time haptic microbeam simulation service")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="host the WebSocket protocol endpoint")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--config", default=None)
    p.add_argument("--duration", type=float, default=None,
                   help="stop after this many seconds (default: run forever)")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("headless", help="run a scripted trace, emit CSV + stats")
    p.add_argument("--config", default=None)
    p.add_argument("--trace", default=None, help="stylus trace file")
    p.add_argument("--duration", type=float, required=True)
    p.add_argument("--out", default=None, help="per-tick CSV output path")
    p.add_argument("--record", default=None, help="write a session recording")
    p.add_argument("--no-realtime", action="store_true",
                   help="run unpaced (no deadline accounting)")
    p.set_defaults(fn=cmd_headless)

    p = sub.add_parser("verify", help="run the oracle suite, print pass/fail table")
    p.add_argument("--config", default=None)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("replay", help="re-run a recording deterministically")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", default=None, help="per-tick CSV output path")
    p.set_defaults(fn=cmd_replay)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except MicrobeamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
