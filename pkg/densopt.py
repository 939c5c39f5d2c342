"""
densopt batch driver

    densopt.py run --config presets/cantilever2d.txt [--set key=value ...]
    densopt.py gradcheck --problem cantilever2d --cells 8,5 [--filter density] [--h 1e-6]
    densopt.py bench-assembly --problem cantilever3d --cells 60,20,4 --iters 10

Exit codes: 0 converged / PASS, 1 configuration error, 2 stopped at max_iter, 3 solver failure, 4 check failed.
"""

import argparse
import os
import sys

import essentials
from essentials import ConfigError, OptimizationError, SolverError

# BLAS pools read their thread count when numpy loads
essentials.export_thread_env()

import numpy as np

import fem
import filters
import log
import options
import optimize
import verify
import vtkio
from libs import logger
from material import SimpMaterial
from mesh import build_dof_map, build_uniform_grid, triangulate_box
from problems import problem_by_name, problem_dim

__version__ = "0.1.3"

"""
0.1.0 : run
0.1.1 : gradcheck
0.1.2 : bench-assembly, bench_assembly.csv
0.1.3 : snapshots, config echo in the summary
"""

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_MAX_ITER = 2
EXIT_SOLVER = 3
EXIT_CHECK_FAILED = 4

BENCH_SEED = 1234


def parse_cells(text):
    """'160,100', '160x100' or '60 20 4' to a list of ints."""
    tokens = text.replace("x", ",").replace(" ", ",").split(",")
    try:
        cells = [int(token) for token in tokens if token]
    except ValueError:
        raise ConfigError("cells", f"cannot parse {text!r}")
    if not cells or any(n < 1 for n in cells):
        raise ConfigError("cells", f"need positive cell counts, got {text!r}")
    return cells


def build_mesh(config, definition):
    dim = len(config.cells)
    if config.mesh == "tri":
        return triangulate_box(config.cells[0], config.cells[1], definition.box)
    return build_uniform_grid(dim, config.cells, config.spacing, [0.0] * dim)


def build_filter_op(config, mesh):
    if config.filter == filters.NONE:
        return None
    return filters.build_filter(mesh, config.rmin, config.filter, beta=config.beta0, beta_max=config.beta_max,
                                continuation_iter=config.continuation_iter, workers=essentials.thread_count())


def write_summary(path, config, history, mesh):
    timing = history.timing_breakdown()
    lines = [
        f"densopt {__version__}",
        f"problem = {config.problem}",
        f"mesh = {mesh}",
        f"compliance = {history.final_compliance:.4f}",
        f"volume_fraction = {history.final_volume_fraction:.4f}",
        f"iterations = {len(history)}",
        f"stop_reason = {history.stop_reason}",
        f"total_seconds = {timing['total']:.3f}",
        f"first_iteration_seconds = {timing['first_iteration']:.3f}",
        f"average_iteration_seconds = {timing['average_iteration']:.3f}",
        f"first_assembly_seconds = {timing['first_assembly']:.4f}",
        f"average_assembly_seconds = {timing['average_assembly']:.4f}",
        f"total_assembly_seconds = {timing['total_assembly']:.3f}",
        f"total_solve_seconds = {timing['total_solve']:.3f}",
        "",
        "[config]",
    ] + config.echo()
    with open(path, "w", newline="\n") as fp:
        fp.write("\n".join(lines) + "\n")


def cmd_run(args, app_log):
    config = options.Get().read(args.config, args.set)
    app_log = log.log(config.log_file, config.debug_level, config.terminal_output)
    run_logger = logger.Logger(app_log)

    definition = problem_by_name(config.problem, config.cells, config.spacing, T=config.load)
    mesh = build_mesh(config, definition)
    mat = SimpMaterial.for_dim(mesh.dim, E0=config.E0, Emin=config.Emin, p=config.penal, nu=config.nu)
    filter_op = build_filter_op(config, mesh)
    model = optimize.ComplianceModel(definition, mesh, mat, assembly=config.assembly, solver=config.solver,
                                     app_log=run_logger.app_log)
    settings = optimize.OptimizationSettings.from_config(config)
    os.makedirs(config.output_dir, exist_ok=True)

    def snapshot(iteration, field):
        if config.snapshot_every and iteration % config.snapshot_every == 0:
            vtkio.write_density(os.path.join(config.output_dir, f"density_iter_{iteration}.vtk"), mesh, field.physical)

    rho, history, model = optimize.run_optimization(definition, mesh, mat, filter_op, settings, model=model,
                                                    app_log=run_logger.app_log, callback=snapshot)
    _, physical = filters.physical_density(filter_op, rho)
    history.write_csv(os.path.join(config.output_dir, "history.csv"))
    vtkio.write_density(os.path.join(config.output_dir, "density_final.vtk"), mesh, physical)
    write_summary(os.path.join(config.output_dir, "summary.txt"), config, history, mesh)
    run_logger.app_log.info(f"Status: outputs written to {config.output_dir}")
    return EXIT_OK if history.stop_reason == optimize.CONVERGED else EXIT_MAX_ITER


def cmd_gradcheck(args, app_log):
    cells = parse_cells(args.cells)
    if len(cells) != problem_dim(args.problem):
        raise ConfigError("cells", f"{args.problem} needs {problem_dim(args.problem)} cell counts, got {cells}")
    if args.filter not in filters.KINDS:
        raise ConfigError("filter", f"{args.filter!r} is not one of {', '.join(filters.KINDS)}")
    if args.h <= 0:
        raise ConfigError("h", "must be positive")
    report = verify.check_sensitivity_chain(args.problem, cells, args.filter, r_min=args.rmin, beta=args.beta,
                                            h=args.h, corrupt=args.corrupt, app_log=app_log)
    for line in report.lines():
        print(line)
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def cmd_bench_assembly(args, app_log):
    cells = parse_cells(args.cells)
    dim = problem_dim(args.problem)
    if len(cells) != dim:
        raise ConfigError("cells", f"{args.problem} needs {dim} cell counts, got {cells}")
    if args.iters < 1:
        raise ConfigError("iters", "must be >= 1")
    mesh = build_uniform_grid(dim, cells, [1.0] * dim, [0.0] * dim)
    mat = SimpMaterial.for_dim(dim)
    dofmap = build_dof_map(mesh)
    rho = np.random.default_rng(BENCH_SEED).uniform(0.0, 1.0, mesh.n_elements)

    # agreement first, on fresh assemblers so the timings below start cold
    reference = fem.Assembler(mesh, dofmap, mat, fem.STANDARD).assemble(rho)
    scale = abs(reference).max()
    worst = 0.0
    for method in (fem.FAST, fem.SYMBOLIC):
        K = fem.Assembler(mesh, dofmap, mat, method).assemble(rho)
        worst = max(worst, abs(K - reference).max() / scale)

    rows = []
    for method in fem.ASSEMBLY_METHODS:
        assembler = fem.Assembler(mesh, dofmap, mat, method, app_log=app_log)
        for _ in range(args.iters):
            assembler.assemble(rho)
        watch = assembler.stopwatch
        steady = (watch.total - watch.first) / (watch.count - 1) if watch.count > 1 else watch.first
        rows.append((method, watch.first, steady, assembler.quadrature_evaluations))

    print(f"{'method':<10} {'first [s]':>12} {'average [s]':>12} {'quadrature':>11}")
    for method, first, average, evaluations in rows:
        print(f"{method:<10} {first:12.4f} {average:12.4f} {evaluations:11d}")
    print(f"max relative difference = {worst:.3e}")
    os.makedirs(args.output_dir, exist_ok=True)
    with open(os.path.join(args.output_dir, "bench_assembly.csv"), "w", newline="\n") as fp:
        fp.write("method,first_seconds,average_seconds,quadrature_evaluations\n")
        for method, first, average, evaluations in rows:
            fp.write(f"{method},{first!r},{average!r},{evaluations}\n")
    if worst > 1e-12:
        app_log.error(f"Assembly methods disagree, max relative difference {worst:.3e}")
        return EXIT_CHECK_FAILED
    return EXIT_OK


def make_parser():
    parser = argparse.ArgumentParser(description="densopt: SIMP topology optimization")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run one optimization")
    run.add_argument("--config", help="Run config, overrides config.txt key by key")
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="Override one config key")
    run.set_defaults(handler=cmd_run)

    gradcheck = commands.add_parser("gradcheck", help="Analytic vs finite difference compliance gradient")
    gradcheck.add_argument("--problem", default="cantilever2d")
    gradcheck.add_argument("--cells", default="8,5")
    gradcheck.add_argument("--filter", default=filters.NONE)
    gradcheck.add_argument("--h", type=float, default=verify.DEFAULT_H)
    gradcheck.add_argument("--rmin", type=float, default=2.0)
    gradcheck.add_argument("--beta", type=float, default=8.0)
    gradcheck.add_argument("--corrupt", type=float, default=1.0, help=argparse.SUPPRESS)
    gradcheck.set_defaults(handler=cmd_gradcheck)

    bench = commands.add_parser("bench-assembly", help="Time standard, fast and symbolic assembly")
    bench.add_argument("--problem", default="cantilever3d")
    bench.add_argument("--cells", default="60,20,4")
    bench.add_argument("--iters", type=int, default=10)
    bench.add_argument("--output-dir", default="output")
    bench.set_defaults(handler=cmd_bench_assembly)
    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    app_log = log.log(None, "INFO", False)
    try:
        return args.handler(args, app_log)
    except ConfigError as e:
        app_log.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except SolverError as e:
        app_log.error(f"Solver failure: {e}")
        return EXIT_SOLVER
    except OptimizationError as e:
        app_log.error(f"Optimization failed: {e}")
        if isinstance(e.error, SolverError):
            return EXIT_SOLVER
        return EXIT_CONFIG if isinstance(e.error, ValueError) else EXIT_SOLVER
    except ValueError as e:
        app_log.error(f"Invalid input: {e}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
