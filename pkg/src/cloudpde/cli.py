"""Command-line interface: generate clouds, estimate boundaries, solve, verify.

Subcommands
-----------
generate           write a synthetic point cloud to CSV
estimate-boundary  run the boundary pipeline on a cloud, write estimates
build-operators    assemble S/M/B for a cloud, export them as COO text
solve              solve a registry problem (single eps or a sweep)
verify             run one of the named verification experiments

Common behavior: `--config file.json` preloads defaults that explicit flags
override; every run writes a JSON summary with the resolved configuration
embedded and floats printed to 9 significant digits.  Exit codes: 0 success,
2 configuration/usage error, 3 runtime failure.
"""

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import boundary as bd
from .operators import build_operators, export_coo
from .pointcloud import (build_neighbors, generate_interval_grid,
                         generate_square_grid, load_points_csv, mean_spacing,
                         sample_ellipse, sample_hemisphere, save_points_csv,
                         warp_interval_grid)
from .problems import PROBLEMS, run_problem, run_problem_sweep
from .kernels import truncation_radius
from . import verify as vf

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

GENERATORS = ("interval", "interval-warped", "square", "ellipse", "hemisphere")
VERIFY_CASES = ("derivative-terms", "laplacian-consistency",
                "boundary-integral", "energy-uniform", "energy-warped",
                "ellipse-curvature")


@dataclass
class RunConfig:
    """Resolved options for one CLI invocation (config file + flags)."""

    command: str = None
    input: str = None
    generator: str = None
    count: int = 5000
    m: int = None
    eps: float = None
    eps_sweep: str = None
    problem: str = None
    case: str = None
    tol: float = 1e-10
    seed: int = 0
    out: str = "."
    workers: int = 1
    budget: int = 5_000_000


def _sig9(obj):
    """Recursively round floats to 9 significant digits for JSON output."""
    if isinstance(obj, float):
        return float(f"{obj:.9g}")
    if isinstance(obj, dict):
        return {k: _sig9(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sig9(v) for v in obj]
    if isinstance(obj, np.floating):
        return float(f"{float(obj):.9g}")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_sig9(v) for v in obj.tolist()]
    return obj


def _write_summary(cfg, payload, name="summary"):
    os.makedirs(cfg.out, exist_ok=True)
    payload = dict(payload)
    payload["config"] = {k: v for k, v in asdict(cfg).items() if v is not None}
    path = os.path.join(cfg.out, f"{name}.json")
    with open(path, "w") as fh:
        json.dump(_sig9(payload), fh, indent=2)
        fh.write("\n")
    return path


def _parse_sweep(text):
    """Parse 'lo:hi:k' into a geometric sweep, or a comma list into values."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError("sweep must be lo:hi:count or a comma list")
        lo, hi, k = float(parts[0]), float(parts[1]), int(parts[2])
        if not (0 < lo < hi and k >= 2):
            raise ValueError("sweep needs 0 < lo < hi and count >= 2")
        return np.geomspace(lo, hi, k)
    vals = np.array([float(v) for v in text.split(",") if v.strip()])
    if len(vals) == 0 or np.any(vals <= 0):
        raise ValueError("sweep values must be positive")
    return vals


def _load_cloud(cfg):
    if cfg.input:
        if cfg.m is None:
            raise ValueError("--m is required when loading points from CSV")
        return load_points_csv(cfg.input, cfg.m)
    if cfg.generator:
        return _generate_cloud(cfg)
    raise ValueError("either --input or --generator is required")


def _generate_cloud(cfg):
    gen = cfg.generator
    if gen == "interval":
        return generate_interval_grid(cfg.count, -1.0, 1.0)
    if gen == "interval-warped":
        return warp_interval_grid(generate_interval_grid(cfg.count, -1.0, 1.0))
    if gen == "square":
        side = max(2, int(round(np.sqrt(cfg.count))) - 1)
        return generate_square_grid(side)
    if gen == "ellipse":
        return sample_ellipse(cfg.count, seed=cfg.seed)
    if gen == "hemisphere":
        return sample_hemisphere(cfg.count, seed=cfg.seed)
    raise ValueError(f"unknown generator: {gen}")


def _default_eps(cloud):
    return 3.0 * mean_spacing(cloud)


# ------------------------------------------------------------- subcommands

def _cmd_generate(cfg):
    if cfg.generator not in GENERATORS:
        raise ValueError(f"--generator must be one of {GENERATORS}")
    cloud = _generate_cloud(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    path = os.path.join(cfg.out, f"{cfg.generator}-{cloud.count}.csv")
    save_points_csv(cloud, path)
    _write_summary(cfg, {"points_file": path, "count": cloud.count,
                         "ambient_dim": cloud.ambient_dim,
                         "intrinsic_dim": cloud.intrinsic_dim,
                         "mean_spacing": mean_spacing(cloud)},
                   name=f"generate-{cfg.generator}")
    return EXIT_OK


def _cmd_estimate_boundary(cfg):
    cloud = _load_cloud(cfg)
    eps = cfg.eps if cfg.eps else _default_eps(cloud)
    neighbors = build_neighbors(cloud, truncation_radius(eps))
    est = bd.estimate_boundary(cloud, neighbors, eps)
    q_raw = bd.kde(cloud, neighbors, eps)
    q_hat = bd.corrected_density(q_raw, est.b, eps, cloud.intrinsic_dim)
    interior = bd.classify_dofs(est.b, eps)

    os.makedirs(cfg.out, exist_ok=True)
    path = os.path.join(cfg.out, "boundary-estimate.csv")
    header = ",".join(["b", "ratio", "q_raw", "q_hat", "interior"]
                      + [f"eta{i}" for i in range(cloud.ambient_dim)])
    arr = np.column_stack([est.b, est.ratio, q_raw, q_hat,
                           interior.astype(float), est.eta])
    np.savetxt(path, arr, delimiter=",", header=header, comments="")
    _write_summary(cfg, {
        "estimates_file": path, "count": cloud.count, "eps": eps,
        "interior_count": int(interior.sum()),
        "boundary_count": int((~interior).sum()),
        "median_b": float(np.median(est.b)),
    }, name="estimate-boundary")
    return EXIT_OK


def _cmd_build_operators(cfg):
    cloud = _load_cloud(cfg)
    eps = cfg.eps if cfg.eps else _default_eps(cloud)
    ops = build_operators(cloud, eps, keep_kernel=False)
    os.makedirs(cfg.out, exist_ok=True)
    paths = {}
    for label, mat in (("stiffness", ops.S), ("mass", ops.M),
                       ("boundary", ops.B)):
        paths[label] = os.path.join(cfg.out, f"{label}.txt")
        export_coo(mat, paths[label])
    _write_summary(cfg, {
        "files": paths, "count": cloud.count, "eps": eps,
        "stiffness_nnz": int(ops.S.nnz),
        "interior_count": int(ops.interior.sum()),
    }, name="build-operators")
    return EXIT_OK


def _cmd_solve(cfg):
    if cfg.problem not in PROBLEMS:
        raise ValueError(f"--problem must be one of {sorted(PROBLEMS)}")
    problem = PROBLEMS[cfg.problem]
    if cfg.eps_sweep:
        sweep = _parse_sweep(cfg.eps_sweep)
        best, all_runs = run_problem_sweep(problem, sweep, seed=cfg.seed,
                                           tol=cfg.tol)
        summary = {"best": {k: best[k] for k in
                            ("problem", "eps", "count", "l2_error",
                             "iterations")},
                   "sweep": all_runs}
        # the sweep drops operator sets to keep memory flat, so the point
        # coordinates for the export are regenerated (deterministic)
        u = best["u"]
        cloud_pts = problem.make_cloud(seed=cfg.seed).points
    else:
        out = run_problem(problem, eps=cfg.eps, seed=cfg.seed, tol=cfg.tol)
        summary = {k: out[k] for k in ("problem", "eps", "count", "l2_error",
                                       "iterations")}
        u, cloud_pts = out["u"], out["ops"].cloud.points
    os.makedirs(cfg.out, exist_ok=True)
    sol_path = os.path.join(cfg.out, f"{cfg.problem}-solution.csv")
    header = ",".join([f"x{i}" for i in range(cloud_pts.shape[1])] + ["u"])
    np.savetxt(sol_path, np.column_stack([cloud_pts, u]), delimiter=",",
               header=header, comments="")
    summary["solution_file"] = sol_path
    _write_summary(cfg, summary, name=f"solve-{cfg.problem}")
    return EXIT_OK


def _cmd_verify(cfg):
    if cfg.case not in VERIFY_CASES:
        raise ValueError(f"--case must be one of {VERIFY_CASES}")
    out = cfg.out
    if cfg.case == "derivative-terms":
        summary = vf.verify_derivative_terms(eps=cfg.eps or 0.1)
        _write_summary(cfg, summary, name="verify-derivative-terms")
    elif cfg.case == "laplacian-consistency":
        _, summary = vf.laplacian_consistency_experiment(out_dir=out)
        _write_summary(cfg, summary, name="verify-laplacian-consistency")
    elif cfg.case == "boundary-integral":
        _, summary = vf.boundary_integral_experiment(out_dir=out)
        _write_summary(cfg, summary, name="verify-boundary-integral")
    elif cfg.case in ("energy-uniform", "energy-warped"):
        grid = cfg.case.split("-")[1]
        _, summary = vf.dirichlet_energy_experiment(grid=grid, out_dir=out)
        _write_summary(cfg, summary, name=f"verify-energy-{grid}")
    elif cfg.case == "ellipse-curvature":
        _, _, summary = vf.ellipse_curvature_experiment(
            eps=cfg.eps or 0.1, total_samples=cfg.budget, seed=cfg.seed,
            out_dir=out)
        _write_summary(cfg, summary, name="verify-ellipse-curvature")
    return EXIT_OK


# ------------------------------------------------------------------ parsing

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="cloudpde",
        description="Mesh-free PDE solving on point-sampled manifolds "
                    "with boundary")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file of defaults; flags override")
        p.add_argument("--seed", type=int, help="RNG seed (default 0)")
        p.add_argument("--out", help="output directory (default .)")
        p.add_argument("--workers", type=int,
                       help="worker processes (reserved; current backends "
                            "are single-process)")

    p = sub.add_parser("generate", help="write a synthetic point cloud")
    p.add_argument("--generator", choices=GENERATORS)
    p.add_argument("--count", type=int, help="number of points (default 5000)")
    common(p)

    for name, helptext in (("estimate-boundary",
                            "estimate boundary distance/direction/density"),
                           ("build-operators",
                            "assemble and export S, M, B")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--input", help="points CSV (one point per row)")
        p.add_argument("--generator", choices=GENERATORS,
                       help="generate instead of loading")
        p.add_argument("--count", type=int)
        p.add_argument("--m", type=int, help="intrinsic dimension of the cloud")
        p.add_argument("--eps", type=float, help="kernel bandwidth "
                       "(default: 3 x mean spacing)")
        common(p)

    p = sub.add_parser("solve", help="solve a registry problem")
    p.add_argument("--problem", required=True,
                   help=f"one of {sorted(PROBLEMS)}")
    p.add_argument("--eps", type=float)
    p.add_argument("--eps-sweep", dest="eps_sweep",
                   help="lo:hi:count (geometric) or comma list; "
                        "reports the best run")
    p.add_argument("--tol", type=float, help="CG tolerance (default 1e-10)")
    common(p)

    p = sub.add_parser("verify", help="run a verification experiment")
    p.add_argument("--case", required=True, help=f"one of {VERIFY_CASES}")
    p.add_argument("--eps", type=float)
    p.add_argument("--budget", type=int,
                   help="Monte Carlo sample budget (ellipse case)")
    common(p)
    return parser


def _resolve_config(args):
    cfg = RunConfig()
    file_values = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            file_values = json.load(fh)
        unknown = set(file_values) - {f.name for f in fields(RunConfig)}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
    for key, val in file_values.items():
        setattr(cfg, key, val)
    for f in fields(RunConfig):
        val = getattr(args, f.name, None)
        if val is not None:
            setattr(cfg, f.name, val)
    return cfg


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {"generate": _cmd_generate,
                "estimate-boundary": _cmd_estimate_boundary,
                "build-operators": _cmd_build_operators,
                "solve": _cmd_solve,
                "verify": _cmd_verify}
    try:
        cfg = _resolve_config(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return handlers[args.command](cfg)
    except (ValueError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:             # solver/runtime failures
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
