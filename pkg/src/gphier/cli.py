"""Command-line experiment runner.

Subcommands: run, quasinorm, estimate, converge, verify.
Exit codes: 0 success, 2 configuration or input error, 3 budget error,
4 verification failure.

Output files (under ``--out``/``output.dir``):

* run       ``trajectory.gpht``, ``run_report.json``
* estimate  ``estimate.csv`` (columns ``k,j,sample,ratio``; last row
            ``summary,,<samples>,<Chat>``), ``estimate.json``
* converge  ``converge.csv`` (columns ``m,increment,ratio,envelope``),
            ``converge.json``
* verify    ``verify.json``

Every JSON report carries the config hash, the snapshot format versions and
the seeds.  Only ``run_report.json`` holds a wall-clock field.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .config import ExperimentConfig, load_config
from .errors import BudgetError, ConfigError, GPHierError, SnapshotFormatError
from .estimates import (
    convergence_csv,
    convergence_report,
    estimate_constant,
)
from .grid import make_grid
from .hierarchy import Hierarchy, node_quasi_norms, quasi_norm
from .io import FORMAT_VERSIONS, read_any, read_trajectory, write_trajectory
from .nls import factorized_hierarchy, split_step
from .picard import (
    ClosureSpec,
    direct_solve,
    picard_solve,
    relative_level_errors,
    theorem_horizon,
    verify_solution,
)
from .trajectory import TimeGrid

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_VERIFY = 4
REPORT_VERSION = 1


class VerificationFailure(GPHierError):
    pass


# helpers ------------------------------------------------------------------------

def _clean(obj):
    """JSON-safe copy: non-finite floats become strings, tuples become lists."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _dump(path: Path, obj) -> str:
    text = json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"
    path.write_text(text)
    return text


def _provenance(cfg: ExperimentConfig) -> dict:
    return {
        "config_hash": cfg.hash(),
        "config": cfg.effective(),
        "format_versions": dict(FORMAT_VERSIONS, report=REPORT_VERSION),
        "package_version": __version__,
        "seeds": {"master": cfg.seed, "rule": "numpy SeedSequence(master).spawn(samples)"},
        "workers": cfg.workers,
    }


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def initial_wavefunction(cfg: ExperimentConfig):
    if cfg.modes is None:
        return None
    return cfg.grid.wavefunction(cfg.modes)


def initial_hierarchy(cfg: ExperimentConfig) -> Hierarchy:
    phi = initial_wavefunction(cfg)
    if phi is not None:
        return Hierarchy.factorized(phi, cfg.K, cfg.model, cfg.grid, cfg.representation)
    paths = cfg.snapshot
    if len(paths) == 1 and Path(paths[0]).read_bytes()[:4] == b"GPHT":
        traj = read_trajectory(paths[0])
        kernels_ = [traj.kernel(k, 0) for k in range(1, traj.K + 1)]
    else:
        kernels_ = [read_any(p) for p in paths]
    if len(kernels_) != cfg.K:
        raise ConfigError(f"initial.snapshot: holds {len(kernels_)} levels, truncation.K is {cfg.K}")
    if kernels_[0].grid != cfg.grid:
        raise ConfigError("initial.snapshot: grid differs from grid section")
    return Hierarchy(kernels_, cfg.model, cfg.grid)


def resolve_constant(cfg: ExperimentConfig) -> tuple[float, dict]:
    if cfg.Chat is not None:
        return cfg.Chat, {"source": "inline", "Chat": cfg.Chat}
    if cfg.seed is None:
        raise ConfigError("seed: required to estimate the collision constant")
    est = estimate_constant(
        cfg.model, cfg.grid, samples=cfg.samples, seed=cfg.seed, levels=cfg.levels, workers=cfg.workers
    )
    return est.Chat, {"source": "estimate", **est.summary()}


def resolve_horizon(cfg: ExperimentConfig, gamma0: Hierarchy, need_constant: bool = False):
    """Return (T, info, Chat, constant_info)."""
    Chat, cinfo = (None, None)
    if cfg.theorem_horizon or need_constant or cfg.Chat is not None:
        Chat, cinfo = resolve_constant(cfg)
    q = gamma0.quasi_norm().value
    info = {"quasi_norm_initial": q}
    if cfg.theorem_horizon:
        horizon = theorem_horizon(Chat, q, cfg.model.interaction)
        info["horizon"] = horizon
        if math.isinf(horizon):
            if cfg.fallback_T is None:
                raise ConfigError("time.fallback_T: required when the theorem horizon is infinite")
            T = cfg.fallback_T
            info["substituted"] = True
        else:
            T = horizon
    else:
        T = cfg.T
        if Chat is not None:
            info["horizon"] = theorem_horizon(Chat, q, cfg.model.interaction)
    info["T"] = T
    return T, info, Chat, cinfo


def build_closure(cfg: ExperimentConfig, T: float, M: int, steps_per_node: int | None = None):
    phi = initial_wavefunction(cfg)
    wave = None
    if phi is not None and (cfg.closure == "oracle" or cfg.solver == "nls"):
        per = steps_per_node if steps_per_node is not None else cfg.nls_steps // cfg.M
        wave = split_step(phi, cfg.model, T, M * per, cfg.grid, dealias=cfg.dealias)
    closure = ClosureSpec.oracle(wave) if cfg.closure == "oracle" else ClosureSpec.zero()
    return closure, wave


# subcommands ---------------------------------------------------------------------

def cmd_run(cfg: ExperimentConfig) -> dict:
    t_start = time.perf_counter()
    gamma0 = initial_hierarchy(cfg)
    T, hinfo, Chat, cinfo = resolve_horizon(cfg, gamma0)
    tg = TimeGrid(T, cfg.M)
    closure, wave = build_closure(cfg, T, cfg.M)
    solver_info = {"kind": cfg.solver}
    if cfg.solver == "picard":
        res = picard_solve(gamma0, cfg.model, tg, closure, cfg.max_depth, cfg.tol)
        traj = res.trajectory
        solver_info.update(depth=res.depth, converged=res.converged, increments=res.increments)
    elif cfg.solver == "direct":
        traj = direct_solve(gamma0, cfg.model, tg, closure)
    else:
        traj = factorized_hierarchy(wave, cfg.K, cfg.representation, tg)
    out = _out_dir(cfg)
    write_trajectory(out / "trajectory.gpht", traj)
    qn = node_quasi_norms(traj.norm_table())
    try:
        residual = verify_solution(traj, gamma0, cfg.model, closure).as_dict()
        for row in residual["levels"]:
            row.pop("per_node")
    except BudgetError as exc:
        residual = {"skipped": str(exc)}
    report = {
        **_provenance(cfg),
        "command": "run",
        "backend": kernels.BACKEND,
        "closure": closure.kind,
        "solver": solver_info,
        "time": {"T": T, "M": cfg.M, **hinfo},
        "constant": cinfo,
        "Chat": Chat,
        "quasi_norm_per_node": qn.tolist(),
        "quasi_norm_max": float(np.max(qn)),
        "residual": residual,
    }
    if wave is not None and cfg.solver != "nls" and closure.kind == "oracle":
        ref = factorized_hierarchy(wave, cfg.K, "dense", tg)
        err = relative_level_errors(traj, ref)
        report["oracle_error"] = {"per_level": err.tolist(), "max": float(np.max(err))}
    report["wall_time_s"] = time.perf_counter() - t_start
    _dump(out / "run_report.json", report)
    return report


def cmd_quasinorm(paths, alpha: float | None = None, node: int | None = None, rel_tol: float = 1e-12) -> dict:
    """Quasi-norm of a level set (GPHK/GPHS files) or of a GPHT trajectory."""
    paths = [Path(p) for p in paths]
    if not paths:
        raise ConfigError("quasinorm: no snapshot paths given")
    if len(paths) == 1 and paths[0].read_bytes()[:4] == b"GPHT":
        traj = read_trajectory(paths[0])
        alpha = traj.model.alpha if alpha is None else alpha
        table = traj.norm_table(alpha)
        nodes = range(len(traj.tg)) if node is None else [node]
        results = [quasi_norm(table[:, i], rel_tol).as_dict() for i in nodes]
        return {"alpha": alpha, "nodes": list(nodes), "results": results}
    from .trajectory import dense_norm

    alpha = 1.0 if alpha is None else alpha
    gs = [read_any(p) for p in paths]
    for k, g in enumerate(gs, start=1):
        if g.k != k:
            raise ConfigError(f"quasinorm: file {paths[k - 1]} holds level {g.k}, expected {k}")
    norms = [dense_norm(g, alpha) for g in gs]
    res = quasi_norm(norms, rel_tol).as_dict()
    res["alpha"] = alpha
    res["norms"] = norms
    return res


def cmd_estimate(cfg: ExperimentConfig) -> dict:
    if cfg.seed is None:
        raise ConfigError("seed: required for estimate runs")
    out = _out_dir(cfg)
    est = estimate_constant(
        cfg.model, cfg.grid, samples=cfg.samples, seed=cfg.seed, levels=cfg.levels, workers=cfg.workers
    )
    (out / "estimate.csv").write_text(est.to_csv())
    summary = {**_provenance(cfg), "command": "estimate", **est.summary()}
    if cfg.refine:
        table = {}
        for N in cfg.refine:
            grid = make_grid(cfg.grid.n, N)
            table[str(N)] = estimate_constant(
                cfg.model, grid, samples=cfg.samples, seed=cfg.seed, levels=cfg.levels, workers=cfg.workers
            ).Chat
        Ns = sorted(cfg.refine)
        first = table[str(Ns[0])]
        summary["refinement"] = table
        summary["refinement_ratio"] = table[str(Ns[-1])] / first if first > 0 else math.nan
    _dump(out / "estimate.json", summary)
    return summary


def cmd_converge(cfg: ExperimentConfig) -> dict:
    gamma0 = initial_hierarchy(cfg)
    T, hinfo, Chat, cinfo = resolve_horizon(cfg, gamma0, need_constant=True)
    tg = TimeGrid(T, cfg.M)
    closure, _ = build_closure(cfg, T, cfg.M)
    rows = convergence_report(gamma0, cfg.model, tg, closure, cfg.mmax, Chat)
    out = _out_dir(cfg)
    (out / "converge.csv").write_text(convergence_csv(rows))
    summary = {
        **_provenance(cfg),
        "command": "converge",
        "closure": closure.kind,
        "time": {"T": T, "M": cfg.M, **hinfo},
        "Chat": Chat,
        "constant": cinfo,
        "rows": [r.__dict__ for r in rows],
    }
    _dump(out / "converge.json", summary)
    return summary


def cmd_verify(cfg: ExperimentConfig, snapshot) -> dict:
    traj = read_trajectory(snapshot)
    gamma0 = initial_hierarchy(cfg)
    if traj.K != gamma0.K or traj.grid != gamma0.grid:
        raise ConfigError("verify: snapshot does not match the configured grid and truncation")
    closure, _ = build_closure(cfg, traj.tg.T, traj.tg.M)
    rep = verify_solution(traj, gamma0, traj.model, closure)
    summary = {
        **_provenance(cfg),
        "command": "verify",
        "snapshot": str(snapshot),
        "tolerance": cfg.verify_tolerance,
        "residual": rep.as_dict(),
        "passed": rep.max_relative <= cfg.verify_tolerance,
    }
    _dump(_out_dir(cfg) / "verify.json", summary)
    if not summary["passed"]:
        raise VerificationFailure(
            f"relative residual {rep.max_relative:.3e} exceeds tolerance {cfg.verify_tolerance:.3e}"
        )
    return summary


# entry point ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gphier", description="Truncated GP hierarchy simulator")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="YAML experiment config")
        sp.add_argument("--workers", type=int, default=None, help="cap on worker processes")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")

    common(sub.add_parser("run", help="solve and write a trajectory snapshot and report"))
    qn = sub.add_parser("quasinorm", help="quasi-norm of snapshot files")
    qn.add_argument("paths", nargs="+", help="GPHK/GPHS files for levels 1..K, or one GPHT file")
    qn.add_argument("--alpha", type=float, default=None)
    qn.add_argument("--node", type=int, default=None, help="GPHT node index (default: all)")
    qn.add_argument("--rel-tol", type=float, default=1e-12)
    common(sub.add_parser("estimate", help="estimate the collision bound constant"))
    common(sub.add_parser("converge", help="Picard increment table"))
    vp = sub.add_parser("verify", help="mild-form residual of a GPHT snapshot")
    common(vp)
    vp.add_argument("snapshot")
    return p


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if args.seed is not None or args.workers is not None or args.out is not None:
        cfg = cfg.with_overrides(seed=args.seed, workers=args.workers, out_dir=args.out)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "quasinorm":
            result = cmd_quasinorm(args.paths, args.alpha, args.node, args.rel_tol)
        else:
            cfg = _config(args)
            if args.command == "run":
                result = cmd_run(cfg)
            elif args.command == "estimate":
                result = cmd_estimate(cfg)
            elif args.command == "converge":
                result = cmd_converge(cfg)
            else:
                result = cmd_verify(cfg, args.snapshot)
    except (ConfigError, SnapshotFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetError as exc:
        print(f"budget error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except VerificationFailure as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    if args.command == "quasinorm":
        print(json.dumps(_clean(result), indent=2, sort_keys=True))
    else:
        print(json.dumps(_clean(_brief(result)), indent=2, sort_keys=True))
    return EXIT_OK


def _brief(report: dict) -> dict:
    skip = {"config", "quasi_norm_per_node", "rows", "per_slot"}
    return {k: v for k, v in report.items() if k not in skip}


if __name__ == "__main__":
    sys.exit(main())
