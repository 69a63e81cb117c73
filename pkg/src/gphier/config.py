"""Experiment configuration (YAML) with field-path validation.

Schema (defaults in brackets)::

    grid:        {n: 1|2, N: even >= 4}
    model:       {interaction: cubic|quintic [cubic], mu: +1|-1 [1], alpha: > 0 [1.0]}
    initial:     exactly one of
                   modes:    [{p: int | [int, int], c: number | [re, im]}, ...]
                   snapshot: path to a GPHT file (node 0 is used) or a list
                             of GPHK/GPHS paths for levels 1..K
    truncation:  {K: >= 1}
    representation: {kind: dense|separable [dense], rank_cap: [4096]}
    time:        {T: > 0 | "theorem-horizon", M: >= 1, fallback_T: used when the horizon is infinite}
    closure:     {kind: zero|oracle [oracle for modes, else zero],
                  nls_steps: multiple of M [64*M], dealias: bool [false]}
    solver:      {kind: picard|direct|nls [picard], max_depth: [32], tol: [1e-8]}
    estimate:    {Chat: inline constant, first: bool [false], samples: >= 10 [10],
                  levels: [[1, 2]], refine: list of N []}
    converge:    {mmax: >= 1 [10]}
    verify:      {tolerance: relative residual bound [1e-6]}
    seed:        integer (required by estimate and by estimate-first runs)
    workers:     >= 1 [1]
    output:      {dir: [out]}
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import yaml

from .errors import ConfigError
from .grid import GridSpec
from .kernel import ModelSpec
from .lowrank import DEFAULT_RANK_CAP

THEOREM_HORIZON = "theorem-horizon"
_TOP_KEYS = {
    "grid", "model", "initial", "truncation", "representation", "time", "closure",
    "solver", "estimate", "converge", "verify", "seed", "workers", "output",
}


def _fail(path: str, msg: str):
    raise ConfigError(f"{path}: {msg}")


def _section(raw: dict, key: str, required: bool = False) -> dict:
    val = raw.get(key)
    if val is None:
        if required:
            _fail(key, "missing required section")
        return {}
    if not isinstance(val, dict):
        _fail(key, f"expected a mapping, got {type(val).__name__}")
    return val


def _int(sec: dict, path: str, key: str, default=None, lo=None):
    val = sec.get(key, default)
    full = f"{path}.{key}"
    if val is None:
        _fail(full, "missing required value")
    if isinstance(val, bool) or not isinstance(val, int):
        _fail(full, f"expected an integer, got {val!r}")
    if lo is not None and val < lo:
        _fail(full, f"must be >= {lo}, got {val}")
    return val


def _float(sec: dict, path: str, key: str, default=None, positive=False):
    val = sec.get(key, default)
    full = f"{path}.{key}"
    if val is None:
        _fail(full, "missing required value")
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        _fail(full, f"expected a number, got {val!r}")
    val = float(val)
    if positive and not val > 0:
        _fail(full, f"must be positive, got {val}")
    return val


def _choice(sec: dict, path: str, key: str, options, default=None):
    val = sec.get(key, default)
    if val not in options:
        _fail(f"{path}.{key}", f"must be one of {', '.join(map(str, options))}, got {val!r}")
    return val


def _unknown(sec: dict, path: str, allowed):
    extra = sorted(set(sec) - set(allowed))
    if extra:
        _fail(f"{path}.{extra[0]}" if path else extra[0], "unknown key")


def _complex(val, path):
    if isinstance(val, bool):
        _fail(path, f"expected a number or [re, im], got {val!r}")
    if isinstance(val, (int, float)):
        return complex(val)
    if isinstance(val, (list, tuple)) and len(val) == 2 and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in val
    ):
        return complex(val[0], val[1])
    _fail(path, f"expected a number or [re, im], got {val!r}")


@dataclass
class ExperimentConfig:
    grid: GridSpec
    model: ModelSpec
    modes: list | None
    snapshot: list | None
    K: int
    representation: str
    rank_cap: int
    T: float | str
    M: int
    fallback_T: float | None
    closure: str
    nls_steps: int
    dealias: bool
    solver: str
    max_depth: int
    tol: float
    Chat: float | None
    estimate_first: bool
    samples: int
    levels: tuple
    refine: tuple
    mmax: int
    verify_tolerance: float
    seed: int | None
    workers: int
    out_dir: str
    raw: dict

    @property
    def theorem_horizon(self) -> bool:
        return self.T == THEOREM_HORIZON

    def effective(self) -> dict:
        """Normalized mapping used for hashing and report embedding."""
        modes = None
        if self.modes is not None:
            modes = [{"p": list(p), "c": [c.real, c.imag]} for p, c in self.modes]
        return {
            "grid": {"n": self.grid.n, "N": self.grid.N},
            "model": {"interaction": self.model.interaction, "mu": self.model.mu, "alpha": self.model.alpha},
            "initial": {"modes": modes, "snapshot": self.snapshot},
            "truncation": {"K": self.K},
            "representation": {"kind": self.representation, "rank_cap": self.rank_cap},
            "time": {"T": self.T, "M": self.M, "fallback_T": self.fallback_T},
            "closure": {"kind": self.closure, "nls_steps": self.nls_steps, "dealias": self.dealias},
            "solver": {"kind": self.solver, "max_depth": self.max_depth, "tol": self.tol},
            "estimate": {
                "Chat": self.Chat,
                "first": self.estimate_first,
                "samples": self.samples,
                "levels": list(self.levels),
                "refine": list(self.refine),
            },
            "converge": {"mmax": self.mmax},
            "verify": {"tolerance": self.verify_tolerance},
            "seed": self.seed,
            "workers": self.workers,
        }

    def hash(self) -> str:
        blob = json.dumps(self.effective(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_overrides(self, seed=None, workers=None, out_dir=None) -> "ExperimentConfig":
        raw = copy.deepcopy(self.raw)
        if seed is not None:
            raw["seed"] = seed
        if workers is not None:
            raw["workers"] = workers
        if out_dir is not None:
            raw.setdefault("output", {})
            raw["output"] = dict(raw["output"] or {}, dir=str(out_dir))
        return parse_config(raw, self._base)

    _base: Path | None = None


def _parse_modes(raw_modes, n: int) -> list:
    path = "initial.modes"
    if not isinstance(raw_modes, list) or not raw_modes:
        _fail(path, "expected a non-empty list of {p, c} entries")
    out = []
    for i, m in enumerate(raw_modes):
        mp = f"{path}[{i}]"
        if not isinstance(m, dict) or "p" not in m or "c" not in m:
            _fail(mp, "expected a mapping with keys p and c")
        _unknown(m, mp, ("p", "c"))
        p = m["p"]
        p = [p] if isinstance(p, int) and not isinstance(p, bool) else p
        if not isinstance(p, list) or len(p) != n or not all(isinstance(v, int) and not isinstance(v, bool) for v in p):
            _fail(f"{mp}.p", f"expected {n} integer frequency component(s), got {m['p']!r}")
        out.append((tuple(p), _complex(m["c"], f"{mp}.c")))
    return out


def parse_config(raw, base: Path | None = None) -> ExperimentConfig:
    if not isinstance(raw, dict):
        _fail("<root>", "configuration must be a mapping")
    _unknown(raw, "", _TOP_KEYS)

    g = _section(raw, "grid", required=True)
    _unknown(g, "grid", ("n", "N"))
    n = _int(g, "grid", "n")
    N = _int(g, "grid", "N")
    try:
        grid = GridSpec(n, N)
    except ConfigError as exc:
        _fail("grid", str(exc))

    m = _section(raw, "model")
    _unknown(m, "model", ("interaction", "mu", "alpha"))
    interaction = _choice(m, "model", "interaction", ("cubic", "quintic"), "cubic")
    mu = _choice(m, "model", "mu", (1, -1), 1)
    alpha = _float(m, "model", "alpha", 1.0, positive=True)
    model = ModelSpec(mu, interaction, alpha)

    ini = _section(raw, "initial")
    _unknown(ini, "initial", ("modes", "snapshot"))
    has_modes = ini.get("modes") is not None
    has_snap = ini.get("snapshot") is not None
    if has_modes == has_snap:
        _fail("initial", "exactly one of initial.modes or initial.snapshot is required")
    modes = _parse_modes(ini["modes"], n) if has_modes else None
    snapshot = None
    if has_snap:
        snap = ini["snapshot"]
        snap = [snap] if isinstance(snap, str) else snap
        if not isinstance(snap, list) or not all(isinstance(s, str) for s in snap) or not snap:
            _fail("initial.snapshot", "expected a path or a list of paths")
        snapshot = [str((base / s) if base is not None and not Path(s).is_absolute() else s) for s in snap]

    tr = _section(raw, "truncation", required=True)
    _unknown(tr, "truncation", ("K",))
    K = _int(tr, "truncation", "K", lo=1)

    rep = _section(raw, "representation")
    _unknown(rep, "representation", ("kind", "rank_cap"))
    representation = _choice(rep, "representation", "kind", ("dense", "separable"), "dense")
    rank_cap = _int(rep, "representation", "rank_cap", DEFAULT_RANK_CAP, lo=1)

    tm = _section(raw, "time", required=True)
    _unknown(tm, "time", ("T", "M", "fallback_T"))
    T = tm.get("T")
    if T != THEOREM_HORIZON:
        T = _float(tm, "time", "T", positive=True)
    M = _int(tm, "time", "M", lo=1)
    fallback_T = None
    if tm.get("fallback_T") is not None:
        fallback_T = _float(tm, "time", "fallback_T", positive=True)

    cl = _section(raw, "closure")
    _unknown(cl, "closure", ("kind", "nls_steps", "dealias"))
    closure = _choice(cl, "closure", "kind", ("zero", "oracle"), "oracle" if has_modes else "zero")
    nls_steps = _int(cl, "closure", "nls_steps", 64 * M, lo=1)
    if nls_steps % M:
        _fail("closure.nls_steps", f"must be a multiple of time.M={M}, got {nls_steps}")
    dealias = cl.get("dealias", False)
    if not isinstance(dealias, bool):
        _fail("closure.dealias", f"expected a boolean, got {dealias!r}")

    so = _section(raw, "solver")
    _unknown(so, "solver", ("kind", "max_depth", "tol"))
    solver = _choice(so, "solver", "kind", ("picard", "direct", "nls"), "picard")
    max_depth = _int(so, "solver", "max_depth", 32, lo=0)
    tol = _float(so, "solver", "tol", 1e-8, positive=True)

    es = _section(raw, "estimate")
    _unknown(es, "estimate", ("Chat", "first", "samples", "levels", "refine"))
    Chat = None
    if es.get("Chat") is not None:
        Chat = _float(es, "estimate", "Chat", positive=True)
    estimate_first = es.get("first", False)
    if not isinstance(estimate_first, bool):
        _fail("estimate.first", f"expected a boolean, got {estimate_first!r}")
    samples = _int(es, "estimate", "samples", 10)
    if samples < 10:
        _fail("estimate.samples", f"must be >= 10, got {samples}")
    levels = es.get("levels", [1, 2])
    if not isinstance(levels, list) or not levels or not all(isinstance(v, int) and v >= 1 for v in levels):
        _fail("estimate.levels", f"expected a list of levels >= 1, got {levels!r}")
    refine = es.get("refine", [])
    if not isinstance(refine, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in refine):
        _fail("estimate.refine", f"expected a list of grid sizes, got {refine!r}")
    for i, r in enumerate(refine):
        try:
            GridSpec(n, r)
        except ConfigError as exc:
            _fail(f"estimate.refine[{i}]", str(exc))

    cv = _section(raw, "converge")
    _unknown(cv, "converge", ("mmax",))
    mmax = _int(cv, "converge", "mmax", 10, lo=1)

    ve = _section(raw, "verify")
    _unknown(ve, "verify", ("tolerance",))
    verify_tolerance = _float(ve, "verify", "tolerance", 1e-6, positive=True)

    seed = raw.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or seed < 0):
        _fail("seed", f"expected a nonnegative integer, got {seed!r}")
    workers = raw.get("workers", 1)
    if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
        _fail("workers", f"expected an integer >= 1, got {workers!r}")

    out = _section(raw, "output")
    _unknown(out, "output", ("dir",))
    out_dir = str(out.get("dir", "out"))

    if closure == "oracle" and not has_modes:
        _fail("closure.kind", "oracle closure needs factorized initial data (initial.modes)")
    if solver == "nls" and not has_modes:
        _fail("solver.kind", "the nls solver needs factorized initial data (initial.modes)")
    if solver in ("picard", "direct") and representation != "dense":
        _fail("representation.kind", f"solver {solver} works on dense kernels only")
    if T == THEOREM_HORIZON and Chat is None and not estimate_first:
        _fail("time.T", "theorem-horizon needs estimate.Chat or estimate.first: true")
    if estimate_first and seed is None:
        _fail("seed", "estimate-first runs need a seed")

    cfg = ExperimentConfig(
        grid, model, modes, snapshot, K, representation, rank_cap, T, M, fallback_T,
        closure, nls_steps, dealias, solver, max_depth, tol, Chat, estimate_first,
        samples, tuple(levels), tuple(refine), mmax, verify_tolerance, seed, workers,
        out_dir, copy.deepcopy(raw),
    )
    cfg._base = base
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    return parse_config(raw, path.parent)
