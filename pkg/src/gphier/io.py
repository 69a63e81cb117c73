"""Binary snapshot formats (little-endian throughout).

GPHK  dense kernel:      magic, u32 version, u32 n, u32 N, u32 k, then
                         (N^n)^(2k) complex values as interleaved f64 pairs,
                         row-major in (x_1..x_k, x'_1..x'_k) order.
GPHS  separable kernel:  magic, u32 version, u32 n, u32 N, u32 k, u32 r, then
                         per term: complex coefficient, k left factors,
                         k right factors (N^n complex values each).
GPHT  trajectory:        magic, u32 version, u32 K, u32 M, i32 mu,
                         u32 interaction (3 cubic, 5 quintic), f64 alpha,
                         f64 T, u32 closure, then for each node and each
                         level 1..K one GPHK or GPHS record.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import SnapshotFormatError
from .grid import GridSpec
from .kernel import DenseKernel, ModelSpec
from .lowrank import DEFAULT_RANK_CAP, SeparableKernel
from .trajectory import TimeGrid, TrajectorySet

FORMAT_VERSION = 1
KERNEL_MAGIC = b"GPHK"
SEPARABLE_MAGIC = b"GPHS"
TRAJECTORY_MAGIC = b"GPHT"

_KHEAD = struct.Struct("<4sIIII")
_SHEAD = struct.Struct("<4sIIIII")
_THEAD = struct.Struct("<4sIIIiIddI")

_INTERACTION_CODES = {"cubic": 3, "quintic": 5}
_CLOSURE_CODES = {"zero": 0, "oracle": 1, "factorized": 2}

FORMAT_VERSIONS = {"GPHK": FORMAT_VERSION, "GPHS": FORMAT_VERSION, "GPHT": FORMAT_VERSION}


def _complex_bytes(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<c16").tobytes()


def _take(buf: bytes, offset: int, size: int, what: str) -> bytes:
    if offset + size > len(buf):
        raise SnapshotFormatError(f"truncated {what}: need {size} bytes, {len(buf) - offset} left", offset)
    return buf[offset:offset + size]


def _check_magic(magic: bytes, want: bytes, offset: int):
    if magic != want:
        raise SnapshotFormatError(f"bad magic {magic!r}, expected {want!r}", offset)


def _check_version(version: int, offset: int):
    if version != FORMAT_VERSION:
        raise SnapshotFormatError(f"unsupported format version {version}", offset + 4)


def _grid_from_header(n: int, N: int, offset: int) -> GridSpec:
    try:
        return GridSpec(n, N)
    except ValueError as exc:
        raise SnapshotFormatError(f"invalid grid in header: {exc}", offset + 8) from None


# dense kernels ---------------------------------------------------------------

def encode_kernel(g: DenseKernel) -> bytes:
    head = _KHEAD.pack(KERNEL_MAGIC, FORMAT_VERSION, g.grid.n, g.grid.N, g.k)
    return head + _complex_bytes(g.values)


def decode_kernel(buf: bytes, offset: int = 0) -> tuple[DenseKernel, int]:
    """Parse one GPHK record at ``offset``; returns the kernel and the next offset."""
    magic, version, n, N, k = _KHEAD.unpack(_take(buf, offset, _KHEAD.size, "kernel header"))
    _check_magic(magic, KERNEL_MAGIC, offset)
    _check_version(version, offset)
    grid = _grid_from_header(n, N, offset)
    if k < 1:
        raise SnapshotFormatError(f"particle number must be >= 1, got {k}", offset + 16)
    shape = (N,) * (2 * k * n)
    size = 16 * int(np.prod(shape))
    start = offset + _KHEAD.size
    data = np.frombuffer(_take(buf, start, size, "kernel data"), dtype="<c16").reshape(shape)
    return DenseKernel._wrap(k, grid, data.astype(complex)), start + size


# separable kernels -------------------------------------------------------------

def encode_separable(s: SeparableKernel) -> bytes:
    parts = [_SHEAD.pack(SEPARABLE_MAGIC, FORMAT_VERSION, s.grid.n, s.grid.N, s.k, s.rank)]
    for i in range(s.rank):
        parts.append(_complex_bytes(np.array([s.coeffs[i]])))
        parts.append(_complex_bytes(s.left[i]))
        parts.append(_complex_bytes(s.right[i]))
    return b"".join(parts)


def decode_separable(buf: bytes, offset: int = 0, rank_cap: int = DEFAULT_RANK_CAP) -> tuple[SeparableKernel, int]:
    magic, version, n, N, k, r = _SHEAD.unpack(_take(buf, offset, _SHEAD.size, "separable header"))
    _check_magic(magic, SEPARABLE_MAGIC, offset)
    _check_version(version, offset)
    grid = _grid_from_header(n, N, offset)
    if k < 1:
        raise SnapshotFormatError(f"particle number must be >= 1, got {k}", offset + 16)
    if r > rank_cap:
        raise SnapshotFormatError(f"rank {r} exceeds rank cap {rank_cap}", offset + 20)
    pts = N**n
    per_term = 16 * (1 + 2 * k * pts)
    start = offset + _SHEAD.size
    raw = np.frombuffer(_take(buf, start, per_term * r, "separable terms"), dtype="<c16")
    raw = raw.reshape(r, 1 + 2 * k * pts) if r else raw.reshape(0, 1 + 2 * k * pts)
    coeffs = raw[:, 0].astype(complex)
    facs = raw[:, 1:].reshape((r, 2, k) + grid.shape)
    s = SeparableKernel(k, grid, coeffs, facs[:, 0].astype(complex), facs[:, 1].astype(complex), rank_cap)
    return s, start + per_term * r


def decode_any(buf: bytes, offset: int = 0):
    magic = _take(buf, offset, 4, "record magic")
    if magic == KERNEL_MAGIC:
        return decode_kernel(buf, offset)
    if magic == SEPARABLE_MAGIC:
        return decode_separable(buf, offset)
    raise SnapshotFormatError(f"bad magic {magic!r}, expected GPHK or GPHS", offset)


# trajectories -----------------------------------------------------------------

def encode_trajectory(traj: TrajectorySet) -> bytes:
    closure = _CLOSURE_CODES.get(traj.closure)
    if closure is None:
        raise SnapshotFormatError(f"closure kind {traj.closure!r} has no code", 0)
    m = traj.model
    parts = [
        _THEAD.pack(
            TRAJECTORY_MAGIC,
            FORMAT_VERSION,
            traj.K,
            traj.tg.M,
            int(m.mu),
            _INTERACTION_CODES[m.interaction],
            float(m.alpha),
            float(traj.tg.T),
            closure,
        )
    ]
    for i in range(len(traj.tg)):
        for k in range(1, traj.K + 1):
            g = traj.kernel(k, i)
            parts.append(encode_separable(g) if isinstance(g, SeparableKernel) else encode_kernel(g))
    return b"".join(parts)


def decode_trajectory(buf: bytes) -> TrajectorySet:
    magic, version, K, M, mu, code, alpha, T, closure = _THEAD.unpack(_take(buf, 0, _THEAD.size, "trajectory header"))
    _check_magic(magic, TRAJECTORY_MAGIC, 0)
    _check_version(version, 0)
    inter = {v: k for k, v in _INTERACTION_CODES.items()}.get(code)
    if inter is None:
        raise SnapshotFormatError(f"unknown interaction code {code}", 20)
    kind = {v: k for k, v in _CLOSURE_CODES.items()}.get(closure)
    if kind is None:
        raise SnapshotFormatError(f"unknown closure code {closure}", 40)
    try:
        model = ModelSpec(mu, inter, alpha)
        tg = TimeGrid(T, M)
    except ValueError as exc:
        raise SnapshotFormatError(f"invalid trajectory header: {exc}", 0) from None
    if K < 1:
        raise SnapshotFormatError("trajectory holds no levels", 8)
    offset = _THEAD.size
    per_level: dict = {k: [] for k in range(1, K + 1)}
    grid = None
    for _ in range(M + 1):
        for k in range(1, K + 1):
            rec_start = offset
            g, offset = decode_any(buf, offset)
            if g.k != k:
                raise SnapshotFormatError(f"record holds level {g.k}, expected {k}", rec_start + 16)
            if grid is None:
                grid = g.grid
            elif g.grid != grid:
                raise SnapshotFormatError("records disagree on the grid", rec_start + 8)
            per_level[k].append(g)
    if offset != len(buf):
        raise SnapshotFormatError(f"{len(buf) - offset} trailing bytes", offset)
    levels = {}
    for k, seq in per_level.items():
        if all(isinstance(g, DenseKernel) for g in seq):
            levels[k] = np.stack([g.values for g in seq])
        else:
            levels[k] = seq
    return TrajectorySet(grid, tg, model, levels, kind)


# file helpers -------------------------------------------------------------------

def write_kernel(path, g: DenseKernel):
    Path(path).write_bytes(encode_kernel(g))


def read_kernel(path) -> DenseKernel:
    buf = Path(path).read_bytes()
    g, end = decode_kernel(buf)
    if end != len(buf):
        raise SnapshotFormatError(f"{len(buf) - end} trailing bytes", end)
    return g


def write_separable(path, s: SeparableKernel):
    Path(path).write_bytes(encode_separable(s))


def read_separable(path) -> SeparableKernel:
    buf = Path(path).read_bytes()
    s, end = decode_separable(buf)
    if end != len(buf):
        raise SnapshotFormatError(f"{len(buf) - end} trailing bytes", end)
    return s


def read_any(path):
    buf = Path(path).read_bytes()
    g, end = decode_any(buf)
    if end != len(buf):
        raise SnapshotFormatError(f"{len(buf) - end} trailing bytes", end)
    return g


def write_trajectory(path, traj: TrajectorySet):
    Path(path).write_bytes(encode_trajectory(traj))


def read_trajectory(path) -> TrajectorySet:
    return decode_trajectory(Path(path).read_bytes())
