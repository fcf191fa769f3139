"""Binary and CSV persistence of fields.

Binary layout: 32-byte header (magic ``GKDV``, version u32, num_points u64,
domain_length f64, origin f64, all little-endian) followed by the node
values as little-endian float64.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ArgumentError
from .grid import Field, GridSpec

MAGIC = b"GKDV"
VERSION = 1
_HEADER = struct.Struct("<4sIQdd")

__all__ = [
    "write_snapshot",
    "read_snapshot",
    "write_field_csv",
    "read_field_csv",
    "save_trajectory",
    "load_trajectory",
]


def write_snapshot(f: Field, path) -> None:
    header = _HEADER.pack(
        MAGIC, VERSION, f.grid.num_points, f.grid.domain_length, f.grid.origin
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(f.values.astype("<f8").tobytes())


def read_snapshot(path) -> Field:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ArgumentError(f"{path}: truncated snapshot header")
    magic, version, n, length, origin = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ArgumentError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ArgumentError(f"{path}: unsupported snapshot version {version}")
    values = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    if values.size != n:
        raise ArgumentError(f"{path}: expected {n} values, found {values.size}")
    return Field(GridSpec(int(n), length, origin), values.copy())


def write_field_csv(f: Field, path) -> None:
    x = f.grid.nodes
    with open(path, "w") as fh:
        fh.write("x,value\n")
        for xi, vi in zip(x, f.values):
            fh.write(f"{xi:.17g},{vi:.17g}\n")


def read_field_csv(path, grid: GridSpec) -> Field:
    values = np.loadtxt(path, delimiter=",", skiprows=1, usecols=1)
    return Field(grid, values)


def save_trajectory(traj, directory) -> None:
    """Persist a trajectory as numbered snapshots plus an index.json."""
    import json

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    files = []
    for i, snap in enumerate(traj.snapshots):
        name = f"snap_{i:06d}.bin"
        write_snapshot(snap, d / name)
        files.append(name)
    index = {
        "schema_version": 1,
        "p": traj.p,
        "times": [float(t) for t in traj.times],
        "mass": [float(m) for m in traj.mass_series],
        "energy": [float(e) for e in traj.energy_series],
        "files": files,
    }
    (d / "index.json").write_text(json.dumps(index, sort_keys=True, indent=1))


def load_trajectory(directory):
    """Inverse of :func:`save_trajectory`."""
    import json

    from .evolver import Trajectory

    d = Path(directory)
    index = json.loads((d / "index.json").read_text())
    if index.get("schema_version") != 1:
        raise ArgumentError(f"{directory}: unsupported trajectory schema")
    snaps = tuple(read_snapshot(d / name) for name in index["files"])
    return Trajectory(
        times=np.array(index["times"]),
        snapshots=snaps,
        mass_series=np.array(index["mass"]),
        energy_series=np.array(index["energy"]),
        p=int(index["p"]),
    )
