"""Binary field snapshots (CGSF container).

Layout, all little-endian:

    magic   4s   b"CGSF"
    version u16  currently 1
    nx, ny  u32  grid shape
    lx, ly  f64  domain extents
    t       f64  simulation time
    phi_star f64 packing fraction the run was constrained by
    nfields u16  number of field blocks

followed by ``nfields`` blocks of a 16-byte NUL-padded ASCII name and
``nx*ny`` float64 values in C order.  Payloads round-trip bit-exactly.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import SnapshotFormatError, VacuumError
from ..fields import PeriodicGrid2D, ScalarField, VectorField2
from ..solver import SolverState

MAGIC = b"CGSF"
VERSION = 1

_HEADER = struct.Struct("<4sHIIddddH")
_NAME_BYTES = 16

__all__ = [
    "MAGIC",
    "VERSION",
    "read_fields",
    "read_snapshot",
    "write_fields",
    "write_snapshot",
]


def _encode_name(name: str) -> bytes:
    try:
        raw = name.encode("ascii")
    except UnicodeEncodeError as exc:
        raise SnapshotFormatError(f"field name {name!r} is not ASCII") from exc
    if not raw or len(raw) >= _NAME_BYTES:
        raise SnapshotFormatError(
            f"field name {name!r} must be 1..{_NAME_BYTES - 1} ASCII bytes"
        )
    return raw.ljust(_NAME_BYTES, b"\x00")


def write_fields(
    path,
    grid: PeriodicGrid2D,
    fields: dict[str, np.ndarray],
    *,
    t: float = 0.0,
    phi_star: float = 0.0,
) -> None:
    """Write named float64 arrays of shape (nx, ny) to one snapshot file."""
    if not fields:
        raise SnapshotFormatError("snapshot must contain at least one field")
    blocks = [
        _HEADER.pack(
            MAGIC, VERSION, grid.nx, grid.ny, grid.lx, grid.ly, t, phi_star, len(fields)
        )
    ]
    for name, values in fields.items():
        arr = np.ascontiguousarray(values, dtype=np.float64)
        if arr.shape != (grid.nx, grid.ny):
            raise SnapshotFormatError(
                f"field {name!r} has shape {arr.shape}, expected {(grid.nx, grid.ny)}"
            )
        blocks.append(_encode_name(name))
        blocks.append(arr.tobytes(order="C"))
    with open(path, "wb") as fh:
        fh.write(b"".join(blocks))


def read_fields(path):
    """Read a snapshot file; returns (grid, t, phi_star, {name: array})."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < _HEADER.size:
        raise SnapshotFormatError(f"{path}: truncated header ({len(buf)} bytes)")
    magic, version, nx, ny, lx, ly, t, phi_star, nfields = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise SnapshotFormatError(f"{path}: bad magic {magic!r}, not a CGSF snapshot")
    if version > VERSION:
        raise SnapshotFormatError(
            f"{path}: snapshot version {version} is newer than supported version {VERSION}"
        )
    grid = PeriodicGrid2D(nx, ny, lx, ly)
    block = _NAME_BYTES + 8 * nx * ny
    expected = _HEADER.size + nfields * block
    if len(buf) != expected:
        raise SnapshotFormatError(
            f"{path}: expected {expected} bytes for {nfields} fields, got {len(buf)}"
        )
    fields: dict[str, np.ndarray] = {}
    offset = _HEADER.size
    for _ in range(nfields):
        raw = buf[offset : offset + _NAME_BYTES]
        name = raw.rstrip(b"\x00").decode("ascii", errors="replace")
        offset += _NAME_BYTES
        flat = np.frombuffer(buf, dtype="<f8", count=nx * ny, offset=offset)
        fields[name] = flat.reshape(nx, ny).copy()
        offset += 8 * nx * ny
    return grid, t, phi_star, fields


def write_snapshot(state: SolverState, path) -> None:
    """Persist one solver state (density and momentum; velocity is m/rho)."""
    write_fields(
        path,
        state.rho.grid,
        {"rho": state.rho.values, "mx": state.m.x, "my": state.m.y},
        t=state.t,
        phi_star=state.phi_star,
    )


def read_snapshot(path) -> SolverState:
    """Rebuild a solver state from a snapshot written by write_snapshot."""
    grid, t, phi_star, fields = read_fields(path)
    for name in ("rho", "mx", "my"):
        if name not in fields:
            raise SnapshotFormatError(f"{path}: missing field {name!r}")
    rho = fields["rho"]
    if not np.all(np.isfinite(rho)) or np.min(rho) <= 0.0:
        raise VacuumError(f"{path}: snapshot density is not strictly positive")
    if phi_star <= 0.0:
        raise SnapshotFormatError(f"{path}: nonpositive phi_star {phi_star}")
    m = VectorField2(grid, fields["mx"], fields["my"])
    u = VectorField2(grid, fields["mx"] / rho, fields["my"] / rho)
    return SolverState(
        t=t, rho=ScalarField(grid, rho), m=m, u=u, phi_star=phi_star
    )
