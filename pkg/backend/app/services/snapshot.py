"""Field snapshot files: a compact binary form and a lossless text form.

Binary layout (little-endian):
    magic  5 bytes  b"SPWV1"
    d      uint32
    L      uint32   box cutoff, |n|_inf <= L
    count  uint64   number of canonical indices in the box
    mean   float64
    (b_n, c_n) float64 pairs, canonical indices in lexicographic order

The text form has a header line "SPWV1 d L count", a "mean <value>" line and
one "n_1 ... n_d b_n c_n" line per canonical index. Floats are written with
repr(), which round-trips exactly.
"""

import logging
import struct
from pathlib import Path

import numpy as np

from app.services.spectral_core import FourierField, PhaseState, lattice

logger = logging.getLogger(__name__)

MAGIC = b"SPWV1"
HEADER = struct.Struct("<5sIIQ")


class SnapshotFormatError(ValueError):
    """Snapshot bytes or text that do not describe a field."""


def encode(field: FourierField) -> bytes:
    mask = lattice(field.dim, field.cutoff).canonical
    count = int(mask.sum())
    payload = np.empty(1 + 2 * count, dtype="<f8")
    payload[0] = field.mean
    payload[1::2] = field.b[mask]
    payload[2::2] = field.c[mask]
    return HEADER.pack(MAGIC, field.dim, field.cutoff, count) + payload.tobytes()


def decode(data: bytes) -> FourierField:
    if len(data) < HEADER.size:
        raise SnapshotFormatError("snapshot shorter than its header")
    magic, dim, cutoff, count = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")

    lat = lattice(dim, cutoff)
    expected = int(lat.canonical.sum())
    if count != expected:
        raise SnapshotFormatError(
            f"header declares {count} indices, a d={dim} L={cutoff} box has {expected}"
        )
    body = data[HEADER.size :]
    if len(body) != 8 * (1 + 2 * count):
        raise SnapshotFormatError(
            f"payload of {len(body)} bytes does not match {count} indices"
        )

    payload = np.frombuffer(body, dtype="<f8")
    b = np.zeros(lat.shape)
    c = np.zeros(lat.shape)
    b[lat.canonical] = payload[1::2]
    c[lat.canonical] = payload[2::2]
    return FourierField(dim, cutoff, float(payload[0]), b, c)


def write_field(path: Path, field: FourierField) -> None:
    path.write_bytes(encode(field))


def read_field(path: Path) -> FourierField:
    return decode(path.read_bytes())


def write_state(directory: Path, stem: str, state: PhaseState) -> tuple[Path, Path]:
    """Writes <stem>_u.spwv and <stem>_ut.spwv."""
    directory.mkdir(parents=True, exist_ok=True)
    u_path = directory / f"{stem}_u.spwv"
    ut_path = directory / f"{stem}_ut.spwv"
    write_field(u_path, state.u)
    write_field(ut_path, state.ut)
    logger.debug("Wrote snapshot pair %s, %s", u_path, ut_path)
    return u_path, ut_path


def read_state(directory: Path, stem: str) -> PhaseState:
    return PhaseState(
        read_field(directory / f"{stem}_u.spwv"),
        read_field(directory / f"{stem}_ut.spwv"),
    )


def to_text(field: FourierField) -> str:
    count = int(lattice(field.dim, field.cutoff).canonical.sum())
    lines = [
        f"{MAGIC.decode()} {field.dim} {field.cutoff} {count}",
        f"mean {field.mean!r}",
    ]
    for n, bn, cn in field.modes():
        lines.append(" ".join(str(k) for k in n) + f" {bn!r} {cn!r}")
    return "\n".join(lines) + "\n"


def from_text(text: str) -> FourierField:
    lines = [line for line in text.splitlines() if line.strip()]
    if len(lines) < 2:
        raise SnapshotFormatError("text snapshot needs a header and a mean line")

    head = lines[0].split()
    if len(head) != 4 or head[0] != MAGIC.decode():
        raise SnapshotFormatError(f"bad text header {lines[0]!r}")
    dim, cutoff, count = (int(v) for v in head[1:])

    tag, _, mean_text = lines[1].partition(" ")
    if tag != "mean":
        raise SnapshotFormatError(f"expected a mean line, got {lines[1]!r}")
    if len(lines) - 2 != count:
        raise SnapshotFormatError(
            f"header declares {count} indices, found {len(lines) - 2} lines"
        )

    modes: dict[tuple[int, ...], tuple[float, float]] = {}
    for line in lines[2:]:
        parts = line.split()
        if len(parts) != dim + 2:
            raise SnapshotFormatError(f"malformed index line {line!r}")
        n = tuple(int(v) for v in parts[:dim])
        modes[n] = (float(parts[dim]), float(parts[dim + 1]))
    return FourierField.from_modes(dim, cutoff, modes, mean=float(mean_text))
