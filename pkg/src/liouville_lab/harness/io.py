"""Bit-exact persistence of covariant ensembles, plus CSV for scalar series.

Container layout (all integers little-endian)::

    offset  size  field
    0       4     magic b"LLEN"
    4       2     format version (uint16)
    6       1     endianness tag b"<"
    7       1     dtype tag: 1 = complex128
    8       1     dimension d
    9       1     boundary: 0 open, 1 periodic
    10      1     window: 0 cell, 1 volume
    11      1     reserved (0)
    12      8     spacing a (float64)
    20      4*d   extents L_i (uint32)
    ...     4*d   reference cell label (int32)
    ...     4     M, number of realizations (uint32)
    ...     4     N, sites (uint32)
    ...     8*M   seed table (uint64)
    ...     16*M*N*N  matrices, C order, complex128
    end-4   4     CRC-32 of every preceding byte

A short or corrupted file raises :class:`IntegrityError` before any array is
returned; a different version raises :class:`FormatVersionError`.
"""

from __future__ import annotations

import csv
import struct
import zlib
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..covariant_algebra import CovariantEnsemble
from ..lattice_model import LatticeGeometry

MAGIC = b"LLEN"
VERSION = 1
_BOUNDARY = {"open": 0, "periodic": 1}
_WINDOW = {"cell": 0, "volume": 1}


class IntegrityError(IOError):
    """The file is truncated or its checksum does not match."""


class FormatVersionError(IOError):
    """The file was written by an incompatible format version."""


def encode_ensemble(ens: CovariantEnsemble) -> bytes:
    g = ens.geometry
    d = g.dimension
    head = struct.pack(
        "<4sHccBBBBd",
        MAGIC,
        VERSION,
        b"<",
        b"\x01",
        d,
        _BOUNDARY[g.boundary],
        _WINDOW[ens.window],
        0,
        float(g.spacing),
    )
    head += struct.pack(f"<{d}I", *g.shape)
    head += struct.pack(f"<{d}i", *ens.cell)
    head += struct.pack("<II", ens.M, ens.N)
    head += np.asarray(ens.seeds, dtype="<u8").tobytes()
    body = np.ascontiguousarray(ens.matrices, dtype="<c16").tobytes()
    payload = head + body
    return payload + struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF)


def decode_ensemble(blob: bytes) -> CovariantEnsemble:
    if len(blob) < 24:
        raise IntegrityError("file too short for a header")
    if blob[:4] != MAGIC:
        raise IntegrityError("bad magic number")
    (version,) = struct.unpack_from("<H", blob, 4)
    if version != VERSION:
        raise FormatVersionError(f"format version {version} is not supported (expected {VERSION})")
    payload, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(payload) & 0xFFFFFFFF != crc:
        raise IntegrityError("checksum mismatch (truncated or corrupted file)")
    _, _, endian, dtype, d, boundary, window, _, spacing = struct.unpack_from("<4sHccBBBBd", blob, 0)
    if endian != b"<" or dtype != b"\x01":
        raise IntegrityError("unsupported byte order or dtype")
    off = 20
    shape = struct.unpack_from(f"<{d}I", blob, off)
    off += 4 * d
    cell = struct.unpack_from(f"<{d}i", blob, off)
    off += 4 * d
    M, N = struct.unpack_from("<II", blob, off)
    off += 8
    expected = off + 8 * M + 16 * M * N * N
    if expected != len(payload):
        raise IntegrityError("payload length does not match the header")
    seeds = np.frombuffer(blob, dtype="<u8", count=M, offset=off)
    off += 8 * M
    mats = np.frombuffer(blob, dtype="<c16", count=M * N * N, offset=off).reshape(M, N, N)
    geometry = LatticeGeometry(
        tuple(shape), spacing=spacing, boundary={v: k for k, v in _BOUNDARY.items()}[boundary]
    )
    return CovariantEnsemble(
        mats.astype(complex),
        tuple(int(s) for s in seeds),
        geometry,
        tuple(cell),
        {v: k for k, v in _WINDOW.items()}[window],
    )


def save_ensemble(ens: CovariantEnsemble, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(encode_ensemble(ens))
    tmp.replace(path)
    return path


def load_ensemble(path) -> CovariantEnsemble:
    return decode_ensemble(Path(path).read_bytes())


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return path


def read_csv(path) -> list:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))
