"""Little-endian binary container helpers shared by feature and checkpoint files."""

from __future__ import annotations

import struct


class BadMagic(ValueError):
    pass


class TruncatedFile(ValueError):
    pass


class NonFiniteValue(ValueError):
    pass


def write_u32(fh, value: int) -> None:
    fh.write(struct.pack("<I", value))


def read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise TruncatedFile(f"expected {n} bytes for {what}, got {len(data)}")
    return data


def read_u32(fh, what: str) -> int:
    return struct.unpack("<I", read_exact(fh, 4, what))[0]


def expect_magic(fh, magic: bytes, path) -> None:
    got = fh.read(len(magic))
    if got != magic:
        raise BadMagic(f"{path}: expected magic {magic!r}, got {got!r}")
