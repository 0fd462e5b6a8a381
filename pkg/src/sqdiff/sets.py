"""Set specifications, deterministic realization and set files.

RANDOM sets draw ``rng.random(N) < density`` from ``numpy.random.Generator``
on ``PCG64(seed)`` in index order: element ``i + 1`` is a member when the
i-th double is below the density.

Text files hold a header line ``N <value>`` followed by one member per line.
Binary files hold ``b"SQDF"``, the 8-byte little-endian N, then the
membership bits packed least-significant-bit first (bit i of the stream is
element i + 1).
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .counting import IndicatorSet

__all__ = ["SetKind", "SetSpec", "realize", "read_set", "write_set", "write_text", "write_binary", "parse_set_arg"]

MAGIC = b"SQDF"


class SetKind(str, enum.Enum):
    RANDOM = "RANDOM"
    CONGRUENCE = "CONGRUENCE"
    INTERVAL = "INTERVAL"
    UNION = "UNION"
    FILE = "FILE"


@dataclass(frozen=True)
class SetSpec:
    kind: SetKind
    n: int
    density: float | None = None
    modulus: int | None = None
    residue: int | None = None
    bounds: tuple | None = None
    path: str | None = None
    seed: int | None = None
    parts: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", SetKind(self.kind))
        if self.n < 1:
            raise ValueError("n must be positive")
        k = self.kind
        if k is SetKind.RANDOM:
            if self.density is None or self.seed is None:
                raise ValueError("RANDOM requires density and seed")
            if not (0.0 <= self.density <= 1.0):
                raise ValueError(f"density outside [0, 1]: {self.density}")
            if not (0 <= self.seed < 2**64):
                raise ValueError("seed must be a 64-bit unsigned integer")
        elif k is SetKind.CONGRUENCE:
            if self.modulus is None or self.modulus <= 0 or self.residue is None or not (0 <= self.residue < self.modulus):
                raise ValueError("CONGRUENCE requires modulus > 0 and 0 <= residue < modulus")
        elif k is SetKind.INTERVAL:
            if self.bounds is None:
                raise ValueError("INTERVAL requires bounds")
            lo, hi = self.bounds
            if not (1 <= lo <= hi <= self.n):
                raise ValueError(f"INTERVAL requires 1 <= lo <= hi <= n, got ({lo}, {hi})")
            object.__setattr__(self, "bounds", (int(lo), int(hi)))
        elif k is SetKind.FILE:
            if not self.path:
                raise ValueError("FILE requires path")
        elif k is SetKind.UNION:
            if not self.parts:
                raise ValueError("UNION requires parts")
            for p in self.parts:
                if p.n != self.n:
                    raise ValueError("UNION parts must share n")

    def to_json(self) -> dict:
        d = {"kind": self.kind.value, "n": self.n}
        for key in ("density", "modulus", "residue", "path", "seed"):
            v = getattr(self, key)
            if v is not None:
                d[key] = v
        if self.bounds is not None:
            d["bounds"] = list(self.bounds)
        if self.parts:
            d["parts"] = [p.to_json() for p in self.parts]
        return d

    @classmethod
    def from_json(cls, obj: dict) -> "SetSpec":
        obj = dict(obj)
        if "bounds" in obj and obj["bounds"] is not None:
            obj["bounds"] = tuple(obj["bounds"])
        if "parts" in obj:
            obj["parts"] = tuple(cls.from_json(p) for p in obj["parts"])
        return cls(**obj)


def realize(spec: SetSpec) -> IndicatorSet:
    n = spec.n
    k = spec.kind
    if k is SetKind.RANDOM:
        rng = np.random.Generator(np.random.PCG64(spec.seed))
        return IndicatorSet.from_mask(rng.random(n) < spec.density)
    if k is SetKind.CONGRUENCE:
        idx = np.arange(1, n + 1)
        return IndicatorSet.from_mask(idx % spec.modulus == spec.residue)
    if k is SetKind.INTERVAL:
        lo, hi = spec.bounds
        return IndicatorSet(n, ((1 << (hi - lo + 1)) - 1) << lo)
    if k is SetKind.UNION:
        bits = 0
        for p in spec.parts:
            bits |= realize(p).bits
        return IndicatorSet(n, bits)
    a = read_set(spec.path)
    if a.n_ambient != n:
        raise ValueError(f"{spec.path}: file has N = {a.n_ambient}, spec says {n}")
    return a


def write_text(a: IndicatorSet, path) -> Path:
    path = Path(path)
    body = "\n".join(str(int(m)) for m in a.members())
    path.write_text(f"N {a.n_ambient}\n" + (body + "\n" if body else ""))
    return path


def write_binary(a: IndicatorSet, path) -> Path:
    path = Path(path)
    packed = np.packbits(a.to_mask(), bitorder="little").tobytes()
    path.write_bytes(MAGIC + struct.pack("<Q", a.n_ambient) + packed)
    return path


def write_set(a: IndicatorSet, path, binary: bool | None = None) -> Path:
    if binary is None:
        binary = str(path).endswith(".bin")
    return write_binary(a, path) if binary else write_text(a, path)


def _read_binary(raw: bytes, name: str) -> IndicatorSet:
    if len(raw) < 12:
        raise ValueError(f"{name}: truncated binary set file")
    (n,) = struct.unpack_from("<Q", raw, 4)
    need = (n + 7) // 8
    if len(raw) - 12 != need:
        raise ValueError(f"{name}: expected {need} payload bytes for N = {n}, found {len(raw) - 12}")
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8, offset=12), bitorder="little")
    if bits[n:].any():
        raise ValueError(f"{name}: padding bits beyond N are set")
    return IndicatorSet.from_mask(bits[:n].astype(bool))


def _read_text(text: str, name: str) -> IndicatorSet:
    lines = text.splitlines()
    n = None
    members = []
    for lineno, line in enumerate(lines, start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if n is None:
            parts = s.split()
            if len(parts) != 2 or parts[0] != "N":
                raise ValueError(f"{name}:{lineno}: expected header 'N <value>', got {s!r}")
            try:
                n = int(parts[1])
            except ValueError:
                raise ValueError(f"{name}:{lineno}: bad N value {parts[1]!r}") from None
            if n < 1:
                raise ValueError(f"{name}:{lineno}: N must be positive")
            continue
        try:
            v = int(s)
        except ValueError:
            raise ValueError(f"{name}:{lineno}: not an integer: {s!r}") from None
        if not (1 <= v <= n):
            raise ValueError(f"{name}:{lineno}: member {v} outside [1, {n}]")
        members.append(v)
    if n is None:
        raise ValueError(f"{name}: missing header 'N <value>'")
    return IndicatorSet.from_members(n, members)


def read_set(path) -> IndicatorSet:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] == MAGIC:
        return _read_binary(raw, str(path))
    try:
        text = raw.decode("ascii")
    except UnicodeDecodeError:
        raise ValueError(f"{path}: neither a binary set (bad magic) nor ASCII text") from None
    return _read_text(text, str(path))


def parse_set_arg(arg: str, n: int | None = None, seed: int | None = None) -> SetSpec:
    """Parse the CLI shorthand.

    ``random:<density>[:<seed>]``, ``congruence:<modulus>:<residue>``,
    ``interval:<lo>:<hi>``, ``file:<path>``, or ``a+b`` for a union.
    """
    if "+" in arg and not arg.startswith("file:"):
        parts = tuple(parse_set_arg(p, n, seed) for p in arg.split("+"))
        return SetSpec(SetKind.UNION, parts[0].n, parts=parts)
    kind, _, rest = arg.partition(":")
    kind = kind.lower()
    fields = rest.split(":") if rest else []
    if kind == "file":
        path = rest
        if n is None:
            n = read_set(path).n_ambient
        return SetSpec(SetKind.FILE, n, path=path)
    if n is None:
        raise ValueError("--n is required for generated sets")
    try:
        if kind == "random":
            s = int(fields[1]) if len(fields) > 1 else (0 if seed is None else seed)
            return SetSpec(SetKind.RANDOM, n, density=float(fields[0]), seed=s)
        if kind == "congruence":
            return SetSpec(SetKind.CONGRUENCE, n, modulus=int(fields[0]), residue=int(fields[1]))
        if kind == "interval":
            return SetSpec(SetKind.INTERVAL, n, bounds=(int(fields[0]), int(fields[1])))
        if kind == "full":
            return SetSpec(SetKind.INTERVAL, n, bounds=(1, n))
    except (IndexError, ValueError) as exc:
        raise ValueError(f"bad set argument {arg!r}: {exc}") from None
    raise ValueError(f"unknown set kind in {arg!r}")
