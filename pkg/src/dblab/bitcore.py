"""Bit strings, the keyed expansion used by the slow phase, and seeded randomness.

Bit positions are 0-based internally: ``bits[0]`` is the first emitted bit,
which the protocol descriptions call H_1.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidLengthError, InvalidParameterError, LayoutError


@dataclass(frozen=True)
class BitString:
    bits: tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise InvalidParameterError("bits must be 0 or 1")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_str(cls, text: str) -> "BitString":
        return cls(tuple(int(ch) for ch in text if ch in "01"))

    @classmethod
    def from_int(cls, value: int, length: int) -> "BitString":
        """Most significant bit first."""
        return cls(tuple((value >> (length - 1 - i)) & 1 for i in range(length)))

    @classmethod
    def zeros(cls, length: int) -> "BitString":
        return cls((0,) * length)

    def to_int(self) -> int:
        value = 0
        for b in self.bits:
            value = (value << 1) | b
        return value

    def to_array(self) -> np.ndarray:
        return np.array(self.bits, dtype=np.uint8)

    def flip(self, index: int) -> "BitString":
        bits = list(self.bits)
        bits[index] ^= 1
        return BitString(tuple(bits))

    def __len__(self) -> int:
        return len(self.bits)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return BitString(self.bits[index])
        return self.bits[index]

    def __iter__(self):
        return iter(self.bits)

    def __add__(self, other: "BitString") -> "BitString":
        return BitString(self.bits + other.bits)

    def __str__(self) -> str:
        return "".join(map(str, self.bits))

    @property
    def length(self) -> int:
        return len(self.bits)


@dataclass(frozen=True)
class PrfSpec:
    """Counter-mode keyed expansion built on BLAKE2b.

    This is a deterministic stand-in with the interface of a PRF; it makes no
    security claim. Any callable with the same ``expand`` signature can be
    substituted.
    """

    key: bytes
    personalization: bytes = b"dblab-prf"

    def expand(self, nonce_p: bytes, nonce_v: bytes, out_len: int) -> BitString:
        return prf_expand(self, self.key, nonce_p, nonce_v, out_len)


def prf_expand(spec: PrfSpec, key: bytes, nonce_p: bytes, nonce_v: bytes, out_len: int) -> BitString:
    if out_len < 1:
        raise InvalidLengthError(f"out_len must be >= 1, got {out_len}")
    # length-prefixed fields so (a, bc) and (ab, c) never collide
    header = b"".join(len(part).to_bytes(4, "big") + part for part in (nonce_p, nonce_v))
    nbytes = (out_len + 7) // 8
    stream = bytearray()
    counter = 0
    while len(stream) < nbytes:
        h = hashlib.blake2b(key=key[:64], person=spec.personalization[:16], digest_size=64)
        h.update(counter.to_bytes(8, "big"))
        h.update(out_len.to_bytes(8, "big"))
        h.update(header)
        stream.extend(h.digest())
        counter += 1
    bits = np.unpackbits(np.frombuffer(bytes(stream[:nbytes]), dtype=np.uint8))[:out_len]
    return BitString(tuple(int(b) for b in bits))


def split_registers(bits: BitString, layout: Sequence[int]) -> list[BitString]:
    if any(size < 0 for size in layout) or sum(layout) != len(bits):
        raise LayoutError(f"layout {list(layout)} does not cover {len(bits)} bits")
    out, pos = [], 0
    for size in layout:
        out.append(bits[pos:pos + size])
        pos += size
    return out


def concat(parts: Iterable[BitString]) -> BitString:
    bits: tuple[int, ...] = ()
    for part in parts:
        bits += part.bits
    return BitString(bits)


@dataclass
class RngSpec:
    """Seeded random source.

    ``derive`` gives independent child streams keyed by integers, which is how
    parallel workers and per-point sweeps get reproducible seeds.
    """

    seed: int
    spawn_key: tuple[int, ...] = ()
    _gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise InvalidParameterError("seed must be a 64-bit unsigned integer")
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.spawn_key)
        self._gen = np.random.Generator(np.random.PCG64(ss))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def derive(self, *keys: int) -> "RngSpec":
        return RngSpec(self.seed, self.spawn_key + tuple(int(k) for k in keys))

    def next_bit(self) -> int:
        return int(self._gen.integers(0, 2))

    def next_index(self, k: int) -> int:
        if k < 1:
            raise InvalidParameterError("k must be >= 1")
        return int(self._gen.integers(0, k))

    def next_bits(self, count: int) -> BitString:
        return BitString(tuple(int(b) for b in self._gen.integers(0, 2, size=count)))

    def next_bytes(self, count: int) -> bytes:
        return self._gen.bytes(count)

    def bernoulli(self, p: float) -> int:
        return int(self._gen.random() < p)
