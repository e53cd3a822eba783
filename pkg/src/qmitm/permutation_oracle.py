"""Ideal block cipher model: seeded permutation families, planted instances and
query-counted oracle access.

Keys and blocks are 0-based integers (``0..N-1`` and ``0..M-1``).
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ParameterError

MAGIC = b"QMITM1"
FORWARD = 1
INVERSE = -1


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PermutationFamily:
    """``n_keys`` permutations of ``[block_space]`` stored as explicit tables.

    ``forward[k, x] = F_k(x)`` and ``inverse[k, y] = F_k^{-1}(y)``.
    """

    n_keys: int
    block_space: int
    seed: int
    forward: np.ndarray
    inverse: np.ndarray

    def __post_init__(self):
        shape = (self.n_keys, self.block_space)
        if self.forward.shape != shape or self.inverse.shape != shape:
            raise ParameterError(f"tables must have shape {shape}")

    @classmethod
    def from_forward(cls, forward, seed: int = 0) -> "PermutationFamily":
        forward = np.array(forward, dtype=np.int64, copy=True)
        if forward.ndim != 2:
            raise ParameterError("forward tables must be a 2-d array")
        n, m = forward.shape
        if n < 1 or m < 2:
            raise ParameterError("need n_keys >= 1 and block_space >= 2")
        check = np.sort(forward, axis=1)
        if not np.array_equal(check, np.broadcast_to(np.arange(m), (n, m))):
            raise ParameterError("every forward table must be a bijection of [M]")
        inverse = np.empty_like(forward)
        np.put_along_axis(inverse, forward, np.broadcast_to(np.arange(m), (n, m)), axis=1)
        return cls(n, m, int(seed), _freeze(forward), _freeze(inverse))

    def evaluate(self, key: int, x: int) -> int:
        return int(self.forward[key, x])

    def evaluate_inverse(self, key: int, y: int) -> int:
        return int(self.inverse[key, y])

    def to_bytes(self) -> bytes:
        return _pack(self, 0, (), ())

    def __eq__(self, other):
        if not isinstance(other, PermutationFamily):
            return NotImplemented
        return (self.n_keys, self.block_space) == (other.n_keys, other.block_space) and np.array_equal(
            self.forward, other.forward
        )

    __hash__ = None


def generate_family(seed: int, n_keys: int, block_space: int) -> PermutationFamily:
    """Draw ``n_keys`` uniform permutations of ``[block_space]`` from a seeded PCG64 stream."""
    if n_keys < 1 or block_space < 2:
        raise ParameterError(f"need n_keys >= 1 and block_space >= 2, got N={n_keys}, M={block_space}")
    rng = np.random.Generator(np.random.PCG64(seed & 0xFFFFFFFFFFFFFFFF))
    base = np.broadcast_to(np.arange(block_space, dtype=np.int64), (n_keys, block_space))
    forward = rng.permuted(base, axis=1)
    inverse = np.empty_like(forward)
    np.put_along_axis(inverse, forward, base, axis=1)
    return PermutationFamily(n_keys, block_space, int(seed), _freeze(forward), _freeze(inverse))


@dataclass(frozen=True, eq=False)
class Instance:
    family: PermutationFamily
    depth: int
    planted_keys: tuple[int, ...]
    pairs: tuple[tuple[int, int], ...]

    @property
    def n_keys(self) -> int:
        return self.family.n_keys

    @property
    def block_space(self) -> int:
        return self.family.block_space

    @property
    def plaintexts(self) -> tuple[int, ...]:
        return tuple(p for p, _ in self.pairs)

    @property
    def ciphertexts(self) -> tuple[int, ...]:
        return tuple(c for _, c in self.pairs)

    def encrypt(self, keys: Sequence[int], x: int) -> int:
        """Chain forward permutations in key order (direct table access, no ledger)."""
        for k in keys:
            x = int(self.family.forward[k, x])
        return x

    def consistent(self, keys: Sequence[int]) -> bool:
        return all(self.encrypt(keys, p) == c for p, c in self.pairs)

    def to_bytes(self) -> bytes:
        return _pack(self.family, self.depth, self.planted_keys, self.pairs)

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            self.depth == other.depth
            and self.planted_keys == other.planted_keys
            and self.pairs == other.pairs
            and self.family == other.family
        )

    __hash__ = None


def plant_instance(family: PermutationFamily, depth: int, keys: Sequence[int], plaintexts: Sequence[int]) -> Instance:
    if depth not in (2, 4):
        raise ParameterError(f"depth must be 2 or 4, got {depth}")
    keys = tuple(int(k) for k in keys)
    if len(keys) != depth:
        raise ParameterError(f"expected {depth} keys, got {len(keys)}")
    if any(not 0 <= k < family.n_keys for k in keys):
        raise ParameterError("planted key out of range")
    plaintexts = [int(p) for p in plaintexts]
    if not plaintexts:
        raise ParameterError("need at least one plaintext")
    if depth == 4 and len(plaintexts) < 2:
        raise ParameterError("depth-4 instances need at least 2 pairs")
    if len(set(plaintexts)) != len(plaintexts):
        raise ParameterError("plaintexts must be distinct")
    if any(not 0 <= p < family.block_space for p in plaintexts):
        raise ParameterError("plaintext out of range")
    pairs = []
    for p in plaintexts:
        x = p
        for k in keys:
            x = int(family.forward[k, x])
        pairs.append((p, x))
    return Instance(family, depth, keys, tuple(pairs))


def random_instance(seed: int, n_keys: int, block_space: int, depth: int, n_pairs: int) -> Instance:
    """Generate a family and plant uniformly random keys and distinct plaintexts, all from ``seed``."""
    if n_pairs > block_space:
        raise ParameterError("more pairs than blocks")
    family = generate_family(seed, n_keys, block_space)
    rng = np.random.Generator(np.random.PCG64([seed & 0xFFFFFFFFFFFFFFFF, 1]))
    keys = rng.integers(0, n_keys, size=depth)
    plaintexts = rng.choice(block_space, size=n_pairs, replace=False)
    return plant_instance(family, depth, keys.tolist(), plaintexts.tolist())


def _is_bijection(sigma: np.ndarray, m: int) -> bool:
    return sigma.shape == (m,) and np.array_equal(np.sort(sigma), np.arange(m))


def conjugate_instance(instance: Instance, sigma) -> Instance:
    """Replace every ``F_k`` by ``sigma . F_k . sigma^{-1}`` and relabel the pairs through ``sigma``."""
    m = instance.block_space
    sigma = np.asarray(sigma, dtype=np.int64)
    if not _is_bijection(sigma, m):
        raise ParameterError("sigma must be a bijection of [M]")
    fwd = instance.family.forward
    conj = np.empty_like(fwd)
    # conj[k, sigma[x]] = sigma[fwd[k, x]]
    conj[:, sigma] = sigma[fwd]
    family = PermutationFamily.from_forward(conj, seed=instance.family.seed)
    pairs = tuple((int(sigma[p]), int(sigma[c])) for p, c in instance.pairs)
    return Instance(family, instance.depth, instance.planted_keys, pairs)


def randomize_instance(instance: Instance, seed: int) -> Instance:
    """Replace each ``F_k`` by ``sigma_k . F_k`` with independent uniform ``sigma_k``; ciphertexts are recomputed."""
    fam = instance.family
    rng = np.random.Generator(np.random.PCG64(seed & 0xFFFFFFFFFFFFFFFF))
    base = np.broadcast_to(np.arange(fam.block_space, dtype=np.int64), fam.forward.shape)
    sigmas = rng.permuted(base, axis=1)
    composed = np.take_along_axis(sigmas, fam.forward, axis=1)
    family = PermutationFamily.from_forward(composed, seed=fam.seed)
    return plant_instance(family, instance.depth, instance.planted_keys, instance.plaintexts)


@dataclass
class QueryLedger:
    """Resource counters for one attack run. Single owner, never shared."""

    forward_queries: int = 0
    inverse_queries: int = 0
    time_units: int = 0
    peak_memory_units: int = 0
    memory_units: int = 0

    @property
    def total_queries(self) -> int:
        return self.forward_queries + self.inverse_queries

    def charge(self, n: int = 1) -> None:
        self.time_units += int(n)

    def store(self, n: int = 1) -> None:
        self.memory_units += int(n)
        if self.memory_units > self.peak_memory_units:
            self.peak_memory_units = self.memory_units

    def release(self, n: int = 1) -> None:
        self.memory_units -= int(n)
        if self.memory_units < 0:
            raise RuntimeError("released more memory than stored")

    def snapshot(self) -> dict:
        return {
            "forward_queries": self.forward_queries,
            "inverse_queries": self.inverse_queries,
            "time_units": self.time_units,
            "peak_memory_units": self.peak_memory_units,
        }


@dataclass(frozen=True)
class Query:
    point: int
    key: int
    direction: int = FORWARD

    def __post_init__(self):
        if self.direction not in (FORWARD, INVERSE):
            raise ParameterError(f"direction must be +1 or -1, got {self.direction}")


def query(instance: Instance, q: Query, ledger: QueryLedger) -> int:
    fam = instance.family
    if not (0 <= q.key < fam.n_keys and 0 <= q.point < fam.block_space):
        raise ParameterError(f"query {q} out of range for N={fam.n_keys}, M={fam.block_space}")
    if q.direction == FORWARD:
        ledger.forward_queries += 1
        ledger.time_units += 1
        return int(fam.forward[q.key, q.point])
    ledger.inverse_queries += 1
    ledger.time_units += 1
    return int(fam.inverse[q.key, q.point])


def query_batch(instance: Instance, keys, points, direction: int, ledger: QueryLedger) -> np.ndarray:
    """Vectorised form of :func:`query`: one ledger query per broadcast element."""
    fam = instance.family
    keys, points = np.broadcast_arrays(np.asarray(keys, dtype=np.int64), np.asarray(points, dtype=np.int64))
    n = keys.size
    if n == 0:
        return np.empty(keys.shape, dtype=np.int64)
    if keys.min() < 0 or keys.max() >= fam.n_keys or points.min() < 0 or points.max() >= fam.block_space:
        raise ParameterError("batched query out of range")
    if direction == FORWARD:
        ledger.forward_queries += n
        table = fam.forward
    elif direction == INVERSE:
        ledger.inverse_queries += n
        table = fam.inverse
    else:
        raise ParameterError(f"direction must be +1 or -1, got {direction}")
    ledger.time_units += n
    return table[keys, points]


# --- serialization -------------------------------------------------------------------------

_U32 = np.dtype("<u4")


def _pack(family: PermutationFamily, depth: int, keys, pairs) -> bytes:
    head = MAGIC + struct.pack("<III", family.n_keys, family.block_space, depth)
    head += struct.pack(f"<{len(keys)}I", *keys)
    head += struct.pack("<I", len(pairs))
    for p, c in pairs:
        head += struct.pack("<II", p, c)
    return head + family.forward.astype(_U32).tobytes()


def unpack(data: bytes):
    """Parse the binary layout; returns an :class:`Instance` (depth > 0) or a :class:`PermutationFamily`."""
    if data[: len(MAGIC)] != MAGIC:
        raise ParameterError("bad magic, not a QMITM1 file")
    try:
        return _unpack(data)
    except struct.error as exc:
        raise ParameterError(f"truncated header: {exc}") from None


def _unpack(data: bytes):
    off = len(MAGIC)
    n, m, depth = struct.unpack_from("<III", data, off)
    off += 12
    keys = struct.unpack_from(f"<{depth}I", data, off)
    off += 4 * depth
    (n_pairs,) = struct.unpack_from("<I", data, off)
    off += 4
    flat = struct.unpack_from(f"<{2 * n_pairs}I", data, off)
    off += 8 * n_pairs
    pairs = tuple(zip(flat[0::2], flat[1::2]))
    if off + 4 * n * m != len(data):
        raise ParameterError("truncated or oversized table section")
    body = np.frombuffer(data, dtype=_U32, count=n * m, offset=off)
    family = PermutationFamily.from_forward(body.reshape(n, m).astype(np.int64))
    if depth == 0:
        return family
    return Instance(family, depth, tuple(keys), pairs)


def descriptor(obj, binary_name: str, seed: int | None = None) -> dict:
    inst = obj if isinstance(obj, Instance) else None
    fam = inst.family if inst else obj
    blob = obj.to_bytes()
    return {
        "format": MAGIC.decode(),
        "schema_version": 1,
        "binary": binary_name,
        "sha256": hashlib.sha256(blob).hexdigest(),
        "seed": fam.seed if seed is None else seed,
        "n_keys": fam.n_keys,
        "block_space": fam.block_space,
        "depth": inst.depth if inst else 0,
        "planted_keys": list(inst.planted_keys) if inst else [],
        "pairs": [list(p) for p in inst.pairs] if inst else [],
        "index_base": 0,
    }


def save(obj, path, seed: int | None = None) -> tuple[Path, Path]:
    """Write ``<path>`` (binary) and ``<path>.json`` (descriptor)."""
    path = Path(path)
    path.write_bytes(obj.to_bytes())
    meta = path.with_name(path.name + ".json")
    meta.write_text(json.dumps(descriptor(obj, path.name, seed), indent=2) + "\n")
    return path, meta


def load(path):
    path = Path(path)
    if path.suffix == ".json":
        meta = json.loads(path.read_text())
        path = path.with_name(meta["binary"])
    obj = unpack(path.read_bytes())
    meta_path = path.with_name(path.name + ".json")
    if meta_path.exists():
        seed = json.loads(meta_path.read_text()).get("seed", 0)
        fam = obj.family if isinstance(obj, Instance) else obj
        fam = PermutationFamily(fam.n_keys, fam.block_space, int(seed), fam.forward, fam.inverse)
        if isinstance(obj, Instance):
            obj = Instance(fam, obj.depth, obj.planted_keys, obj.pairs)
        else:
            obj = fam
    return obj
