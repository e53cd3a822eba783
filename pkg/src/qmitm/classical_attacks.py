"""Classical generic attacks on 2- and 4-fold iterated ciphers with exact ledgers.

All oracle access goes through :func:`query` / :func:`query_batch`; table
operations are charged one time unit per insert or probe and one memory unit
per stored entry.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import AmbiguousKey, NoKeyFound
from .permutation_oracle import FORWARD, INVERSE, Instance, Query, QueryLedger, query, query_batch


@dataclass(frozen=True)
class AttackResult:
    recovered_keys: tuple[int, ...]
    ledger: dict
    verified: bool
    candidates: int = 0

    def to_json(self) -> dict:
        return {"keys": list(self.recovered_keys), **self.ledger}


class MatchIndex:
    """Associative multimap ``value -> payload`` over integer values.

    Backed by a sorted array so that whole batches can be probed at once.
    """

    def __init__(self, values, payload, ledger: QueryLedger):
        values = np.asarray(values, dtype=np.int64)
        payload = np.asarray(payload)
        order = np.argsort(values, kind="stable")
        self.values = values[order]
        self.payload = payload[order]
        self.ledger = ledger
        ledger.store(values.size)
        ledger.charge(values.size)

    def __len__(self):
        return self.values.size

    def probe(self, queries) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(query_positions, payload)`` for every stored match, in query order."""
        queries = np.asarray(queries, dtype=np.int64)
        self.ledger.charge(queries.size)
        lo = np.searchsorted(self.values, queries, side="left")
        hi = np.searchsorted(self.values, queries, side="right")
        counts = hi - lo
        qpos = np.repeat(np.arange(queries.size), counts)
        starts = np.repeat(lo - np.cumsum(counts) + counts, counts)
        slots = starts + np.arange(qpos.size)
        return qpos, self.payload[slots]

    def free(self) -> None:
        self.ledger.release(self.values.size)
        self.values = self.values[:0]
        self.payload = self.payload[:0]


def _result(instance: Instance, keys, ledger: QueryLedger, candidates: int) -> AttackResult:
    keys = tuple(int(k) for k in keys)
    return AttackResult(keys, ledger.snapshot(), instance.consistent(keys), candidates)


def _survivors(instance, keys: np.ndarray, pair_ids, ledger) -> np.ndarray:
    """Filter candidate key tuples (rows of ``keys``) against further pairs.

    Each pair meets in the middle: first half of the chain forward from P,
    second half backward from C. A candidate is only queried on a pair if it
    survived the previous one.
    """
    keys = np.asarray(keys, dtype=np.int64).reshape(-1, instance.depth)
    h = instance.depth // 2
    for i in pair_ids:
        if keys.shape[0] == 0:
            break
        p, c = instance.pairs[i]
        x = np.full(keys.shape[0], p, dtype=np.int64)
        for level in range(h):
            x = query_batch(instance, keys[:, level], x, FORWARD, ledger)
        y = np.full(keys.shape[0], c, dtype=np.int64)
        for level in reversed(range(h, instance.depth)):
            y = query_batch(instance, keys[:, level], y, INVERSE, ledger)
        keys = keys[x == y]
    return keys


def _unique(survivors: np.ndarray, what: str) -> tuple[int, ...]:
    distinct = np.unique(survivors, axis=0) if survivors.size else survivors
    if distinct.shape[0] == 0:
        raise NoKeyFound(f"no {what} survived verification")
    if distinct.shape[0] > 1:
        raise AmbiguousKey(f"{distinct.shape[0]} {what}s survive all pairs: {distinct[:4].tolist()}")
    return tuple(int(k) for k in distinct[0])


def exhaustive_search(instance: Instance) -> AttackResult:
    """Scan key tuples in lexicographic order and return the first one consistent with all pairs.

    Chain values are extended one key at a time as in a nested loop; the last
    key is scanned as a batch of ``N`` forward queries.
    """
    depth = instance.depth
    if depth not in (2, 4):
        raise ValueError("depth must be 2 or 4")
    n = instance.n_keys
    ledger = QueryLedger()
    ledger.store(depth)  # running chain values
    p1, c1 = instance.pairs[0]
    all_keys = np.arange(n)
    rest = range(1, len(instance.pairs))
    examined = 0

    def scan(prefix, x):
        nonlocal examined
        if len(prefix) == depth - 1:
            ends = query_batch(instance, all_keys, x, FORWARD, ledger)
            for j in np.flatnonzero(ends == c1).tolist():
                keys = prefix + (j,)
                if _verify_forward(instance, keys, rest, ledger):
                    examined += j + 1
                    return keys
            examined += n
            return None
        for k in range(n):
            found = scan(prefix + (k,), query(instance, Query(x, k, FORWARD), ledger))
            if found is not None:
                return found
        return None

    keys = scan((), p1)
    if keys is None:
        raise NoKeyFound("no key tuple is consistent with all pairs")
    return _result(instance, keys, ledger, examined)


def _verify_forward(instance, keys, pair_ids, ledger) -> bool:
    for i in pair_ids:
        p, c = instance.pairs[i]
        x = p
        for k in keys:
            x = query(instance, Query(x, k, FORWARD), ledger)
        if x != c:
            return False
    return True


def _mitm(instance: Instance, half: int) -> AttackResult:
    """Meet in the middle over composite keys made of ``half`` single keys."""
    n = instance.n_keys
    ledger = QueryLedger()
    p1, c1 = instance.pairs[0]
    # composite key index c <-> tuple via mixed radix, c = k_1 * n^(h-1) + ... + k_h
    composite = np.array(list(itertools.product(range(n), repeat=half)), dtype=np.int64).reshape(-1, half)
    mids = np.full(len(composite), p1, dtype=np.int64)
    for level in range(half):
        mids = query_batch(instance, composite[:, level], mids, FORWARD, ledger)
    index = MatchIndex(mids, np.arange(len(composite)), ledger)
    backs = np.full(len(composite), c1, dtype=np.int64)
    for level in reversed(range(half)):
        backs = query_batch(instance, composite[:, level], backs, INVERSE, ledger)
    upper_pos, lower_ids = index.probe(backs)
    index.free()
    candidates = np.hstack([composite[lower_ids], composite[upper_pos]])
    survivors = _survivors(instance, candidates, range(1, len(instance.pairs)), ledger)
    keys = _unique(survivors, "key tuple")
    return _result(instance, keys, ledger, int(upper_pos.size))


def mitm_2(instance: Instance) -> AttackResult:
    if instance.depth != 2:
        raise ValueError("mitm_2 needs a depth-2 instance")
    return _mitm(instance, 1)


def mitm_4(instance: Instance) -> AttackResult:
    """Meet in the middle with ``(k1, k2)`` and ``(k3, k4)`` treated as single keys."""
    if instance.depth != 4:
        raise ValueError("mitm_4 needs a depth-4 instance")
    return _mitm(instance, 2)


class _HalfTables:
    """The two X-independent tables of the dissection: ``F_a(P_1) -> a`` and ``F_d^{-1}(C_1) -> d``."""

    def __init__(self, instance: Instance, ledger: QueryLedger):
        n = instance.n_keys
        p1, c1 = instance.pairs[0]
        keys = np.arange(n)
        self.instance = instance
        self.ledger = ledger
        self.keys = keys
        self.lower = MatchIndex(query_batch(instance, keys, p1, FORWARD, ledger), keys, ledger)
        self.upper = MatchIndex(query_batch(instance, keys, c1, INVERSE, ledger), keys, ledger)

    def lower_pairs(self, x: int) -> tuple[np.ndarray, np.ndarray]:
        """All ``(a, b)`` with ``F_b(F_a(P_1)) = x``."""
        back = query_batch(self.instance, self.keys, x, INVERSE, self.ledger)
        b, a = self.lower.probe(back)
        return a, b

    def upper_pairs(self, x: int) -> tuple[np.ndarray, np.ndarray]:
        """All ``(c, d)`` with ``F_d(F_c(x)) = C_1``."""
        fwd = query_batch(self.instance, self.keys, x, FORWARD, self.ledger)
        c, d = self.upper.probe(fwd)
        return c, d

    def free(self):
        self.lower.free()
        self.upper.free()


def middle_check(instance: Instance, x: int, half: str = "lower", ledger: QueryLedger | None = None) -> list[tuple[int, int]]:
    """Key pairs joining ``P_1`` to ``x`` (lower half) or ``x`` to ``C_1`` (upper half).

    An empty list means the half-function is 0 at ``x``.
    """
    if instance.depth != 4:
        raise ValueError("middle_check needs a depth-4 instance")
    if half not in ("lower", "upper"):
        raise ValueError("half must be 'lower' or 'upper'")
    ledger = QueryLedger() if ledger is None else ledger
    n = instance.n_keys
    keys = np.arange(n)
    p1, c1 = instance.pairs[0]
    if half == "lower":
        index = MatchIndex(query_batch(instance, keys, p1, FORWARD, ledger), keys, ledger)
        second, first = index.probe(query_batch(instance, keys, x, INVERSE, ledger))
    else:
        index = MatchIndex(query_batch(instance, keys, c1, INVERSE, ledger), keys, ledger)
        first, second = index.probe(query_batch(instance, keys, x, FORWARD, ledger))
    index.free()
    return sorted(zip(first.tolist(), second.tolist()))


def dissect_4(instance: Instance) -> AttackResult:
    """Guess the middle value of ``P_1`` and solve both halves by meet in the middle.

    Lower candidates are indexed by the middle value they induce on ``P_2``;
    upper candidates are streamed against that index. Time ``O(M N)``, memory
    ``O(N)``.
    """
    if instance.depth != 4:
        raise ValueError("dissect_4 needs a depth-4 instance")
    if len(instance.pairs) < 2:
        raise ValueError("dissect_4 needs at least 2 pairs")
    ledger = QueryLedger()
    tables = _HalfTables(instance, ledger)
    p2, c2 = instance.pairs[1]
    rest = range(2, len(instance.pairs))
    survivors = []
    joined = 0
    for x in range(instance.block_space):
        a, b = tables.lower_pairs(x)
        if a.size == 0:
            continue
        mid2 = query_batch(instance, b, query_batch(instance, a, p2, FORWARD, ledger), FORWARD, ledger)
        by_p2 = MatchIndex(mid2, np.arange(a.size), ledger)
        c, d = tables.upper_pairs(x)
        if c.size:
            back2 = query_batch(instance, c, query_batch(instance, d, c2, INVERSE, ledger), INVERSE, ledger)
            up_pos, low_pos = by_p2.probe(back2)
            joined += up_pos.size
            quads = np.stack([a[low_pos], b[low_pos], c[up_pos], d[up_pos]], axis=1)
            survivors.append(_survivors(instance, quads, rest, ledger))
        by_p2.free()
    tables.free()
    keys = _unique(np.vstack(survivors) if survivors else np.empty((0, 4), dtype=np.int64), "quadruple")
    return _result(instance, keys, ledger, joined)


ATTACKS = {
    "exhaustive": exhaustive_search,
    "mitm2": mitm_2,
    "mitm4": mitm_4,
    "dissect4": dissect_4,
}
