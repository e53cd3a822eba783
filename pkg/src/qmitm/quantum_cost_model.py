"""Closed-form resource accounting for the quantum attacks and the gain tables.

Exponents are exact :class:`~fractions.Fraction` values relative to the key
space size ``N``; evaluated costs are floats. Constant factors (Grover's
``pi/4``, the walk's update cost) are kept in the evaluated costs but never
enter the exponents.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import InfeasibleSearch


@dataclass(frozen=True)
class CostEstimate:
    queries: float
    time_units: float
    memory_units: float
    time_exp: Fraction
    space_exp: Fraction

    def __post_init__(self):
        if min(self.queries, self.time_units, self.memory_units) < 0:
            raise ValueError("costs must be non-negative")
        if self.queries > self.time_units:
            raise ValueError("time cannot be below the query count")

    @property
    def exponents(self) -> tuple[Fraction, Fraction]:
        return self.time_exp, self.space_exp

    @property
    def time_space_exp(self) -> Fraction:
        return self.time_exp + self.space_exp

    @property
    def time_space(self) -> float:
        return self.time_units * self.memory_units


@dataclass(frozen=True)
class WalkSpec:
    setup: float
    update: float
    checking: float
    marked_fraction: float
    spectral_gap: float
    memory: float = 1.0

    def __post_init__(self):
        if not 0 < self.marked_fraction <= 1:
            raise ValueError(f"marked fraction must lie in (0, 1], got {self.marked_fraction}")
        if not 0 < self.spectral_gap <= 1:
            raise ValueError(f"spectral gap must lie in (0, 1], got {self.spectral_gap}")
        if min(self.setup, self.update, self.checking, self.memory) < 0:
            raise ValueError("walk costs must be non-negative")


def grover_cost(space_size: int, marked: int = 1, space_exponent: Fraction | int = 1) -> CostEstimate:
    """Grover iterations ``ceil(pi/4 * sqrt(space_size / marked))``.

    ``space_exponent`` states the search space size as a power of ``N`` and
    only affects the reported exponents.
    """
    if marked < 1:
        raise InfeasibleSearch("nothing marked, Grover search cannot succeed")
    if marked > space_size:
        raise ValueError("more marked elements than the search space holds")
    q = math.ceil(math.pi / 4 * math.sqrt(space_size / marked))
    return CostEstimate(q, q, 1, Fraction(space_exponent) / 2, Fraction(0))


def mnrs_cost(spec: WalkSpec) -> CostEstimate:
    """``S + (1/sqrt(eps)) * ((1/sqrt(delta)) * U + C)`` as time and queries."""
    t = spec.setup + (spec.update / math.sqrt(spec.spectral_gap) + spec.checking) / math.sqrt(spec.marked_fraction)
    return CostEstimate(t, t, spec.memory, Fraction(0), Fraction(0))


def claw_walk_params(n_keys: int, subset_size: int) -> WalkSpec:
    """Walk on the Johnson graph J(N, r) used for claw finding.

    Setup loads ``r`` entries, an update swaps one entry (two queries), marked
    vertices are the r-subsets holding both halves of the claw.

    The gap is ``1 - max |lambda|`` over the non-trivial spectrum; it equals
    ``N / (r (N - r))`` unless the most negative eigenvalue
    ``-1 / max(r, N - r)`` dominates (tiny N, or r = N - 1).
    """
    n, r = n_keys, subset_size
    if not 2 <= r < n:
        raise ValueError(f"need 2 <= r < N, got r={r}, N={n}")
    return WalkSpec(
        setup=r,
        update=2,
        checking=0,
        marked_fraction=r * (r - 1) / (n * (n - 1)),
        spectral_gap=min(n / (r * (n - r)), 1 - 1 / max(r, n - r)),
        memory=r,
    )


TWO_THIRDS = Fraction(2, 3)


def claw_subset_size(n_keys: int) -> int:
    return math.ceil(n_keys ** (2 / 3) - 1e-9)


def ke2_quantum_cost(n_keys: int) -> CostEstimate:
    """Key extraction for 2-encryption through claw finding on ``G_1(k) = F_k(P)``, ``G_2(k) = F_k^{-1}(C)``."""
    if n_keys < 2:
        raise ValueError("need at least 2 keys")
    r = claw_subset_size(n_keys)
    if r >= n_keys:
        # too small for a walk: load the whole table
        base = CostEstimate(n_keys, n_keys, n_keys, Fraction(0), Fraction(0))
    else:
        base = mnrs_cost(claw_walk_params(n_keys, r))
    return CostEstimate(base.queries, base.time_units, base.memory_units, TWO_THIRDS, TWO_THIRDS)


def block_exponent(n_keys: int, block_space: int) -> Fraction:
    """``log M / log N`` as a small rational (1 for ``M = N``, 2 for ``M = N^2``)."""
    if block_space == n_keys:
        return Fraction(1)
    return Fraction(math.log(block_space) / math.log(n_keys)).limit_denominator(12)


def ke4_walk_params(n_keys: int, block_space: int) -> WalkSpec:
    """Complete-graph walk over middle values; checking runs the 2-key attack on both halves."""
    if block_space < 3:
        raise ValueError("the complete-graph walk needs M >= 3 (M = 2 has zero gap)")
    inner = ke2_quantum_cost(n_keys)
    return WalkSpec(
        setup=1,
        update=1,
        checking=2 * inner.time_units,
        marked_fraction=1 / block_space,
        spectral_gap=1 - 1 / (block_space - 1),
        memory=inner.memory_units,
    )


def ke4_quantum_cost(n_keys: int, block_space: int | None = None) -> CostEstimate:
    """Quantized dissection: Grover-style walk on the middle value with a 2-key check."""
    block_space = n_keys if block_space is None else block_space
    if n_keys < 2:
        raise ValueError("need at least 2 keys")
    spec = ke4_walk_params(n_keys, block_space)
    base = mnrs_cost(spec)
    t_exp = block_exponent(n_keys, block_space) / 2 + TWO_THIRDS
    return CostEstimate(base.queries, base.time_units, spec.memory, t_exp, TWO_THIRDS)


def gain(classical_exp, quantum_exp) -> Fraction:
    classical_exp, quantum_exp = Fraction(classical_exp), Fraction(quantum_exp)
    if quantum_exp == 0:
        raise ZeroDivisionError("quantum exponent must be positive")
    if quantum_exp < 0:
        raise ValueError("quantum exponent must be positive")
    return classical_exp / quantum_exp


@dataclass(frozen=True)
class GainRow:
    attack: str
    classical_time_exp: Fraction
    classical_ts_exp: Fraction
    quantum_time_exp: Fraction
    quantum_ts_exp: Fraction

    @property
    def time_gain(self) -> Fraction:
        return gain(self.classical_time_exp, self.quantum_time_exp)

    @property
    def ts_gain(self) -> Fraction:
        return gain(self.classical_ts_exp, self.quantum_ts_exp)

    def as_dict(self) -> dict:
        return {
            "attack": self.attack,
            "classical_time_exp": self.classical_time_exp,
            "quantum_time_exp": self.quantum_time_exp,
            "time_gain": self.time_gain,
            "classical_ts_exp": self.classical_ts_exp,
            "quantum_ts_exp": self.quantum_ts_exp,
            "ts_gain": self.ts_gain,
        }


# (time, space) exponents of the classical attacks, relative to N, at M = N
CLASSICAL_EXPONENTS = {
    (2, "exhaustive"): (Fraction(2), Fraction(0)),
    (2, "mitm"): (Fraction(1), Fraction(1)),
    (4, "exhaustive"): (Fraction(4), Fraction(0)),
    (4, "mitm"): (Fraction(2), Fraction(2)),
    (4, "dissection"): (Fraction(2), Fraction(1)),
}

# Amplitude-amplification collision finder: only its (time, space) exponents are modelled.
AMPLITUDE_AMPLIFICATION_EXPONENTS = (Fraction(3, 4), Fraction(1, 2))

_PROBE_N = 2**12


def _row(name: str, classical: tuple[Fraction, Fraction], quantum: tuple[Fraction, Fraction]) -> GainRow:
    ct, cs = classical
    qt, qs = quantum
    return GainRow(name, ct, ct + cs, qt, qt + qs)


def gain_table(depth: int) -> list[GainRow]:
    """Gains in time and time-space of each attack against its own quantization."""
    if depth == 2:
        grover = grover_cost(_PROBE_N**2, 1, space_exponent=2)
        ke2 = ke2_quantum_cost(_PROBE_N)
        return [
            _row("Exhaustive search", CLASSICAL_EXPONENTS[2, "exhaustive"], grover.exponents),
            _row("MITM", CLASSICAL_EXPONENTS[2, "mitm"], ke2.exponents),
            _row("Amplitude amplification", CLASSICAL_EXPONENTS[2, "mitm"], AMPLITUDE_AMPLIFICATION_EXPONENTS),
        ]
    if depth == 4:
        grover = grover_cost(_PROBE_N**4, 1, space_exponent=4)
        ke2 = ke2_quantum_cost(_PROBE_N)
        # composite keys: the 2-key attack runs on N^2 keys, doubling both exponents
        composite = (2 * ke2.time_exp, 2 * ke2.space_exp)
        ke4 = ke4_quantum_cost(_PROBE_N, _PROBE_N)
        return [
            _row("Exhaustive search", CLASSICAL_EXPONENTS[4, "exhaustive"], grover.exponents),
            _row("MITM", CLASSICAL_EXPONENTS[4, "mitm"], composite),
            _row("Dissection", CLASSICAL_EXPONENTS[4, "dissection"], ke4.exponents),
        ]
    raise ValueError("depth must be 2 or 4")
