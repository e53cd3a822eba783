"""Exact small-scale simulation of Grover search and of a Szegedy walk on J(N, r).

Every operator used here is real, so amplitudes are kept as float64 vectors.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import SizeLimitError
from .quantum_cost_model import claw_walk_params

MAX_GROVER_SPACE = 2**14
MAX_EDGE_DIM = 2**15
NORM_TOL = 1e-9


@dataclass
class SimulationReport:
    steps: int
    marked_probability: float
    stationary_marked_mass: float
    peak_classical_memory: int
    trace: list[float] = field(default_factory=list)
    max_norm_drift: float = 0.0

    @property
    def peak_marked_probability(self) -> float:
        return max(self.trace, default=self.stationary_marked_mass)

    @property
    def peak_step(self) -> int:
        return int(np.argmax(self.trace)) + 1 if self.trace else 0


def grover_closed_form(space_size: int, n_marked: int, iterations: int) -> float:
    return math.sin((2 * iterations + 1) * math.asin(math.sqrt(n_marked / space_size))) ** 2


def grover_simulate(space_size: int, marked, iterations: int) -> SimulationReport:
    """Run ``iterations`` rounds of oracle sign flip plus inversion about the mean."""
    marked = sorted(set(int(m) for m in marked))
    if not marked:
        raise ValueError("marked set is empty")
    if not 1 <= len(marked) <= space_size or marked[0] < 0 or marked[-1] >= space_size:
        raise ValueError("marked elements must lie in [M]")
    if space_size > MAX_GROVER_SPACE:
        raise SizeLimitError(f"statevector limited to M <= {MAX_GROVER_SPACE}")
    psi = np.full(space_size, 1 / math.sqrt(space_size))
    flip = np.ones(space_size)
    flip[marked] = -1.0
    trace = []
    drift = 0.0
    for _ in range(iterations):
        psi *= flip
        psi = 2 * psi.mean() - psi
        trace.append(float(np.sum(psi[marked] ** 2)))
        drift = max(drift, abs(float(psi @ psi) - 1))
    prob = float(np.sum(psi[marked] ** 2))
    return SimulationReport(iterations, prob, len(marked) / space_size, 1, trace, drift)


@dataclass(frozen=True, eq=False)
class WalkOperator:
    """Szegedy walk on the directed edges of the Johnson graph J(N, r).

    Edge ``x * degree + j`` is ``(x, neighbours[x, j])``. The walk step is
    ``W = R_B R_A`` with ``R_A = 2 Pi_A - I`` (reflection about the
    neighbourhood states) and ``R_B = S R_A S`` for the edge swap ``S``.
    """

    n_keys: int
    subset_size: int
    vertices: tuple[tuple[int, ...], ...]
    neighbours: np.ndarray
    swap: np.ndarray
    marked_vertices: frozenset[int]

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def degree(self) -> int:
        return self.neighbours.shape[1]

    @property
    def dimension(self) -> int:
        return self.n_vertices * self.degree

    def reflect_a(self, v: np.ndarray) -> np.ndarray:
        blocks = v.reshape(self.n_vertices, self.degree)
        return (2 * blocks.mean(axis=1, keepdims=True) - blocks).ravel()

    def reflect_b(self, v: np.ndarray) -> np.ndarray:
        return self.reflect_a(v[self.swap])[self.swap]

    def step(self, v: np.ndarray) -> np.ndarray:
        return self.reflect_b(self.reflect_a(v))

    def marked_edges(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[list(self.marked_vertices)] = True
        return np.repeat(mask, self.degree)

    def transition_matrix(self) -> np.ndarray:
        p = np.zeros((self.n_vertices, self.n_vertices))
        rows = np.repeat(np.arange(self.n_vertices), self.degree)
        np.add.at(p, (rows, self.neighbours.ravel()), 1.0 / self.degree)
        return p

    def dense_reflections(self, limit: int = 4096) -> tuple[np.ndarray, np.ndarray]:
        """``(R_A, R_B)`` as dense matrices, for small operators only."""
        if self.dimension > limit:
            raise SizeLimitError(f"dense reflections limited to dimension {limit}")
        eye = np.eye(self.dimension)
        ra = np.column_stack([self.reflect_a(col) for col in eye.T])
        rb = np.column_stack([self.reflect_b(col) for col in eye.T])
        return ra, rb


def johnson_vertices(n_keys: int, subset_size: int) -> list[tuple[int, ...]]:
    return list(itertools.combinations(range(n_keys), subset_size))


def build_johnson_walk(n_keys: int, subset_size: int, collision_pair=(0, 1)) -> WalkOperator:
    n, r = n_keys, subset_size
    if not 2 <= r < n:
        raise ValueError(f"need 2 <= r < N, got N={n}, r={r}")
    if n > 12:
        raise SizeLimitError(f"Johnson walks are limited to N <= 12, got {n}")
    if collision_pair is not None:
        i, j = collision_pair
        if i == j or not (0 <= i < n and 0 <= j < n):
            raise ValueError("collision pair must be two distinct keys")
    n_vertices = math.comb(n, r)
    degree = r * (n - r)
    if n_vertices * degree > MAX_EDGE_DIM:
        raise SizeLimitError(f"edge space {n_vertices * degree} exceeds {MAX_EDGE_DIM}")
    vertices = johnson_vertices(n, r)
    index = {v: k for k, v in enumerate(vertices)}
    nbrs = np.empty((n_vertices, degree), dtype=np.int64)
    back = np.empty((n_vertices, degree), dtype=np.int64)
    slot = {}
    for x, v in enumerate(vertices):
        members = set(v)
        col = 0
        for out in v:
            for inc in range(n):
                if inc in members:
                    continue
                y = index[tuple(sorted(members - {out} | {inc}))]
                nbrs[x, col] = y
                slot[x, y] = col
                col += 1
    for x in range(n_vertices):
        for col in range(degree):
            back[x, col] = nbrs[x, col] * degree + slot[nbrs[x, col], x]
    if collision_pair is None:
        marked = frozenset()
    else:
        marked = frozenset(k for k, v in enumerate(vertices) if i in v and j in v)
    return WalkOperator(n, r, tuple(vertices), nbrs, back.ravel(), marked)


def spectral_gap(transition: np.ndarray) -> float:
    """``1 - max |lambda|`` over all eigenvalues but the leading one (symmetric chains)."""
    evals = linalg.eigvalsh(transition)
    mags = np.sort(np.abs(evals))
    return float(1 - mags[-2])


def szegedy_walk_simulate(op: WalkOperator, steps: int) -> SimulationReport:
    """Alternate a marked-vertex phase flip with one walk step, from the stationary edge state."""
    marked = op.marked_edges()
    psi = np.full(op.dimension, 1 / math.sqrt(op.dimension))
    eps = len(op.marked_vertices) / op.n_vertices
    trace = []
    drift = 0.0
    for _ in range(steps):
        psi = np.where(marked, -psi, psi)
        psi = op.step(psi)
        trace.append(float(psi[marked] @ psi[marked]))
        drift = max(drift, abs(float(psi @ psi) - 1))
    prob = trace[-1] if trace else eps
    return SimulationReport(steps, prob, eps, op.subset_size, trace, drift)


def amplification_steps(n_keys: int, subset_size: int, c: float = 3.0) -> int:
    """``ceil(c / sqrt(delta * eps))`` for the claw walk on J(N, r)."""
    spec = claw_walk_params(n_keys, subset_size)
    return math.ceil(c / math.sqrt(spec.spectral_gap * spec.marked_fraction))
