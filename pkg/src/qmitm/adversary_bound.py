"""Adversary matrices for tiny claw-finding and 2-key-extraction instances.

The decision problems are enumerated exhaustively:

* ``ke2``: collections of ``N`` permutations of ``[M]``; the answer is whether
  some ``(a, b)`` has ``F_b(F_a(P)) = C``. Collections with more than one such
  pair violate the uniqueness promise and are excluded.
* ``cf``: pairs of functions ``G_1, G_2 : [N] -> [M]``; the answer is whether a
  claw ``G_1(a) = G_2(b)`` exists, again with at most one claw.

A ke2 input projects onto the cf input ``G_1(k) = F_k(P)``,
``G_2(k) = F_k^{-1}(C)``.

Domains: ``"full"`` keeps every promise input. ``"generic"`` additionally drops
ke2 collections where a single key sends ``P`` straight to ``C`` (and, on the cf
side, functions with ``G_1(k) = C`` or ``G_2(k) = P``). Only on the generic domain
do all projection fibres have the same size, ``((M-2)!)^N``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import SizeLimitError, Undefined

MAX_INPUTS = 2**16
DOMAINS = ("full", "generic", "injective")


@dataclass(frozen=True, eq=False)
class InputEnumeration:
    """Promise inputs of a decision problem with their query answers.

    ``answers[q, i]`` is what query ``queries[q]`` returns on input ``i``.
    For ke2, ``projections[i]`` holds the ``(G_1, G_2)`` tables of input ``i``.
    """

    problem: str
    params: dict
    inputs: np.ndarray
    labels: np.ndarray
    queries: list
    answers: np.ndarray
    raw_count: int
    excluded: int
    projections: np.ndarray | None = None

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def counts(self) -> dict:
        yes = int(self.labels.sum())
        return {"yes": yes, "no": len(self) - yes, "excluded": self.excluded, "raw": self.raw_count}

    def query_index(self, q) -> int:
        try:
            return self.queries.index(tuple(q))
        except ValueError:
            raise ValueError(f"query {q} is not valid for {self.problem}") from None


@dataclass(frozen=True, eq=False)
class AdversaryMatrix:
    matrix: np.ndarray
    enumeration: InputEnumeration

    def __post_init__(self):
        g = self.matrix
        n = len(self.enumeration)
        if g.shape != (n, n):
            raise ValueError(f"matrix shape {g.shape} does not match {n} inputs")
        if not np.allclose(g, g.T, atol=1e-12):
            raise ValueError("adversary matrix must be symmetric")
        same = self.enumeration.labels[:, None] == self.enumeration.labels[None, :]
        if np.any(g[same] != 0):
            raise ValueError("adversary matrix must vanish between inputs with equal answers")


@dataclass(frozen=True)
class DeltaMask:
    query: tuple
    mask: np.ndarray


# --- enumeration -------------------------------------------------------------------------


def _ke2_raw(n_keys: int, block_space: int) -> np.ndarray:
    size = math.factorial(block_space) ** n_keys
    if size > MAX_INPUTS:
        raise SizeLimitError(f"(M!)^N = {size} inputs exceeds the limit {MAX_INPUTS}")
    perms = np.array(list(itertools.permutations(range(block_space))), dtype=np.int64)
    idx = np.array(list(itertools.product(range(len(perms)), repeat=n_keys)), dtype=np.int64)
    return perms[idx]  # (inputs, N, M)


def _inverse_tables(forward: np.ndarray) -> np.ndarray:
    inv = np.empty_like(forward)
    grid = np.broadcast_to(np.arange(forward.shape[-1]), forward.shape)
    np.put_along_axis(inv, forward, grid, axis=-1)
    return inv


def ke2_solution_counts(forward: np.ndarray, p: int, c: int) -> np.ndarray:
    """Number of key pairs ``(a, b)`` with ``F_b(F_a(p)) = c`` for each collection."""
    mid = forward[:, :, p]  # (inputs, N): F_a(P)
    n = forward.shape[1]
    rows = np.arange(forward.shape[0])[:, None, None]
    ends = forward[rows, np.arange(n)[None, None, :], mid[:, :, None]]  # [i, a, b] = F_b(F_a(P))
    return (ends == c).sum(axis=(1, 2))


def claw_counts(g1: np.ndarray, g2: np.ndarray) -> np.ndarray:
    return (g1[:, :, None] == g2[:, None, :]).sum(axis=(1, 2))


def ke2_queries(n_keys: int, block_space: int) -> list[tuple[int, int, int]]:
    return [(x, k, b) for b in (1, -1) for k in range(n_keys) for x in range(block_space)]


def ke2_answers(forward: np.ndarray, queries) -> np.ndarray:
    inverse = _inverse_tables(forward)
    out = np.empty((len(queries), forward.shape[0]), dtype=np.int64)
    for i, (x, k, b) in enumerate(queries):
        out[i] = (forward if b == 1 else inverse)[:, k, x]
    return out


def project_input(u, p: int, c: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """``(G_1, G_2)`` with ``G_1(k) = F_k(p)`` and ``G_2(k) = F_k^{-1}(c)``."""
    u = np.asarray(u)
    g1 = tuple(int(v) for v in u[:, p])
    g2 = tuple(int(np.flatnonzero(row == c)[0]) for row in u)
    return g1, g2


def enumerate_inputs(problem: str, n_keys: int, block_space: int, p: int = 0, c: int = 0, domain: str = "full") -> InputEnumeration:
    """Enumerate the promise inputs of d-KE2 (``"ke2"``) or d-CF (``"cf"``)."""
    if domain not in DOMAINS:
        raise ValueError(f"domain must be one of {DOMAINS}")
    if not (0 <= p < block_space and 0 <= c < block_space):
        raise ValueError("P and C must lie in [M]")
    params = {"N": n_keys, "M": block_space, "P": p, "C": c, "domain": domain}
    if problem == "ke2":
        if domain == "injective":
            raise ValueError("the injective domain applies to cf only")
        raw = _ke2_raw(n_keys, block_space)
        keep = np.ones(len(raw), dtype=bool)
        if domain == "generic":
            keep &= np.all(raw[:, :, p] != c, axis=1)
        sols = ke2_solution_counts(raw, p, c)
        excluded = int(np.sum(keep & (sols > 1)))
        keep &= sols <= 1
        inputs = raw[keep]
        queries = ke2_queries(n_keys, block_space)
        g1 = inputs[:, :, p]
        g2 = _inverse_tables(inputs)[:, :, c]
        return InputEnumeration(
            "ke2", params, inputs, sols[keep] == 1, queries, ke2_answers(inputs, queries),
            len(raw), excluded, np.stack([g1, g2], axis=1),
        )
    if problem == "cf":
        vals1 = [v for v in range(block_space) if domain != "generic" or v != c]
        vals2 = [v for v in range(block_space) if domain != "generic" or v != p]
        f1 = np.array(list(itertools.product(vals1, repeat=n_keys)), dtype=np.int64).reshape(-1, n_keys)
        f2 = np.array(list(itertools.product(vals2, repeat=n_keys)), dtype=np.int64).reshape(-1, n_keys)
        if domain == "injective":
            f1 = f1[[len(set(r)) == n_keys for r in f1.tolist()]]
            f2 = f2[[len(set(r)) == n_keys for r in f2.tolist()]]
        if len(f1) * len(f2) > MAX_INPUTS:
            raise SizeLimitError("too many claw-finding inputs")
        i1, i2 = np.meshgrid(np.arange(len(f1)), np.arange(len(f2)), indexing="ij")
        g1, g2 = f1[i1.ravel()], f2[i2.ravel()]
        claws = claw_counts(g1, g2)
        keep = claws <= 1
        inputs = np.stack([g1, g2], axis=1)[keep]
        queries = [(k, b) for b in (1, -1) for k in range(n_keys)]
        answers = np.array([inputs[:, 0 if b == 1 else 1, k] for k, b in queries])
        return InputEnumeration("cf", params, inputs, claws[keep] == 1, queries, answers, len(g1), int((~keep).sum()))
    raise ValueError(f"unknown problem {problem!r}")


def boolean_enumeration(n_bits: int, function, name: str = "boolean") -> InputEnumeration:
    """All ``n_bits``-bit strings with single-bit queries; ``function`` maps a bit tuple to an answer."""
    inputs = np.array(list(itertools.product((0, 1), repeat=n_bits)), dtype=np.int64)
    labels = np.array([function(tuple(r)) for r in inputs.tolist()])
    queries = [(i,) for i in range(n_bits)]
    return InputEnumeration(name, {"n": n_bits}, inputs, labels, queries, inputs.T.copy(), len(inputs), 0)


def or2_enumeration() -> InputEnumeration:
    return boolean_enumeration(2, lambda bits: int(any(bits)), "or2")


# --- matrices and norms ------------------------------------------------------------------


def uniform_adversary(enum: InputEnumeration) -> AdversaryMatrix:
    """Weight 1 between every pair of inputs with different answers."""
    lab = enum.labels
    return AdversaryMatrix((lab[:, None] != lab[None, :]).astype(float), enum)


def spectral_norm(a, tol: float = 1e-14, max_iter: int = 20000, seed: int = 0) -> float:
    """Largest ``|eigenvalue|`` of a symmetric matrix by power iteration on ``A^2``.

    Falls back to a full eigensolve when the iteration has not settled, which
    happens when the two largest ``|eigenvalues|`` nearly coincide.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("need a square matrix")
    if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max(initial=0))):
        raise ValueError("spectral_norm needs a symmetric matrix")
    if not np.any(a):
        return 0.0
    x = np.random.default_rng(seed).standard_normal(a.shape[0])
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(max_iter):
        y = a @ (a @ x)
        new = float(x @ y)  # Rayleigh quotient of A^2
        ny = np.linalg.norm(y)
        if ny == 0:
            break
        x = y / ny
        if abs(new - lam) <= tol * new:
            return math.sqrt(new)
        lam = new
    return float(np.abs(linalg.eigvalsh(a)).max())


def delta_mask(enum: InputEnumeration, q) -> DeltaMask:
    row = enum.answers[enum.query_index(q)]
    return DeltaMask(tuple(q), row[:, None] != row[None, :])


def all_masks(enum: InputEnumeration) -> list[DeltaMask]:
    return [delta_mask(enum, q) for q in enum.queries]


def masked_norm(gamma, mask: DeltaMask) -> float:
    g = gamma.matrix if isinstance(gamma, AdversaryMatrix) else gamma
    return spectral_norm(g * mask.mask)


def adv_value(gamma, masks) -> float:
    """``min_q ||Gamma|| / ||Gamma o Delta_q||``; queries with a zero masked norm are skipped."""
    g = gamma.matrix if isinstance(gamma, AdversaryMatrix) else np.asarray(gamma, dtype=float)
    top = spectral_norm(g)
    if top == 0:
        raise Undefined("adversary bound undefined for the zero matrix")
    ratios = [top / m for m in (masked_norm(g, d) for d in masks) if m > 0]
    return min(ratios) if ratios else math.inf


# --- lifting ------------------------------------------------------------------------------


def projection_index(enum_ke2: InputEnumeration, enum_cf: InputEnumeration) -> np.ndarray:
    """Row of ``enum_cf`` each ke2 input projects onto."""
    lookup = {r.tobytes(): i for i, r in enumerate(np.ascontiguousarray(enum_cf.inputs))}
    out = np.empty(len(enum_ke2), dtype=np.int64)
    for i, proj in enumerate(np.ascontiguousarray(enum_ke2.projections)):
        j = lookup.get(proj.tobytes())
        if j is None:
            raise ValueError(f"projection of ke2 input {i} is outside the cf enumeration")
        out[i] = j
    return out


def fiber_sizes(enum_ke2: InputEnumeration, enum_cf: InputEnumeration) -> np.ndarray:
    """Number of ke2 inputs over each cf input (zero for cf inputs outside the image)."""
    return np.bincount(projection_index(enum_ke2, enum_cf), minlength=len(enum_cf))


def lift_cf_to_ke2(gamma_cf: AdversaryMatrix, enum_ke2: InputEnumeration) -> AdversaryMatrix:
    proj = projection_index(enum_ke2, gamma_cf.enumeration)
    return AdversaryMatrix(gamma_cf.matrix[np.ix_(proj, proj)], enum_ke2)


def _image(enum_ke2, enum_cf):
    proj = projection_index(enum_ke2, enum_cf)
    order = np.argsort(proj, kind="stable")
    image = np.unique(proj)
    return proj, order, image


def tensor_structure(gamma_ke2, gamma_cf, enum_ke2=None, enum_cf=None) -> tuple[bool, int | None]:
    """Whether the projection-sorted ke2 matrix equals ``Gamma_CF (restricted to the image) ⊗ J_D``.

    Returns ``(holds, D)``; ``D`` is ``None`` when fibre sizes differ.
    """
    g_ke2 = gamma_ke2.matrix if isinstance(gamma_ke2, AdversaryMatrix) else gamma_ke2
    g_cf = gamma_cf.matrix if isinstance(gamma_cf, AdversaryMatrix) else gamma_cf
    enum_ke2 = enum_ke2 or gamma_ke2.enumeration
    enum_cf = enum_cf or gamma_cf.enumeration
    proj, order, image = _image(enum_ke2, enum_cf)
    sizes = np.bincount(proj)[image]
    if sizes.min() != sizes.max():
        return False, None
    d = int(sizes[0])
    expected = np.kron(g_cf[np.ix_(image, image)], np.ones((d, d)))
    return bool(np.array_equal(g_ke2[np.ix_(order, order)], expected)), d


def query_set(p: int, c: int, n_keys: int) -> list[tuple[int, int, int]]:
    """Queries reading ``F_k(P)`` or ``F_k^{-1}(C)``."""
    return [(p, k, 1) for k in range(n_keys)] + [(c, k, -1) for k in range(n_keys)]


def projected_query(q) -> tuple[int, int]:
    _, k, b = q
    return (k, b)


def block_identity(gamma_ke2: AdversaryMatrix, gamma_cf: AdversaryMatrix, q) -> bool:
    """``(Gamma_KE2 o Delta_q)`` equals ``(Gamma_CF o Delta_q~) ⊗ J`` after projection sorting, for ``q`` in the query set."""
    enum_ke2, enum_cf = gamma_ke2.enumeration, gamma_cf.enumeration
    left = gamma_ke2.matrix * delta_mask(enum_ke2, q).mask
    right = gamma_cf.matrix * delta_mask(enum_cf, projected_query(q)).mask
    ok, _ = tensor_structure(left, right, enum_ke2, enum_cf)
    return ok


# --- query reduction ----------------------------------------------------------------------


@dataclass
class QueryReductionReport:
    max_all: float
    max_query_set: float
    max_query_set_conjugated: float
    maximizers: list
    sigma: tuple | None
    conjugated_maximizer: tuple | None
    isometry: bool
    tensor_after_conjugation: bool
    tolerance: float = 1e-6

    @property
    def equal(self) -> bool:
        return abs(self.max_all - self.max_query_set_conjugated) <= self.tolerance

    @property
    def passed(self) -> bool:
        return self.equal and self.isometry and self.tensor_after_conjugation


def _transposition(m: int, a: int, b: int) -> np.ndarray:
    s = np.arange(m)
    s[a], s[b] = b, a
    return s


def verify_query_reduction(gamma_ke2: AdversaryMatrix, gamma_cf: AdversaryMatrix | None = None, tol: float = 1e-6) -> QueryReductionReport:
    """Check that a maximizing query outside the query set can be moved into it by conjugation.

    The promise inputs are embedded in the set of all ``(M!)^N`` collections
    (zero rows elsewhere) so that ``u -> u^sigma`` is a genuine row and column
    permutation. ``u^sigma = {F_i o sigma}`` for forward maximizers and
    ``{sigma o F_i}`` for inverse ones.
    """
    enum = gamma_ke2.enumeration
    n, m, p, c = (enum.params[k] for k in ("N", "M", "P", "C"))
    norms = np.array([masked_norm(gamma_ke2, delta_mask(enum, q)) for q in enum.queries])
    best = norms.max()
    maximizers = [enum.queries[i] for i in np.flatnonzero(norms >= best - tol)]
    iset = query_set(p, c, n)
    max_iset = max(norms[enum.query_index(q)] for q in iset)

    raw = _ke2_raw(n, m)
    lookup = {r.tobytes(): i for i, r in enumerate(np.ascontiguousarray(raw))}
    pos = np.array([lookup[u.tobytes()] for u in np.ascontiguousarray(enum.inputs)])
    full = np.zeros((len(raw), len(raw)))
    full[np.ix_(pos, pos)] = gamma_ke2.matrix

    outside = [q for q in maximizers if q not in iset]
    if not outside:
        return QueryReductionReport(best, max_iset, max_iset, maximizers, None, None, True, True, tol)
    x_star, k_star, b_star = outside[0]
    target = p if b_star == 1 else c
    sigma = _transposition(m, x_star, target)
    moved = raw[:, :, sigma] if b_star == 1 else sigma[raw]
    perm = np.array([lookup[u.tobytes()] for u in np.ascontiguousarray(moved)])
    conj = full[np.ix_(perm, perm)]

    raw_queries = query_set(p, c, n)
    raw_answers = ke2_answers(raw, raw_queries)
    conj_norms = []
    for i, _ in enumerate(raw_queries):
        row = raw_answers[i]
        conj_norms.append(spectral_norm(conj * (row[:, None] != row[None, :])))
    isometry = abs(spectral_norm(conj) - spectral_norm(gamma_ke2.matrix)) <= tol

    tensor_ok = True
    if gamma_cf is not None:
        # conj[u, v] = Gamma_KE2[u^sigma, v^sigma]: constant on fibres of u -> (u^sigma)^(P, C)
        support = np.flatnonzero(np.isin(perm, pos))
        back = {int(r): i for i, r in enumerate(pos)}
        pulled = np.array([back[int(perm[u])] for u in support])
        keys = enum.projections[pulled]
        sub = InputEnumeration("ke2", enum.params, raw[support], enum.labels[pulled], [], np.empty((0, len(support))), 0, 0, keys)
        tensor_ok, _ = tensor_structure(conj[np.ix_(support, support)], gamma_cf, sub, gamma_cf.enumeration)
    return QueryReductionReport(
        best, max_iset, max(conj_norms), maximizers, (int(x_star), int(target)),
        (int(target), int(k_star), int(b_star)), isometry, tensor_ok, tol,
    )


# --- end-to-end check ---------------------------------------------------------------------


@dataclass
class LiftReport:
    n_keys: int
    block_space: int
    p: int
    c: int
    domain: str
    counts_ke2: dict
    counts_cf: dict
    fiber_sizes: list[int]
    norm_cf: float
    norm_ke2: float
    tensor: bool
    block_identities: bool
    reduction: QueryReductionReport | None
    extra: dict = field(default_factory=dict)

    @property
    def d(self) -> int | None:
        return self.fiber_sizes[0] if len(self.fiber_sizes) == 1 else None

    @property
    def norm_relation(self) -> bool:
        return self.d is not None and abs(self.norm_ke2 - self.d * self.norm_cf) <= 1e-6

    @property
    def passed(self) -> bool:
        return (
            self.d is not None
            and self.norm_relation
            and self.tensor
            and self.block_identities
            and (self.reduction is None or self.reduction.passed)
        )


def verify_lift(n_keys: int, block_space: int, p: int = 0, c: int = 1, domain: str = "generic") -> LiftReport:
    """Lift the uniform claw-finding adversary matrix and check the tensor, norm and query-set claims."""
    enum_cf = enumerate_inputs("cf", n_keys, block_space, p, c, domain)
    enum_ke2 = enumerate_inputs("ke2", n_keys, block_space, p, c, domain)
    sizes = fiber_sizes(enum_ke2, enum_cf)
    image = np.flatnonzero(sizes)
    # restrict the cf side to projections that actually occur
    enum_cf = InputEnumeration(
        "cf", enum_cf.params, enum_cf.inputs[image], enum_cf.labels[image], enum_cf.queries,
        enum_cf.answers[:, image], enum_cf.raw_count, enum_cf.excluded,
    )
    gamma_cf = uniform_adversary(enum_cf)
    gamma_ke2 = lift_cf_to_ke2(gamma_cf, enum_ke2)
    tensor, _ = tensor_structure(gamma_ke2, gamma_cf)
    blocks = all(block_identity(gamma_ke2, gamma_cf, q) for q in query_set(p, c, n_keys))
    has_weight = bool(np.any(gamma_cf.matrix))
    reduction = verify_query_reduction(gamma_ke2, gamma_cf) if has_weight else None
    return LiftReport(
        n_keys, block_space, p, c, domain, enum_ke2.counts, enum_cf.counts,
        sorted(set(sizes[image].tolist())), spectral_norm(gamma_cf.matrix), spectral_norm(gamma_ke2.matrix),
        tensor, blocks, reduction,
    )


# --- search ---------------------------------------------------------------------------------


def optimize_adversary(enum: InputEnumeration, iterations: int = 500, seed: int = 0, step: float = 0.5) -> AdversaryMatrix:
    """Coordinate hill climb on the weights between inputs with different answers.

    Starts from :func:`uniform_adversary`; each move re-weights one symmetric
    pair of entries and is kept only if the adversary value strictly improves.
    """
    if len(enum) > 64:
        raise SizeLimitError("optimize_adversary is limited to 64 inputs")
    rng = np.random.default_rng(seed)
    masks = all_masks(enum)
    gamma = uniform_adversary(enum).matrix.copy()
    best = adv_value(gamma, masks)
    iu, ju = np.nonzero(np.triu(enum.labels[:, None] != enum.labels[None, :]))
    if iu.size == 0:
        raise Undefined("all inputs have the same answer")
    for _ in range(iterations):
        t = rng.integers(iu.size)
        i, j = iu[t], ju[t]
        w = gamma[i, j]
        moved = False
        for cand in (w + step, w - step, 0.0, -w):
            if cand == w:
                continue
            gamma[i, j] = gamma[j, i] = cand
            if not np.any(gamma):
                continue
            val = adv_value(gamma, masks)
            if val > best + 1e-12:
                best, w, moved = val, cand, True
        gamma[i, j] = gamma[j, i] = w
        if not moved:
            step = max(step * 0.9, 1e-3)
    return AdversaryMatrix(gamma, enum)
