import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import linalg

from qmitm import adversary_bound as ab
from qmitm.errors import SizeLimitError, Undefined


def exhaustive_solutions(u, p, c):
    n = u.shape[0]
    return [(a, b) for a in range(n) for b in range(n) if u[b, u[a, p]] == c]


def random_gamma(enum, rng):
    lab = enum.labels
    w = rng.standard_normal((len(enum), len(enum)))
    w = np.triu(w, 1)
    w = (w + w.T) * (lab[:, None] != lab[None, :])
    return ab.AdversaryMatrix(w, enum)


@pytest.fixture(scope="module")
def ke2_full():
    return ab.enumerate_inputs("ke2", 2, 3, 0, 1, "full")


def test_ke2_counts_sum_to_36(ke2_full):
    counts = ke2_full.counts
    assert counts["raw"] == 36
    assert counts["yes"] + counts["no"] + counts["excluded"] == 36


def test_labels_match_exhaustive_search(ke2_full):
    for u, lab in zip(ke2_full.inputs, ke2_full.labels):
        sols = exhaustive_solutions(u, 0, 1)
        assert len(sols) <= 1
        assert bool(lab) == (len(sols) == 1)


def test_identity_family_tie_check():
    one = ab.enumerate_inputs("ke2", 1, 3, 0, 0, "full")
    ident = next(i for i, u in enumerate(one.inputs) if np.array_equal(u[0], np.arange(3)))
    assert one.labels[ident]
    two = ab.enumerate_inputs("ke2", 2, 3, 0, 0, "full")
    assert not any(np.array_equal(u, np.tile(np.arange(3), (2, 1))) for u in two.inputs)


def test_identity_projection():
    u = np.tile(np.arange(3), (2, 1))
    assert ab.project_input(u, 1, 1) == ((1, 1), (1, 1))
    assert ab.claw_counts(np.array([[1, 1]]), np.array([[1, 1]]))[0] == 4


def test_projection_preserves_labels(ke2_full):
    for u, lab in zip(ke2_full.inputs, ke2_full.labels):
        g1, g2 = ab.project_input(u, 0, 1)
        claws = ab.claw_counts(np.array([g1]), np.array([g2]))[0]
        assert bool(lab) == (claws == 1)


def test_fibres_constant_only_on_generic_domain():
    cf = ab.enumerate_inputs("cf", 2, 3, 0, 1, "full")
    sizes = ab.fiber_sizes(ab.enumerate_inputs("ke2", 2, 3, 0, 1, "full"), cf)
    assert sorted(set(sizes[sizes > 0].tolist())) == [1, 2, 4]
    for m in (3, 4):
        cf = ab.enumerate_inputs("cf", 2, m, 0, 1, "generic")
        sizes = ab.fiber_sizes(ab.enumerate_inputs("ke2", 2, m, 0, 1, "generic"), cf)
        assert set(sizes[sizes > 0].tolist()) == {math.factorial(m - 2) ** 2}


def test_cf_enumeration():
    cf = ab.enumerate_inputs("cf", 2, 3, 0, 1, "full")
    assert cf.raw_count == 81
    inj = ab.enumerate_inputs("cf", 2, 3, 0, 1, "injective")
    assert inj.raw_count == 36
    for g, lab in zip(cf.inputs, cf.labels):
        claws = sum(g[0, a] == g[1, b] for a in range(2) for b in range(2))
        assert claws <= 1 and bool(lab) == (claws == 1)


def test_enumeration_guards():
    with pytest.raises(SizeLimitError):
        ab.enumerate_inputs("ke2", 2, 6)
    with pytest.raises(ValueError):
        ab.enumerate_inputs("xx", 2, 3)
    with pytest.raises(ValueError):
        ab.enumerate_inputs("ke2", 2, 3, 5, 0)


def test_spectral_norm_examples():
    assert ab.spectral_norm(np.ones((5, 5))) == pytest.approx(5)
    assert ab.spectral_norm(np.diag([1.0, -7.0, 3.0])) == pytest.approx(7)
    with pytest.raises(ValueError):
        ab.spectral_norm(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_spectral_norm_vs_eigensolve():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = int(rng.integers(2, 40))
        a = rng.standard_normal((n, n))
        a = a + a.T
        assert ab.spectral_norm(a) == pytest.approx(np.abs(linalg.eigvalsh(a)).max(), abs=1e-8)


def test_spectral_norm_tied_extremes():
    # +1 and -1 with equal magnitude: power iteration on A^2 still settles
    assert ab.spectral_norm(np.diag([1.0, -1.0, 0.5])) == pytest.approx(1.0)


def test_delta_masks_symmetric_zero_diagonal(ke2_full):
    masks = ab.all_masks(ke2_full)
    assert len(masks) == 12
    for d in masks:
        assert np.array_equal(d.mask, d.mask.T)
        assert not d.mask.diagonal().any()
    total = sum(d.mask.astype(int) for d in masks)
    off = ~np.eye(len(ke2_full), dtype=bool)
    assert (total[off] > 0).all()


def test_mask_touches_only_differing_key():
    enum = ab.enumerate_inputs("ke2", 2, 3, 0, 1, "full")
    pairs = [(i, j) for i, j in itertools.combinations(range(len(enum)), 2)
             if np.array_equal(enum.inputs[i][0], enum.inputs[j][0])]
    i, j = pairs[0]
    for q in enum.queries:
        x, k, b = q
        table_i = enum.inputs[i][k] if b == 1 else np.argsort(enum.inputs[i][k])
        table_j = enum.inputs[j][k] if b == 1 else np.argsort(enum.inputs[j][k])
        assert ab.delta_mask(enum, q).mask[i, j] == (table_i[x] != table_j[x])
        if k == 0:
            assert not ab.delta_mask(enum, q).mask[i, j]


def test_invalid_query():
    with pytest.raises(ValueError):
        ab.delta_mask(ab.enumerate_inputs("ke2", 2, 3, 0, 1), (5, 0, 1))


def test_or2_star():
    enum = ab.or2_enumeration()
    star = np.zeros((4, 4))
    star[0, 1] = star[1, 0] = star[0, 2] = star[2, 0] = 1.0
    masks = ab.all_masks(enum)
    assert ab.adv_value(star, masks) == pytest.approx(math.sqrt(2), abs=1e-6)
    top = np.abs(linalg.eigvalsh(star)).max()
    masked = [np.abs(linalg.eigvalsh(star * d.mask)).max() for d in masks]
    assert ab.adv_value(star, masks) == pytest.approx(min(top / v for v in masked), abs=1e-12)


def test_zero_matrix_undefined():
    enum = ab.or2_enumeration()
    with pytest.raises(Undefined):
        ab.adv_value(np.zeros((4, 4)), ab.all_masks(enum))


def test_adversary_matrix_validation():
    enum = ab.or2_enumeration()
    bad = np.zeros((4, 4))
    bad[1, 2] = bad[2, 1] = 1  # both are yes-inputs
    with pytest.raises(ValueError):
        ab.AdversaryMatrix(bad, enum)
    asym = np.zeros((4, 4))
    asym[0, 1] = 1
    with pytest.raises(ValueError):
        ab.AdversaryMatrix(asym, enum)


@given(st.integers(0, 2**32), st.floats(0.01, 100))
def test_adv_scaling_and_relabeling(seed, scale):
    rng = np.random.default_rng(seed)
    enum = ab.enumerate_inputs("ke2", 2, 3, 0, 1, "generic")
    g = random_gamma(enum, rng).matrix
    masks = ab.all_masks(enum)
    base = ab.adv_value(g, masks)
    assert ab.adv_value(scale * g, masks) == pytest.approx(base, rel=1e-6)
    perm = rng.permutation(len(enum))
    moved = [ab.DeltaMask(d.query, d.mask[np.ix_(perm, perm)]) for d in masks]
    assert ab.adv_value(g[np.ix_(perm, perm)], moved) == pytest.approx(base, rel=1e-6)


@pytest.mark.parametrize("m", [3, 4])
def test_lift_of_random_matrices(m):
    rng = np.random.default_rng(m)
    cf = ab.enumerate_inputs("cf", 2, m, 0, 1, "generic")
    ke2 = ab.enumerate_inputs("ke2", 2, m, 0, 1, "generic")
    d = math.factorial(m - 2) ** 2
    for _ in range(5):
        g_cf = random_gamma(cf, rng)
        g_ke2 = ab.lift_cf_to_ke2(g_cf, ke2)
        ok, dd = ab.tensor_structure(g_ke2, g_cf)
        assert ok and dd == d
        assert ab.spectral_norm(g_ke2.matrix) == pytest.approx(d * ab.spectral_norm(g_cf.matrix), abs=1e-6)
        for q in ab.query_set(0, 1, 2):
            assert ab.block_identity(g_ke2, g_cf, q)


def test_lift_rejects_missing_projection():
    cf = ab.enumerate_inputs("cf", 2, 3, 0, 1, "generic")
    ke2 = ab.enumerate_inputs("ke2", 2, 3, 0, 1, "full")
    with pytest.raises(ValueError):
        ab.lift_cf_to_ke2(ab.uniform_adversary(cf), ke2)


@pytest.mark.parametrize("m", [3, 4])
def test_verify_lift_generic(m):
    rep = ab.verify_lift(2, m, 0, 1, "generic")
    assert rep.passed
    assert rep.d == math.factorial(m - 2) ** 2
    red = rep.reduction
    assert red.isometry and red.tensor_after_conjugation
    assert red.max_all == pytest.approx(red.max_query_set_conjugated, abs=1e-6)


def test_verify_lift_full_domain_breaks_constancy():
    rep = ab.verify_lift(2, 3, 0, 1, "full")
    assert rep.d is None and not rep.passed


def test_query_reduction_trivial_when_maximizer_in_set():
    enum = ab.enumerate_inputs("ke2", 2, 3, 0, 1, "generic")
    gamma = ab.uniform_adversary(enum)
    rep = ab.verify_query_reduction(gamma)
    assert rep.max_all >= rep.max_query_set - 1e-12
    if rep.sigma is not None:
        x_star, target = rep.sigma
        assert x_star != target


def test_optimizer():
    enum = ab.or2_enumeration()
    start = ab.adv_value(ab.uniform_adversary(enum), ab.all_masks(enum))
    a = ab.optimize_adversary(enum, iterations=200, seed=3)
    b = ab.optimize_adversary(enum, iterations=200, seed=3)
    val = ab.adv_value(a, ab.all_masks(enum))
    assert val >= start - 1e-12
    assert val >= math.sqrt(2) - 1e-3
    assert np.array_equal(a.matrix, b.matrix)
    with pytest.raises(SizeLimitError):
        ab.optimize_adversary(ab.enumerate_inputs("cf", 2, 4, 0, 1))
