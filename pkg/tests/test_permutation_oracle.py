import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from conftest import brute_force_keys
from qmitm.classical_attacks import mitm_2
from qmitm.errors import ParameterError
from qmitm.permutation_oracle import (
    FORWARD,
    INVERSE,
    MAGIC,
    Instance,
    PermutationFamily,
    Query,
    QueryLedger,
    conjugate_instance,
    generate_family,
    load,
    plant_instance,
    query,
    query_batch,
    random_instance,
    randomize_instance,
    save,
    unpack,
)


def is_bijection(table, m):
    return np.array_equal(np.sort(table), np.arange(m))


def test_single_key_family_round_trips():
    fam = generate_family(42, 1, 4)
    assert is_bijection(fam.forward[0], 4)
    for x in range(4):
        assert fam.evaluate_inverse(0, fam.evaluate(0, x)) == x


def test_forward_then_inverse_is_identity_everywhere():
    fam = generate_family(7, 8, 8)
    for k in range(8):
        for x in range(8):
            assert fam.evaluate_inverse(k, fam.evaluate(k, x)) == x
            assert fam.evaluate(k, fam.evaluate_inverse(k, x)) == x


def test_round_trip_exhaustive_at_4096():
    fam = generate_family(3, 4, 4096)
    rows = np.arange(4)[:, None]
    xs = np.arange(4096)[None, :]
    assert np.array_equal(fam.inverse[rows, fam.forward[rows, xs]], np.broadcast_to(xs, (4, 4096)))
    assert np.array_equal(fam.forward[rows, fam.inverse[rows, xs]], np.broadcast_to(xs, (4, 4096)))


def test_generation_is_deterministic_and_seed_sensitive():
    assert generate_family(7, 8, 8).to_bytes() == generate_family(7, 8, 8).to_bytes()
    blobs = {generate_family(s, 8, 8).to_bytes() for s in range(200)}
    assert len(blobs) == 200


def test_tables_are_read_only():
    fam = generate_family(1, 2, 8)
    with pytest.raises(ValueError):
        fam.forward[0, 0] = 1


@pytest.mark.parametrize("n,m", [(0, 4), (2, 1), (-1, 8)])
def test_bad_family_parameters(n, m):
    with pytest.raises(ParameterError):
        generate_family(0, n, m)


def test_from_forward_rejects_non_bijection():
    with pytest.raises(ParameterError):
        PermutationFamily.from_forward([[0, 0, 1]])


@given(st.integers(0, 2**64 - 1), st.integers(1, 6), st.integers(2, 40))
def test_family_invariants(seed, n, m):
    fam = generate_family(seed, n, m)
    for k in range(n):
        assert is_bijection(fam.forward[k], m)
        assert np.array_equal(fam.inverse[k, fam.forward[k]], np.arange(m))


def test_identity_chain():
    fwd = np.array([[1, 0, 2, 3], [0, 1, 2, 3]])
    inst = plant_instance(PermutationFamily.from_forward(fwd), 2, (1, 1), [3])
    assert inst.pairs == ((3, 3),)


def test_plant_recomputes_by_direct_evaluation():
    fam = generate_family(11, 4, 64)
    inst = plant_instance(fam, 2, (2, 3), [17])
    assert inst.ciphertexts[0] == fam.evaluate(3, fam.evaluate(2, 17))


def test_planted_pair_unique_at_n16_m4096():
    inst = random_instance(5, 16, 4096, 2, 2)
    assert brute_force_keys(inst) == [inst.planted_keys]


@pytest.mark.parametrize(
    "depth,keys,pts",
    [(2, (0,), [1]), (2, (0, 1, 2), [1]), (2, (0, 1), [1, 1]), (4, (0, 1, 2, 3), [1]), (3, (0, 1, 2), [1]), (2, (0, 9), [1]), (2, (0, 1), [99])],
)
def test_plant_rejects(depth, keys, pts):
    with pytest.raises(ParameterError):
        plant_instance(generate_family(0, 4, 16), depth, keys, pts)


@given(st.integers(0, 2**32), st.sampled_from([2, 4]), st.integers(2, 5))
def test_planted_chain_invariant(seed, depth, pairs):
    inst = random_instance(seed, 5, 32, depth, pairs)
    assert inst.consistent(inst.planted_keys)
    assert len(set(inst.plaintexts)) == pairs


def test_query_and_ledger():
    inst = random_instance(1, 4, 16, 2, 1)
    led = QueryLedger()
    y = query(inst, Query(5, 2, FORWARD), led)
    assert query(inst, Query(y, 2, INVERSE), led) == 5
    assert (led.forward_queries, led.inverse_queries, led.time_units) == (1, 1, 2)
    fresh = QueryLedger()
    for x in range(5):
        query(inst, Query(x, 0), fresh)
    assert (fresh.forward_queries, fresh.inverse_queries) == (5, 0)
    assert fresh.total_queries == 5


def test_query_matches_serialized_tables():
    inst = random_instance(9, 8, 256, 2, 1)
    tables = np.frombuffer(inst.to_bytes()[-8 * 256 * 4 :], dtype="<u4").reshape(8, 256)
    rng = np.random.default_rng(0)
    led = QueryLedger()
    for _ in range(1000):
        k, x = int(rng.integers(8)), int(rng.integers(256))
        assert query(inst, Query(x, k), led) == tables[k, x]
    assert led.forward_queries == 1000


@pytest.mark.parametrize("q", [Query(16, 0), Query(0, 4), Query(-1, 0)])
def test_query_out_of_range(q):
    with pytest.raises(ParameterError):
        query(random_instance(1, 4, 16, 2, 1), q, QueryLedger())


def test_query_direction_validated():
    with pytest.raises(ParameterError):
        Query(0, 0, 0)
    with pytest.raises(ParameterError):
        query_batch(random_instance(1, 4, 16, 2, 1), [0], [0], 2, QueryLedger())


def test_query_batch_counts_each_element():
    inst = random_instance(2, 4, 16, 2, 1)
    led = QueryLedger()
    out = query_batch(inst, np.arange(4), 3, FORWARD, led)
    assert out.tolist() == [inst.family.evaluate(k, 3) for k in range(4)]
    assert led.forward_queries == 4 and led.time_units == 4


def test_ledger_memory_peak():
    led = QueryLedger()
    led.store(5)
    led.release(3)
    led.store(1)
    assert (led.memory_units, led.peak_memory_units) == (3, 5)
    with pytest.raises(RuntimeError):
        led.release(10)


def test_conjugate_identity_is_byte_identical():
    inst = random_instance(4, 6, 32, 2, 2)
    assert conjugate_instance(inst, np.arange(32)).to_bytes() == inst.to_bytes()


def test_conjugate_keeps_keys_and_mitm_answer():
    inst = random_instance(4, 16, 256, 2, 3)
    sigma = np.random.default_rng(1).permutation(256)
    conj = conjugate_instance(inst, sigma)
    assert conj.consistent(conj.planted_keys)
    for k in range(16):
        assert is_bijection(conj.family.forward[k], 256)
    assert mitm_2(conj).recovered_keys == mitm_2(inst).recovered_keys == inst.planted_keys


@given(st.permutations(list(range(8))))
def test_conjugation_relation(sigma):
    inst = random_instance(3, 3, 8, 2, 2)
    conj = conjugate_instance(inst, sigma)
    s = np.array(sigma)
    for k in range(3):
        for x in range(8):
            assert conj.family.evaluate(k, s[x]) == s[inst.family.evaluate(k, x)]


def test_conjugate_rejects_non_bijection():
    with pytest.raises(ParameterError):
        conjugate_instance(random_instance(4, 3, 8, 2, 1), [0] * 8)


def test_randomize_valid_and_deterministic():
    inst = random_instance(8, 5, 64, 4, 4)
    a = randomize_instance(inst, 99)
    assert a.consistent(inst.planted_keys)
    assert a.plaintexts == inst.plaintexts
    assert a == randomize_instance(inst, 99)
    assert a != randomize_instance(inst, 100)


def test_randomize_marginal_is_uniform():
    m = 16
    inst = random_instance(8, 2, m, 2, 1)
    p = inst.plaintexts[0]
    counts = np.bincount([randomize_instance(inst, s).family.evaluate(0, p) for s in range(1000)], minlength=m)
    assert stats.chisquare(counts).pvalue > 0.01


def test_serialization_round_trip(tmp_path):
    inst = random_instance(21, 6, 50, 4, 4)
    path, meta = save(inst, tmp_path / "inst.bin", seed=21)
    assert path.read_bytes().startswith(MAGIC)
    back = load(path)
    assert isinstance(back, Instance) and back == inst
    assert back.family.seed == 21
    desc = json.loads(meta.read_text())
    assert desc["planted_keys"] == list(inst.planted_keys)
    assert load(meta) == inst
    fam = generate_family(3, 4, 9)
    save(fam, tmp_path / "fam.bin")
    assert load(tmp_path / "fam.bin") == fam


def test_binary_layout():
    fam = PermutationFamily.from_forward([[1, 0], [0, 1]])
    inst = plant_instance(fam, 2, (0, 1), [0])
    words = np.frombuffer(inst.to_bytes()[len(MAGIC) :], dtype="<u4").tolist()
    # N, M, depth, keys, n_pairs, (P, C), tables
    assert words == [2, 2, 2, 0, 1, 1, 0, 1, 1, 0, 0, 1]


def test_unpack_rejects_garbage():
    with pytest.raises(ParameterError):
        unpack(b"NOTQMITM" + bytes(32))
    blob = random_instance(1, 2, 4, 2, 1).to_bytes()
    with pytest.raises(ParameterError):
        unpack(blob[:-4])
