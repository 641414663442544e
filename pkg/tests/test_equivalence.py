import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sympy.utilities.iterables import multiset_partitions

from approxde.equivalence import (
    DistanceTable,
    UnionFind,
    coarsest_partition,
    coarsest_partition_frozen,
    equiv_distance,
    is_equivalence,
    refine_step,
    refinement_trace,
)
from approxde.model import Partition, gen_htree, inline_frozen, voltage_blocks
from oracles import oracle_distance, oracle_is_equivalence, random_pivp, refines


def test_running_example_distances(running):
    m, G = running
    assert equiv_distance(m, G, 1, 2, "B") == pytest.approx(0.02)
    assert equiv_distance(m, G, 1, 2, "F") == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        equiv_distance(m, G, 0, 1, "B")


def test_running_example_reduce(running):
    m, G = running
    assert coarsest_partition(m, G, 0.02, "B") == G
    assert coarsest_partition(m, Partition.single(3), 0.02, "B") == G
    assert coarsest_partition(m, Partition.single(3), 0.01, "B") == Partition.singletons(3)
    assert coarsest_partition(m, G, 0.0, "F") == G


def test_bad_arguments(running):
    m, G = running
    with pytest.raises(ValueError):
        coarsest_partition(m, G, -1.0, "B")
    with pytest.raises(ValueError):
        coarsest_partition(m, G, 0.0, "X")
    with pytest.raises(ValueError):
        coarsest_partition(m, Partition.single(2), 0.0, "B")


def test_union_find_least_root():
    uf = UnionFind([4, 2, 7, 9])
    uf.union(9, 7)
    uf.union(7, 2)
    assert uf.find(9) == 2
    assert sorted(map(tuple, uf.groups())) == [(2, 7, 9), (4,)]


@pytest.mark.parametrize("depth", [2, 3, 4])
def test_htree_affine_form_has_same_blocks(depth):
    m, _ = gen_htree(depth, 0.0, 0)
    a, _ = inline_frozen(m)
    H = coarsest_partition(a, Partition.single(a.n), 0.0, "B")
    assert len(H) == depth
    assert len(voltage_blocks(m, coarsest_partition(m, Partition.single(m.n), 0.0, "B"))) == depth


@pytest.mark.parametrize("depth", [2, 3, 4])
def test_htree_tolerance_needs_epsilon(depth):
    m, G = gen_htree(depth, 1e-4, 0)
    assert len(voltage_blocks(m, coarsest_partition_frozen(m, G, 0.0, "B"))) == 2 ** depth - 1
    H = coarsest_partition_frozen(m, G, 6e-4, "B")
    assert len(voltage_blocks(m, H)) == depth
    assert H.refines(G)
    # with frozen values equalized inside blocks the partition is exact
    assert is_equivalence(m, H, 0.0, "B")


def test_frozen_reduction_without_frozen_variables(running):
    m, G = running
    assert coarsest_partition_frozen(m, G, 0.02, "B") == coarsest_partition(m, G, 0.02, "B")


seeds = st.integers(0, 2 ** 32 - 1)


@given(seeds, st.sampled_from(["B", "F"]), st.sampled_from([0.0, 0.5, 1.0, 2.0, 4.0]))
@settings(max_examples=40)
def test_distance_matches_sympy(seed, mode, eps):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    m = random_pivp(rng, n)
    parts = list(multiset_partitions(list(range(n))))
    H = Partition.from_blocks(parts[int(rng.integers(len(parts)))], n)
    table = DistanceTable(m, H, mode)
    for b in H.blocks:
        for a in range(len(b)):
            for c in range(a + 1, len(b)):
                want = oracle_distance(m, [list(x) for x in H.blocks], b[a], b[c], mode)
                assert table.distance(b[a], b[c]) == pytest.approx(want, abs=1e-12)


@given(seeds, st.sampled_from(["B", "F"]), st.floats(0, 4))
@settings(max_examples=40)
def test_coarsest_against_enumeration(seed, mode, eps):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    m = random_pivp(rng, n)
    H = coarsest_partition(m, Partition.single(n), eps, mode)
    Hb = [list(b) for b in H.blocks]
    cache: dict = {}
    assert oracle_is_equivalence(m, Hb, eps, mode, cache)
    for P in multiset_partitions(list(range(n))):
        if oracle_is_equivalence(m, P, eps, mode, cache):
            assert refines(P, Hb)


@given(seeds, st.sampled_from(["B", "F"]), st.floats(0, 4))
@settings(max_examples=40)
def test_refinement_invariants(seed, mode, eps):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    m = random_pivp(rng, n)
    trace = list(refinement_trace(m, Partition.single(n), eps, mode))
    for a, b in zip(trace, trace[1:]):
        assert b.refines(a) and len(b) > len(a)
    H = trace[-1]
    assert is_equivalence(m, H, eps, mode)
    assert refine_step(m, H, eps, mode) == H
    assert coarsest_partition(m, H, eps, mode) == H
    # singletons are always an equivalence
    assert is_equivalence(m, Partition.singletons(n), eps, mode)
