import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockstruct.boolmat import BoolMatrix, mutual_reachability, star_closure
from blockstruct.linalg import ChannelBundle
from blockstruct.structure import (
    StructuralPredicate,
    analyze,
    build_table_and_permutation,
    condensation,
    layer_peel,
    p_adjacency,
    scc_labels,
    wcc_labels,
)
from blockstruct.annealing import anneal
from blockstruct.worked_example import EXPECTED_TABLE, adjacency
from oracles import longest_path_layers, partition_of, random_annealed, tarjan_scc, undirected_components

TABLE = np.array(EXPECTED_TABLE)
BY_NODE = TABLE[np.argsort(TABLE[:, 0])]


def _analysis():
    return analyze(adjacency())


# predicate adjacency --------------------------------------------------------

def test_zero_matrix_gives_empty_adjacency():
    assert p_adjacency(np.zeros((4, 4))).count() == 0


def test_worked_example_adjacency_is_support():
    w = adjacency() * np.random.default_rng(0).uniform(-2, 2, (18, 18))
    assert np.array_equal(p_adjacency(w).to_dense(), adjacency() > 0)


def test_epsilon_threshold_is_strict():
    w = np.array([[0.0, 0.5], [0.2, 0.0]])
    assert p_adjacency(w, StructuralPredicate(epsilon=0.2)).to_dense().tolist() == [[False, True], [False, False]]


def test_channel_norm_predicate():
    chans = [np.zeros((6, 6)) for _ in range(8)]
    chans[3][1, 4] = 7.0  # edge (2, 5) in 1-based indexing
    b = ChannelBundle(chans[:4], chans[4:])
    m = p_adjacency(b, StructuralPredicate("channel-norm-threshold", 0.5))
    assert [tuple(ix) for ix in np.argwhere(m.to_dense())] == [(1, 4)]


def test_classification_predicate_uses_kept_mask():
    rng = np.random.default_rng(1)
    res = anneal(rng.normal(size=(10, 10)))
    m = p_adjacency(res, StructuralPredicate("classification-based"))
    assert np.array_equal(m.to_dense(), res.kept)


def test_predicate_validation():
    with pytest.raises(ValueError):
        StructuralPredicate("other")
    with pytest.raises(ValueError):
        StructuralPredicate(epsilon=-1.0)
    with pytest.raises(ValueError):
        p_adjacency(np.zeros((2, 3)))


# SCCs, condensation, layers, components -------------------------------------------

def test_identity_relation_labels_every_node():
    assert scc_labels(BoolMatrix.identity(5)).tolist() == [1, 2, 3, 4, 5]


def test_worked_example_scc_column():
    a = _analysis()
    assert a.table.s_tag.tolist() == BY_NODE[:, 1].tolist()
    assert a.table.s_tag[9] == a.table.s_tag[17] == 6
    assert a.table.s_tag[10] == a.table.s_tag[16] == 7
    assert a.condensation.k == 9


def test_acyclic_condensation_is_input_without_diagonal():
    rng = np.random.default_rng(2)
    n = 12
    dag = np.tril(rng.random((n, n)) < 0.3, -1) | np.eye(n, dtype=bool)
    m = BoolMatrix.from_dense(dag)
    s = scc_labels(mutual_reachability(star_closure(m)))
    assert s.tolist() == list(range(1, n + 1))
    assert np.array_equal(condensation(m, s).m_c.to_dense(), dag & ~np.eye(n, dtype=bool))


def test_compression_matrix_columns_have_one_bit():
    a = _analysis()
    r = a.condensation.r_c.to_dense()
    assert r.shape == (9, 18)
    assert np.all(r.sum(axis=0) == 1)
    assert not a.condensation.m_c.diagonal().any()


def test_worked_example_layers_and_groups():
    a = _analysis()
    layer_of_scc = {int(s): int(l) for s, l in zip(a.table.s_tag, a.table.l_tag)}
    assert {s for s, l in layer_of_scc.items() if l == 1} == {1, 9, 4, 5}
    assert {s for s, l in layer_of_scc.items() if l == 2} == {2, 8}
    assert {s for s, l in layer_of_scc.items() if l == 3} == {6, 7, 3}
    group_of_scc = {int(s): int(g) for s, g in zip(a.table.s_tag, a.table.g_tag)}
    assert group_of_scc == {1: 1, 2: 1, 6: 1, 7: 1, 3: 2, 8: 2, 9: 2, 4: 3, 5: 4}


def test_zero_condensation_layers_and_components():
    z = BoolMatrix.zeros(4)
    assert layer_peel(z).tolist() == [1, 1, 1, 1]
    assert wcc_labels(z).tolist() == [1, 2, 3, 4]


def test_cycle_detected():
    from blockstruct.structure import CycleError

    with pytest.raises(CycleError):
        layer_peel(BoolMatrix.from_dense([[0, 1], [1, 0]]))


def test_worked_example_full_table():
    a = _analysis()
    assert a.table.rows() == EXPECTED_TABLE
    assert a.table.v_new[13] == 10 and a.table.v_new[8] == 18 and a.table.v_new[9] == 6


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 64), st.floats(0.0, 0.15), st.integers(0, 2**32 - 1))
def test_random_graphs_against_oracles(n, p, seed):
    rng = np.random.default_rng(seed)
    adj = rng.random((n, n)) < p
    a = analyze(BoolMatrix.from_dense(adj))
    assert partition_of(a.table.s_tag) == set(tarjan_scc(adj))
    assert partition_of(a.table.g_tag) == undirected_components(adj | np.eye(n, dtype=bool))
    # condensation edges are exactly the cross-SCC edges
    s = a.table.s_tag - 1
    want = np.zeros((a.condensation.k, a.condensation.k), dtype=bool)
    for i, j in zip(*np.nonzero(adj)):
        if s[i] != s[j]:
            want[s[i], s[j]] = True
    assert np.array_equal(a.condensation.m_c.to_dense(), want)
    if a.condensation.k > 1:
        layers = longest_path_layers(want)
        assert np.array_equal(a.table.l_tag, layers[s])
    _check_table_invariants(a, adj)


def _check_table_invariants(a, adj):
    t = a.table
    n = t.n
    assert sorted(t.v_new.tolist()) == list(range(1, n + 1))
    # nodes sharing an SCC share component and layer
    for lab in np.unique(t.s_tag):
        members = t.s_tag == lab
        assert np.unique(t.g_tag[members]).size == 1 and np.unique(t.l_tag[members]).size == 1
    off = adj & ~np.eye(n, dtype=bool)
    lonely = ~off.any(axis=0) & ~off.any(axis=1)
    assert np.array_equal(t.i_tag == 1, lonely)
    # sort keys monotone along the new order
    rows = np.array(t.rows())
    keys = [tuple(r[[2, 4, 3, 1, 0]]) for r in rows]
    assert keys == sorted(keys)


def test_random_dag_layers_match_longest_path():
    rng = np.random.default_rng(3)
    for _ in range(30):
        k = int(rng.integers(2, 30))
        dag = np.tril(rng.random((k, k)) < 0.2, -1)
        perm = rng.permutation(k)
        dag = dag[np.ix_(perm, perm)]
        assert np.array_equal(layer_peel(BoolMatrix.from_dense(dag)), longest_path_layers(dag))


# table and permutation -------------------------------------------------------

def test_single_node():
    a = analyze(np.zeros((1, 1)))
    assert a.table.rows() == [(1, 1, 1, 1, 1, 1)]
    assert a.permutation.src.tolist() == [0]


def test_complete_digraph_is_one_block():
    a = analyze(np.ones((6, 6)))
    assert a.condensation.k == 1
    assert set(a.table.g_tag) == {1} and set(a.table.l_tag) == {1} and set(a.table.i_tag) == {0}
    assert a.permutation.src.tolist() == list(range(6))


def test_isolated_last_moves_isolated_nodes_to_the_end():
    # node 0 is isolated but would sort first by component index
    adj = np.zeros((4, 4))
    adj[2, 1] = adj[3, 2] = 1
    plain = analyze(adj)
    assert plain.table.v_new[0] == 1
    last = analyze(adj, isolated_last=True)
    assert last.table.v_new[0] == 4
    assert last.permutation.src.tolist()[-1] == 0


def test_self_loop_does_not_clear_isolation():
    adj = np.zeros((3, 3))
    adj[0, 0] = 1.0
    adj[2, 1] = 1.0
    a = analyze(adj)
    assert a.table.i_tag.tolist() == [1, 0, 0]


def test_random_attribute_tables_sort_monotone():
    rng = np.random.default_rng(4)
    for _ in range(50):
        n = int(rng.integers(1, 40))
        cols = [rng.integers(1, 5, n) for _ in range(3)] + [rng.integers(0, 2, n)]
        for flag in (False, True):
            table, perm = build_table_and_permutation(*cols, isolated_last=flag)
            assert sorted(perm.src.tolist()) == list(range(n))
            s, g, l, i = (c[perm.src] for c in cols)
            keys = list(zip(i, g, l, s, perm.src)) if flag else list(zip(g, i, l, s, perm.src))
            assert keys == sorted(keys)


def test_permuted_example_is_block_triangular():
    a = _analysis()
    pm = a.permutation.apply_matrix(adjacency())
    new_g = a.table.g_tag[a.permutation.src]
    new_l = a.table.l_tag[a.permutation.src]
    new_s = a.table.s_tag[a.permutation.src]
    rows, cols = np.nonzero(pm)
    assert np.all(new_g[rows] == new_g[cols])
    assert np.all(new_l[rows] >= new_l[cols])
    same_layer = new_l[rows] == new_l[cols]
    assert np.all(new_s[rows][same_layer] == new_s[cols][same_layer])


def test_planted_annealed_block_count():
    from blockstruct.annealing import InitDistribution, TestConfig
    from blockstruct.training import generate_planted_system

    ps = generate_planted_system(64, 4, 2000, seed=11)
    res = anneal(ps.w_final, InitDistribution(0.1), TestConfig(alpha=0.01))
    a = analyze(res.weights)
    assert np.unique(a.table.g_tag[a.table.i_tag == 0]).size == 4


def test_deterministic_tables():
    rng = np.random.default_rng(5)
    w = random_annealed(rng, 40, 3)
    assert analyze(w).table.rows() == analyze(w).table.rows()
