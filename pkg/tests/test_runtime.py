import numpy as np
import pytest

from blockstruct.annealing import InitDistribution, TestConfig, anneal
from blockstruct.indexmaps import Permutation
from blockstruct.linalg import ChannelBundle, matvec
from blockstruct.runtime import (
    InconsistentSystemError,
    build_system,
    infer,
    infer_subdivided,
    redistribute_update,
    redistribute_update_subdivided,
    reference_forward,
    scc_cuts,
    subdivide_block,
    verify_equivalence,
)
from blockstruct.structure import analyze
from blockstruct.training import generate_planted_system
from blockstruct.worked_example import adjacency
from oracles import random_annealed


def _system(w, **kw):
    a = analyze(w, **kw)
    return build_system(w, a.table, a.permutation), a


def test_fully_coupled_is_one_block():
    sys, _ = _system(np.ones((5, 5)))
    assert [b.size for b in sys.blocks] == [5]
    assert sys.dormant.k == 0


def test_identity_weights_pass_input_through():
    sys, _ = _system(np.ones((4, 4)))
    sys.blocks[0].operator = np.eye(4)
    x = np.array([1.0, -2.0, 3.5, 0.0])
    assert np.array_equal(infer(sys, x), x)


def test_worked_example_blocks():
    sys, _ = _system(adjacency())
    assert [b.size for b in sys.blocks] == [9, 6, 2]
    assert [b.new_range for b in sys.blocks] == [(1, 9), (10, 15), (16, 17)]
    assert (sys.dormant.place + 1).tolist() == [18]


def test_worked_example_indicator_input():
    sys, _ = _system(adjacency())
    x = np.zeros(18)
    x[4] = 1.0
    y = infer(sys, x)
    assert (np.flatnonzero(y) + 1).tolist() == [4, 17]
    assert np.array_equal(y, matvec(adjacency(), x))


def test_zero_input_gives_zero_output():
    rng = np.random.default_rng(0)
    w = random_annealed(rng, 30, 3, isolated=2)
    sys, _ = _system(w)
    assert not np.any(infer(sys, np.zeros(30)))


def test_random_systems_exact():
    rng = np.random.default_rng(1)
    for _ in range(20):
        n = int(rng.integers(3, 80))
        blocks = int(rng.integers(1, min(n, 6)))
        w = random_annealed(rng, n, blocks, isolated=int(rng.integers(0, n - blocks + 1)))
        sys, _ = _system(w)
        rep = verify_equivalence(sys, w, trials=5, seed=int(rng.integers(1 << 30)))
        assert rep.max_abs_deviation == 0.0 and rep.equivalent


def test_dormant_outputs_stay_zero():
    rng = np.random.default_rng(2)
    w = random_annealed(rng, 20, 2, isolated=4)
    sys, a = _system(w)
    y = infer(sys, rng.normal(size=20))
    dormant_nodes = a.permutation.src[sys.dormant.place]
    assert np.all(y[dormant_nodes] == 0.0)


def test_self_loop_isolated_node_keeps_a_block():
    w = np.zeros((3, 3))
    w[0, 0] = 2.0
    w[2, 1] = 1.0
    sys, a = _system(w)
    assert a.table.i_tag[0] == 1
    assert sys.dormant.k == 0
    x = np.array([1.5, 1.0, 0.0])
    assert np.array_equal(infer(sys, x), matvec(w, x))


def test_images_partition_and_isolated_last():
    rng = np.random.default_rng(3)
    w = random_annealed(rng, 25, 3, isolated=3)
    sys, _ = _system(w, isolated_last=True)
    images = np.sort(np.concatenate([b.embedding.place for b in sys.blocks] + [sys.dormant.place]))
    assert images.tolist() == list(range(25))
    assert sys.dormant.place.tolist() == [22, 23, 24]


def test_assemble_round_trip():
    rng = np.random.default_rng(4)
    w = random_annealed(rng, 30, 4)
    sys, _ = _system(w)
    # zeros come back as +0.0
    assert sys.assemble().tobytes() == np.where(w == 0.0, 0.0, w).tobytes()


def test_inconsistent_inputs_rejected():
    w = adjacency()
    a = analyze(w)
    with pytest.raises(InconsistentSystemError):
        build_system(w, a.table, Permutation.identity(18))
    with pytest.raises(InconsistentSystemError):
        build_system(np.ones((18, 18)), a.table, a.permutation)
    with pytest.raises(InconsistentSystemError):
        build_system(np.zeros((5, 5)), a.table, a.permutation)


def test_fault_injection_reports_deviation():
    rng = np.random.default_rng(5)
    w = random_annealed(rng, 20, 2)
    sys, a = _system(w)
    g = a.table.g_tag
    i, j = next((i, j) for i in range(20) for j in range(20) if g[i] != g[j])
    bad = w.copy()
    bad[i, j] = 1.0
    rep = verify_equivalence(sys, bad, trials=3)
    assert not rep.equivalent and rep.mismatches == 3 and rep.max_abs_deviation > 0


def test_channel_system_with_relu():
    rng = np.random.default_rng(6)
    support = random_annealed(rng, 24, 3) != 0
    chans = [rng.normal(size=(24, 24)) * support for _ in range(8)]
    b = ChannelBundle(chans[:4], chans[4:])
    from blockstruct.structure import StructuralPredicate

    a = analyze(b, StructuralPredicate("channel-norm-threshold"))
    sys = build_system(b, a.table, a.permutation)
    assert sys.is_channel
    for sigma in ("identity", "relu", "tanh"):
        assert verify_equivalence(sys, b, trials=5, sigma=sigma).max_abs_deviation == 0.0


def test_planted_pipeline_block_sizes():
    ps = generate_planted_system(64, 4, 2000, seed=12)
    res = anneal(ps.w_final, InitDistribution(0.1), TestConfig(alpha=0.01))
    sys, _ = _system(res.weights)
    assert sorted(b.size for b in sys.blocks) == sorted(len(g) for g in ps.groups)
    assert verify_equivalence(sys, res.weights).equivalent


# subdivision ---------------------------------------------------------------------

def test_no_cuts_is_whole_block():
    blk = np.tril(np.ones((4, 4)))
    sd = subdivide_block(blk)
    assert len(sd.parts) == 1 and np.array_equal(sd.parts[0], blk)


def test_cut_shapes():
    sd = subdivide_block(np.tril(np.ones((4, 4))), cuts=[2])
    assert [p.shape for p in sd.parts] == [(2, 2), (2, 4)]


def test_subdivided_matches_block_matvec():
    rng = np.random.default_rng(7)
    for _ in range(30):
        size = int(rng.integers(2, 20))
        cuts = sorted(rng.choice(np.arange(1, size), size=int(rng.integers(0, size - 1)), replace=False).tolist())
        blk = rng.normal(size=(size, size))
        ends = cuts + [size]
        starts = [0] + cuts
        for s, e in zip(starts, ends):
            blk[s:e, e:] = 0.0
        x = rng.normal(size=size)
        sd = subdivide_block(blk, cuts)
        assert np.array_equal(infer_subdivided(sd, x), matvec(blk, x))
        assert not np.any(infer_subdivided(sd, np.zeros(size)))


def test_subdivision_validation():
    with pytest.raises(ValueError):
        subdivide_block(np.ones((3, 3)), cuts=[1])
    with pytest.raises(ValueError):
        subdivide_block(np.tril(np.ones((3, 3))), cuts=[2, 1])
    with pytest.raises(ValueError):
        subdivide_block(np.tril(np.ones((3, 3))), cuts=[3])


def test_scc_cuts_on_worked_example():
    rng = np.random.default_rng(8)
    w = adjacency() * rng.normal(size=(18, 18))
    sys, a = _system(w)
    for blk in sys.blocks:
        cuts = scc_cuts(a.table, a.permutation, blk)
        sd = subdivide_block(blk.operator, cuts, blk.order)
        x = rng.normal(size=blk.size)
        assert np.array_equal(infer_subdivided(sd, x), blk.apply(x))
    assert scc_cuts(a.table, a.permutation, sys.blocks[0]) == [3, 5, 7]


# updates ----------------------------------------------------------------------------

def test_zero_gradient_leaves_blocks_bitwise():
    rng = np.random.default_rng(9)
    w = random_annealed(rng, 20, 3)
    sys, _ = _system(w)
    new = redistribute_update(sys, rng.normal(size=20), np.zeros(20), 0.1)
    for a, b in zip(sys.blocks, new.blocks):
        assert a.operator.tobytes() == b.operator.tobytes()
    assert new.meta["updates"] == 1


def test_single_block_identity_permutation_update():
    rng = np.random.default_rng(10)
    w = rng.normal(size=(5, 5))
    sys, _ = _system(w)
    assert sys.p == Permutation.identity(5)
    x, g = rng.normal(size=5), rng.normal(size=5)
    new = redistribute_update(sys, x, g, 0.5)
    assert new.blocks[0].operator.tobytes() == (w - 0.5 * np.outer(g, x)).tobytes()


def test_random_updates_match_masked_dense_update():
    rng = np.random.default_rng(11)
    for _ in range(10):
        n = int(rng.integers(4, 60))
        w = random_annealed(rng, n, int(rng.integers(1, 4)), isolated=int(rng.integers(0, 3)))
        sys, _ = _system(w)
        support = np.zeros((n, n), dtype=bool)
        inv = sys.p.inverse()
        local = np.zeros((n, n), dtype=bool)
        for b in sys.blocks:
            local[np.ix_(b.embedding.place, b.projection.select)] = True
        support = inv.apply_matrix(local)
        x, g = rng.normal(size=n), rng.normal(size=n)
        want = np.where(support, w - 0.2 * np.outer(g, x), w)
        got = redistribute_update(sys, x, g, 0.2).assemble()
        assert got.tobytes() == want.tobytes()


def test_subdivided_update_rows_by_prefix():
    rng = np.random.default_rng(12)
    blk = np.tril(rng.normal(size=(6, 6)))
    sd = subdivide_block(blk, [2, 4])
    x, g = rng.normal(size=6), rng.normal(size=6)
    new = redistribute_update_subdivided(sd, x, g, 0.3)
    full = blk - 0.3 * np.outer(g, x)
    assert np.array_equal(new.parts[1], full[2:4, :4])
    assert np.array_equal(new.parts[2], full[4:6, :6])


def test_update_validation():
    sys, _ = _system(np.ones((3, 3)))
    with pytest.raises(ValueError):
        redistribute_update(sys, np.ones(3), np.ones(3), 0.0)
    with pytest.raises(ValueError):
        redistribute_update(sys, np.ones(2), np.ones(3), 1.0)


def test_reference_forward_dispatch():
    w = np.arange(4.0).reshape(2, 2)
    assert np.array_equal(reference_forward(w, np.ones(2)), matvec(w, np.ones(2)))
