import numpy as np
import pytest

from graphre.errors import ConfigError, DimensionError, UsageError
from graphre.numerics import Tensor, finite_diff_check, ops
from graphre.scorer import (Biaffine, GATLayer, Scorer, ScorerConfig, biaffine, biaffine_all_pairs,
                            mask_self, topk_sparsify)


def rng(seed=0):
    return np.random.default_rng(seed)


# -- biaffine --------------------------------------------------------------------

def test_biaffine_identity_form():
    e1 = np.array([1.0, 0.0, 0.0])
    assert biaffine(e1, e1, np.eye(3), np.zeros(3)).data[0] == 1.0


def test_biaffine_direct_arithmetic():
    out = biaffine([1.0, 2.0], [1.0, 0.0], np.eye(2), [1.0, -1.0])
    assert out.data[0] == 0.0


def test_biaffine_all_pairs_einsum_oracle():
    g = rng(1)
    heads, deps = g.normal(size=(5, 4)), g.normal(size=(5, 4))
    w, b = g.normal(size=(4, 3, 4)), g.normal(size=(4, 3))
    got = biaffine_all_pairs(Tensor(heads), Tensor(deps), Tensor(w), Tensor(b)).data
    ref = np.einsum("ja,arb,ib->ijr", heads, w, deps) + np.einsum("ja,ar->jr", heads, b)[None]
    np.testing.assert_allclose(got, ref, atol=1e-12)


def test_biaffine_gradients():
    g = rng(2)
    x1, x2 = Tensor(g.normal(size=3)), Tensor(g.normal(size=3))
    w, b = Tensor(g.normal(size=(3, 2, 3))), Tensor(g.normal(size=(3, 2)))
    weights = Tensor([1.0, -2.0])
    args = [x1, x2, w, b]
    for k in range(4):
        def f(t, k=k):
            parts = list(args)
            parts[k] = t
            return ops.tsum(biaffine(*parts) * weights)
        assert finite_diff_check(f, args[k]) < 1e-6


def test_biaffine_dimension_mismatch():
    with pytest.raises(DimensionError):
        biaffine(np.ones(3), np.ones(2), np.eye(3), np.zeros(3))
    with pytest.raises(DimensionError):
        Biaffine(4, 1, rng())(Tensor(np.ones((3, 4))), Tensor(np.ones((3, 5))))


# -- top-k ------------------------------------------------------------------------

def test_topk_direct_selection():
    scores = np.array([[0.0, 0.0, 0.0, 0.0],
                       [-np.inf, -np.inf, 5.0, 3.0],
                       [1.0, 5.0, -np.inf, 3.0],
                       [1.0, 5.0, 3.0, -np.inf]])
    adj = topk_sparsify(scores, 2)
    assert set(np.flatnonzero(adj[2])) == {1, 3}
    assert set(np.flatnonzero(adj[3])) == {1, 2}


def test_topk_saturates_to_full_row():
    adj = topk_sparsify(rng().normal(size=(4, 4)), 10)
    for i in range(1, 4):
        assert set(np.flatnonzero(adj[i])) == set(range(4)) - {i}


def test_topk_ties_go_to_lower_column():
    adj = topk_sparsify(np.zeros((5, 5)), 2)
    assert set(np.flatnonzero(adj[3])) == {0, 1}
    assert set(np.flatnonzero(adj[1])) == {0, 2}


def test_topk_sort_oracle():
    g = rng(3)
    for _ in range(20):
        s = g.normal(size=(10, 10))
        k = int(g.integers(1, 10))
        adj = topk_sparsify(s, k)
        for i in range(1, 10):
            ranked = sorted((j for j in range(10) if j != i), key=lambda j: (-s[i, j], j))
            assert set(np.flatnonzero(adj[i])) == set(ranked[:k])
            assert adj[i].sum() == min(k, 9)


def test_topk_rejects_k0():
    with pytest.raises(UsageError):
        topk_sparsify(np.zeros((3, 3)), 0)


# -- GAT ----------------------------------------------------------------------------

def test_gat_single_neighbour_alpha_one():
    layer = GATLayer(4, rng())
    adj = np.zeros((3, 3), dtype=bool)
    adj[0, 0] = adj[1, 2] = adj[2, 0] = True
    alpha = layer.attention(Tensor(rng(1).normal(size=(3, 4))), adj).data
    assert alpha[1, 2] == 1.0 and alpha[2, 0] == 1.0
    assert alpha[1].sum() == 1.0


def test_gat_identical_neighbours_split_evenly():
    layer = GATLayer(4, rng())
    e = rng(1).normal(size=(4, 4))
    e[3] = e[2]
    adj = np.zeros((4, 4), dtype=bool)
    adj[0, 0] = True
    adj[1, [2, 3]] = True
    adj[2, 1] = adj[3, 1] = True
    alpha = layer.attention(Tensor(e), adj).data
    assert alpha[1, 2] == pytest.approx(0.5, abs=1e-15) and alpha[1, 3] == pytest.approx(0.5, abs=1e-15)


def test_gat_empty_neighbourhood_is_invariant_violation():
    with pytest.raises(AssertionError):
        GATLayer(2, rng()).attention(Tensor(np.ones((2, 2))), np.zeros((2, 2), dtype=bool))


def _gat_reference(e, wl, wr, a, gain, bias, adj, slope=0.2):
    v, _ = e.shape
    out = np.zeros_like(e)
    for i in range(v):
        nbrs = [j for j in range(v) if adj[i, j]]
        raw = []
        for j in nbrs:
            z = wl.T @ e[i] + wr.T @ e[j]
            raw.append(a @ np.where(z > 0, z, slope * z))
        raw = np.array(raw)
        w = np.exp(raw - raw.max())
        w /= w.sum()
        msg = sum(wt * (wr.T @ e[j]) for wt, j in zip(w, nbrs))
        h = e[i] + np.where(msg > 0, msg, np.expm1(np.minimum(msg, 0)))
        mu, var = h.mean(), h.var()
        out[i] = gain * (h - mu) / np.sqrt(var + 1e-5) + bias
    return out


def test_gat_dense_reference():
    layer = GATLayer(5, rng(4))
    layer.norm.gain.data[:] = rng(5).normal(size=5)
    layer.norm.bias.data[:] = rng(6).normal(size=5)
    e = rng(7).normal(size=(4, 5))
    adj = np.ones((4, 4), dtype=bool)
    got = layer(Tensor(e), adj).data
    ref = _gat_reference(e, layer.w_left.data, layer.w_right.data, layer.att.data,
                         layer.norm.gain.data, layer.norm.bias.data, adj)
    np.testing.assert_allclose(got, ref, atol=1e-10)


# -- full scorer ----------------------------------------------------------------------

def small_cfg(**kw):
    base = dict(d_in=6, n_rel=3, l_psi=0, l_phi=0, d_psi=4, d_edge=5, d_rel=4, top_k=2)
    base.update(kw)
    return ScorerConfig(**base)


def test_scorer_shapes_and_masked_diagonal():
    for l_phi in (0, 1, 2):
        s = Scorer(small_cfg(l_phi=l_phi, l_psi=1), rng())
        sp = s(Tensor(rng(1).normal(size=(5, 6))))
        assert sp.s_edge.shape == (5, 5) and sp.s_rel.shape == (5, 5, 3)
        assert np.all(np.isneginf(np.diag(sp.s_edge.data)))
        assert len(sp.aux_edge_scores) == l_phi


def test_scorer_rejects_root_only():
    with pytest.raises(UsageError):
        Scorer(small_cfg(), rng())(Tensor(np.ones((1, 6))))
    with pytest.raises(DimensionError):
        Scorer(small_cfg(), rng())(Tensor(np.ones((3, 7))))


def test_scorer_zero_weights():
    s = Scorer(small_cfg(), rng())
    for p in s.parameters():
        p.data[:] = 0.0
    sp = s(Tensor(rng(1).normal(size=(4, 6))))
    off = ~np.eye(4, dtype=bool)
    assert np.all(sp.s_edge.data[off] == 0.0)
    assert np.all(np.isneginf(np.diag(sp.s_edge.data)))


@pytest.mark.parametrize("l_phi", [0, 1])
def test_scorer_permutation_equivariant_without_lstm(l_phi):
    s = Scorer(small_cfg(l_phi=l_phi), rng(2))
    z = rng(3).normal(size=(6, 6))
    perm = np.concatenate([[0], 1 + rng(4).permutation(5)])
    a = s(Tensor(z))
    b = s(Tensor(z[perm]))
    np.testing.assert_allclose(b.s_edge.data, a.s_edge.data[np.ix_(perm, perm)], atol=1e-12)
    np.testing.assert_allclose(b.s_rel.data, a.s_rel.data[np.ix_(perm, perm)], atol=1e-12)


def test_scorer_without_gat_ignores_top_k():
    z = Tensor(rng(3).normal(size=(5, 6)))
    a = Scorer(small_cfg(top_k=1), rng(9))(z).s_edge.data
    b = Scorer(small_cfg(top_k=4), rng(9))(z).s_edge.data
    np.testing.assert_array_equal(a, b)


def test_scorer_config_validation():
    with pytest.raises(ConfigError):
        small_cfg(l_phi=4)
    with pytest.raises(ConfigError):
        small_cfg(top_k=0)


def test_mask_self():
    out = mask_self(Tensor(np.ones((3, 3)))).data
    assert np.all(np.isneginf(np.diag(out))) and out[0, 1] == 1.0
