import numpy as np
import pytest

from graphre.data import Document
from graphre.embeddings import (HashEmbeddingProvider, LookupEmbeddingProvider, average_subwords,
                                hash_embed_provider, load_precomputed, make_provider,
                                provider_from_config, write_precomputed)
from graphre.errors import ConfigError, DataIntegrityError, FormatError, LookupFailure
from graphre.numerics import Tensor, finite_diff_check, ops
from graphre.tagger import TagEmbedder, Tagger, TaggerConfig


def doc(i, words):
    return Document(str(i), list(words))


# -- embeddings ----------------------------------------------------------------

def test_subword_average():
    np.testing.assert_array_equal(average_subwords([[1, 2], [3, 4]], [0, 0]), [[2, 3]])
    out = average_subwords([[1, 1], [3, 3], [5, 7]], [0, 1, 1])
    np.testing.assert_array_equal(out, [[1, 1], [4, 5]])


def test_hash_provider_shape_and_determinism():
    p = hash_embed_provider(seed=3, d_f=16)
    a = p.embed(doc(0, ["the", "cat", "sat"]))
    b = HashEmbeddingProvider(16, 3).embed(doc(1, ["cat"]))
    assert a.shape == (4, 16)
    np.testing.assert_array_equal(a.data[2], b.data[1])
    np.testing.assert_array_equal(a.data, p.embed(doc(0, ["the", "cat", "sat"])).data)
    assert np.isfinite(p.vector("")).all()


def test_hash_provider_low_similarity_over_seeds():
    hits = 0
    for seed in range(1000):
        p = HashEmbeddingProvider(64, seed)
        u, v = p.vector("cat"), p.vector("dog")
        hits += abs(u @ v) / (np.linalg.norm(u) * np.linalg.norm(v)) < 0.5
    assert hits / 1000 >= 0.99


def test_hash_provider_norm_concentrates():
    p = HashEmbeddingProvider(64, 0)
    norms = np.array([np.linalg.norm(p.vector(f"w{k}")) for k in range(2000)])
    # chi(64) puts roughly 0.5% of its mass beyond ±30% of sqrt(64)
    assert np.mean(np.abs(norms / 8.0 - 1) < 0.3) >= 0.99
    assert abs(np.median(norms) / 8.0 - 1) < 0.05


def test_frozen_rows_get_no_gradient_root_does():
    p = HashEmbeddingProvider(8, 0)
    x = p.embed(doc(0, ["a", "b"]))
    ops.tsum(x * x).backward()
    np.testing.assert_allclose(p.root.grad, 2 * p.root.data)
    assert p.parameters() == [p.root]


def test_precomputed_roundtrip_and_errors(tmp_path):
    rng = np.random.default_rng(0)
    store = {f"d{k}": rng.normal(size=(k + 2, 12)).astype(np.float32) for k in range(3)}
    path = tmp_path / "emb.bin"
    write_precomputed(path, store, 12)
    prov = load_precomputed(path)
    for k in range(3):
        x = prov.embed(doc(f"d{k}", ["w"] * (k + 2)))
        assert x.data[1:].astype(np.float32).tobytes() == store[f"d{k}"].tobytes()
    with pytest.raises(LookupFailure):
        prov.embed(doc("d3", ["w"]))
    with pytest.raises(DataIntegrityError):
        prov.embed(doc("d0", ["w"] * 5))
    assert load_precomputed(path, d_f=12).d_f == 12
    with pytest.raises(ConfigError):
        load_precomputed(path, d_f=8)
    with pytest.raises(ConfigError):
        make_provider("precomputed", 8, path=str(path))
    path.write_bytes(path.read_bytes()[:-10])
    with pytest.raises(FormatError):
        load_precomputed(path)


def test_precomputed_768_store_accepted(tmp_path):
    path = tmp_path / "e.bin"
    write_precomputed(path, {"x": np.zeros((2, 768))}, 768)
    assert make_provider("precomputed", 768, path=str(path)).d_f == 768
    with pytest.raises(ConfigError):
        make_provider("precomputed", 512, path=str(path))


def test_lookup_provider_trains_and_unk():
    docs = [doc(0, ["a", "b"]), doc(1, ["b", "c"])]
    p = LookupEmbeddingProvider.from_documents(docs, 4, seed=1)
    x = p.embed(doc(2, ["a", "zzz"]))
    np.testing.assert_array_equal(x.data[2], p.table.data[0])
    ops.tsum(x).backward()
    assert p.table.grad[p.index["a"]].sum() == 4.0
    q = provider_from_config(p.config())
    np.testing.assert_array_equal(q.table.data, p.table.data)


def test_provider_config_errors():
    with pytest.raises(ConfigError):
        make_provider("bert", 8)
    with pytest.raises(ConfigError):
        HashEmbeddingProvider(0)
    with pytest.raises(ConfigError):
        make_provider("trainable-lookup", 8)


# -- tagger --------------------------------------------------------------------

def make_tagger(d_f=5, n_tags=5, d_h=4, d_tag=3, seed=0):
    return Tagger(TaggerConfig(d_f, n_tags, d_h, d_tag), np.random.default_rng(seed))


def test_tagger_rows_normalised():
    t = make_tagger()
    out = t(Tensor(np.random.default_rng(1).normal(size=(6, 5))))
    assert out.hidden.shape == (6, 8)
    np.testing.assert_allclose(out.probs.data.sum(-1), 1.0, atol=1e-9)


def test_tagger_zero_classifier_uniform():
    t = make_tagger()
    t.classifier.weight.data[:] = 0.0
    out = t(Tensor(np.ones((4, 5))))
    np.testing.assert_allclose(out.probs.data, 1 / 5)


def test_tagger_reversal_swaps_directions():
    t = make_tagger(d_h=4)
    x = np.random.default_rng(2).normal(size=(7, 5))
    h = t(Tensor(x)).hidden.data
    hr = t(Tensor(x[::-1].copy())).hidden.data
    # swap the directional weights: the forward half of the reversed run must
    # then match the backward half of the original run, and vice versa
    pair = t.lstm.layers[0]
    for name in ("w_ih", "w_hh", "b"):
        fw, bw = getattr(pair.fwd, name), getattr(pair.bwd, name)
        fw.data, bw.data = bw.data.copy(), fw.data.copy()
    hs = t(Tensor(x[::-1].copy())).hidden.data
    np.testing.assert_allclose(hs[::-1, :4], h[:, 4:], atol=1e-12)
    np.testing.assert_allclose(hs[::-1, 4:], h[:, :4], atol=1e-12)
    assert not np.allclose(hr[::-1], h)


def test_tagger_dimension_error():
    with pytest.raises(ConfigError):
        make_tagger()(Tensor(np.ones((3, 4))))
    with pytest.raises(ConfigError):
        TaggerConfig(0, 3)


def test_tag_embedding_definition():
    emb = TagEmbedder(3, 2, np.random.default_rng(0))
    emb.proj.bias.data[:] = [0.5, -0.5]
    out = emb(Tensor([[0.1, 0.7, 0.2], [0.3, 0.6, 0.1]])).data
    np.testing.assert_array_equal(out[0], emb.proj.weight.data[1] + emb.proj.bias.data)
    np.testing.assert_array_equal(out[0], out[1])


def test_tag_embedding_ties_to_lowest_index():
    emb = TagEmbedder(3, 2, np.random.default_rng(0))
    np.testing.assert_array_equal(emb(Tensor([[0.4, 0.4, 0.2]])).data, emb.from_indices([0]).data)


def test_tag_embedding_invariant_to_argmax_preserving_noise():
    emb = TagEmbedder(4, 3, np.random.default_rng(0))
    rng = np.random.default_rng(1)
    probs = rng.dirichlet(np.ones(4), size=10)
    base = emb(Tensor(probs)).data
    for _ in range(20):
        noisy = probs + rng.uniform(0, 0.01, probs.shape)
        keep = noisy.argmax(-1) == probs.argmax(-1)
        noisy[~keep] = probs[~keep]
        np.testing.assert_array_equal(emb(Tensor(noisy)).data, base)


def test_tag_embedding_stop_gradient_but_projection_learns():
    t = make_tagger()
    emb = TagEmbedder(5, 3, np.random.default_rng(0))
    out = t(Tensor(np.random.default_rng(3).normal(size=(4, 5))))
    ops.tsum(emb(out.probs)).backward()
    assert all(p.grad is None for p in t.parameters())
    assert emb.proj.weight.grad is not None


def test_tagging_loss_gradient():
    t = make_tagger()
    x = Tensor(np.random.default_rng(4).normal(size=(5, 5)))
    gold = np.array([0, 1, 2, 3, 4])

    def loss(w):
        logp = ops.log_softmax(t(x).logits)
        return -ops.tsum(logp[np.arange(1, 5), gold[1:]])
    for p in t.parameters():
        assert finite_diff_check(loss, p) < 1e-4
