import dataclasses
import json
import re

import httpx
import pytest

from graphre.errors import ConfigError, FormatError
from graphre.evaluation import Triple, TripleSet, exact_micro_f1
from graphre.llm import (Layout, ParseStatus, PromptSchema, PromptSpec, corpus_records,
                         emit_finetune_corpus, parse_completion, render_completion, render_prompt,
                         sample_icl, split_prompt)
from graphre.llm.client import CompletionClient, EndpointConfig, EndpointError

from conftest import SHAPES, load_shape

ADE_COMPLETION = ('triple_list: [{"rel": {"type": "Adverse_effect"}, "head": {"text": '
                  '"coronary artery vasospasm", "type": "disease"}, "tail": {"text": "epinephrine", '
                  '"type": "drug"}}]</s>')
ADE_GOLD = TripleSet([Triple("coronary artery vasospasm", "Adverse_effect", "epinephrine")])


def described(spec):
    return PromptSchema.from_spec(spec, {
        "entities": {e: f"an entity of kind {e}" for e in spec.entity_labels},
        "relations": {r: f"a link of kind {r}" for r in spec.relation_labels},
    })


def prompt_spec(spec, docs, layout, n_icl=0, seed=0):
    pool = list(docs)
    if len(pool) == 1:  # single-document fixture: give ICL sampling a distinct twin
        pool.append(dataclasses.replace(pool[0], id=pool[0].id + "-twin"))
    return PromptSpec(layout, described(spec), n_icl=n_icl, icl_pool=pool, seed=seed, task=spec.name)


# -- rendering -----------------------------------------------------------------------------

@pytest.mark.parametrize("name", SHAPES)
@pytest.mark.parametrize("layout", list(Layout))
@pytest.mark.parametrize("n_icl", [0, 1])
def test_render_parse_roundtrip(name, layout, n_icl):
    docs, spec = load_shape(name)
    ps = prompt_spec(spec, docs, layout, n_icl)
    for d in docs:
        full = render_prompt(d, ps, with_completion=True)
        assert full.startswith("<s>[INST] ") and full.endswith("</s>")
        prompt, completion = split_prompt(full)
        assert prompt == render_prompt(d, ps)
        parsed = parse_completion(completion, strict=True)
        assert parsed.status is ParseStatus.OK
        assert parsed.triples == d.gold_triples()


def test_desc_structure_on_ade():
    docs, spec = load_shape("ADE")
    ps = prompt_spec(spec, docs, "Desc", n_icl=1)
    p = render_prompt(docs[0], ps, with_completion=True)
    order = [p.index(s) for s in ("[INST]", "Example 1:", "Task:", "Entity types:", "Relation types:",
                                  f"text: {json.dumps(docs[0].text)}", "[/INST]")]
    order.append(p.rindex("triple_list:"))
    assert order == sorted(order)
    assert "an entity of kind drug" in p and "a link of kind Adverse_effect" in p


def test_desc_needs_every_description():
    docs, spec = load_shape("ADE")
    with pytest.raises(ConfigError):
        PromptSpec("Desc", PromptSchema.from_spec(spec, {"entities": {"drug": "x"}}))
    with pytest.raises(ConfigError):
        PromptSpec("NoDesc", described(spec), n_icl=1)
    with pytest.raises(ConfigError):
        Layout.parse("Verbose")


def test_uuid_prompt_has_no_schema_labels():
    for name in SHAPES:
        docs, spec = load_shape(name)
        ps = prompt_spec(spec, docs, "UUID", n_icl=1)
        for d in docs:
            p = render_prompt(d, ps).replace(json.dumps(d.text, ensure_ascii=False), "")
            assert re.search(r"Task number: [0-9a-f]{8}-[0-9a-f]{4}-4", p)
            for label in ps.schema.labels():
                if re.fullmatch(r"\w[\w-]*", label):  # punctuation POS tags like "." are unavoidable
                    assert not re.search(rf"(?<![\w-]){re.escape(label)}(?![\w-])", p), (name, label)


def test_nodesc_without_icl_has_no_example():
    docs, spec = load_shape("CoNLL04")
    p = render_prompt(docs[0], prompt_spec(spec, docs, "NoDesc"))
    assert "Example 1" not in p
    assert p.endswith("\n\n[/INST]")


def test_seed_changes_only_icl_and_uuid():
    docs, spec = load_shape("ADE")
    target = docs[0]
    for layout in ("NoDesc", "UUID"):
        outs = {}
        for seed in range(12):
            ps = prompt_spec(spec, docs, layout, n_icl=1, seed=seed)
            outs[seed] = render_prompt(target, ps)
            assert outs[seed] == render_prompt(target, ps)
            pick = sample_icl(target, ps)
            mask = (f"Task number: {ps.task_uuid}" if layout == "UUID"
                    else f"Example 1:\n\ntext: {json.dumps(pick.text)}\n\n{render_completion(pick)}")
            assert mask in outs[seed]
            outs[seed] = outs[seed].replace(mask, "<MASK>")
        assert len(set(outs.values())) == 1


def test_split_prompt_requires_marker():
    with pytest.raises(FormatError):
        split_prompt("no marker here")


# -- parsing ---------------------------------------------------------------------------------

def test_ade_sample_completion_parses_and_scores():
    parsed = parse_completion(ADE_COMPLETION)
    assert parsed.status is ParseStatus.OK and parsed.triples == ADE_GOLD
    assert len(parsed.triples) == 1
    assert exact_micro_f1([parsed.triples], [ADE_GOLD]).f1 == 1.0
    swapped = ADE_COMPLETION.replace('"disease"', '"TMP"').replace('"drug"', '"disease"').replace('"TMP"', '"drug"')
    assert exact_micro_f1([parse_completion(swapped).triples], [ADE_GOLD]).f1 == 1.0


def test_ade_fixture_matches_sample_completion():
    docs, _ = load_shape("ADE")
    d = next(d for d in docs if "vasospasm" in d.text)
    assert d.gold_triples() == ADE_GOLD


def test_refusal_is_no_json():
    out = parse_completion('"I cannot comply with your request." </s>')
    assert out.status is ParseStatus.NO_JSON and len(out.triples) == 0


def test_prose_wrapped_and_flat_items():
    text = ('Sure! Here you go: triple_list: [{"rel": "r", "head": "a", "tail": "b"}, '
            '{"rel": {"type": "s"}, "head": {"text": "c"}, "tail": {"text": "d"}}] Hope it helps.')
    out = parse_completion(text)
    assert out.status is ParseStatus.OK
    assert out.triples == TripleSet([Triple("a", "r", "b"), Triple("c", "s", "d")])
    assert parse_completion(text, strict=True).status is ParseStatus.NO_JSON


def test_missing_keys_and_truncation_are_partial():
    out = parse_completion('[{"rel": {"type": "r"}, "head": {"text": "a"}}, '
                           '{"rel": {"type": "r"}, "head": {"text": "a"}, "tail": {"text": "b"}}]')
    assert out.status is ParseStatus.PARTIAL and len(out.warnings) == 1
    assert out.triples == TripleSet([Triple("a", "r", "b")])
    cut = parse_completion('triple_list: [{"rel": {"type": "r"}, "head": {"text": "a"}, '
                           '"tail": {"text": "b"}}, {"rel": {"type": "r"}, "hea')
    assert cut.status is ParseStatus.PARTIAL and cut.triples == TripleSet([Triple("a", "r", "b")])
    assert parse_completion('[1, 2]').status is ParseStatus.PARTIAL
    assert parse_completion('{"a": 1}').status is ParseStatus.NO_JSON


def test_brackets_inside_strings():
    out = parse_completion('[{"rel": {"type": "r"}, "head": {"text": "a [x]"}, "tail": {"text": "b}"}}]')
    assert out.triples == TripleSet([Triple("a [x]", "r", "b}")])


# -- corpus ------------------------------------------------------------------------------------

def test_corpus_lines_and_determinism(tmp_path):
    docs, spec = load_shape("ADE")
    ps = prompt_spec(spec, docs, "NoDesc", n_icl=1, seed=4)
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert emit_finetune_corpus(docs, ps, a) == len(docs)
    emit_finetune_corpus(docs, prompt_spec(spec, docs, "NoDesc", n_icl=1, seed=4), b)
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert len(lines) == len(docs)
    for line, d in zip(lines, docs):
        rec = json.loads(line)
        assert set(rec) == {"id", "prompt", "completion"}
        assert rec["prompt"].endswith("[/INST]")
        assert parse_completion(rec["completion"]).triples == d.gold_triples()


def test_icl_never_picks_target():
    docs, spec = load_shape("CoNLL04")
    for seed in range(30):
        ps = prompt_spec(spec, docs, "Desc", n_icl=1, seed=seed)
        for rec, d in zip(corpus_records(docs, ps), docs):
            pick = sample_icl(d, ps)
            assert pick.id != d.id
            assert json.dumps(pick.text) in rec["prompt"]
    with pytest.raises(ConfigError):
        sample_icl(docs[0], PromptSpec("NoDesc", described(spec), n_icl=1, icl_pool=docs[:1]))


# -- endpoint client ---------------------------------------------------------------------------

def test_client_retries_on_429_and_keeps_order(monkeypatch):
    monkeypatch.setenv("GRAPHRE_API_TOKEN", "secret")
    seen, waits = [], []

    def handler(request):
        body = json.loads(request.content)
        seen.append((request.url.path, request.headers.get("authorization"), body["prompt"]))
        if body["prompt"] == "p1" and sum(s[2] == "p1" for s in seen) == 1:
            return httpx.Response(429, headers={"retry-after": "0.5"})
        return httpx.Response(200, json={"choices": [{"text": body["prompt"].upper()}]})

    cfg = EndpointConfig("http://llm.test/v1", "m", max_concurrent=3)
    with CompletionClient(cfg, transport=httpx.MockTransport(handler), sleep=waits.append) as c:
        assert c.complete_all([f"p{k}" for k in range(5)]) == [f"P{k}" for k in range(5)]
    assert waits == [0.5]
    assert all(path == "/v1/completions" and auth == "Bearer secret" for path, auth, _ in seen)


def test_client_chat_mode_and_errors():
    def handler(request):
        body = json.loads(request.content)
        if body["messages"][0]["content"] == "bad":
            return httpx.Response(500, text="boom")
        return httpx.Response(200, json={"choices": [{"message": {"content": "ok"}}]})

    cfg = EndpointConfig("http://llm.test", "m", api="chat")
    c = CompletionClient(cfg, transport=httpx.MockTransport(handler))
    assert c.complete("hi") == "ok"
    with pytest.raises(EndpointError):
        c.complete("bad")
    always = CompletionClient(EndpointConfig("http://x", "m", max_retries=2),
                              transport=httpx.MockTransport(lambda r: httpx.Response(429)),
                              sleep=lambda s: None)
    with pytest.raises(EndpointError):
        always.complete("p")
    with pytest.raises(ConfigError):
        EndpointConfig("http://x", "m", api="grpc")
