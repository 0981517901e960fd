"""Prompt rendering, fine-tune corpus emission and completion parsing."""
from .parsing import ParsedCompletion, ParseStatus, parse_completion
from .prompts import (
    Layout, PromptSchema, PromptSpec, corpus_records, emit_finetune_corpus, render_completion,
    render_prompt, sample_icl, split_prompt,
)

__all__ = [
    "Layout", "ParseStatus", "ParsedCompletion", "PromptSchema", "PromptSpec", "corpus_records",
    "emit_finetune_corpus", "parse_completion", "render_completion", "render_prompt",
    "sample_icl", "split_prompt",
]
