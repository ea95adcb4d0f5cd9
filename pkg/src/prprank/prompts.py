"""Prompt templates and deterministic rendering for ranking calls.

Three prompt modes share one template machinery:

- ``pairwise``: query + two passages, the model answers '1' or '2'
- ``pointwise``: query + one passage, the model answers 'true' or 'false'
- ``setwise``: query + s passages, the model answers the best slot number

A template is a body with named placeholders plus an example block that is
repeated once per in-context example and substituted into ``{examples}``.
Custom templates load from UTF-8 files where an optional line containing
only ``%%EXAMPLE%%`` separates the body (above) from the example block
(below); files without the separator replace the body only.

Passage text is truncated to a per-passage character budget at the last
whitespace boundary inside the budget (hard cut when the prefix has no
whitespace), mirroring the usual context-window guard.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

from .errors import RenderError, ValidationError
from .icl import IclExample
from .types import Document, Query

DEFAULT_PAIRWISE_BODY = (
    "Decide which of the two passages is more relevant to the query. "
    "Answer only '1' or '2'.\n"
    "\n"
    "{examples}"
    "Query: {query}\n"
    "\n"
    "Passage 1: {passage1}\n"
    "\n"
    "Passage 2: {passage2}\n"
    "\n"
    "Answer:"
)

DEFAULT_PAIRWISE_EXAMPLE = (
    "Query: {query}\n"
    "\n"
    "Passage 1: {passage1}\n"
    "\n"
    "Passage 2: {passage2}\n"
    "\n"
    "Answer: {label}\n"
    "\n"
)

DEFAULT_POINTWISE_BODY = (
    "Decide whether the passage answers the query. "
    "Answer only 'true' or 'false'.\n"
    "\n"
    "{examples}"
    "Query: {query}\n"
    "\n"
    "Passage: {passage1}\n"
    "\n"
    "Answer:"
)

DEFAULT_POINTWISE_EXAMPLE = (
    "Query: {query}\n"
    "\n"
    "Passage: {passage1}\n"
    "\n"
    "Answer: {label}\n"
    "\n"
)

DEFAULT_SETWISE_BODY = (
    "Decide which numbered passage is most relevant to the query. "
    "Answer only with the passage number.\n"
    "\n"
    "{examples}"
    "Query: {query}\n"
    "\n"
    "{passages}"
    "Answer:"
)

DEFAULT_SETWISE_EXAMPLE = DEFAULT_PAIRWISE_EXAMPLE

TEMPLATE_SEPARATOR = "%%EXAMPLE%%"


class PromptMode(str, Enum):
    PAIRWISE = "pairwise"
    POINTWISE = "pointwise"
    SETWISE = "setwise"


@dataclass(frozen=True)
class PromptTemplate:
    """A prompt body plus example block, bound to one mode's answer tokens."""

    mode: PromptMode
    body: str
    example_block: str
    answer_tokens: tuple[str, ...]
    truncation_budget: int = 2000
    max_prompt_chars: int | None = None

    def __post_init__(self) -> None:
        if self.truncation_budget < 1:
            raise ValidationError(
                f"truncation budget must be positive, got {self.truncation_budget}"
            )
        if self.max_prompt_chars is not None and self.max_prompt_chars < 1:
            raise ValidationError(
                f"max prompt length must be positive, got {self.max_prompt_chars}"
            )
        if self.mode is PromptMode.PAIRWISE and self.answer_tokens != ("1", "2"):
            raise ValidationError("pairwise templates must use answer tokens ('1', '2')")
        if self.mode is PromptMode.POINTWISE and self.answer_tokens != ("true", "false"):
            raise ValidationError(
                "pointwise templates must use answer tokens ('true', 'false')"
            )
        if self.mode is PromptMode.SETWISE:
            expected = tuple(str(i + 1) for i in range(len(self.answer_tokens)))
            if len(self.answer_tokens) < 2 or self.answer_tokens != expected:
                raise ValidationError(
                    "setwise templates must use answer tokens ('1', ..., str(s))"
                )
        if "{examples}" not in self.body:
            raise ValidationError("template body must contain an {examples} slot")
        if self.mode is PromptMode.SETWISE:
            if "{passages}" not in self.body:
                raise ValidationError("setwise body must contain a {passages} slot")
        else:
            needed = ("{passage1}", "{passage2}") if self.mode is PromptMode.PAIRWISE else ("{passage1}",)
            for slot in needed:
                if slot not in self.body:
                    raise ValidationError(f"{self.mode.value} body must contain a {slot} slot")
        if "{query}" not in self.body:
            raise ValidationError("template body must contain a {query} slot")
        if "{label}" not in self.example_block:
            raise ValidationError("example block must contain a {label} slot")


@dataclass(frozen=True)
class RenderedPrompt:
    """A fully substituted prompt together with its provenance fields."""

    text: str
    answer_tokens: tuple[str, ...]
    example_query_ids: tuple[str, ...]
    doc_ids: tuple[str, ...]


def default_template(
    mode: PromptMode,
    *,
    set_size: int = 4,
    truncation_budget: int = 2000,
    max_prompt_chars: int | None = None,
) -> PromptTemplate:
    if mode is PromptMode.PAIRWISE:
        return PromptTemplate(
            mode=mode,
            body=DEFAULT_PAIRWISE_BODY,
            example_block=DEFAULT_PAIRWISE_EXAMPLE,
            answer_tokens=("1", "2"),
            truncation_budget=truncation_budget,
            max_prompt_chars=max_prompt_chars,
        )
    if mode is PromptMode.POINTWISE:
        return PromptTemplate(
            mode=mode,
            body=DEFAULT_POINTWISE_BODY,
            example_block=DEFAULT_POINTWISE_EXAMPLE,
            answer_tokens=("true", "false"),
            truncation_budget=truncation_budget,
            max_prompt_chars=max_prompt_chars,
        )
    if mode is PromptMode.SETWISE:
        if set_size < 2:
            raise ValidationError(f"set size must be >= 2, got {set_size}")
        return PromptTemplate(
            mode=mode,
            body=DEFAULT_SETWISE_BODY,
            example_block=DEFAULT_SETWISE_EXAMPLE,
            answer_tokens=tuple(str(i + 1) for i in range(set_size)),
            truncation_budget=truncation_budget,
            max_prompt_chars=max_prompt_chars,
        )
    raise ValidationError(f"unknown prompt mode {mode!r}")


def load_template(
    path: str | Path,
    mode: PromptMode,
    *,
    set_size: int = 4,
    truncation_budget: int = 2000,
    max_prompt_chars: int | None = None,
) -> PromptTemplate:
    """Load a template file; ``%%EXAMPLE%%`` on its own line splits body
    from example block, otherwise only the body is replaced."""
    text = Path(path).read_text(encoding="utf-8")
    default = default_template(
        mode,
        set_size=set_size,
        truncation_budget=truncation_budget,
        max_prompt_chars=max_prompt_chars,
    )
    lines = text.split("\n")
    if TEMPLATE_SEPARATOR in (line.strip() for line in lines):
        idx = next(i for i, line in enumerate(lines) if line.strip() == TEMPLATE_SEPARATOR)
        body = "\n".join(lines[:idx])
        example_block = "\n".join(lines[idx + 1 :])
    else:
        body = text
        example_block = default.example_block
    return PromptTemplate(
        mode=mode,
        body=body,
        example_block=example_block,
        answer_tokens=default.answer_tokens,
        truncation_budget=truncation_budget,
        max_prompt_chars=max_prompt_chars,
    )


def truncate_passage(text: str, budget: int) -> str:
    """Cut at the last whitespace inside the budget; hard cut if none.

    Raises RenderError when truncation would erase a non-empty passage,
    which would silently turn a real comparison into a vacuous one.
    """
    if len(text) <= budget:
        return text
    prefix = text[:budget]
    cut_point = budget
    if not text[budget].isspace():
        # The budget lands inside a word: back off to the last whitespace
        # so no partial word survives. No whitespace at all = hard cut.
        i = budget - 1
        while i >= 0 and not prefix[i].isspace():
            i -= 1
        if i > 0:
            cut_point = i
    truncated = text[:cut_point].rstrip()
    if text.strip() and not truncated.strip():
        raise RenderError(
            f"truncation budget {budget} erased a non-empty passage"
        )
    return truncated


def _substitute(template: str, values: dict[str, str]) -> str:
    out = template
    for key, value in values.items():
        out = out.replace("{" + key + "}", value)
    return out


def _render_examples(template: PromptTemplate, examples: Sequence[IclExample]) -> str:
    parts: list[str] = []
    for ex in examples:
        values = {
            "query": ex.example_query.text,
            "passage1": truncate_passage(ex.first_passage.text, template.truncation_budget),
            "passage2": truncate_passage(ex.second_passage.text, template.truncation_budget),
            "label": ex.gold_label,
        }
        if template.mode is PromptMode.POINTWISE:
            # Pointwise examples show one passage with a boolean label; the
            # pair collapses to its first slot.
            values["passage"] = values["passage1"]
            values["label"] = "true" if ex.gold_label == "1" else "false"
        parts.append(_substitute(template.example_block, values))
    return "".join(parts)


def _check_length(template: PromptTemplate, text: str) -> str:
    if template.max_prompt_chars is not None and len(text) > template.max_prompt_chars:
        raise RenderError(
            f"rendered prompt has {len(text)} characters, "
            f"limit is {template.max_prompt_chars}"
        )
    return text


def render_pairwise(
    template: PromptTemplate,
    query: Query,
    first: Document,
    second: Document,
    examples: Sequence[IclExample] = (),
) -> RenderedPrompt:
    if template.mode is not PromptMode.PAIRWISE:
        raise RenderError(f"pairwise render requires a pairwise template, got {template.mode.value}")
    if first.doc_id == second.doc_id:
        raise RenderError(f"cannot compare document {first.doc_id!r} with itself")
    text = _substitute(
        template.body,
        {
            "examples": _render_examples(template, examples),
            "query": query.text,
            "passage1": truncate_passage(first.text, template.truncation_budget),
            "passage2": truncate_passage(second.text, template.truncation_budget),
        },
    )
    return RenderedPrompt(
        text=_check_length(template, text),
        answer_tokens=template.answer_tokens,
        example_query_ids=tuple(ex.example_query.query_id for ex in examples),
        doc_ids=(first.doc_id, second.doc_id),
    )


def render_pointwise(
    template: PromptTemplate,
    query: Query,
    passage: Document,
    examples: Sequence[IclExample] = (),
) -> RenderedPrompt:
    if template.mode is not PromptMode.POINTWISE:
        raise RenderError(f"pointwise render requires a pointwise template, got {template.mode.value}")
    text = _substitute(
        template.body,
        {
            "examples": _render_examples(template, examples),
            "query": query.text,
            "passage1": truncate_passage(passage.text, template.truncation_budget),
            "passage": truncate_passage(passage.text, template.truncation_budget),
        },
    )
    return RenderedPrompt(
        text=_check_length(template, text),
        answer_tokens=template.answer_tokens,
        example_query_ids=tuple(ex.example_query.query_id for ex in examples),
        doc_ids=(passage.doc_id,),
    )


def render_setwise(
    template: PromptTemplate,
    query: Query,
    passages: Sequence[Document],
    examples: Sequence[IclExample] = (),
) -> RenderedPrompt:
    if template.mode is not PromptMode.SETWISE:
        raise RenderError(f"setwise render requires a setwise template, got {template.mode.value}")
    if len(passages) < 2:
        raise RenderError(f"setwise prompts need at least 2 passages, got {len(passages)}")
    if len(passages) > len(template.answer_tokens):
        raise RenderError(
            f"{len(passages)} passages but template supports {len(template.answer_tokens)}"
        )
    ids = [p.doc_id for p in passages]
    if len(set(ids)) != len(ids):
        raise RenderError("setwise prompt contains duplicate documents")
    block = "".join(
        f"Passage {i + 1}: {truncate_passage(p.text, template.truncation_budget)}\n\n"
        for i, p in enumerate(passages)
    )
    text = _substitute(
        template.body,
        {
            "examples": _render_examples(template, examples),
            "query": query.text,
            "passages": block,
        },
    )
    # Only the slots actually filled are legal answers for this prompt.
    return RenderedPrompt(
        text=_check_length(template, text),
        answer_tokens=tuple(str(i + 1) for i in range(len(passages))),
        example_query_ids=tuple(ex.example_query.query_id for ex in examples),
        doc_ids=tuple(ids),
    )
