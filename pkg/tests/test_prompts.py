"""Template invariants, rendering, truncation, and template files."""

from __future__ import annotations

import pytest

from prprank.errors import RenderError, ValidationError
from prprank.icl import IclExample
from prprank.prompts import (
    PromptMode,
    PromptTemplate,
    default_template,
    load_template,
    render_pairwise,
    render_pointwise,
    render_setwise,
    truncate_passage,
)
from prprank.types import Document, Query


QUERY = Query("q1", "how tall is everest")
DOC_A = Document("a", "everest is 8849 meters tall")
DOC_B = Document("b", "k2 is the second highest mountain")


def example(label: str = "1") -> IclExample:
    first = Document("p", "the relevant answer")
    second = Document("n", "an unrelated passage")
    if label == "2":
        first, second = second, first
    return IclExample(Query("t1", "example question"), first, second, label)


class TestTemplateInvariants:
    def test_pairwise_tokens_fixed(self):
        with pytest.raises(ValidationError, match="'1'"):
            PromptTemplate(
                mode=PromptMode.PAIRWISE,
                body="{examples}{query}{passage1}{passage2}",
                example_block="{label}",
                answer_tokens=("yes", "no"),
            )

    def test_pointwise_tokens_fixed(self):
        with pytest.raises(ValidationError, match="'true'"):
            PromptTemplate(
                mode=PromptMode.POINTWISE,
                body="{examples}{query}{passage1}",
                example_block="{label}",
                answer_tokens=("1", "2"),
            )

    def test_setwise_tokens_are_slot_numbers(self):
        with pytest.raises(ValidationError, match="setwise"):
            PromptTemplate(
                mode=PromptMode.SETWISE,
                body="{examples}{query}{passages}",
                example_block="{label}",
                answer_tokens=("1", "3"),
            )

    def test_body_slot_requirements(self):
        with pytest.raises(ValidationError, match="examples"):
            PromptTemplate(
                mode=PromptMode.PAIRWISE,
                body="{query}{passage1}{passage2}",
                example_block="{label}",
                answer_tokens=("1", "2"),
            )
        with pytest.raises(ValidationError, match="passage2"):
            PromptTemplate(
                mode=PromptMode.PAIRWISE,
                body="{examples}{query}{passage1}",
                example_block="{label}",
                answer_tokens=("1", "2"),
            )

    def test_default_templates_valid(self):
        for mode in PromptMode:
            template = default_template(mode)
            assert template.mode is mode


class TestPairwiseRendering:
    def test_zero_shot_contains_query_and_passages(self):
        rendered = render_pairwise(default_template(PromptMode.PAIRWISE), QUERY, DOC_A, DOC_B)
        assert QUERY.text in rendered.text
        assert f"Passage 1: {DOC_A.text}" in rendered.text
        assert f"Passage 2: {DOC_B.text}" in rendered.text
        assert rendered.text.endswith("Answer:")
        assert rendered.answer_tokens == ("1", "2")
        assert rendered.doc_ids == ("a", "b")
        assert rendered.example_query_ids == ()

    def test_examples_rendered_before_probe(self):
        rendered = render_pairwise(
            default_template(PromptMode.PAIRWISE), QUERY, DOC_A, DOC_B, [example("1")]
        )
        assert "example question" in rendered.text
        assert "Answer: 1\n" in rendered.text
        assert rendered.text.index("example question") < rendered.text.index(QUERY.text)
        assert rendered.example_query_ids == ("t1",)

    def test_flipped_example_swaps_slots_and_label(self):
        rendered = render_pairwise(
            default_template(PromptMode.PAIRWISE), QUERY, DOC_A, DOC_B, [example("2")]
        )
        assert "Answer: 2\n" in rendered.text
        assert rendered.text.index("an unrelated passage") < rendered.text.index(
            "the relevant answer"
        )

    def test_slot_order_changes_prompt(self):
        template = default_template(PromptMode.PAIRWISE)
        ab = render_pairwise(template, QUERY, DOC_A, DOC_B)
        ba = render_pairwise(template, QUERY, DOC_B, DOC_A)
        assert ab.text != ba.text
        assert ab.doc_ids == ("a", "b") and ba.doc_ids == ("b", "a")

    def test_self_comparison_rejected(self):
        with pytest.raises(RenderError, match="itself"):
            render_pairwise(default_template(PromptMode.PAIRWISE), QUERY, DOC_A, DOC_A)

    def test_mode_mismatch_rejected(self):
        with pytest.raises(RenderError, match="pairwise"):
            render_pairwise(default_template(PromptMode.POINTWISE), QUERY, DOC_A, DOC_B)


class TestPointwiseRendering:
    def test_single_passage_and_boolean_label(self):
        rendered = render_pointwise(
            default_template(PromptMode.POINTWISE), QUERY, DOC_A, [example("1")]
        )
        assert f"Passage: {DOC_A.text}" in rendered.text
        assert "Answer: true\n" in rendered.text
        assert rendered.answer_tokens == ("true", "false")
        assert rendered.doc_ids == ("a",)

    def test_flipped_example_becomes_false(self):
        rendered = render_pointwise(
            default_template(PromptMode.POINTWISE), QUERY, DOC_A, [example("2")]
        )
        assert "Answer: false\n" in rendered.text


class TestSetwiseRendering:
    def test_slots_numbered_and_tokens_narrowed(self):
        template = default_template(PromptMode.SETWISE, set_size=4)
        docs = [DOC_A, DOC_B, Document("c", "third passage")]
        rendered = render_setwise(template, QUERY, docs)
        assert "Passage 1: " in rendered.text
        assert "Passage 3: third passage" in rendered.text
        assert rendered.answer_tokens == ("1", "2", "3")
        assert rendered.doc_ids == ("a", "b", "c")

    def test_too_many_passages_rejected(self):
        template = default_template(PromptMode.SETWISE, set_size=2)
        docs = [DOC_A, DOC_B, Document("c", "third")]
        with pytest.raises(RenderError, match="supports"):
            render_setwise(template, QUERY, docs)

    def test_duplicates_rejected(self):
        template = default_template(PromptMode.SETWISE)
        with pytest.raises(RenderError, match="duplicate"):
            render_setwise(template, QUERY, [DOC_A, DOC_A])


class TestTruncation:
    def test_short_text_untouched(self):
        assert truncate_passage("short", 100) == "short"

    def test_cuts_at_whitespace(self):
        assert truncate_passage("alpha beta gamma", 12) == "alpha beta"

    def test_hard_cut_without_whitespace(self):
        assert truncate_passage("abcdefghij", 4) == "abcd"

    def test_erasing_nonempty_text_rejected(self):
        with pytest.raises(RenderError, match="erased"):
            truncate_passage("   word", 2)

    def test_applied_during_render(self):
        template = default_template(PromptMode.PAIRWISE, truncation_budget=10)
        long_doc = Document("long", "word " * 50)
        rendered = render_pairwise(template, QUERY, long_doc, DOC_B)
        assert "Passage 1: word word\n" in rendered.text

    def test_max_prompt_chars_enforced(self):
        template = default_template(PromptMode.PAIRWISE, max_prompt_chars=50)
        with pytest.raises(RenderError, match="characters"):
            render_pairwise(template, QUERY, DOC_A, DOC_B)


class TestTemplateFiles:
    def test_body_only_file(self, tmp_path):
        path = tmp_path / "tpl.txt"
        path.write_text(
            "Pick the better passage.\n{examples}Q: {query}\nA: {passage1}\nB: {passage2}\nBest:"
        )
        template = load_template(path, PromptMode.PAIRWISE)
        rendered = render_pairwise(template, QUERY, DOC_A, DOC_B)
        assert rendered.text.startswith("Pick the better passage.")
        assert rendered.text.endswith("Best:")

    def test_separator_splits_example_block(self, tmp_path):
        path = tmp_path / "tpl.txt"
        path.write_text(
            "{examples}Q {query} 1 {passage1} 2 {passage2} ?\n"
            "%%EXAMPLE%%\n"
            "EX {query} / {passage1} / {passage2} -> {label}\n"
        )
        template = load_template(path, PromptMode.PAIRWISE)
        rendered = render_pairwise(template, QUERY, DOC_A, DOC_B, [example("1")])
        assert "EX example question" in rendered.text
        assert "-> 1" in rendered.text

    def test_invalid_file_rejected(self, tmp_path):
        path = tmp_path / "tpl.txt"
        path.write_text("no slots at all")
        with pytest.raises(ValidationError, match="slot"):
            load_template(path, PromptMode.PAIRWISE)
