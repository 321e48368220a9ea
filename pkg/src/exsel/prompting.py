"""Few-shot prompt assembly.

Each exemplar becomes an instruction block completed with its target;
the query source gets the same block left open for the model to finish.
With no exemplars the prompt is the single open block (zero-shot).
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InputError
from .pool import ExemplarRecord, QueryInstance, word_count

INSTRUCTION = "Summary of the sentence without the less important words would be:"


def format_block(source: str, target: str | None = None) -> str:
    """One instruction block; completed when a target is given, open otherwise."""
    block = f"Sentence:\n{source}\n{INSTRUCTION}\n"
    if target is not None:
        block += f"{target}\n\n"
    return block


@dataclass(frozen=True)
class PromptBundle:
    prompt_text: str
    exemplar_ids: tuple[int, ...]
    query_source: str


def build_prompt(exemplars: list[ExemplarRecord], query) -> PromptBundle:
    """Assemble exemplar blocks in selection order, then the open query block.

    An empty exemplar list is allowed and produces the zero-shot prompt.
    """
    query_source = query.source if isinstance(query, QueryInstance) else str(query)
    if word_count(query_source) == 0:
        raise InputError("query source has no words")
    parts = []
    ids = []
    for ex in exemplars:
        if word_count(ex.target) == 0:
            raise InputError(f"exemplar {ex.id} has an empty target")
        parts.append(format_block(ex.source, ex.target))
        ids.append(ex.id)
    parts.append(format_block(query_source))
    return PromptBundle(
        prompt_text="".join(parts),
        exemplar_ids=tuple(ids),
        query_source=query_source,
    )
