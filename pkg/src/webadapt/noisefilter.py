"""Boilerplate detection from shallow text features.

Blocks are labeled Content or Boilerplate by a small data-driven rule set
over token counts and link density; no trained model is involved.
"""

from __future__ import annotations

import json
import re
import textwrap
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .blockmodel import DomNode, VisualBlock

WRAP_WIDTH = 80

_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)
_SENTENCE_SPLIT_RE = re.compile(r"[.!?]+(?:\s+|$)")


class BlockLabel(Enum):
    CONTENT = "Content"
    BOILERPLATE = "Boilerplate"


class AllNoise(ValueError):
    """Every leaf classified Boilerplate; nothing to keep."""


def tokenize(text: str) -> list[str]:
    """Whitespace-separated tokens."""
    return text.split()


def words_of(text: str) -> list[str]:
    """Maximal alphanumeric runs within the text (punctuation stripped)."""
    return _WORD_RE.findall(text)


def sentences_of(text: str) -> list[str]:
    """Chunks ending at '.', '!' or '?' followed by whitespace or the end."""
    return [s for s in _SENTENCE_SPLIT_RE.split(text) if s.strip()]


@dataclass
class TextFeatureVector:
    num_tokens: int = 0
    num_words: int = 0
    avg_word_length: float = 0.0
    avg_sentence_length: float = 0.0
    link_density: float = 0.0
    text_density: float = 0.0


def _in_anchor(node: DomNode) -> bool:
    return any(anc.tag == "a" for anc in node.ancestors())


def _root_of(node: DomNode) -> DomNode:
    while node.parent is not None:
        node = node.parent
    return node


def compute_features(block: VisualBlock, dom: DomNode) -> TextFeatureVector:
    """Shallow features of a block's visible text.

    link_density is the fraction of tokens that sit inside anchor
    elements; averages are zero when their denominator is zero.
    """
    if block.dom_refs and _root_of(block.dom_refs[0]) is not dom:
        raise ValueError("block does not belong to the given document")
    total = 0
    linked = 0
    pieces: list[str] = []
    for ref in block.dom_refs:
        count = len(ref.text.split())
        total += count
        if _in_anchor(ref):
            linked += count
        pieces.append(" ".join(ref.text.split()))
    text = " ".join(p for p in pieces if p)
    words = words_of(text)
    sentences = sentences_of(text)
    lines = textwrap.wrap(text, width=WRAP_WIDTH) if text else []
    return TextFeatureVector(
        num_tokens=total,
        num_words=len(words),
        avg_word_length=sum(len(w) for w in words) / len(words) if words else 0.0,
        avg_sentence_length=len(words) / len(sentences) if sentences else 0.0,
        link_density=linked / total if total else 0.0,
        text_density=total / len(lines) if lines else 0.0,
    )


@dataclass(frozen=True)
class RuleSet:
    """Thresholds for the boilerplate decision; overridable from config."""

    max_link_density: float = 0.33
    min_words: int = 4
    min_words_linked: int = 10

    @classmethod
    def from_file(cls, path: str | Path) -> "RuleSet":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise ValueError("rules file must hold one object")
        known = {"max_link_density", "min_words", "min_words_linked"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown rule keys: {sorted(unknown)}")
        return cls(**data)


DEFAULT_RULES = RuleSet()


def classify_block(features: TextFeatureVector, rules: RuleSet = DEFAULT_RULES) -> BlockLabel:
    """Boilerplate when too linked or too short, Content otherwise."""
    if features.link_density > rules.max_link_density:
        return BlockLabel.BOILERPLATE
    if features.num_words < rules.min_words_linked and features.link_density > 0:
        return BlockLabel.BOILERPLATE
    if features.num_words < rules.min_words:
        return BlockLabel.BOILERPLATE
    return BlockLabel.CONTENT


def strip_noise(tree: VisualBlock, dom: DomNode, rules: RuleSet = DEFAULT_RULES) -> VisualBlock:
    """Copy of the tree keeping only Content leaves (ancestors survive when
    any descendant does).  Raises :class:`AllNoise` when nothing survives."""

    def keep(block: VisualBlock) -> VisualBlock | None:
        if block.is_leaf():
            label = classify_block(compute_features(block, dom), rules)
            if label is BlockLabel.CONTENT:
                return VisualBlock(
                    id=block.id,
                    doc=block.doc,
                    text=block.text,
                    dom_refs=list(block.dom_refs),
                    source_nodes=list(block.source_nodes),
                )
            return None
        survivors = [k for k in (keep(c) for c in block.children) if k is not None]
        if not survivors:
            return None
        copy = VisualBlock(
            id=block.id,
            doc=block.doc,
            text=block.text,
            dom_refs=list(block.dom_refs),
            source_nodes=list(block.source_nodes),
        )
        copy.children = survivors
        return copy

    kept = keep(tree)
    if kept is None:
        raise AllNoise("every block classified boilerplate")
    return kept
