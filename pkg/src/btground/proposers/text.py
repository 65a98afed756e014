"""Tiny bag-of-words matching between symbols and policy descriptions."""

from __future__ import annotations

import re
from typing import Iterable

_CAMEL = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|\d+")
_SPLIT = re.compile(r"[^A-Za-z0-9]+")

STOP_WORDS = frozenset(
    "a an and at by for from in into is it of on onto or the to up with style its".split()
)
_IRREGULAR = {"held": "hold", "put": "put", "putting": "put", "lying": "lie", "stacked": "stack"}


def stem(word: str) -> str:
    w = word.lower()
    if w in _IRREGULAR:
        return _IRREGULAR[w]
    for suffix in ("ing", "ed", "es", "s"):
        if w.endswith(suffix) and len(w) - len(suffix) >= 3:
            w = w[: -len(suffix)]
            break
    # doubled consonant left behind by -ing/-ed ("grabb" -> "grab")
    if len(w) >= 4 and w[-1] == w[-2] and w[-1] not in "aeiouls":
        w = w[:-1]
    return w


def tokens(text: str) -> set[str]:
    """Stemmed content words; CamelCase and snake_case are split, and each
    compound chunk is also kept whole so ``PutIn`` still matches ``putin``."""
    out: set[str] = set()
    for chunk in _SPLIT.split(text):
        if not chunk:
            continue
        parts = _CAMEL.findall(chunk) or [chunk]
        if len(parts) > 1:
            out.add(stem(chunk))
        for part in parts:
            out.add(stem(part))
    return {t for t in out if t and t not in STOP_WORDS}


def overlap(a: Iterable[str], b: Iterable[str]) -> int:
    return len(set(a) & set(b))


def atom_tokens(atom: str) -> set[str]:
    return tokens(atom.replace("(", " ").replace(")", " ").replace(",", " "))


_DETERMINERS = frozenset({"the", "a", "an", "its", "their"})
_ADJECTIVES = frozenset({"held", "open", "wet", "empty", "free", "full", "clear", "upright", "clean", "dry"})


def _adjectival(word: str) -> bool:
    w = word.lower()
    return w in _ADJECTIVES or w.endswith("ed") or w.endswith("ing")


def split_cues(text: str) -> tuple[set[str], set[str]]:
    """Split a description into effect words and state words.

    A state word is an adjective-like word between a determiner and its noun
    ("the *held* cup", "an *empty* hand"): it names something that must
    already hold, not something the policy brings about.
    """
    words = [w for w in re.split(r"[^A-Za-z0-9_]+", text) if w]
    state: set[str] = set()
    effect: list[str] = []
    i = 0
    while i < len(words):
        effect.append(words[i])
        if words[i].lower() in _DETERMINERS:
            j = i + 1
            while j + 1 < len(words) and _adjectival(words[j]):
                state |= tokens(words[j])
                j += 1
            i = j
            continue
        i += 1
    return tokens(" ".join(effect)), state
