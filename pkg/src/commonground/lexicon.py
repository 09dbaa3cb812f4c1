"""Token normalization shared by all deterministic language operations.

Normalization is deliberately shallow: lowercase, punctuation to spaces,
multi-word phrase rewrites, per-token synonyms, stopword removal, and a
trailing plural ``s`` strip on tokens longer than three characters. That is
enough for household vocabulary; anything richer belongs in an LLM backend.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

_TOKEN_RE = re.compile(r"[a-z0-9]+")

DEFAULT_STOPWORDS = frozenset(
    """
    a an the this that these those my your our his her their its
    i you we he she they me us them it
    is are was were am be been being
    to of in on at for with from into onto over under by as
    and or so then also too very
    please hey hi hello thanks thank
    now currently actually already really still just again yet anymore
    there here ish what why how do does did
    """.split()
)

DEFAULT_SYNONYMS: dict[str, str] = {
    "cup": "mug",
    "grab": "grasp",
    "take": "grasp",
    "hold": "grasp",
    "fetch": "grasp",
    "shut": "closed",
    "opened": "open",
    "lilac": "purple",
    "violet": "purple",
    "navy": "blue",
    "gray": "grey",
    "greenish": "green",
    "blueish": "blue",
    "bluish": "blue",
    "reddish": "red",
    "yellowish": "yellow",
    "purplish": "purple",
    "pinkish": "pink",
    "greyish": "grey",
    "grayish": "grey",
    "brownish": "brown",
    "blackish": "black",
    "whitish": "white",
}

# Multi-word rewrites applied before per-token normalization. An empty value
# drops the phrase entirely.
DEFAULT_PHRASES: dict[str, str] = {
    "pick up": "grasp",
    "pick it up": "grasp",
    "put down": "release",
    "set down": "release",
    "let go of": "release",
    "right now": "",
}

DEFAULT_COLORS = frozenset(
    """
    red green blue yellow purple pink orange black white brown grey
    peach beige cyan teal turquoise
    """.split()
)


@dataclass(frozen=True)
class Lexicon:
    """Normalization tables plus per-class surface tokens and glosses.

    Lookup maps are total: an unknown token normalizes to itself.
    """

    synonyms: Mapping[str, str] = field(default_factory=lambda: dict(DEFAULT_SYNONYMS))
    phrases: Mapping[str, str] = field(default_factory=lambda: dict(DEFAULT_PHRASES))
    colors: frozenset[str] = DEFAULT_COLORS
    stopwords: frozenset[str] = DEFAULT_STOPWORDS
    class_surface: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    glosses: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    use_glosses: bool = True

    @classmethod
    def from_models(cls, models, use_glosses: bool = True, extra_synonyms=None) -> "Lexicon":
        surface = {c.name: c.synonyms for c in models.odb.classes}
        glosses = {c.name: c.gloss for c in models.odb.classes}
        synonyms = dict(DEFAULT_SYNONYMS)
        if extra_synonyms:
            synonyms.update(extra_synonyms)
        return cls(
            synonyms=synonyms,
            class_surface=surface,
            glosses=glosses,
            use_glosses=use_glosses,
        )

    def without_glosses(self) -> "Lexicon":
        return Lexicon(
            synonyms=self.synonyms,
            phrases=self.phrases,
            colors=self.colors,
            stopwords=self.stopwords,
            class_surface=self.class_surface,
            glosses=self.glosses,
            use_glosses=False,
        )

    # --- tokenization -----------------------------------------------------

    def tokenize(self, text: str) -> list[str]:
        return _TOKEN_RE.findall(text.lower())

    def _rewrite_phrases(self, tokens: Sequence[str]) -> list[str]:
        if not self.phrases:
            return list(tokens)
        keys = sorted(self.phrases, key=lambda k: -len(k.split()))
        out: list[str] = []
        i = 0
        while i < len(tokens):
            for key in keys:
                words = key.split()
                if list(tokens[i : i + len(words)]) == words:
                    replacement = self.phrases[key]
                    if replacement:
                        out.extend(replacement.split())
                    i += len(words)
                    break
            else:
                out.append(tokens[i])
                i += 1
        return out

    def normalize_token(self, token: str) -> str:
        if token in self.synonyms:
            return self.synonyms[token]
        if len(token) > 3 and token.endswith("s") and not token.endswith("ss"):
            stripped = token[:-1]
            return self.synonyms.get(stripped, stripped)
        if token.endswith("ish") and len(token) > 4:
            base = token[:-3]
            if base in self.colors:
                return base
            if base[:-1] in self.colors:  # redd-ish
                return base[:-1]
        return token

    def normalize(self, text_or_tokens) -> tuple[str, ...]:
        """Content tokens of a phrase: normalized, stopword- and digit-free."""
        tokens = (
            self.tokenize(text_or_tokens)
            if isinstance(text_or_tokens, str)
            else list(text_or_tokens)
        )
        tokens = self._rewrite_phrases(tokens)
        out = []
        for token in tokens:
            if token.isdigit():
                continue
            norm = self.normalize_token(token)
            if not norm or norm in self.stopwords:
                continue
            out.append(norm)
        return tuple(out)

    # --- symbols ----------------------------------------------------------

    def symbol_tokens(self, symbol: str) -> tuple[str, ...]:
        """Content tokens of a robot symbol: split on underscores and digits."""
        return self.normalize(self.tokenize(symbol.replace("_", " ").replace("$", " ")))

    def candidate_tokens(self, name: str) -> frozenset[str]:
        """Token set a candidate symbol exposes for matching: its own name
        tokens, declared synonyms, and (when enabled) gloss tokens."""
        tokens = set(self.symbol_tokens(name))
        tokens.update(self.normalize(list(self.class_surface.get(name, ()))))
        if self.use_glosses:
            tokens.update(self.normalize(list(self.glosses.get(name, ()))))
        return frozenset(tokens)

    def color_tokens(self, tokens: Iterable[str]) -> frozenset[str]:
        return frozenset(tokens) & self.colors

    def display_name(self, class_name: str, gloss: Optional[Sequence[str]] = None) -> str:
        """Human-facing words for a class symbol; the first gloss token wins
        when one exists."""
        gloss = gloss if gloss is not None else self.glosses.get(class_name, ())
        if gloss:
            return gloss[0]
        return " ".join(self.symbol_tokens(class_name)) or class_name
