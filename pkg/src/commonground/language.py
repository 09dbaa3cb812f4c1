"""Deterministic natural-language front end: query parsing, rebuttal parsing,
and phrase-to-symbol matching."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import ClarificationNeeded, UnparseableQueryError
from .lexicon import Lexicon

MATCH_THRESHOLD = 0.5

_MODALS = {"can", "cannot", "cant", "could", "couldnt", "wont", "unable"}
_NEGATIONS = {"not", "never", "no"}
_SKIPPABLE = {"i", "you", "we", "it", "he", "she", "they", "the", "robot", "to", "please"}
_DETERMINERS = {"the", "a", "an", "this", "that", "my", "your", "our", "some"}
_PARTICLES = {"up", "down", "off", "on", "out", "over", "away"}
_TRAILING_ADVERBS = {"now", "please", "today", "again", "yet", "anymore", "first", "here", "there"}
_LEAD_FILLER = {"but", "no", "well", "also", "and", "hey", "hi", "hello", "robot", "actually", "look"}
_COPULAS = {"is", "are", "was", "were"}
_CONDITION_ADVERBS = {"actually", "already", "now", "really", "still", "currently", "right"}
_PRESENCE_WORDS = {"there", "here", "present", "visible", "around"}


@dataclass(frozen=True)
class ObjectPhrase:
    noun: str
    adjectives: tuple[str, ...] = ()

    @property
    def text(self) -> str:
        return " ".join((*self.adjectives, self.noun))


@dataclass(frozen=True)
class ParsedQuery:
    action_phrase: str
    object_phrase: Optional[ObjectPhrase]
    raw: str


@dataclass(frozen=True)
class StateAssertion:
    subject_phrase: str
    condition_phrase: str


@dataclass(frozen=True)
class Rebuttal:
    kind: str  # "object_assertion" | "state_assertion"
    object_phrase: Optional[str] = None
    state_assertion: Optional[StateAssertion] = None

    def __post_init__(self):
        populated = (self.object_phrase is not None, self.state_assertion is not None)
        if self.kind == "object_assertion" and populated != (True, False):
            raise ValueError("object_assertion carries exactly an object phrase")
        if self.kind == "state_assertion" and populated != (False, True):
            raise ValueError("state_assertion carries exactly a state assertion")


@dataclass(frozen=True)
class MatchResult:
    matched: Optional[str]
    score: float
    candidates_considered: int


def _basic_tokens(text: str) -> list[str]:
    return Lexicon().tokenize(text)


def parse_query(text: str) -> ParsedQuery:
    """Extract the requested action and (optionally) its object from a
    why-can-not style query.

    Works clause by clause: find a modal, skip pronouns and negations, read a
    verb phrase, and treat a determiner as the start of the object phrase.
    All tokens before the object's head noun count as adjectives.
    """
    if not text or not text.strip():
        raise UnparseableQueryError("empty query")
    for clause in _split_clauses(text):
        tokens = _basic_tokens(clause)
        parsed = _parse_clause(tokens, raw=text)
        if parsed is not None:
            return parsed
    raise UnparseableQueryError(
        f"could not find an action request in {text!r}; try asking e.g. "
        f"'Why can you not grasp the mug?'"
    )


def _split_clauses(text: str) -> list[str]:
    import re

    return [c for c in re.split(r"[.,;!?]", text) if c.strip()]


def _parse_clause(tokens: list[str], raw: str) -> Optional[ParsedQuery]:
    idx = None
    for i, token in enumerate(tokens):
        if token in _MODALS:
            idx = i
            break
    if idx is None:
        return None
    j = idx + 1
    while j < len(tokens) and (tokens[j] in _SKIPPABLE or tokens[j] in _NEGATIONS):
        j += 1
    rest = tokens[j:]
    if not rest:
        return None

    det = next((k for k, tok in enumerate(rest) if tok in _DETERMINERS), None)
    if det is not None:
        verb_tokens = rest[:det]
        object_tokens = rest[det + 1 :]
    else:
        verb_tokens = [rest[0]]
        k = 1
        while k < len(rest) and rest[k] in _PARTICLES:
            verb_tokens.append(rest[k])
            k += 1
        object_tokens = rest[k:]
    while object_tokens and object_tokens[-1] in _TRAILING_ADVERBS:
        object_tokens = object_tokens[:-1]
    if not verb_tokens:
        return None
    object_phrase = None
    if object_tokens:
        object_phrase = ObjectPhrase(
            noun=object_tokens[-1], adjectives=tuple(object_tokens[:-1])
        )
    return ParsedQuery(
        action_phrase=" ".join(verb_tokens), object_phrase=object_phrase, raw=raw
    )


def parse_rebuttal(text: str, context=None) -> Rebuttal:
    """Classify a rebuttal as an object assertion ("there is a green cup
    there!") or a state assertion ("the gripper is free!").

    ``context`` is the prior explanation; it only matters in the service
    layer, the grammar itself is context-free.
    """
    tokens = _basic_tokens(text)
    while tokens and tokens[0] in _LEAD_FILLER:
        tokens = tokens[1:]
    if len(tokens) >= 2 and tokens[0] == "right" and tokens[1] == "now":
        tokens = tokens[2:]
    while tokens and tokens[0] in _LEAD_FILLER:
        tokens = tokens[1:]
    if not tokens:
        raise ClarificationNeeded("I did not catch that; could you rephrase?")

    if tokens[0] == "there" and len(tokens) > 2 and tokens[1] in _COPULAS:
        np = [t for t in tokens[2:] if t not in _DETERMINERS]
        while np and np[-1] in _PRESENCE_WORDS:
            np = np[:-1]
        if np:
            return Rebuttal("object_assertion", object_phrase=" ".join(np))
        raise ClarificationNeeded("Which object do you mean?")

    if tokens[:2] in (["i", "see"], ["i", "spot"]) and len(tokens) > 2:
        np = [t for t in tokens[2:] if t not in _DETERMINERS]
        if np:
            return Rebuttal("object_assertion", object_phrase=" ".join(np))

    for k, token in enumerate(tokens):
        if token in _COPULAS and 0 < k < len(tokens) - 1:
            subject = [t for t in tokens[:k] if t not in _DETERMINERS]
            condition = [t for t in tokens[k + 1 :] if t not in _CONDITION_ADVERBS]
            if not subject or not condition:
                break
            if all(t in _PRESENCE_WORDS for t in condition):
                return Rebuttal("object_assertion", object_phrase=" ".join(subject))
            return Rebuttal(
                "state_assertion",
                state_assertion=StateAssertion(
                    subject_phrase=" ".join(subject),
                    condition_phrase=" ".join(condition),
                ),
            )
    raise ClarificationNeeded(
        "I could not tell whether you are pointing out an object or a state; "
        "try 'there is a <object> there' or 'the <object> is <condition>'."
    )


class DeterministicMatcher:
    """Token-overlap matcher over synonym-normalized content tokens.

    Score is |query ∩ candidate| / |query|. A match needs score >= 0.5 and,
    when both sides carry color tokens, at least one color in common. Ties
    break toward higher score, fewer candidate tokens, then lexicographic
    order, so results are stable under candidate shuffling.
    """

    name = "det"

    def match_object(
        self, phrase: str, candidates: Sequence[str], lexicon: Lexicon
    ) -> MatchResult:
        query = lexicon.normalize(phrase)
        if not query or not candidates:
            return MatchResult(None, 0.0, len(candidates))
        query_set = frozenset(query)
        query_colors = lexicon.color_tokens(query_set)
        best = None
        best_key = None
        for candidate in candidates:
            tokens = lexicon.candidate_tokens(candidate)
            score = len(query_set & tokens) / len(query_set)
            cand_colors = lexicon.color_tokens(tokens)
            color_ok = not (query_colors and cand_colors) or bool(
                query_colors & cand_colors
            )
            eligible = score >= MATCH_THRESHOLD and color_ok
            key = (-score, len(tokens), candidate)
            if eligible and (best_key is None or key < best_key):
                best = (candidate, score)
                best_key = key
        if best is None:
            return MatchResult(None, 0.0, len(candidates))
        return MatchResult(best[0], best[1], len(candidates))


def match_action(
    verb_phrase: str,
    schemas: Sequence,
    matched_class: Optional[str],
    lexicon: Lexicon,
):
    """First schema whose verb tokens intersect the normalized query verb
    tokens; restricted to schemas admitting ``matched_class`` when given."""
    query = frozenset(lexicon.normalize(verb_phrase))
    if not query:
        return None
    for schema in schemas:
        if matched_class is not None and not schema.admits_class(matched_class):
            continue
        verb_tokens = set()
        for verb in schema.verbs:
            verb_tokens.update(lexicon.normalize(verb))
        if query & verb_tokens:
            return schema
    return None
