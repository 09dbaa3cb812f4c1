"""Divergence classification and explanation rendering.

A query runs through four search steps, strictly in order, stopping at the
first decisive outcome:

1. object database lookup (miss: the human assumes general object knowledge
   the robot lacks),
2. available-action search (hit: nothing is actually wrong),
3. world-model instance lookup (miss: the human assumes the robot perceives
   an instance it does not),
4. blocked-action search (hit: a symbolic precondition is unmet; miss: the
   robot was never trained for the action).

Object-less queries skip steps 1 and 3; the skip is recorded in the trace.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from .actions import ActionGraph, GroundedAction, find_action
from .errors import BackendError
from .language import DeterministicMatcher, ParsedQuery, match_action
from .lexicon import Lexicon
from .models import Literal, RobotModels, instances_of, serialize_literal


class DivergenceKind(enum.Enum):
    GENERAL_OBJECT = "general_object"
    SPECIFIC_OBJECT = "specific_object"
    GENERAL_ACTION = "general_action"
    SPECIFIC_ACTION = "specific_action"
    FALSE_DIVERGENCE = "false_divergence"

    @property
    def code(self) -> str:
        return _CODES[self]


_CODES = {
    DivergenceKind.GENERAL_OBJECT: "D_GO",
    DivergenceKind.SPECIFIC_OBJECT: "D_SO",
    DivergenceKind.GENERAL_ACTION: "D_GA",
    DivergenceKind.SPECIFIC_ACTION: "D_SA",
    DivergenceKind.FALSE_DIVERGENCE: "FD",
}

# which flowchart step decides each divergence kind
DECISIVE_STEP = {
    DivergenceKind.GENERAL_OBJECT: 1,
    DivergenceKind.FALSE_DIVERGENCE: 2,
    DivergenceKind.SPECIFIC_OBJECT: 3,
    DivergenceKind.SPECIFIC_ACTION: 4,
    DivergenceKind.GENERAL_ACTION: 4,
}


@dataclass(frozen=True)
class Divergence:
    kind: DivergenceKind
    phrase: Optional[str] = None          # D_GO object phrase / D_GA action phrase
    matched_class: Optional[str] = None   # D_SO
    action: Optional[GroundedAction] = None  # D_SA / FD
    unmet: tuple[Literal, ...] = ()       # D_SA

    def __post_init__(self):
        if self.kind is DivergenceKind.SPECIFIC_ACTION and not self.unmet:
            raise ValueError("a precondition divergence needs unmet literals")

    def to_payload(self) -> dict:
        return {
            "kind": self.kind.value,
            "code": self.kind.code,
            "phrase": self.phrase,
            "matched_class": self.matched_class,
            "action": self.action.triple() if self.action else None,
            "unmet": [serialize_literal(lit) for lit in self.unmet],
        }


@dataclass(frozen=True)
class TraceStep:
    step: int
    outcome: str


@dataclass(frozen=True)
class Explanation:
    divergence: Divergence
    matched_class: Optional[str]
    trace: tuple[TraceStep, ...]
    rendered: str
    render_style: str = "template"
    notes: tuple[str, ...] = ()

    def to_payload(self) -> dict:
        return {
            "divergence": self.divergence.to_payload(),
            "matched_class": self.matched_class,
            "trace": [{"step": s.step, "outcome": s.outcome} for s in self.trace],
            "rendered": self.rendered,
            "render_style": self.render_style,
            "notes": list(self.notes),
        }


def classify(
    query: ParsedQuery,
    models: RobotModels,
    graph: ActionGraph,
    matcher=None,
    lexicon: Optional[Lexicon] = None,
) -> Explanation:
    """Run the four-step search and return exactly one divergence.

    A failing matcher backend falls back to the deterministic matcher; the
    fallback is recorded in the explanation notes.
    """
    matcher = matcher or DeterministicMatcher()
    lexicon = lexicon or Lexicon.from_models(models)
    trace: list[TraceStep] = []
    notes: list[str] = []
    matched_class: Optional[str] = None
    phrase = query.object_phrase.text if query.object_phrase else None

    # Step 1: object database
    if phrase is None:
        trace.append(TraceStep(1, "skipped: no object in query"))
    else:
        result = _match_with_fallback(matcher, phrase, models.odb.names, lexicon, notes)
        if result.matched is None:
            trace.append(TraceStep(1, f"no database match for {phrase!r}"))
            divergence = Divergence(DivergenceKind.GENERAL_OBJECT, phrase=phrase)
            return _finish(divergence, matched_class, trace, notes, query, models, lexicon)
        matched_class = result.matched
        trace.append(
            TraceStep(1, f"matched {phrase!r} to {matched_class} (score {result.score:.2f})")
        )

    # Step 2: available actions
    schema = match_action(query.action_phrase, models.schemas, matched_class, lexicon)
    available = None
    if schema is not None:
        class_symbols = (
            {i.symbol for i in instances_of(models.world, matched_class)}
            if matched_class
            else None
        )
        for action in graph.available:
            if action.template_name != schema.template_name:
                continue
            if class_symbols is not None and not (class_symbols & set(action.args)):
                continue
            available = action
            break
    if available is not None:
        trace.append(TraceStep(2, f"found available action {available.triple()}"))
        divergence = Divergence(DivergenceKind.FALSE_DIVERGENCE, action=available)
        return _finish(divergence, matched_class, trace, notes, query, models, lexicon)
    trace.append(
        TraceStep(
            2,
            "no available action matches"
            + ("" if schema else f"; no schema for verb {query.action_phrase!r}"),
        )
    )

    # Step 3: world model
    if phrase is None:
        trace.append(TraceStep(3, "skipped: no object in query"))
    else:
        found = instances_of(models.world, matched_class)
        if not found:
            trace.append(TraceStep(3, f"no instance of {matched_class} in the world model"))
            divergence = Divergence(
                DivergenceKind.SPECIFIC_OBJECT, phrase=phrase, matched_class=matched_class
            )
            return _finish(divergence, matched_class, trace, notes, query, models, lexicon)
        trace.append(
            TraceStep(3, f"instances present: {[i.symbol for i in found]}")
        )

    # Step 4: blocked actions
    if schema is not None:
        instances = instances_of(models.world, matched_class) if matched_class else [None]
        for inst in instances:
            report = find_action(
                graph, schema.template_name, inst.symbol if inst else None
            )
            if report.kind == "blocked":
                trace.append(
                    TraceStep(
                        4,
                        f"action {report.action.triple()} blocked on "
                        f"{[serialize_literal(l) for l in report.unmet]}",
                    )
                )
                divergence = Divergence(
                    DivergenceKind.SPECIFIC_ACTION,
                    matched_class=matched_class,
                    action=report.action,
                    unmet=report.unmet,
                )
                return _finish(divergence, matched_class, trace, notes, query, models, lexicon)
    trace.append(TraceStep(4, "action neither available nor blocked"))
    divergence = Divergence(
        DivergenceKind.GENERAL_ACTION,
        phrase=query.action_phrase,
        matched_class=matched_class,
    )
    return _finish(divergence, matched_class, trace, notes, query, models, lexicon)


def _match_with_fallback(matcher, phrase, candidates, lexicon, notes):
    try:
        return matcher.match_object(phrase, candidates, lexicon)
    except BackendError as exc:
        notes.append(f"matcher backend failed ({exc.category}); used deterministic fallback")
        return DeterministicMatcher().match_object(phrase, candidates, lexicon)


def _finish(divergence, matched_class, trace, notes, query, models, lexicon):
    rendered = render_template(divergence, query, models, lexicon)
    return Explanation(
        divergence=divergence,
        matched_class=matched_class,
        trace=tuple(trace),
        rendered=rendered,
        render_style="template",
        notes=tuple(notes),
    )


def describe_literal(literal: Literal, models: RobotModels, lexicon: Lexicon) -> str:
    """Plain-English reading of a literal, e.g. ``free_edan_hand`` ->
    "the edan hand is free"."""
    pred_words = literal.predicate.replace("_", " ")
    if not literal.args:
        return pred_words
    subject = _display_symbol(literal.args[0], models, lexicon)
    rest = ""
    if len(literal.args) > 1:
        rest = " " + " and ".join(
            _display_symbol(a, models, lexicon) for a in literal.args[1:]
        )
    return f"the {subject} is {pred_words}{rest}"


def _display_symbol(symbol: str, models: RobotModels, lexicon: Lexicon) -> str:
    inst = models.world.get_instance(symbol)
    if inst is not None:
        cls = models.odb.get(inst.class_name)
        return lexicon.display_name(inst.class_name, cls.gloss if cls else None)
    return symbol.replace("_", " ")


def _enabling_hint(literal: Literal, models: RobotModels, lexicon: Lexicon) -> Optional[str]:
    # An action whose add-effects assert the unmet predicate tells the user
    # what to do first, but only reads naturally for instance-directed
    # preconditions.
    if not literal.args:
        return None
    if models.world.get_instance(literal.args[0]) is None:
        return None
    for schema in models.schemas:
        if any(pat.predicate == literal.predicate for pat in schema.add_effects):
            target = _display_symbol(literal.args[0], models, lexicon)
            return (
                f"You need to {schema.verbs[0]} the {target} first to meet the "
                f"necessary precondition."
            )
    return None


def render_template(
    divergence: Divergence,
    query: ParsedQuery,
    models: RobotModels,
    lexicon: Optional[Lexicon] = None,
) -> str:
    """Deterministic first-person sentence for each divergence kind."""
    lexicon = lexicon or Lexicon.from_models(models)
    action = query.action_phrase
    kind = divergence.kind
    if kind is DivergenceKind.GENERAL_OBJECT:
        return (
            f"I am afraid the {divergence.phrase} is not part of my object "
            f"database, so I cannot perform an action with it."
        )
    if kind is DivergenceKind.FALSE_DIVERGENCE:
        target = f" the {query.object_phrase.text}" if query.object_phrase else ""
        return (
            f"You should be able to {action}{target} based on my current "
            f"model of the world."
        )
    if kind is DivergenceKind.SPECIFIC_OBJECT:
        return (
            f"I am afraid I currently cannot {action} because the "
            f"{divergence.phrase} is not part of my world representation."
        )
    if kind is DivergenceKind.SPECIFIC_ACTION:
        first = divergence.unmet[0]
        sentence = (
            f"I cannot {action} right now: the precondition "
            f"'{serialize_literal(first)}' is not met, that is, I need to "
            f"ensure {describe_literal(first, models, lexicon)}."
        )
        hint = _enabling_hint(first, models, lexicon)
        if hint:
            sentence += " " + hint
        if len(divergence.unmet) > 1:
            sentence += f" ({len(divergence.unmet)} preconditions are unmet in total.)"
        return sentence
    target = f" the {query.object_phrase.text}" if query.object_phrase else ""
    return (
        f"Sorry, but I have not been trained to {divergence.phrase}{target}, "
        f"so I cannot do that in general."
    )


def render(explanation: Explanation, style: str = "template", chat=None, query=None, models=None, lexicon=None) -> Explanation:
    """Re-render an explanation. The llm style paraphrases the template
    sentence through the chat backend and silently falls back to the template
    on failure (noted, so transcripts show which style actually ran)."""
    if style == "template" or chat is None:
        return explanation
    from .llm import paraphrase  # local import: llm pulls in httpx

    try:
        text = paraphrase(chat, explanation)
        return replace(explanation, rendered=text, render_style="llm")
    except Exception as exc:  # degrade, never fail a dialogue over phrasing
        return replace(
            explanation,
            notes=explanation.notes + (f"llm render failed ({exc}); kept template",),
        )
