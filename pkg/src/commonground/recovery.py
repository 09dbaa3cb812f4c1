"""Collaborative failure recovery after an explanation.

Two recoverable situations exist, both concerning specific knowledge:

* a missing object (the explanation said the object is not in the world
  model, or wrongly claimed nothing was wrong): the perception oracle tries
  to find the described object in ground truth, suggests a base movement
  around the occluder, and falls back to asking the user for an end-effector
  pose;
* a wrong symbolic state (an unmet precondition the user contradicts): the
  asserted condition is resolved to the unmet literal or its negation pair
  and the world model is overwritten.

General-knowledge gaps (unknown object class, untrained action) are not
recoverable in dialogue; teaching them needs expert modules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .actions import derive_graph
from .errors import ClarificationNeeded, OracleUnavailableError
from .explain import DivergenceKind, Explanation, classify, describe_literal
from .language import Rebuttal, StateAssertion
from .models import Literal, instances_of, serialize_literal
from .scene import BaseMove, Scene, apply_move, perceive, view

_SQ = math.sqrt(0.5)
COMPASS = (
    ("north", (0.0, 1.0)),
    ("northeast", (_SQ, _SQ)),
    ("east", (1.0, 0.0)),
    ("southeast", (_SQ, -_SQ)),
    ("south", (0.0, -1.0)),
    ("southwest", (-_SQ, -_SQ)),
    ("west", (-1.0, 0.0)),
    ("northwest", (-_SQ, _SQ)),
)
CANDIDATE_DISTANCES = (0.5, 1.0)


@dataclass(frozen=True)
class OracleMatch:
    target_id: int
    class_name: str
    visible: bool
    occluder: Optional[int] = None


@dataclass(frozen=True)
class RecoveryOutcome:
    kind: str  # object_added_via_perception | object_added_via_ee |
    #            state_overwritten | no_oracle_match | not_recoverable
    events: tuple[dict, ...]
    message: str
    suggested_move: Optional[BaseMove] = None
    reclassified: Optional[Explanation] = None

    def to_payload(self) -> dict:
        return {
            "kind": self.kind,
            "events": list(self.events),
            "message": self.message,
            "suggested_move": (
                {
                    "delta": [self.suggested_move.dx, self.suggested_move.dy],
                    "dtheta": self.suggested_move.dtheta,
                }
                if self.suggested_move
                else None
            ),
            "reclassified": self.reclassified.to_payload() if self.reclassified else None,
        }


def oracle_match(scene: Optional[Scene], object_phrase: str, matcher, lexicon) -> Optional[OracleMatch]:
    """Simulated perception oracle: match the described object against
    ground-truth scene classes, then assess its visibility geometrically."""
    if scene is None:
        raise OracleUnavailableError("no simulated scene and no external oracle")
    classes = sorted({obj.class_name for obj in scene.objects})
    result = matcher.match_object(object_phrase, classes, lexicon)
    if result.matched is None:
        return None
    target = min(
        (obj for obj in scene.objects if obj.class_name == result.matched),
        key=lambda o: o.id,
    )
    seen = view(scene)[target.id]
    return OracleMatch(
        target_id=target.id,
        class_name=target.class_name,
        visible=seen.visible,
        occluder=seen.occluder,
    )


def suggest_movement(scene: Scene, target_id: int) -> Optional[BaseMove]:
    """First candidate move that leaves the target visible.

    Candidates: stay in place, then eight compass headings at 0.5 m and
    1.0 m (short first per heading), each re-aiming the camera at the target.
    """
    target = scene.get(target_id)
    if target is None:
        raise ValueError(f"no scene object with id {target_id}")
    for move in _candidates(scene, target):
        if view(apply_move(scene, move))[target_id].visible:
            return move
    return None


def _candidates(scene: Scene, target):
    yield BaseMove(0.0, 0.0, 0.0)
    base = scene.robot
    for _, (ux, uy) in COMPASS:
        for dist in CANDIDATE_DISTANCES:
            dx, dy = ux * dist, uy * dist
            nx, ny = base.position[0] + dx, base.position[1] + dy
            aim = math.atan2(target.position[1] - ny, target.position[0] - nx)
            yield BaseMove(dx, dy, _wrap(aim - base.heading))


def _wrap(angle: float) -> float:
    return math.atan2(math.sin(angle), math.cos(angle))


def describe_move(move: BaseMove) -> str:
    if move.magnitude == 0.0:
        return "stay in place and look again"
    bearing = math.atan2(move.dy, move.dx)
    best = min(
        COMPASS,
        key=lambda entry: abs(_wrap(bearing - math.atan2(entry[1][1], entry[1][0]))),
    )
    return f"move {move.magnitude:.1f} m to the {best[0]}"


def diff_events(old_models, new_models) -> list[dict]:
    """State changes between two model snapshots, serialized for transcripts
    and the event stream."""
    events: list[dict] = []
    old_symbols = {i.symbol for i in old_models.instances}
    for inst in new_models.instances:
        if inst.symbol not in old_symbols:
            events.append(
                {
                    "kind": "instance_added",
                    "symbol": inst.symbol,
                    "class": inst.class_name,
                    "pose": list(inst.pose),
                }
            )
    added = new_models.world.state - old_models.world.state
    removed = old_models.world.state - new_models.world.state
    for lit in sorted(added, key=serialize_literal):
        events.append({"kind": "literal_added", "literal": serialize_literal(lit)})
    for lit in sorted(removed, key=serialize_literal):
        events.append({"kind": "literal_removed", "literal": serialize_literal(lit)})
    return events


def handle_rebuttal(session, rebuttal: Rebuttal) -> RecoveryOutcome:
    """Dispatch a rebuttal against the last explanation and repair the
    models. After any mutation the action graph is re-derived and the
    pending query re-classified."""
    explanation = session.last_explanation
    if explanation is None:
        raise ClarificationNeeded("Ask me a question first, then contradict me.")
    kind = explanation.divergence.kind

    if kind in (DivergenceKind.GENERAL_OBJECT, DivergenceKind.GENERAL_ACTION):
        what = "object" if kind is DivergenceKind.GENERAL_OBJECT else "action"
        return RecoveryOutcome(
            kind="not_recoverable",
            events=(),
            message=(
                f"I am sorry, but teaching me a new {what} requires an expert "
                f"setup step; you cannot recover this one in dialogue."
            ),
        )

    if kind in (DivergenceKind.SPECIFIC_OBJECT, DivergenceKind.FALSE_DIVERGENCE):
        if rebuttal.kind != "object_assertion":
            raise ClarificationNeeded(
                "Which object are you pointing out? Try 'there is a <object> there'."
            )
        return _recover_missing_object(session, rebuttal.object_phrase)

    if rebuttal.kind != "state_assertion":
        raise ClarificationNeeded(
            "Which state do you want to correct? Try 'the <object> is <condition>'."
        )
    return overwrite_from_assertion(session, rebuttal.state_assertion)


def _recover_missing_object(session, phrase: str) -> RecoveryOutcome:
    models = session.models
    db_match = session.matcher.match_object(phrase, models.odb.names, session.lexicon)
    if db_match.matched is None:
        return RecoveryOutcome(
            kind="not_recoverable",
            events=(),
            message=(
                f"I am afraid the {phrase} is not in my object database, so I "
                f"cannot add it to my world model."
            ),
        )
    target_class = db_match.matched

    oracle: Optional[OracleMatch] = None
    try:
        oracle = oracle_match(session.scene, phrase, session.matcher, session.lexicon)
    except OracleUnavailableError:
        oracle = None

    if oracle is not None and oracle.class_name not in models.odb:
        return RecoveryOutcome(
            kind="not_recoverable",
            events=(),
            message=(
                f"I can see something matching the {phrase}, but its kind is "
                f"not in my object database, so I cannot add it."
            ),
        )

    if oracle is not None:
        move = suggest_movement(session.scene, oracle.target_id)
        if move is not None:
            return _apply_move_and_perceive(session, phrase, target_class, move)
        session.pending_ee_class = target_class
        return RecoveryOutcome(
            kind="no_oracle_match",
            events=(),
            message=(
                f"I can match the {phrase} in my camera view but no base "
                f"movement gives me a clear view. Please drive the "
                f"end-effector to the object and submit its pose."
            ),
        )

    session.pending_ee_class = target_class
    return RecoveryOutcome(
        kind="no_oracle_match",
        events=(),
        message=(
            f"I could not find the {phrase} with my perception oracle. Please "
            f"drive the end-effector to the object and submit its pose."
        ),
    )


def _apply_move_and_perceive(session, phrase, target_class, move: BaseMove) -> RecoveryOutcome:
    old_models = session.models
    new_scene = apply_move(session.scene, move, session.config.max_step)
    new_models = perceive(new_scene, old_models)
    events: list[dict] = []
    if not move.is_zero():
        events.append(
            {"kind": "base_moved", "delta": [move.dx, move.dy], "dtheta": move.dtheta}
        )
    events.extend(diff_events(old_models, new_models))
    if not instances_of(new_models.world, target_class):
        # the oracle matched a different class than the database did; treat as
        # a failed perception retry and fall back to the end-effector path
        session.pending_ee_class = target_class
        return RecoveryOutcome(
            kind="no_oracle_match",
            events=(),
            message=(
                f"Moving did not let me detect the {phrase}. Please drive the "
                f"end-effector to the object and submit its pose."
            ),
        )
    session.scene = new_scene
    session.models = new_models
    session.graph = derive_graph(new_models)
    reclassified = _reclassify(session)
    message = (
        f"I could not see the {phrase} from where I was, so I decided to "
        f"{describe_move(move)}. My perception found it and I added it to my "
        f"world model. Thank you, I have corrected the issue."
    )
    message += _confirmation(reclassified)
    return RecoveryOutcome(
        kind="object_added_via_perception",
        events=tuple(events),
        message=message,
        suggested_move=move,
        reclassified=reclassified,
    )


def add_object_via_ee(session, matched_class: str, ee_pose: Sequence[float]) -> RecoveryOutcome:
    """Insert the missing object at the pose the user drove the
    end-effector to."""
    if matched_class not in session.models.odb:
        return RecoveryOutcome(
            kind="not_recoverable",
            events=(),
            message=(
                f"The class {matched_class!r} is not in my object database, "
                f"so I cannot add an instance of it."
            ),
        )
    old_models = session.models
    new_models, inst = old_models.insert_instance(matched_class, tuple(ee_pose))
    session.models = new_models
    session.graph = derive_graph(new_models)
    session.pending_ee_class = None
    reclassified = _reclassify(session)
    message = (
        f"Thank you, I added {inst.symbol} to my world model at the pose you "
        f"showed me. I have corrected the issue."
    )
    message += _confirmation(reclassified)
    return RecoveryOutcome(
        kind="object_added_via_ee",
        events=tuple(diff_events(old_models, new_models)),
        message=message,
        reclassified=reclassified,
    )


def overwrite_from_assertion(session, assertion: StateAssertion) -> RecoveryOutcome:
    """Resolve the asserted condition to the unmet literal (or its negation
    pair) and overwrite the world state accordingly."""
    divergence = session.last_explanation.divergence
    vocabulary = session.models.vocabulary
    lexicon = session.lexicon

    raw_tokens = lexicon.tokenize(assertion.condition_phrase)
    negated = "not" in raw_tokens or "no" in raw_tokens
    condition = frozenset(
        t for t in lexicon.normalize(raw_tokens) if t not in ("not", "no")
    )
    if not condition:
        raise ClarificationNeeded("Which condition do you mean? Please rephrase.")

    already_believed = False
    for unmet in divergence.unmet:
        resolved = _resolve_condition(unmet, condition, negated, vocabulary, lexicon)
        if resolved is None:
            continue
        old_models = session.models
        new_models = old_models.overwrite_literal(resolved, True)
        if new_models.world.state == old_models.world.state:
            # asserting what the robot already believes repairs nothing
            already_believed = True
            continue
        session.models = new_models
        session.graph = derive_graph(new_models)
        reclassified = _reclassify(session)
        message = (
            f"Understood, I updated my world model: "
            f"{describe_literal(resolved, new_models, lexicon)} now. Thank "
            f"you, I have corrected the issue."
        )
        message += _confirmation(reclassified)
        return RecoveryOutcome(
            kind="state_overwritten",
            events=tuple(diff_events(old_models, new_models)),
            message=message,
            reclassified=reclassified,
        )
    if already_believed:
        raise ClarificationNeeded(
            "That matches what I already believe about the world; which state "
            "exactly is wrong?"
        )
    raise ClarificationNeeded(
        "I could not relate that to the precondition that blocks the action; "
        "which state exactly is wrong?"
    )


def _resolve_condition(unmet: Literal, condition, negated, vocabulary, lexicon) -> Optional[Literal]:
    """Which literal does the assertion make true: the unmet one or its pair?

    A predicate is asserted through its gloss (positive words: "open" for
    ``not_closed``) or through its own name tokens, where the user's negation
    must agree with the name's ``not_`` polarity ("not closed" asserts
    ``not_closed``; plain "closed" asserts its pair).
    """
    candidates = [unmet.predicate]
    pair = vocabulary.pair_of(unmet.predicate) if vocabulary else None
    if pair is not None:
        candidates.append(pair)

    def asserted_name(name):
        flipside = vocabulary.pair_of(name) if vocabulary else None
        gloss = set(lexicon.normalize(list(vocabulary.gloss(name)))) if vocabulary else set()
        if condition & gloss:
            return name if not negated else flipside
        base = set(lexicon.normalize(name.replace("_", " "))) - {"not"}
        name_negative = name.startswith("not_")
        if condition & base:
            return name if negated == name_negative else flipside
        return None

    for name in candidates:
        resolved_name = asserted_name(name)
        if resolved_name is None or resolved_name not in candidates:
            continue
        if resolved_name == unmet.predicate:
            return unmet
        if vocabulary and vocabulary.arities.get(resolved_name) == len(unmet.args):
            return Literal(resolved_name, unmet.args)
        return None  # cross-pair with different arity: cannot build the args
    return None


def _reclassify(session) -> Optional[Explanation]:
    if session.pending_query is None:
        return None
    return classify(
        session.pending_query,
        session.models,
        session.graph,
        session.matcher,
        session.lexicon,
    )


def _confirmation(reclassified: Optional[Explanation]) -> str:
    if reclassified is None:
        return ""
    if reclassified.divergence.kind is DivergenceKind.FALSE_DIVERGENCE:
        return " " + reclassified.rendered
    return " However, there is still an issue: " + reclassified.rendered
