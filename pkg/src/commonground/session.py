"""One live reconciliation dialogue: models + scene + phase machine.

A session owns all mutation. The snapshot values it holds (models, scene,
graph) are immutable, so readers always see a consistent picture; every
mutation bumps the version exactly once and appends one event frame carrying
the full state payload, which makes the event log replayable.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

from .actions import derive_graph, format_blocked
from .errors import PhaseError
from .explain import Explanation, classify, render
from .language import DeterministicMatcher, ParsedQuery, parse_query, parse_rebuttal
from .lexicon import Lexicon
from .llm import ChatClient, LlmMatcher, LlmQueryParser, LlmSettings
from .models import serialize_literal
from .recovery import RecoveryOutcome, add_object_via_ee, handle_rebuttal
from .scene import DEFAULT_MAX_STEP, BaseMove, apply_move, perceive
from .scenario import load_scenario_file, resolve_scenario_path

PHASE_IDLE = "idle"
PHASE_EXPLAINED = "explained"
PHASE_RECOVERING = "recovering"

_session_counter = itertools.count(1)


@dataclass
class EngineConfig:
    matcher: str = "det"  # "det" | "llm"
    render_style: str = "template"  # "template" | "llm"
    use_glosses: bool = True
    max_step: float = DEFAULT_MAX_STEP
    llm: Optional[LlmSettings] = None
    chat_transport: object = None  # test hook: httpx transport for the chat client


class Session:
    def __init__(self, session_id, scenario_name, models, scene, config: Optional[EngineConfig] = None):
        self.id = session_id
        self.scenario_name = scenario_name
        self.config = config or EngineConfig()
        self.models = models
        self.scene = scene
        self.lexicon = Lexicon.from_models(models, use_glosses=self.config.use_glosses)
        self.chat = None
        if self.config.matcher == "llm" or self.config.render_style == "llm":
            settings = self.config.llm or LlmSettings.from_env()
            self.chat = ChatClient(settings, transport=self.config.chat_transport)
        self.matcher = (
            LlmMatcher(self.chat) if self.config.matcher == "llm" else DeterministicMatcher()
        )
        self.query_parser = (
            LlmQueryParser(self.chat) if self.config.matcher == "llm" else None
        )
        self.phase = PHASE_IDLE
        self.version = 0
        self.dialogue: list[dict] = []
        self.events: list[dict] = []
        self.pending_query: Optional[ParsedQuery] = None
        self.last_explanation: Optional[Explanation] = None
        self.last_outcome: Optional[RecoveryOutcome] = None
        self.pending_ee_class: Optional[str] = None
        self.lock = threading.RLock()
        if self.scene is not None:
            self.models = perceive(self.scene, self.models)
        self.graph = derive_graph(self.models)
        self._emit("created", [])

    # --- dialogue turns ---------------------------------------------------

    def post_query(self, text: str) -> dict:
        with self.lock:
            if self.phase not in (PHASE_IDLE, PHASE_EXPLAINED):
                raise PhaseError(
                    f"cannot take a new query while {self.phase}; finish recovery first"
                )
            query = self._parse_query(text)
            explanation = classify(query, self.models, self.graph, self.matcher, self.lexicon)
            explanation = render(
                explanation, style=self.config.render_style, chat=self.chat
            )
            self.pending_query = query
            self.last_explanation = explanation
            self.phase = PHASE_EXPLAINED
            self.dialogue.append({"role": "user", "text": text})
            self.dialogue.append({"role": "robot", "text": explanation.rendered})
            self._emit("explanation", [])
            return {"explanation": explanation.to_payload(), "version": self.version}

    def _parse_query(self, text: str) -> ParsedQuery:
        if self.query_parser is not None:
            try:
                return self.query_parser.parse(text)
            except Exception:
                return parse_query(text)
        return parse_query(text)

    def post_rebuttal(self, text: str) -> dict:
        with self.lock:
            if self.phase != PHASE_EXPLAINED:
                raise PhaseError("a rebuttal only makes sense right after an explanation")
            rebuttal = parse_rebuttal(text, self.last_explanation)
            outcome = handle_rebuttal(self, rebuttal)
            self._finish_recovery(text, outcome)
            return {"outcome": outcome.to_payload(), "version": self.version}

    def set_ee_pose(self, pose: Sequence[float]) -> dict:
        with self.lock:
            if self.phase != PHASE_RECOVERING or self.pending_ee_class is None:
                raise PhaseError("no recovery is waiting for an end-effector pose")
            outcome = add_object_via_ee(self, self.pending_ee_class, pose)
            self._finish_recovery(None, outcome)
            return {"outcome": outcome.to_payload(), "version": self.version}

    def _finish_recovery(self, user_text: Optional[str], outcome: RecoveryOutcome) -> None:
        self.last_outcome = outcome
        if outcome.kind == "no_oracle_match":
            self.phase = PHASE_RECOVERING
        else:
            self.phase = PHASE_IDLE
            if outcome.reclassified is not None:
                self.last_explanation = outcome.reclassified
        if user_text is not None:
            self.dialogue.append({"role": "user", "text": user_text})
        self.dialogue.append({"role": "robot", "text": outcome.message})
        self._emit("recovery", list(outcome.events))

    def move_base(self, move: Optional[BaseMove] = None) -> dict:
        """Apply a base move (the last suggested one when omitted) and re-run
        perception."""
        with self.lock:
            if self.scene is None:
                raise PhaseError("this scenario has no simulated scene to move in")
            if move is None:
                if self.last_outcome is None or self.last_outcome.suggested_move is None:
                    raise PhaseError("no suggested move to apply")
                move = self.last_outcome.suggested_move
            from .recovery import diff_events

            self.scene = apply_move(self.scene, move, self.config.max_step)
            old_models = self.models
            self.models = perceive(self.scene, self.models)
            self.graph = derive_graph(self.models)
            changes = [
                {"kind": "base_moved", "delta": [move.dx, move.dy], "dtheta": move.dtheta}
            ]
            changes.extend(diff_events(old_models, self.models))
            self._emit("move", changes)
            return {"version": self.version, "changes": changes}

    def inject(self, models=None, scene=None, note: str = "external change") -> None:
        """Out-of-dialogue mutation hook for simulations and tests: swap in
        new ground truth or beliefs, as if the world changed behind the
        robot's back."""
        with self.lock:
            from .recovery import diff_events

            changes = []
            if models is not None:
                changes.extend(diff_events(self.models, models))
                self.models = models
                self.graph = derive_graph(models)
            if scene is not None:
                self.scene = scene
            self._emit("injected", changes or [{"kind": "note", "note": note}])

    # --- introspection ------------------------------------------------------

    def state_payload(self) -> dict:
        return {
            "session": self.id,
            "scenario": self.scenario_name,
            "phase": self.phase,
            "version": self.version,
            "world": {
                "instances": [
                    {
                        "symbol": inst.symbol,
                        "class": inst.class_name,
                        "id": inst.id,
                        "pose": list(inst.pose),
                    }
                    for inst in self.models.instances
                ],
                "state": sorted(
                    serialize_literal(lit) for lit in self.models.world.state
                ),
                "next_id": self.models.world.next_id,
            },
            "actions": {
                "available": [a.triple() for a in self.graph.available],
                "blocked": {
                    key: [a.triple() for a in actions]
                    for key, actions in sorted(self.graph.blocked.items())
                },
            },
            "scene": self._scene_payload(),
            "dialogue": list(self.dialogue),
            "last_divergence": (
                self.last_explanation.divergence.to_payload()
                if self.last_explanation
                else None
            ),
            "pending_ee_class": self.pending_ee_class,
        }

    def _scene_payload(self) -> Optional[dict]:
        if self.scene is None:
            return None
        from .scene import view

        seen = view(self.scene)
        return {
            "objects": [
                {
                    "class": o.class_name,
                    "id": o.id,
                    "position": list(o.position),
                    "radius": o.radius,
                    "state": [" ".join((p, *a)) for p, a in o.state],
                    "visible": seen[o.id].visible,
                    "occluder": seen[o.id].occluder,
                }
                for o in self.scene.objects
            ],
            "robot": {
                "position": list(self.scene.robot.position),
                "heading": self.scene.robot.heading,
            },
            "camera": {
                "fov_angle": self.scene.camera.fov_angle,
                "range": self.scene.camera.range,
            },
        }

    def blocked_text(self, header: bool = True) -> str:
        return format_blocked(self.graph, header=header)

    def events_since(self, version: int) -> list[dict]:
        with self.lock:
            return [frame for frame in self.events if frame["version"] > version]

    def _emit(self, kind: str, changes: list[dict]) -> None:
        self.version += 1
        self.events.append(
            {
                "version": self.version,
                "kind": kind,
                "changes": changes,
                "state": self.state_payload(),
            }
        )


def open_session(
    scenario: Union[str, Path, dict],
    config: Optional[EngineConfig] = None,
    session_id: Optional[str] = None,
    base_dir: Optional[Path] = None,
) -> Session:
    """Create a session from a scenario name, path, or inline document."""
    if isinstance(scenario, dict):
        from .scenario import load_scenario

        scene, models = load_scenario(scenario)
        name = scenario.get("description", "inline")
    else:
        path = resolve_scenario_path(scenario, base_dir)
        scene, models = load_scenario_file(path)
        name = path.stem
    sid = session_id or f"s{next(_session_counter):04d}"
    return Session(sid, name, models, scene, config)
