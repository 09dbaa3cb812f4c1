"""Scenario documents: one JSON file describing the robot's belief stores,
the action domain, and (optionally) ground truth for the simulator."""

from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path
from typing import Optional, Union

import jsonschema

from .actions import parse_domain
from .errors import IntegrityError, ScenarioError
from .models import (
    Literal,
    ObjectClass,
    ObjectDatabase,
    ObjectInstance,
    RobotModels,
    WorldModel,
    serialize_literal,
)
from .scene import Camera, RobotBase, Scene, SceneObject

_SYMBOL = {"type": "string", "pattern": "^[a-z][a-z0-9_]*$"}
_TOKEN = {"type": "string", "minLength": 1}
_VEC2 = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_VEC3 = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}

SCENARIO_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["object_database", "effectors", "world", "domain"],
    "additionalProperties": False,
    "properties": {
        "description": {"type": "string"},
        "object_database": {
            "type": "object",
            "required": ["classes"],
            "additionalProperties": False,
            "properties": {
                "classes": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["name"],
                        "additionalProperties": False,
                        "properties": {
                            "name": _SYMBOL,
                            "synonyms": {"type": "array", "items": _TOKEN},
                            "gloss": {"type": "array", "items": _TOKEN},
                        },
                    },
                }
            },
        },
        "effectors": {"type": "array", "items": _SYMBOL},
        "domain": {
            "anyOf": [
                {"type": "string"},
                {"type": "array", "items": {"type": "string"}},
            ]
        },
        "world": {
            "type": "object",
            "required": ["instances", "state"],
            "additionalProperties": False,
            "properties": {
                "instances": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["class", "id"],
                        "additionalProperties": False,
                        "properties": {
                            "class": _SYMBOL,
                            "id": {"type": "integer", "minimum": 0},
                            "pose": _VEC3,
                        },
                    },
                },
                "state": {"type": "array", "items": {"type": "string", "minLength": 1}},
                "next_id": {"type": "integer", "minimum": 1},
            },
        },
        "scene": {
            "type": "object",
            "required": ["objects", "robot", "camera"],
            "additionalProperties": False,
            "properties": {
                "objects": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["class", "id", "position", "radius"],
                        "additionalProperties": False,
                        "properties": {
                            "class": _SYMBOL,
                            "id": {"type": "integer", "minimum": 0},
                            "position": _VEC2,
                            "radius": {"type": "number", "exclusiveMinimum": 0},
                            "state": {
                                "type": "array",
                                "items": {"type": "string", "minLength": 1},
                            },
                        },
                    },
                },
                "robot": {
                    "type": "object",
                    "required": ["position"],
                    "additionalProperties": False,
                    "properties": {
                        "position": _VEC2,
                        "heading": {"type": "number"},
                    },
                },
                "camera": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "fov_angle": {
                            "type": "number",
                            "exclusiveMinimum": 0,
                            "maximum": 2 * math.pi,
                        },
                        "range": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
            },
        },
    },
}

_validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)


def load_scenario(document: Union[str, bytes, dict]) -> tuple[Optional[Scene], RobotModels]:
    """Validate and materialize a scenario document.

    Returns the ground-truth scene (when the document includes one) and the
    fully validated robot models. Schema violations name the offending path;
    dangling symbols raise :class:`IntegrityError`.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ScenarioError("$", f"not valid JSON: {exc}") from exc
    errors = sorted(_validator.iter_errors(document), key=lambda e: list(e.absolute_path))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        path = "$" + "".join(
            f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path
        )
        raise ScenarioError(path, err.message)

    classes = tuple(
        ObjectClass(
            name=c["name"],
            synonyms=tuple(c.get("synonyms", ())),
            gloss=tuple(c.get("gloss", ())),
        )
        for c in document["object_database"]["classes"]
    )
    odb = ObjectDatabase(classes)
    effectors = tuple(document["effectors"])

    domain_text = document["domain"]
    if isinstance(domain_text, list):
        domain_text = "\n".join(domain_text)
    domain = parse_domain(domain_text)

    instances = []
    for i, entry in enumerate(document["world"]["instances"]):
        if entry["class"] not in odb:
            raise ScenarioError(
                f"$.world.instances[{i}].class",
                f"class {entry['class']!r} is not in the object database",
            )
        instances.append(
            ObjectInstance(entry["class"], entry["id"], tuple(entry.get("pose", (0, 0, 0))))
        )

    state = set()
    for i, text in enumerate(document["world"]["state"]):
        try:
            state.add(domain.vocabulary.parse(text))
        except ValueError as exc:
            raise ScenarioError(f"$.world.state[{i}]", str(exc)) from exc

    max_id = max((inst.id for inst in instances), default=0)
    next_id = document["world"].get("next_id", max_id + 1)
    world = WorldModel(tuple(instances), frozenset(state), next_id)

    models = RobotModels(
        odb=odb,
        world=world,
        schemas=domain.schemas,
        effectors=effectors,
        vocabulary=domain.vocabulary,
        domain_text=domain_text,
    )
    models.validate()

    scene = None
    if "scene" in document:
        scene = _build_scene(document["scene"], domain, effectors)
    return scene, models


def _build_scene(block: dict, domain, effectors) -> Scene:
    objects = []
    for i, entry in enumerate(block["objects"]):
        state = []
        for j, text in enumerate(entry.get("state", ())):
            tokens = text.split()
            predicate, extra = tokens[0], tuple(tokens[1:])
            if predicate not in domain.vocabulary:
                raise ScenarioError(
                    f"$.scene.objects[{i}].state[{j}]",
                    f"unknown predicate {predicate!r}",
                )
            for arg in extra:
                if arg not in effectors:
                    raise ScenarioError(
                        f"$.scene.objects[{i}].state[{j}]",
                        f"extra literal arg {arg!r} is not a declared effector",
                    )
            state.append((predicate, extra))
        objects.append(
            SceneObject(
                class_name=entry["class"],
                id=entry["id"],
                position=tuple(entry["position"]),
                radius=entry["radius"],
                state=tuple(state),
            )
        )
    robot = RobotBase(
        position=tuple(block["robot"]["position"]),
        heading=block["robot"].get("heading", 0.0),
    )
    camera = Camera(
        fov_angle=block["camera"].get("fov_angle", math.pi),
        range=block["camera"].get("range", 5.0),
    )
    try:
        return Scene(tuple(objects), robot, camera)
    except ValueError as exc:
        raise ScenarioError("$.scene", str(exc)) from exc


def dump_scenario(models: RobotModels, scene: Optional[Scene] = None) -> dict:
    """Inverse of :func:`load_scenario`: a document that reloads to
    structurally identical models."""
    doc = {
        "object_database": {
            "classes": [
                {
                    "name": c.name,
                    "synonyms": list(c.synonyms),
                    "gloss": list(c.gloss),
                }
                for c in models.odb.classes
            ]
        },
        "effectors": list(models.effectors),
        "domain": models.domain_text,
        "world": {
            "instances": [
                {"class": i.class_name, "id": i.id, "pose": list(i.pose)}
                for i in models.instances
            ],
            "state": sorted(serialize_literal(lit) for lit in models.world.state),
            "next_id": models.world.next_id,
        },
    }
    if scene is not None:
        doc["scene"] = {
            "objects": [
                {
                    "class": o.class_name,
                    "id": o.id,
                    "position": list(o.position),
                    "radius": o.radius,
                    "state": [" ".join((p, *a)) for p, a in o.state],
                }
                for o in scene.objects
            ],
            "robot": {
                "position": list(scene.robot.position),
                "heading": scene.robot.heading,
            },
            "camera": {
                "fov_angle": scene.camera.fov_angle,
                "range": scene.camera.range,
            },
        }
    return doc


def packaged_scenario_dir() -> Path:
    return Path(str(resources.files("commonground") / "scenarios"))


def resolve_scenario_path(ref: Union[str, Path], base: Optional[Path] = None) -> Path:
    """Find a scenario by path or bare name, searching ``base`` then the
    packaged scenario directory."""
    candidates = []
    ref = Path(ref)
    names = [ref] if ref.suffix == ".json" else [ref, ref.with_suffix(".json")]
    for name in names:
        candidates.append(name)
        if base is not None:
            candidates.append(base / name)
        candidates.append(packaged_scenario_dir() / name)
    for path in candidates:
        if path.is_file():
            return path
    raise FileNotFoundError(f"no scenario found for {ref}")


def load_scenario_file(path: Union[str, Path]) -> tuple[Optional[Scene], RobotModels]:
    return load_scenario(Path(path).read_text())
