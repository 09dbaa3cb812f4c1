"""Shared generators and dataset builders for the test suite."""

from __future__ import annotations

import json
import random
from pathlib import Path

from commonground.language import ObjectPhrase, ParsedQuery

CLASS_POOL = [
    ("mug_red", ["cup"], ["mug"]),
    ("mug_blue", ["cup"], ["mug"]),
    ("apple_green", [], ["apple"]),
    ("box_plain", [], ["box"]),
    ("thermos_steel", [], ["thermos", "bottle"]),
    ("toy_soft", [], ["toy"]),
]
EFFECTOR_POOL = ["left_hand", "right_hand"]
VERB_POOL = ["grasp", "release", "open", "close", "poke", "wipe"]
NOUN_POOL = ["mug", "apple", "box", "thermos", "toy", "pineapple", "unicorn"]
ADJ_POOL = ["red", "blue", "greenish", "soft", "plain"]


def random_scenario(rng: random.Random) -> dict:
    """A small but structurally valid scenario document."""
    classes = rng.sample(CLASS_POOL, rng.randint(1, len(CLASS_POOL)))
    effectors = rng.sample(EFFECTOR_POOL, rng.randint(1, 2))
    class_names = [c[0] for c in classes]

    domain = [
        "predicate free/1 gloss: free, empty",
        "predicate bind/2 gloss: bound, holding",
        "predicate located/1",
        "predicate closed/1 gloss: closed, shut",
        "predicate not_closed/1 gloss: open, opened",
        "pair free bind",
    ]
    schema_specs = []
    if rng.random() < 0.9:
        schema_specs.append(("grasp_sct.yml", "grasp, pick up", "free ?e, located ?o", "+bind ?o ?e, -free ?e"))
    if rng.random() < 0.7:
        schema_specs.append(("release_sct.yml", "release, put down", "bind ?o ?e", "-bind ?o ?e, +free ?e"))
    if rng.random() < 0.5:
        schema_specs.append(("open_box_sct.yml", "open", "closed ?o", "+not_closed ?o, -closed ?o"))
    if rng.random() < 0.5:
        schema_specs.append(("shut_box_sct.yml", "close, shut", "not_closed ?o", "+closed ?o, -not_closed ?o"))
    if rng.random() < 0.3:
        schema_specs.append(("wipe_sct.yml", "wipe", "located ?o", ""))
    for name, verbs, pre, eff in schema_specs:
        if rng.random() < 0.4:
            obj_type = "any"
        else:
            obj_type = "|".join(rng.sample(class_names, rng.randint(1, len(class_names))))
        domain.append(f"action {name}(?o: {obj_type}, ?e: effector)")
        domain.append(f"  verbs: {verbs}")
        if pre:
            domain.append(f"  pre: {pre}")
        if eff:
            domain.append(f"  eff: {eff}")

    instances = []
    next_id = 1
    for _ in range(rng.randint(0, 6)):
        cls = rng.choice(class_names)
        instances.append({"class": cls, "id": next_id, "pose": [rng.uniform(-1, 1), rng.uniform(-1, 1), 0.0]})
        next_id += 1

    state = []
    for eff_name in effectors:
        if rng.random() < 0.7:
            state.append(f"free_{eff_name}")
    for inst in instances:
        symbol = f"{inst['class']}${inst['id']}"
        if rng.random() < 0.8:
            state.append(f"located_{symbol}")
        if rng.random() < 0.3:
            state.append(f"closed_{symbol}")
        elif rng.random() < 0.3:
            state.append(f"not_closed_{symbol}")
        if rng.random() < 0.15:
            holder = rng.choice(effectors)
            state.append(f"bind_{symbol} {holder}")

    return {
        "object_database": {
            "classes": [
                {"name": n, "synonyms": s, "gloss": g} for n, s, g in classes
            ]
        },
        "effectors": effectors,
        "domain": domain,
        "world": {"instances": instances, "state": sorted(set(state)), "next_id": next_id},
    }


def random_query(rng: random.Random) -> ParsedQuery:
    action = rng.choice(VERB_POOL + ["fly", "pick up"])
    obj = None
    if rng.random() < 0.8:
        adjectives = tuple(rng.sample(ADJ_POOL, rng.randint(0, 2)))
        obj = ObjectPhrase(noun=rng.choice(NOUN_POOL), adjectives=adjectives)
    raw = f"Why can you not {action}" + (f" the {obj.text}" if obj else "") + "?"
    return ParsedQuery(action_phrase=action, object_phrase=obj, raw=raw)


def build_dataset(root: Path, counts=(2, 2, 2)) -> Path:
    """Write an episode dataset under ``root`` with the requested number of
    episodes per unit (object localization, unmet precondition, recovery)."""
    episodes_dir = root / "episodes"
    episodes_dir.mkdir(parents=True, exist_ok=True)
    n_loc, n_pre, n_rec = counts
    entries = []
    for i in range(n_loc):
        entries.append(
            {
                "id": f"loc_{i:03d}",
                "unit": "object_localization",
                "scenario": "occluded_mug",
                "query": "Why can I not grasp the greenish cup?",
                "ground_truth_conversation": [
                    {"role": "user", "text": "Why can I not grasp the greenish cup?"},
                    {
                        "role": "robot",
                        "text": "the greenish cup is not part of my world representation",
                    },
                ],
                "expected_facts": ["not part of my world representation"],
            }
        )
    for i in range(n_pre):
        entries.append(
            {
                "id": f"pre_{i:03d}",
                "unit": "unmet_precondition",
                "scenario": "microwave_closed",
                "query": "Why can I not close the microwave?",
                "ground_truth_conversation": [
                    {"role": "user", "text": "Why can I not close the microwave?"},
                    {"role": "robot", "text": "You need to open the microwave first."},
                ],
                "expected_facts": ["open the microwave first"],
            }
        )
    for i in range(n_rec):
        entries.append(
            {
                "id": f"rec_{i:03d}",
                "unit": "recovery_suggestion",
                "scenario": "occluded_mug",
                "query": "Why can I not grasp the greenish cup?",
                "rebuttals": ["There is a green cup there!"],
                "ground_truth_conversation": [
                    {"role": "user", "text": "There is a green cup there!"},
                    {
                        "role": "robot",
                        "text": "move 1.0 m to the north",
                    },
                ],
                "expected_facts": ["move 1.0 m to the north", "green cup"],
            }
        )
    for entry in entries:
        (episodes_dir / f"{entry['id']}.json").write_text(json.dumps(entry, indent=2))
    return root
