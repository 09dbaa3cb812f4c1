"""Published JSON schemas for the payloads the CLI and service emit.

Kept small on purpose: consumers (the web cockpit, scripts) validate against
these instead of re-deriving shapes from code.
"""

_TRIPLE = {"type": "array", "items": {"type": "string"}, "minItems": 1}

DIVERGENCE_SCHEMA = {
    "type": "object",
    "required": ["kind", "code", "phrase", "matched_class", "action", "unmet"],
    "properties": {
        "kind": {
            "enum": [
                "general_object",
                "specific_object",
                "general_action",
                "specific_action",
                "false_divergence",
            ]
        },
        "code": {"enum": ["D_GO", "D_SO", "D_GA", "D_SA", "FD"]},
        "phrase": {"type": ["string", "null"]},
        "matched_class": {"type": ["string", "null"]},
        "action": {"anyOf": [_TRIPLE, {"type": "null"}]},
        "unmet": {"type": "array", "items": {"type": "string"}},
    },
}

EXPLANATION_SCHEMA = {
    "type": "object",
    "required": ["divergence", "trace", "rendered", "render_style"],
    "properties": {
        "divergence": DIVERGENCE_SCHEMA,
        "matched_class": {"type": ["string", "null"]},
        "trace": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["step", "outcome"],
                "properties": {
                    "step": {"type": "integer", "minimum": 1, "maximum": 4},
                    "outcome": {"type": "string"},
                },
            },
        },
        "rendered": {"type": "string", "minLength": 1},
        "render_style": {"enum": ["template", "llm"]},
        "notes": {"type": "array", "items": {"type": "string"}},
    },
}

RECOVERY_SCHEMA = {
    "type": "object",
    "required": ["kind", "events", "message"],
    "properties": {
        "kind": {
            "enum": [
                "object_added_via_perception",
                "object_added_via_ee",
                "state_overwritten",
                "no_oracle_match",
                "not_recoverable",
            ]
        },
        "events": {"type": "array", "items": {"type": "object"}},
        "message": {"type": "string", "minLength": 1},
    },
}

STATE_SCHEMA = {
    "type": "object",
    "required": ["session", "phase", "version", "world", "actions", "dialogue"],
    "properties": {
        "session": {"type": "string"},
        "phase": {"enum": ["idle", "explained", "recovering"]},
        "version": {"type": "integer", "minimum": 0},
        "world": {
            "type": "object",
            "required": ["instances", "state"],
            "properties": {
                "instances": {"type": "array"},
                "state": {"type": "array", "items": {"type": "string"}},
            },
        },
        "actions": {
            "type": "object",
            "required": ["available", "blocked"],
            "properties": {
                "available": {"type": "array", "items": _TRIPLE},
                "blocked": {
                    "type": "object",
                    "additionalProperties": {"type": "array", "items": _TRIPLE},
                },
            },
        },
        "scene": {"type": ["object", "null"]},
        "dialogue": {"type": "array"},
    },
}

REPORT_SCHEMA = {
    "type": "object",
    "required": ["units", "cohen_kappa", "episodes", "runs", "transcripts"],
    "properties": {
        "units": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["unit", "transcripts", "accuracy"],
                "properties": {
                    "unit": {"type": "string"},
                    "transcripts": {"type": "integer"},
                    "accuracy": {"type": "number", "minimum": 0, "maximum": 1},
                },
            },
        },
        "cohen_kappa": {"type": ["number", "null"], "minimum": -1, "maximum": 1},
        "episodes": {"type": "integer"},
        "runs": {"type": "integer"},
        "transcripts": {"type": "integer"},
    },
}

EVENT_FRAME_SCHEMA = {
    "type": "object",
    "required": ["version", "kind", "changes", "state"],
    "properties": {
        "version": {"type": "integer", "minimum": 1},
        "kind": {"type": "string"},
        "changes": {"type": "array", "items": {"type": "object"}},
        "state": STATE_SCHEMA,
    },
}
