"""Action schemas, grounding, and the available/blocked action graph.

Domain text grammar (line oriented, ``#`` starts a comment)::

    predicate <name>/<arity> [gloss: tok, tok, ...]
    pair <name> <name>
    [action] <template_sct.yml>(?p: <type>, ...) [verbs: ...] [pre: ...] [; eff: ...]
        verbs: grasp, pick up
        pre: free ?e, located ?o
        eff: +bind ?o ?e, -free ?e

Types are ``any``, ``effector``, or one or more object classes joined with
``|``. Clauses may sit on the header line separated by ``;`` or on their own
lines below it. Preconditions are conjunctive positive literals; negative
state is expressed through ``not_``-prefixed predicates, which automatically
pair with their positive counterpart. ``pair`` declares additional mutually
exclusive predicates (e.g. ``free``/``bind``).

Omitted verbs default to the template name without its ``_sct.yml`` suffix,
underscores turned into spaces, plus the first word of that phrase.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .errors import DomainSemanticError, DomainSyntaxError
from .models import (
    Literal,
    RobotModels,
    is_symbol,
    parse_literal,
    serialize_literal,
)

TEMPLATE_RE = re.compile(r"^[a-z][a-z0-9_]*_sct\.yml$")

_PRED_LINE = re.compile(
    r"^predicate\s+([a-z][a-z0-9_]*)\s*/\s*([0-9]+)\s*(?:gloss\s*:\s*(.+))?$"
)
_PAIR_LINE = re.compile(r"^pair\s+([a-z][a-z0-9_]*)\s+([a-z][a-z0-9_]*)\s*$")
_ACTION_HEAD = re.compile(r"^(?:action\s+)?([a-z][a-z0-9_.]*)\s*\((.*?)\)\s*(.*)$")
_PARAM = re.compile(r"^\?([a-z][a-z0-9_]*)\s*:\s*([a-z][a-z0-9_|]*)$")
_CLAUSE_LINE = re.compile(r"^(verbs|pre|eff)\s*:\s*(.*)$")


@dataclass(frozen=True)
class Param:
    name: str
    kind: str  # "any" | "effector" | "classes"
    classes: tuple[str, ...] = ()

    def admits_class(self, class_name: str) -> bool:
        if self.kind == "any":
            return True
        if self.kind == "classes":
            return class_name in self.classes
        return False


@dataclass(frozen=True)
class LiteralPattern:
    predicate: str
    vars: tuple[str, ...] = ()

    def bind(self, assignment: Mapping[str, str]) -> Literal:
        return Literal(self.predicate, tuple(assignment[v] for v in self.vars))


@dataclass(frozen=True)
class ActionSchema:
    template_name: str
    verbs: tuple[str, ...]
    params: tuple[Param, ...]
    preconditions: tuple[LiteralPattern, ...] = ()
    add_effects: tuple[LiteralPattern, ...] = ()
    del_effects: tuple[LiteralPattern, ...] = ()

    def admits_class(self, class_name: str) -> bool:
        return any(p.admits_class(class_name) for p in self.params)


@dataclass(frozen=True)
class PredicateVocabulary:
    """Declared predicates with arities, glosses, and negation pairs."""

    arities: Mapping[str, int]
    glosses: Mapping[str, tuple[str, ...]]
    pairs: Mapping[str, str]  # symmetric

    def __contains__(self, name: str) -> bool:
        return name in self.arities

    def pair_of(self, name: str) -> Optional[str]:
        return self.pairs.get(name)

    def gloss(self, name: str) -> tuple[str, ...]:
        return self.glosses.get(name, ())

    def parse(self, text: str) -> Literal:
        return parse_literal(text, self.arities)


@dataclass(frozen=True)
class Domain:
    schemas: tuple[ActionSchema, ...]
    vocabulary: PredicateVocabulary
    source: str = ""


class _ActionDraft:
    def __init__(self, name, params, line):
        self.name = name
        self.params = params
        self.line = line
        self.verbs: list[str] = []
        self.pre: list[tuple[str, list[str], int]] = []
        self.add: list[tuple[str, list[str], int]] = []
        self.delete: list[tuple[str, list[str], int]] = []


def _split_items(payload: str) -> list[str]:
    return [item.strip() for item in payload.split(",") if item.strip()]


def _parse_pattern(item: str, line_no: int) -> tuple[str, list[str]]:
    tokens = item.split()
    predicate = tokens[0]
    if not is_symbol(predicate):
        raise DomainSyntaxError(line_no, 1, f"invalid predicate name {predicate!r}")
    vars = []
    for tok in tokens[1:]:
        if not tok.startswith("?") or not is_symbol(tok[1:]):
            raise DomainSyntaxError(
                line_no, item.index(tok) + 1, f"expected parameter, got {tok!r}"
            )
        vars.append(tok[1:])
    return predicate, vars


def parse_domain(text: str) -> Domain:
    """Parse domain text into schemas plus the predicate vocabulary.

    Schemas keep their source order; every precondition and effect must use a
    declared predicate at the declared arity and only the schema's own
    parameters.
    """
    arities: dict[str, int] = {}
    glosses: dict[str, tuple[str, ...]] = {}
    pairs: dict[str, str] = {}
    drafts: list[_ActionDraft] = []
    current: Optional[_ActionDraft] = None

    def add_clause(draft, kind, payload, line_no):
        if kind == "verbs":
            draft.verbs.extend(_split_items(payload))
            return
        for item in _split_items(payload):
            if kind == "pre":
                predicate, vars = _parse_pattern(item, line_no)
                draft.pre.append((predicate, vars, line_no))
            else:
                sign, rest = item[:1], item[1:].strip()
                if sign not in "+-":
                    raise DomainSyntaxError(
                        line_no, 1, f"effect must start with + or -: {item!r}"
                    )
                predicate, vars = _parse_pattern(rest, line_no)
                target = draft.add if sign == "+" else draft.delete
                target.append((predicate, vars, line_no))

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _PRED_LINE.match(line)
        if m:
            name, arity, gloss = m.group(1), int(m.group(2)), m.group(3)
            if name in arities:
                raise DomainSemanticError(line_no, f"predicate {name!r} redeclared")
            arities[name] = arity
            if gloss:
                glosses[name] = tuple(_split_items(gloss))
            current = None
            continue
        m = _PAIR_LINE.match(line)
        if m:
            a, b = m.group(1), m.group(2)
            for name in (a, b):
                if name not in arities:
                    raise DomainSemanticError(
                        line_no, f"pair references undeclared predicate {name!r}"
                    )
            pairs[a] = b
            pairs[b] = a
            current = None
            continue
        m = _CLAUSE_LINE.match(line)
        if m:
            if current is None:
                raise DomainSyntaxError(line_no, 1, "clause outside an action block")
            add_clause(current, m.group(1), m.group(2), line_no)
            continue
        m = _ACTION_HEAD.match(line)
        if m:
            name, params_text, rest = m.groups()
            if not TEMPLATE_RE.match(name):
                raise DomainSemanticError(
                    line_no, f"template name must end in _sct.yml: {name!r}"
                )
            if any(d.name == name for d in drafts):
                raise DomainSemanticError(line_no, f"action {name!r} redeclared")
            params = []
            for chunk in _split_items(params_text):
                pm = _PARAM.match(chunk)
                if not pm:
                    raise DomainSyntaxError(
                        line_no,
                        line.index(chunk) + 1,
                        f"bad parameter declaration {chunk!r}",
                    )
                params.append((pm.group(1), pm.group(2)))
            current = _ActionDraft(name, params, line_no)
            drafts.append(current)
            for clause in rest.split(";"):
                clause = clause.strip()
                if not clause:
                    continue
                cm = _CLAUSE_LINE.match(clause)
                if not cm:
                    raise DomainSyntaxError(
                        line_no, line.index(clause) + 1, f"bad clause {clause!r}"
                    )
                add_clause(current, cm.group(1), cm.group(2), line_no)
            continue
        raise DomainSyntaxError(line_no, 1, f"unrecognized line {line!r}")

    # implicit negation pairs: closed / not_closed
    for name in arities:
        twin = "not_" + name
        if twin in arities and name not in pairs:
            pairs[name] = twin
            pairs[twin] = name

    schemas = []
    for draft in drafts:
        params = []
        seen = set()
        for pname, ptype in draft.params:
            if pname in seen:
                raise DomainSemanticError(
                    draft.line, f"duplicate parameter ?{pname} in {draft.name}"
                )
            seen.add(pname)
            if ptype == "any":
                params.append(Param(pname, "any"))
            elif ptype == "effector":
                params.append(Param(pname, "effector"))
            else:
                classes = tuple(ptype.split("|"))
                for cls in classes:
                    if not is_symbol(cls):
                        raise DomainSyntaxError(
                            draft.line, 1, f"bad type {ptype!r} for ?{pname}"
                        )
                params.append(Param(pname, "classes", classes))

        def build(patterns):
            out = []
            for predicate, vars, line_no in patterns:
                if predicate not in arities:
                    raise DomainSemanticError(
                        line_no, f"undeclared predicate {predicate!r}"
                    )
                if len(vars) != arities[predicate]:
                    raise DomainSemanticError(
                        line_no,
                        f"predicate {predicate!r} expects {arities[predicate]} "
                        f"args, got {len(vars)}",
                    )
                for v in vars:
                    if v not in seen:
                        raise DomainSemanticError(
                            line_no, f"undeclared parameter ?{v} in {draft.name}"
                        )
                out.append(LiteralPattern(predicate, tuple(vars)))
            return tuple(out)

        verbs = tuple(draft.verbs)
        if not verbs:
            base = draft.name[: -len("_sct.yml")]
            phrase = base.replace("_", " ")
            first = phrase.split()[0]
            verbs = (phrase,) if phrase == first else (phrase, first)
        schemas.append(
            ActionSchema(
                template_name=draft.name,
                verbs=verbs,
                params=tuple(params),
                preconditions=build(draft.pre),
                add_effects=build(draft.add),
                del_effects=build(draft.delete),
            )
        )

    vocabulary = PredicateVocabulary(dict(arities), dict(glosses), dict(pairs))
    return Domain(tuple(schemas), vocabulary, source=text)


@dataclass(frozen=True)
class GroundedAction:
    template_name: str
    args: tuple[str, ...]
    schema: ActionSchema = field(compare=False, repr=False, hash=False)

    def triple(self) -> list[str]:
        return [self.template_name, *self.args]

    def preconditions(self) -> tuple[Literal, ...]:
        assignment = {p.name: a for p, a in zip(self.schema.params, self.args)}
        return tuple(pat.bind(assignment) for pat in self.schema.preconditions)

    def effects(self) -> tuple[tuple[Literal, ...], tuple[Literal, ...]]:
        assignment = {p.name: a for p, a in zip(self.schema.params, self.args)}
        add = tuple(pat.bind(assignment) for pat in self.schema.add_effects)
        delete = tuple(pat.bind(assignment) for pat in self.schema.del_effects)
        return add, delete


def ground(schemas: Sequence[ActionSchema], models: RobotModels) -> list[GroundedAction]:
    """Cartesian expansion of schema parameters over type-compatible
    instances and effectors. Order: schema order, then lexicographic args."""
    out: list[GroundedAction] = []
    for schema in schemas:
        pools = []
        for param in schema.params:
            if param.kind == "effector":
                pool = sorted(models.effectors)
            elif param.kind == "any":
                pool = sorted(inst.symbol for inst in models.instances)
            else:
                pool = sorted(
                    inst.symbol
                    for inst in models.instances
                    if inst.class_name in param.classes
                )
            pools.append(pool)
        for args in sorted(itertools.product(*pools)):
            out.append(GroundedAction(schema.template_name, tuple(args), schema))
    return out


@dataclass(frozen=True)
class ActionGraph:
    """Partition of grounded actions into available and blocked.

    ``blocked`` maps each unmet precondition's canonical string to the actions
    it blocks; an action missing k preconditions appears under k keys.
    ``blocked_order`` keeps (action, all unmet literals) in grounding order.
    """

    available: tuple[GroundedAction, ...]
    blocked: Mapping[str, tuple[GroundedAction, ...]]
    blocked_order: tuple[tuple[GroundedAction, tuple[Literal, ...]], ...]


def evaluate(grounded: Sequence[GroundedAction], state: frozenset[Literal]) -> ActionGraph:
    available: list[GroundedAction] = []
    blocked: dict[str, list[GroundedAction]] = {}
    blocked_order: list[tuple[GroundedAction, tuple[Literal, ...]]] = []
    for action in grounded:
        unmet = tuple(lit for lit in action.preconditions() if lit not in state)
        if not unmet:
            available.append(action)
            continue
        blocked_order.append((action, unmet))
        for lit in unmet:
            blocked.setdefault(serialize_literal(lit), []).append(action)
    return ActionGraph(
        available=tuple(available),
        blocked={k: tuple(v) for k, v in blocked.items()},
        blocked_order=tuple(blocked_order),
    )


def derive_graph(models: RobotModels) -> ActionGraph:
    return evaluate(ground(models.schemas, models), models.world.state)


@dataclass(frozen=True)
class AvailabilityReport:
    kind: str  # "available" | "blocked" | "absent"
    action: Optional[GroundedAction] = None
    unmet: tuple[Literal, ...] = ()


def find_action(
    graph: ActionGraph, template: str, object_instance: Optional[str] = None
) -> AvailabilityReport:
    """Look up a template (optionally restricted to actions touching one
    instance) first among available actions, then among blocked ones."""

    def matches(action):
        if action.template_name != template:
            return False
        return object_instance is None or object_instance in action.args

    for action in graph.available:
        if matches(action):
            return AvailabilityReport("available", action)
    for action, unmet in graph.blocked_order:
        if matches(action):
            return AvailabilityReport("blocked", action, unmet)
    return AvailabilityReport("absent")


BLOCKED_HEADER = (
    "# Dictionary containing the disabled actions as values in lists\n"
    "# and the respective unmet preconditions as keys\n"
)


def format_blocked(graph: ActionGraph, header: bool = True) -> str:
    """Render the blocked dictionary in its canonical printed shape, one key
    per line, keys sorted."""
    items = sorted(graph.blocked.items())
    body = ",\n ".join(
        "{!r}: {!r}".format(key, [a.triple() for a in actions])
        for key, actions in items
    )
    text = "{" + body + "}"
    return (BLOCKED_HEADER + text) if header else text
