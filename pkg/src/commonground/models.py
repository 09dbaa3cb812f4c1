"""Robot belief stores: object database, world model, symbolic state literals.

All values are immutable; every mutation returns a new value. The symbolic
layer never interprets pose coordinates, it only carries them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Iterable, Mapping, Optional, Sequence

from .errors import IntegrityError, NotInDatabaseError

if TYPE_CHECKING:
    from .actions import ActionSchema, PredicateVocabulary

SYMBOL_RE = re.compile(r"^[a-z][a-z0-9_]*$")
INSTANCE_RE = re.compile(r"^([a-z][a-z0-9_]*)\$([0-9]+)$")

# Predicate automatically asserted for every instance the robot locates.
LOCATED = "located"


def is_symbol(text: str) -> bool:
    return bool(SYMBOL_RE.match(text))


def is_instance_symbol(text: str) -> bool:
    return bool(INSTANCE_RE.match(text))


def instance_symbol(class_name: str, id: int) -> str:
    """Render the canonical ``class$id`` symbol for an object instance."""
    if not is_symbol(class_name):
        raise ValueError(f"invalid class name: {class_name!r}")
    if not isinstance(id, int) or isinstance(id, bool) or id < 0:
        raise ValueError(f"instance id must be a nonnegative integer, got {id!r}")
    return f"{class_name}${id}"


def split_instance_symbol(symbol: str) -> tuple[str, int]:
    m = INSTANCE_RE.match(symbol)
    if not m:
        raise ValueError(f"not an instance symbol: {symbol!r}")
    return m.group(1), int(m.group(2))


@dataclass(frozen=True)
class Literal:
    """A symbolic state fact. Negation is encoded in the predicate name
    (``closed`` vs ``not_closed``), not as structure."""

    predicate: str
    args: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.predicate or not is_symbol(self.predicate):
            raise ValueError(f"invalid predicate: {self.predicate!r}")
        object.__setattr__(self, "args", tuple(self.args))


def serialize_literal(literal: Literal) -> str:
    """Canonical string form: predicate, ``_``, then args joined by single
    spaces. Zero-arg literals serialize as the bare predicate name."""
    if not literal.args:
        return literal.predicate
    return literal.predicate + "_" + " ".join(literal.args)


def parse_literal(text: str, predicates: Iterable[str]) -> Literal:
    """Inverse of :func:`serialize_literal` given the known predicate names.

    Longest predicate wins, so ``not_closed_x$1`` never parses as ``closed``
    applied to a mangled arg.
    """
    names = sorted(predicates, key=len, reverse=True)
    for name in names:
        if text == name:
            return Literal(name)
        prefix = name + "_"
        if text.startswith(prefix):
            rest = text[len(prefix):]
            if rest:
                return Literal(name, tuple(rest.split(" ")))
    raise ValueError(f"cannot parse literal {text!r} with known predicates")


@dataclass(frozen=True)
class ObjectClass:
    """A class in the static object database.

    ``synonyms`` are alternative surface tokens for the class; ``gloss`` is the
    plain-English translation entry for opaque names (e.g. a product name that
    actually denotes a cabinet).
    """

    name: str
    synonyms: tuple[str, ...] = ()
    gloss: tuple[str, ...] = ()

    def __post_init__(self):
        if not is_symbol(self.name):
            raise ValueError(f"invalid class name: {self.name!r}")
        object.__setattr__(self, "synonyms", tuple(self.synonyms))
        object.__setattr__(self, "gloss", tuple(self.gloss))
        for token in (*self.synonyms, *self.gloss):
            if not token or token != token.lower():
                raise ValueError(
                    f"class {self.name}: surface tokens must be lowercase and "
                    f"nonempty, got {token!r}"
                )


@dataclass(frozen=True)
class ObjectDatabase:
    classes: tuple[ObjectClass, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        seen = set()
        for cls in self.classes:
            if cls.name in seen:
                raise IntegrityError(f"duplicate class name: {cls.name}")
            seen.add(cls.name)

    def __contains__(self, name: str) -> bool:
        return any(c.name == name for c in self.classes)

    def get(self, name: str) -> Optional[ObjectClass]:
        for cls in self.classes:
            if cls.name == name:
                return cls
        return None

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.classes)


@dataclass(frozen=True)
class ObjectInstance:
    class_name: str
    id: int
    pose: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "pose", tuple(float(v) for v in self.pose))
        if len(self.pose) != 3:
            raise ValueError("pose must be a 3-vector")
        instance_symbol(self.class_name, self.id)  # validates

    @property
    def symbol(self) -> str:
        return instance_symbol(self.class_name, self.id)


@dataclass(frozen=True)
class WorldModel:
    """The robot's current beliefs: located instances plus symbolic state."""

    instances: tuple[ObjectInstance, ...] = ()
    state: frozenset[Literal] = frozenset()
    next_id: int = 1

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))
        object.__setattr__(self, "state", frozenset(self.state))

    @property
    def symbols(self) -> frozenset[str]:
        return frozenset(inst.symbol for inst in self.instances)

    def get_instance(self, symbol: str) -> Optional[ObjectInstance]:
        for inst in self.instances:
            if inst.symbol == symbol:
                return inst
        return None

    def validate(self, effectors: Sequence[str] = ()) -> None:
        symbols = set()
        for inst in self.instances:
            if inst.symbol in symbols:
                raise IntegrityError(f"duplicate instance symbol: {inst.symbol}")
            symbols.add(inst.symbol)
            if inst.id >= self.next_id:
                raise IntegrityError(
                    f"next_id {self.next_id} does not exceed existing id of "
                    f"{inst.symbol}"
                )
        known = symbols | set(effectors)
        for literal in sorted(self.state, key=serialize_literal):
            for arg in literal.args:
                if arg not in known:
                    raise IntegrityError(
                        f"literal {serialize_literal(literal)!r} references "
                        f"unknown symbol {arg!r}"
                    )


def instances_of(world: WorldModel, class_name: str) -> list[ObjectInstance]:
    """All instances of a class, in id order. Unknown class gives []."""
    return sorted(
        (inst for inst in world.instances if inst.class_name == class_name),
        key=lambda inst: inst.id,
    )


def _resolve_args(world: WorldModel, literal: Literal, effectors: Sequence[str]):
    known = world.symbols | set(effectors)
    for arg in literal.args:
        if arg not in known:
            raise IntegrityError(
                f"literal {serialize_literal(literal)!r} references unknown "
                f"symbol {arg!r}"
            )


def overwrite_literal(
    world: WorldModel,
    literal: Literal,
    make_true: bool,
    pairs: Optional[Mapping[str, str]] = None,
    effectors: Sequence[str] = (),
) -> WorldModel:
    """Force a literal's truth value, atomically retracting its paired
    opposite (``closed``/``not_closed``, ``free``/``bind``).

    Paired retraction matches on the trailing args shared by both predicates,
    so making ``free_hand`` true retracts every ``bind_* hand`` literal.
    """
    _resolve_args(world, literal, effectors)
    state = set(world.state)
    if make_true:
        state.add(literal)
        opposite = (pairs or {}).get(literal.predicate)
        if opposite is not None:
            k = min(len(literal.args), _pair_arity(state, opposite, literal))
            tail = literal.args[len(literal.args) - k:] if k else ()
            for other in list(state):
                if other.predicate != opposite:
                    continue
                other_tail = other.args[len(other.args) - k:] if k else ()
                if other_tail == tail:
                    state.discard(other)
    else:
        state.discard(literal)
    return replace(world, state=frozenset(state))


def _pair_arity(state, opposite, literal):
    # Arity of the opposite predicate as observed in the state; falls back to
    # the overwritten literal's own arity when unobserved.
    for other in state:
        if other.predicate == opposite:
            return len(other.args)
    return len(literal.args)


def insert_instance(
    world: WorldModel,
    class_name: str,
    pose: Sequence[float],
    odb: ObjectDatabase,
) -> tuple[WorldModel, ObjectInstance]:
    """Add a fresh instance of a known class and mark it located.

    Ids come from the world's global monotone counter and are never reused.
    """
    if class_name not in odb:
        raise NotInDatabaseError(
            f"class {class_name!r} is not in the object database"
        )
    inst = ObjectInstance(class_name, world.next_id, tuple(pose))
    state = set(world.state)
    state.add(Literal(LOCATED, (inst.symbol,)))
    new_world = WorldModel(
        instances=world.instances + (inst,),
        state=frozenset(state),
        next_id=world.next_id + 1,
    )
    return new_world, inst


@dataclass(frozen=True)
class RobotModels:
    """The robot's three belief stores plus its declared effectors."""

    odb: ObjectDatabase
    world: WorldModel
    schemas: tuple["ActionSchema", ...] = ()
    effectors: tuple[str, ...] = ()
    vocabulary: Optional["PredicateVocabulary"] = None
    domain_text: str = ""

    def __post_init__(self):
        object.__setattr__(self, "schemas", tuple(self.schemas))
        object.__setattr__(self, "effectors", tuple(self.effectors))
        for name in self.effectors:
            if not is_symbol(name):
                raise ValueError(f"invalid effector name: {name!r}")
        if set(self.effectors) & self.world.symbols:
            raise IntegrityError("effector names collide with instance symbols")

    def validate(self) -> None:
        self.world.validate(self.effectors)
        for inst in self.instances:
            if inst.class_name not in self.odb:
                raise IntegrityError(
                    f"instance {inst.symbol} has class outside the object "
                    f"database"
                )

    @property
    def instances(self) -> tuple[ObjectInstance, ...]:
        return self.world.instances

    @property
    def pairs(self) -> Mapping[str, str]:
        return self.vocabulary.pairs if self.vocabulary else {}

    def with_world(self, world: WorldModel) -> "RobotModels":
        return replace(self, world=world)

    def overwrite_literal(self, literal: Literal, make_true: bool) -> "RobotModels":
        return self.with_world(
            overwrite_literal(
                self.world, literal, make_true, self.pairs, self.effectors
            )
        )

    def insert_instance(
        self, class_name: str, pose: Sequence[float]
    ) -> tuple["RobotModels", ObjectInstance]:
        world, inst = insert_instance(self.world, class_name, pose, self.odb)
        return self.with_world(world), inst
