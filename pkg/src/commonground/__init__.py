"""commonground: explain and repair divergences between a robot's belief
stores and what a human assumes they contain."""

from .actions import (
    ActionGraph,
    ActionSchema,
    GroundedAction,
    derive_graph,
    evaluate,
    find_action,
    format_blocked,
    ground,
    parse_domain,
)
from .errors import CommonGroundError
from .explain import Divergence, DivergenceKind, Explanation, classify, render
from .language import (
    DeterministicMatcher,
    MatchResult,
    ObjectPhrase,
    ParsedQuery,
    Rebuttal,
    match_action,
    parse_query,
    parse_rebuttal,
)
from .lexicon import Lexicon
from .models import (
    Literal,
    ObjectClass,
    ObjectDatabase,
    ObjectInstance,
    RobotModels,
    WorldModel,
    insert_instance,
    instance_symbol,
    instances_of,
    overwrite_literal,
    parse_literal,
    serialize_literal,
)
from .recovery import (
    BaseMove,
    OracleMatch,
    RecoveryOutcome,
    add_object_via_ee,
    handle_rebuttal,
    oracle_match,
    suggest_movement,
)
from .scenario import dump_scenario, load_scenario, load_scenario_file
from .scene import Scene, SceneView, apply_move, perceive, remove_or_alter_object, view
from .session import EngineConfig, Session, open_session

__version__ = "0.1.0"
