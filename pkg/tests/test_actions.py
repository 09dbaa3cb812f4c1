import pytest

from commonground.actions import (
    BLOCKED_HEADER,
    derive_graph,
    evaluate,
    find_action,
    format_blocked,
    ground,
    parse_domain,
)
from commonground.errors import DomainSemanticError, DomainSyntaxError
from commonground.models import Literal, serialize_literal

MINIMAL_DOMAIN = """
predicate free/1
predicate located/1
predicate bind/2
grasp_sct.yml(?o: any, ?e: effector) pre: free ?e, located ?o; eff: +bind ?o ?e, -free ?e
"""


def test_parse_compact_action_line():
    domain = parse_domain(MINIMAL_DOMAIN)
    assert len(domain.schemas) == 1
    schema = domain.schemas[0]
    assert schema.template_name == "grasp_sct.yml"
    assert len(schema.preconditions) == 2
    assert [p.name for p in schema.params] == ["o", "e"]
    assert schema.params[0].kind == "any"
    assert schema.params[1].kind == "effector"
    assert len(schema.add_effects) == 1 and len(schema.del_effects) == 1


def test_parse_empty_text():
    domain = parse_domain("")
    assert domain.schemas == ()


def test_default_verbs_from_template_name():
    domain = parse_domain(
        "predicate located/1\n"
        "close_microwave_sct.yml(?m: any, ?e: effector) pre: located ?m"
    )
    assert domain.schemas[0].verbs == ("close microwave", "close")


def test_undeclared_predicate_is_semantic_error():
    with pytest.raises(DomainSemanticError):
        parse_domain("grasp_sct.yml(?o: any, ?e: effector) pre: flying ?o")


def test_undeclared_parameter_is_semantic_error():
    with pytest.raises(DomainSemanticError):
        parse_domain(
            "predicate located/1\n"
            "grasp_sct.yml(?o: any, ?e: effector) pre: located ?x"
        )


def test_arity_mismatch_is_semantic_error():
    with pytest.raises(DomainSemanticError):
        parse_domain(
            "predicate bind/2\n"
            "grasp_sct.yml(?o: any, ?e: effector) pre: bind ?o"
        )


def test_syntax_error_carries_line():
    with pytest.raises(DomainSyntaxError) as err:
        parse_domain("predicate free/1\n???")
    assert err.value.line == 2


def test_template_suffix_enforced():
    with pytest.raises(DomainSemanticError):
        parse_domain("predicate located/1\ngrasp(?o: any) pre: located ?o")


def test_not_prefix_pairs_are_implicit():
    domain = parse_domain("predicate closed/1\npredicate not_closed/1")
    assert domain.vocabulary.pair_of("closed") == "not_closed"
    assert domain.vocabulary.pair_of("not_closed") == "closed"


def test_predicate_gloss():
    domain = parse_domain("predicate not_closed/1 gloss: open, opened")
    assert domain.vocabulary.gloss("not_closed") == ("open", "opened")


def test_grounding_is_deterministic_and_typed(mug_microwave):
    _, models = mug_microwave
    grounded = ground(models.schemas, models)
    triples = [g.triple() for g in grounded]
    assert ["grasp_sct.yml", "mug_green$2", "right_arm"] in triples
    assert ["release_sct.yml", "mug_green$2", "right_arm"] in triples
    # microwave is not graspable in this domain
    assert ["grasp_sct.yml", "op_microwave$1", "right_arm"] not in triples
    assert triples == [g.triple() for g in ground(models.schemas, models)]


def test_grounding_doubles_with_second_effector(mug_microwave):
    _, models = mug_microwave
    from dataclasses import replace

    two = replace(models, effectors=("left_arm", "right_arm"))
    base = [g for g in ground(models.schemas, models) if g.template_name == "grasp_sct.yml"]
    doubled = [g for g in ground(two.schemas, two) if g.template_name == "grasp_sct.yml"]
    assert len(doubled) == 2 * len(base)


def test_blocked_dictionary_matches_golden_shape(mug_microwave):
    _, models = mug_microwave
    graph = derive_graph(models)
    expected = BLOCKED_HEADER + (
        "{'bind_mug_green$2 right_arm': "
        "[['release_sct.yml', 'mug_green$2', 'right_arm']],\n"
        " 'not_closed_op_microwave$1': "
        "[['close_microwave_sct.yml', 'op_microwave$1', 'right_arm']]}"
    )
    assert format_blocked(graph) == expected
    assert ["open_microwave_sct.yml", "op_microwave$1", "right_arm"] in [
        a.triple() for a in graph.available
    ]


def test_blocked_dictionary_after_overwrite(mug_microwave):
    _, models = mug_microwave
    updated = models.overwrite_literal(Literal("not_closed", ("op_microwave$1",)), True)
    graph = derive_graph(updated)
    assert sorted(graph.blocked) == [
        "bind_mug_green$2 right_arm",
        "closed_op_microwave$1",
    ]


def test_action_with_no_preconditions_is_always_available():
    domain = parse_domain(
        "predicate located/1\nwave_sct.yml(?e: effector) verbs: wave"
    )
    from commonground.models import ObjectDatabase, RobotModels, WorldModel

    models = RobotModels(
        odb=ObjectDatabase(()),
        world=WorldModel(),
        schemas=domain.schemas,
        effectors=("right_arm",),
        vocabulary=domain.vocabulary,
    )
    graph = derive_graph(models)
    assert [a.triple() for a in graph.available] == [["wave_sct.yml", "right_arm"]]
    assert graph.blocked == {}


def test_multiply_unmet_action_is_indexed_under_every_key(mug_microwave):
    _, models = mug_microwave
    stripped = models.with_world(
        models.world.__class__(models.world.instances, frozenset(), models.world.next_id)
    )
    graph = derive_graph(stripped)
    grasp_keys = [k for k, v in graph.blocked.items() if any(
        a.template_name == "grasp_sct.yml" for a in v
    )]
    assert sorted(grasp_keys) == ["free_right_arm", "located_mug_green$2"]
    action, unmet = next(
        (a, u) for a, u in graph.blocked_order if a.template_name == "grasp_sct.yml"
    )
    assert len(unmet) == 2


def test_find_action_reports(mug_microwave):
    _, models = mug_microwave
    graph = derive_graph(models)
    report = find_action(graph, "close_microwave_sct.yml", "op_microwave$1")
    assert report.kind == "blocked"
    assert [serialize_literal(l) for l in report.unmet] == ["not_closed_op_microwave$1"]
    assert find_action(graph, "grasp_sct.yml", "mug_green$2").kind == "available"
    assert find_action(graph, "cut_sct.yml", "mug_green$2").kind == "absent"


def test_zero_arg_literal_serializes_bare():
    domain = parse_domain(
        "predicate daylight/0\npredicate located/1\n"
        "scan_sct.yml(?o: any) verbs: scan\n  pre: daylight, located ?o"
    )
    schema = domain.schemas[0]
    assert serialize_literal(schema.preconditions[0].bind({})) == "daylight"
