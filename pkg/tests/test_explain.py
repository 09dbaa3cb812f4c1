import pytest

from commonground.actions import derive_graph
from commonground.explain import DECISIVE_STEP, DivergenceKind, classify
from commonground.language import parse_query
from commonground.lexicon import Lexicon
from commonground.models import serialize_literal
from commonground.scenario import load_scenario

GOLDEN_SEQUENCE = [
    ("kitchen_frame1", "Why can you not pick up the pineapple?", DivergenceKind.GENERAL_OBJECT),
    ("kitchen_frame2", "Why can you not cut the apple?", DivergenceKind.GENERAL_ACTION),
    ("kitchen_frame3", "Why can you not pick up the mug?", DivergenceKind.SPECIFIC_OBJECT),
    ("kitchen_frame4", "Why can you not pick up the mug now?", DivergenceKind.FALSE_DIVERGENCE),
    ("kitchen_frame5", "Why can you not pick up the thermos?", DivergenceKind.SPECIFIC_ACTION),
]


def _classify(models, text):
    return classify(parse_query(text), models, derive_graph(models))


@pytest.mark.parametrize("scenario,query,expected", GOLDEN_SEQUENCE)
def test_golden_sequence(load_packaged, scenario, query, expected):
    _, models = load_packaged(scenario)
    explanation = _classify(models, query)
    assert explanation.divergence.kind is expected


def test_unmet_precondition_payload(load_packaged):
    _, models = load_packaged("kitchen_frame5")
    explanation = _classify(models, "Why can you not pick up the thermos?")
    divergence = explanation.divergence
    assert [serialize_literal(l) for l in divergence.unmet] == ["free_edan_hand"]
    assert divergence.action.triple() == [
        "grasp_sct.yml",
        "thermos_blue$664",
        "edan_hand",
    ]


def test_microwave_precondition(load_packaged):
    _, models = load_packaged("microwave_closed")
    explanation = _classify(models, "Why can I not close the microwave?")
    assert explanation.divergence.kind is DivergenceKind.SPECIFIC_ACTION
    assert [serialize_literal(l) for l in explanation.divergence.unmet] == [
        "not_closed_op_microwave$1"
    ]
    assert "open the microwave first" in explanation.rendered.lower()


def test_purple_mug_with_known_class_but_no_instance():
    doc = {
        "object_database": {
            "classes": [
                {"name": "red_apple", "gloss": ["apple"]},
                {"name": "mug_green", "gloss": ["mug"]},
                {"name": "mug_lilac", "gloss": ["mug"]},
                {"name": "thermos", "gloss": ["bottle"]},
            ]
        },
        "effectors": ["right_arm"],
        "domain": [
            "predicate free/1",
            "predicate located/1",
            "predicate bind/2",
            "pair free bind",
            "grasp_sct.yml(?o: any, ?e: effector) pre: free ?e, located ?o; eff: +bind ?o ?e, -free ?e",
        ],
        "world": {
            "instances": [
                {"class": "red_apple", "id": 1, "pose": [0, 0, 0]},
                {"class": "mug_green", "id": 2, "pose": [0, 0, 0]},
                {"class": "thermos", "id": 3, "pose": [0, 0, 0]},
            ],
            "state": [
                "free_right_arm",
                "located_red_apple$1",
                "located_mug_green$2",
                "located_thermos$3",
            ],
        },
    }
    _, models = load_scenario(doc)
    explanation = _classify(models, "Why can you not grasp the purple mug?")
    assert explanation.divergence.kind is DivergenceKind.SPECIFIC_OBJECT
    assert explanation.matched_class == "mug_lilac"


def test_trace_is_ordered_and_stops_at_decisive_step(load_packaged):
    for scenario, query, expected in GOLDEN_SEQUENCE:
        from commonground.scenario import load_scenario_file, resolve_scenario_path

        _, models = load_scenario_file(resolve_scenario_path(scenario))
        explanation = _classify(models, query)
        steps = [s.step for s in explanation.trace]
        assert steps == sorted(steps)
        assert steps == list(dict.fromkeys(steps))  # no repeats
        assert steps[-1] == DECISIVE_STEP[expected]
        assert steps == list(range(1, steps[-1] + 1))  # prefix of 1..4


def test_object_less_query_skips_object_steps(load_packaged):
    _, models = load_packaged("kitchen_frame5")
    explanation = _classify(models, "Why can you not grasp?")
    assert explanation.divergence.kind is DivergenceKind.SPECIFIC_ACTION
    by_step = {s.step: s.outcome for s in explanation.trace}
    assert "skipped" in by_step[1]
    assert "skipped" in by_step[3]


def test_rendered_sentences_carry_payload(load_packaged):
    _, models = load_packaged("kitchen_frame1")
    explanation = _classify(models, "Why can you not pick up the pineapple?")
    assert "pineapple" in explanation.rendered
    assert "object database" in explanation.rendered

    _, models4 = load_packaged("kitchen_frame4")
    fd = _classify(models4, "Why can you not pick up the mug now?")
    assert "should be able" in fd.rendered

    _, models3 = load_packaged("kitchen_frame3")
    so = _classify(models3, "Why can you not pick up the mug?")
    assert "world representation" in so.rendered


def test_matcher_backend_failure_falls_back(load_packaged):
    from commonground.errors import BackendError

    class ExplodingMatcher:
        def match_object(self, phrase, candidates, lexicon):
            raise BackendError("transport", "endpoint down")

    _, models = load_packaged("kitchen_frame1")
    explanation = classify(
        parse_query("Why can you not pick up the pineapple?"),
        models,
        derive_graph(models),
        matcher=ExplodingMatcher(),
    )
    assert explanation.divergence.kind is DivergenceKind.GENERAL_OBJECT
    assert any("fallback" in note for note in explanation.notes)


def test_insertion_resolves_missing_object(load_packaged):
    _, models = load_packaged("kitchen_frame3")
    query = parse_query("Why can you not pick up the mug?")
    first = classify(query, models, derive_graph(models))
    assert first.divergence.kind is DivergenceKind.SPECIFIC_OBJECT
    updated, _ = models.insert_instance(first.matched_class, (0.5, 0.0, 0.8))
    second = classify(query, updated, derive_graph(updated))
    assert second.divergence.kind in (
        DivergenceKind.FALSE_DIVERGENCE,
        DivergenceKind.SPECIFIC_ACTION,
    )
