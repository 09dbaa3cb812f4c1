import math

import pytest

from commonground.errors import ClarificationNeeded, OracleUnavailableError
from commonground.explain import DivergenceKind
from commonground.language import DeterministicMatcher
from commonground.lexicon import Lexicon
from commonground.models import Literal, serialize_literal
from commonground.recovery import (
    describe_move,
    oracle_match,
    suggest_movement,
)
from commonground.scene import BaseMove, Camera, RobotBase, Scene, SceneObject, apply_move, view
from commonground.session import open_session


def _scene(objects, robot=None, fov=2 * math.pi, rng=10.0):
    return Scene(
        objects=tuple(objects),
        robot=robot or RobotBase((0.0, 0.0), 0.0),
        camera=Camera(fov_angle=fov, range=rng),
    )


def _obj(cls, id, x, y, r=0.05):
    return SceneObject(cls, id, (x, y), r)


class TestSuggestMovement:
    def test_one_meter_lateral_move_clears_occluder(self):
        # target dead ahead behind a 0.3 m disc: the 0.5 m sidestep still
        # grazes the disc (0.2425 m), the 1.0 m one clears it (0.447 m)
        scene = _scene([_obj("mug", 1, 2.0, 0.0), _obj("toy", 2, 1.0, 0.0, r=0.3)])
        move = suggest_movement(scene, 1)
        assert move is not None
        assert (move.dx, move.dy) == (0.0, 1.0)
        assert view(apply_move(scene, move))[1].visible

    def test_already_visible_returns_zero_move(self):
        scene = _scene([_obj("mug", 1, 2.0, 0.0)])
        move = suggest_movement(scene, 1)
        assert move == BaseMove(0.0, 0.0, 0.0)

    def test_fully_ringed_target_has_no_suggestion(self):
        ring = [
            _obj("wall", 10 + i, 3.0 + 0.5 * math.cos(a), 0.5 * math.sin(a), r=0.45)
            for i, a in enumerate(
                [k * math.pi / 6 for k in range(12)]
            )
        ]
        scene = _scene([_obj("mug", 1, 3.0, 0.0)] + ring)
        assert suggest_movement(scene, 1) is None

    def test_every_returned_move_renders_target_visible(self):
        import random

        rng = random.Random(7)
        for _ in range(50):
            objects = [_obj("mug", 1, rng.uniform(1, 3), rng.uniform(-2, 2))]
            for i in range(rng.randint(0, 3)):
                objects.append(
                    _obj("toy", 2 + i, rng.uniform(0.3, 2.5), rng.uniform(-1.5, 1.5), r=rng.uniform(0.1, 0.4))
                )
            scene = _scene(objects, fov=rng.uniform(1.0, 2 * math.pi), rng=6.0)
            move = suggest_movement(scene, 1)
            if move is not None:
                assert view(apply_move(scene, move))[1].visible

    def test_describe_move(self):
        assert describe_move(BaseMove(0, 0, 0)) == "stay in place and look again"
        assert describe_move(BaseMove(0.0, 1.0, -0.4)) == "move 1.0 m to the north"
        assert "east" in describe_move(BaseMove(0.5, 0.0, 0.0))


class TestOracleMatch:
    def test_match_occluded_object(self, load_packaged):
        scene, models = load_packaged("occluded_mug")
        result = oracle_match(scene, "green cup", DeterministicMatcher(), Lexicon.from_models(models))
        assert result is not None
        assert result.class_name == "mug_green"
        assert not result.visible
        assert result.occluder == 9

    def test_match_visible_object(self, load_packaged):
        scene, models = load_packaged("occluded_mug")
        result = oracle_match(scene, "blue thermos", DeterministicMatcher(), Lexicon.from_models(models))
        assert result.visible and result.occluder is None

    def test_no_scene_counterpart(self, load_packaged):
        scene, models = load_packaged("occluded_mug")
        assert oracle_match(scene, "pineapple", DeterministicMatcher(), Lexicon.from_models(models)) is None

    def test_missing_scene_raises(self):
        with pytest.raises(OracleUnavailableError):
            oracle_match(None, "mug", DeterministicMatcher(), Lexicon())


class TestRecoveryFlows:
    def test_occlusion_recovery_via_perception(self, load_packaged):
        session = open_session("occluded_mug")
        session.post_query("Why can I not grasp the greenish cup?")
        assert session.last_explanation.divergence.kind is DivergenceKind.SPECIFIC_OBJECT
        before = set(session.models.world.state)
        payload = session.post_rebuttal("There is a green cup there!")
        outcome = payload["outcome"]
        assert outcome["kind"] == "object_added_via_perception"
        kinds = [e["kind"] for e in outcome["events"]]
        assert "base_moved" in kinds and "instance_added" in kinds
        # previously blocked grasp is now available
        assert ["grasp_sct.yml", "mug_green$2", "edan_hand"] in [
            a.triple() for a in session.graph.available
        ]
        # no-regression: every literal change is named in the events
        after = set(session.models.world.state)
        added = {serialize_literal(l) for l in after - before}
        removed = {serialize_literal(l) for l in before - after}
        assert added == {
            e["literal"] for e in outcome["events"] if e["kind"] == "literal_added"
        }
        assert removed == {
            e["literal"] for e in outcome["events"] if e["kind"] == "literal_removed"
        }

    def test_state_overwrite_unblocks_action(self, load_packaged):
        session = open_session("microwave_closed")
        session.post_query("Why can I not close the microwave?")
        divergence = session.last_explanation.divergence
        assert divergence.kind is DivergenceKind.SPECIFIC_ACTION
        assert [serialize_literal(l) for l in divergence.unmet] == [
            "not_closed_op_microwave$1"
        ]
        blocked_action = divergence.action
        payload = session.post_rebuttal("But the microwave is actually open!")
        assert payload["outcome"]["kind"] == "state_overwritten"
        assert blocked_action in session.graph.available
        assert Literal("not_closed", ("op_microwave$1",)) in session.models.world.state

    def test_condition_phrase_can_assert_the_literal_directly(self):
        # belief: open; user insists it is closed; opening becomes possible
        session = open_session("microwave_closed")
        session.inject(
            models=session.models.overwrite_literal(
                Literal("not_closed", ("op_microwave$1",)), True
            )
        )
        session.post_query("Why can I not open the microwave?")
        unmet = session.last_explanation.divergence.unmet
        assert [serialize_literal(l) for l in unmet] == ["closed_op_microwave$1"]
        payload = session.post_rebuttal("But the microwave is actually closed!")
        assert payload["outcome"]["kind"] == "state_overwritten"
        assert Literal("closed", ("op_microwave$1",)) in session.models.world.state

    def test_gripper_free_assertion_removes_bind(self, load_packaged):
        session = open_session("kitchen_frame5")
        session.post_query("Why can you not pick up the thermos?")
        payload = session.post_rebuttal("Right now the gripper is free!")
        assert payload["outcome"]["kind"] == "state_overwritten"
        state = session.models.world.state
        assert Literal("free", ("edan_hand",)) in state
        assert Literal("bind", ("mug_peach$661", "edan_hand")) not in state

    def test_unrelated_assertion_requests_clarification(self):
        session = open_session("microwave_closed")
        session.post_query("Why can I not close the microwave?")
        before = session.models
        with pytest.raises(ClarificationNeeded):
            session.post_rebuttal("The apple is red!")
        assert session.models == before
        assert session.phase == "explained"

    def test_agreeing_assertion_requests_clarification(self):
        session = open_session("microwave_closed")
        session.post_query("Why can I not close the microwave?")
        with pytest.raises(ClarificationNeeded):
            # "not open" agrees with the robot's belief that it is closed
            session.post_rebuttal("The microwave is not open!")

    def test_general_object_divergence_is_not_recoverable(self, load_packaged):
        session = open_session("kitchen_frame1")
        session.post_query("Why can you not pick up the pineapple?")
        payload = session.post_rebuttal("There is a pineapple there!")
        assert payload["outcome"]["kind"] == "not_recoverable"
        assert session.phase == "idle"

    def test_rebuttal_kind_mismatch_requests_clarification(self):
        session = open_session("microwave_closed")
        session.post_query("Why can I not close the microwave?")
        with pytest.raises(ClarificationNeeded):
            session.post_rebuttal("There is a microwave there!")

    def test_ee_pose_path_without_scene(self, load_packaged):
        session = open_session("empty")
        session.post_query("Why can you not grasp the box?")
        assert session.last_explanation.divergence.kind is DivergenceKind.SPECIFIC_OBJECT
        payload = session.post_rebuttal("There is a box there!")
        assert payload["outcome"]["kind"] == "no_oracle_match"
        assert session.phase == "recovering"
        result = session.set_ee_pose((0.4, 0.1, 0.2))
        assert result["outcome"]["kind"] == "object_added_via_ee"
        assert [i.symbol for i in session.models.instances] == ["box$1"]
        assert session.phase == "idle"

    def test_reclassification_never_repeats_missing_object(self):
        session = open_session("occluded_mug")
        session.post_query("Why can I not grasp the greenish cup?")
        payload = session.post_rebuttal("There is a green cup there!")
        reclassified = payload["outcome"]["reclassified"]
        assert reclassified["divergence"]["kind"] not in (
            "specific_object",
            "general_object",
        )

    def test_false_divergence_complaint_routes_to_object_recovery(self, load_packaged):
        # explanation says the action should work; the user keeps insisting
        # the object is there, so the oracle path runs anyway
        session = open_session("kitchen_frame4")
        session.post_query("Why can you not pick up the mug now?")
        assert session.last_explanation.divergence.kind is DivergenceKind.FALSE_DIVERGENCE
        payload = session.post_rebuttal("There is a mug there!")
        # no scene in this scenario: falls through to the end-effector path
        assert payload["outcome"]["kind"] == "no_oracle_match"
        assert session.phase == "recovering"
        assert session.pending_ee_class == "mug_peach"
