"""Ground-truth scene simulator: 2-D poses, disc occluders, camera FOV.

The scene is what the world actually looks like; the robot's beliefs live in
:mod:`commonground.models` and may diverge from it. Geometry is flat 2-D,
poses are lifted to 3-vectors with z=0 at the model boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Optional, Sequence

from .models import LOCATED, Literal, RobotModels

DEFAULT_MAX_STEP = 1.5

# matching tolerance between a believed pose and a scene position
_POSE_EPS = 1e-6


@dataclass(frozen=True)
class SceneObject:
    class_name: str
    id: int
    position: tuple[float, float]
    radius: float
    state: tuple[tuple[str, tuple[str, ...]], ...] = ()
    # state entries are (predicate, extra args); the object itself is the
    # implicit first argument of each predicate.

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        object.__setattr__(
            self, "state", tuple((p, tuple(a)) for p, a in self.state)
        )
        if self.radius <= 0:
            raise ValueError(f"scene object {self.id}: radius must be positive")


@dataclass(frozen=True)
class RobotBase:
    position: tuple[float, float] = (0.0, 0.0)
    heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))


@dataclass(frozen=True)
class Camera:
    fov_angle: float = math.pi
    range: float = 5.0

    def __post_init__(self):
        if not (0.0 < self.fov_angle <= 2 * math.pi):
            raise ValueError("fov_angle must be in (0, 2*pi]")
        if self.range <= 0:
            raise ValueError("camera range must be positive")


@dataclass(frozen=True)
class Scene:
    objects: tuple[SceneObject, ...] = ()
    robot: RobotBase = RobotBase()
    camera: Camera = Camera()

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        ids = [o.id for o in self.objects]
        if len(ids) != len(set(ids)):
            raise ValueError("scene object ids must be unique")

    def get(self, object_id: int) -> Optional[SceneObject]:
        for obj in self.objects:
            if obj.id == object_id:
                return obj
        return None


@dataclass(frozen=True)
class ObjectView:
    visible: bool
    in_fov: bool
    distance: float
    occluder: Optional[int] = None


@dataclass(frozen=True)
class SceneView:
    entries: Mapping[int, ObjectView]

    def __getitem__(self, object_id: int) -> ObjectView:
        return self.entries[object_id]


@dataclass(frozen=True)
class BaseMove:
    """A bounded base displacement plus heading change."""

    dx: float = 0.0
    dy: float = 0.0
    dtheta: float = 0.0

    @property
    def magnitude(self) -> float:
        return math.hypot(self.dx, self.dy)

    def is_zero(self) -> bool:
        return self.dx == 0.0 and self.dy == 0.0 and self.dtheta == 0.0


def wrap_angle(angle: float) -> float:
    return math.atan2(math.sin(angle), math.cos(angle))


def segment_point_distance(a: Sequence[float], b: Sequence[float], p: Sequence[float]) -> float:
    """Distance from point p to segment a-b."""
    ax, ay = a
    bx, by = b
    px, py = p
    dx, dy = bx - ax, by - ay
    norm2 = dx * dx + dy * dy
    if norm2 == 0.0:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * dx + (py - ay) * dy) / norm2
    t = max(0.0, min(1.0, t))
    cx, cy = ax + t * dx, ay + t * dy
    return math.hypot(px - cx, py - cy)


def view(scene: Scene) -> SceneView:
    """Per-object visibility: inside the FOV cone, within range, and the
    camera-to-object sight segment clears every other disc."""
    cam = scene.robot.position
    entries = {}
    for obj in scene.objects:
        dx = obj.position[0] - cam[0]
        dy = obj.position[1] - cam[1]
        distance = math.hypot(dx, dy)
        if distance < 1e-12:
            in_fov = True
        else:
            bearing = wrap_angle(math.atan2(dy, dx) - scene.robot.heading)
            in_fov = abs(bearing) <= scene.camera.fov_angle / 2
        occluder = None
        if in_fov and distance <= scene.camera.range:
            blockers = sorted(
                (o for o in scene.objects if o.id != obj.id),
                key=lambda o: math.hypot(
                    o.position[0] - cam[0], o.position[1] - cam[1]
                ),
            )
            for other in blockers:
                if segment_point_distance(cam, obj.position, other.position) < other.radius:
                    occluder = other.id
                    break
        visible = in_fov and distance <= scene.camera.range and occluder is None
        entries[obj.id] = ObjectView(visible, in_fov, distance, occluder)
    return SceneView(entries)


def perceive(scene: Scene, models: RobotModels) -> RobotModels:
    """Populate the world model from the scene: every visible object of a
    known class gets an instance plus its ground-truth state literals.

    Invisible objects and classes outside the object database are never
    added; an object already believed at the same position is not duplicated.
    """
    scene_view = view(scene)
    out = models
    for obj in sorted(scene.objects, key=lambda o: o.id):
        if not scene_view[obj.id].visible:
            continue
        if obj.class_name not in models.odb:
            continue
        if _corresponding(out, obj):
            continue
        pose = (obj.position[0], obj.position[1], 0.0)
        out, inst = out.insert_instance(obj.class_name, pose)
        state = set(out.world.state)
        for predicate, extra in obj.state:
            state.add(Literal(predicate, (inst.symbol, *extra)))
        out = out.with_world(replace(out.world, state=frozenset(state)))
    return out


def _corresponding(models: RobotModels, obj: SceneObject) -> bool:
    for inst in models.instances:
        if inst.class_name != obj.class_name:
            continue
        if (
            math.hypot(
                inst.pose[0] - obj.position[0], inst.pose[1] - obj.position[1]
            )
            <= _POSE_EPS
        ):
            return True
    return False


def apply_move(scene: Scene, move: BaseMove, max_step: float = DEFAULT_MAX_STEP) -> Scene:
    """Translate and rotate the robot base; objects never move."""
    if move.magnitude > max_step:
        raise ValueError(
            f"move of {move.magnitude:.3f} m exceeds the {max_step} m step bound"
        )
    base = scene.robot
    robot = RobotBase(
        position=(base.position[0] + move.dx, base.position[1] + move.dy),
        heading=wrap_angle(base.heading + move.dtheta),
    )
    return replace(scene, robot=robot)


def remove_or_alter_object(
    scene: Scene,
    object_id: int,
    *,
    remove: bool = False,
    position: Optional[Sequence[float]] = None,
    add_state: Sequence[tuple[str, Sequence[str]]] = (),
    remove_state: Sequence[str] = (),
) -> Scene:
    """Change ground truth without touching the robot's beliefs.

    This is the divergence-injection hook: take a grasped object away, flip an
    appliance state, or displace something behind the robot's back.
    """
    target = scene.get(object_id)
    if target is None:
        raise ValueError(f"no scene object with id {object_id}")
    if remove:
        objects = tuple(o for o in scene.objects if o.id != object_id)
        return replace(scene, objects=objects)
    new = target
    if position is not None:
        new = replace(new, position=tuple(position))
    if add_state or remove_state:
        state = [
            (p, tuple(a)) for p, a in new.state if p not in set(remove_state)
        ]
        state.extend((p, tuple(a)) for p, a in add_state)
        new = replace(new, state=tuple(state))
    objects = tuple(new if o.id == object_id else o for o in scene.objects)
    return replace(scene, objects=objects)
