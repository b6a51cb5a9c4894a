#!/usr/bin/env python

"""
Randomised street scenes and the geometry queries asked of them.

Coordinates are metres in a world frame with +z up. The RIS and every camera
carry a (yaw, pitch) pose; `pose_basis` turns it into the right/forward/up
frame used both for camera projection and for RIS angles of arrival.
"""

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from . import filesystem
from . import seeding
from .config import BlockerSpec, CameraModel, RisPose, Vector3

# corners closer than this to a camera are pushed onto this depth
NEAR_PLANE = 0.05


@dataclass(frozen=True)
class BoundingBox:
    x_center: float
    y_center: float
    width: float
    height: float

    @property
    def area(self):
        return self.width * self.height

    def corners(self):
        return (
            self.x_center - self.width / 2.0,
            self.y_center - self.height / 2.0,
            self.x_center + self.width / 2.0,
            self.y_center + self.height / 2.0,
        )

    @classmethod
    def from_corners(cls, x0, y0, x1, y1):
        return cls((x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0, y1 - y0)


@dataclass(frozen=True)
class UserEquipment:
    ue_id: int
    position: Vector3
    class_id: int
    # (length along `axis`, width across it, height)
    extents: Vector3
    axis: Vector3 = (1.0, 0.0, 0.0)
    velocity: Vector3 = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class Scene:
    scene_index: int
    scene_seed: int
    ues: Tuple[UserEquipment, ...]
    blockers: Tuple[BlockerSpec, ...]
    ris: RisPose
    bs_position: Vector3
    cameras: Tuple[CameraModel, ...] = field(default_factory=tuple)


def pose_basis(yaw, pitch):
    """
    Return the (right, forward, up) unit vectors of a pose
    """
    forward = np.array([
        math.cos(pitch) * math.cos(yaw),
        math.cos(pitch) * math.sin(yaw),
        math.sin(pitch),
    ])
    right = np.array([math.sin(yaw), -math.cos(yaw), 0.0])
    up = np.cross(right, forward)

    return right, forward, up


def local_direction(basis, vector):
    """
    Return the (right, forward, up) components of a world vector
    """
    right, forward, up = basis
    vector = np.asarray(vector, dtype=float)

    return float(vector @ right), float(vector @ forward), float(vector @ up)


def generate_scene(config, scene_index):
    """
    Return the scene number `scene_index` of a scenario; a pure function of
    (config, scene_index)
    """
    config.validate()

    rng = seeding.substream(config.master_seed, "scene", scene_index)
    lower, upper = (np.asarray(corner, dtype=float) for corner in config.ue_region)
    axis = np.asarray(config.street_axis, dtype=float)

    low_count, high_count = config.ue_count_range
    count = int(rng.integers(low_count, high_count + 1))

    ues = []
    for ue_id in range(count):
        position = rng.uniform(lower, upper)
        class_id = int(rng.choice(config.num_classes, p=config.class_probabilities))
        speed = rng.uniform(*config.ue_speed_range)
        heading = 1.0 if rng.random() < 0.5 else -1.0
        ues.append(UserEquipment(
            ue_id=ue_id,
            position=tuple(float(p) for p in position),
            class_id=class_id,
            extents=tuple(float(e) for e in config.class_extents[class_id]),
            axis=tuple(float(a) for a in axis),
            velocity=tuple(float(v) for v in heading * speed * axis),
        ))

    return Scene(
        scene_index=int(scene_index),
        scene_seed=seeding.derived_seed(config.master_seed, "scene", scene_index),
        ues=tuple(ues),
        blockers=tuple(config.blockers),
        ris=config.ris,
        bs_position=tuple(config.bs_position),
        cameras=tuple(config.cameras),
    )


def segment_hits_box(a, b, lower, upper):
    """
    Return whether the open segment a-b passes through the interior of an
    axis-aligned box; touching a face, edge or corner is not a hit
    """
    t_low, t_high = 0.0, 1.0

    for axis in range(3):
        origin = a[axis]
        delta = b[axis] - a[axis]
        if delta == 0.0:
            if not lower[axis] < origin < upper[axis]:
                return False
            continue

        t1 = (lower[axis] - origin) / delta
        t2 = (upper[axis] - origin) / delta
        t_low = max(t_low, min(t1, t2))
        t_high = min(t_high, max(t1, t2))
        if t_low >= t_high:
            return False

    return t_low < t_high


def los_visible(scene, a, b):
    """
    Return whether the segment a-b is free of every blocker of the scene
    """
    a = tuple(float(v) for v in a)
    b = tuple(float(v) for v in b)
    if a == b:
        raise ValueError("line of sight needs two distinct points, got {!r} twice".format(a))

    return not any(
        segment_hits_box(a, b, blocker.lower, blocker.upper)
        for blocker in scene.blockers
    )


def ue_corners(ue):
    """
    Return the 8 corners of a UE's bounding volume, shape (8, 3)
    """
    axis = np.asarray(ue.axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    vertical = np.array([0.0, 0.0, 1.0])
    lateral = np.cross(vertical, axis)
    if np.linalg.norm(lateral) < 1e-12:
        lateral = np.array([0.0, 1.0, 0.0])
    lateral = lateral / np.linalg.norm(lateral)
    up = np.cross(axis, lateral)

    half_length, half_width, half_height = (e / 2.0 for e in ue.extents)
    center = np.asarray(ue.position, dtype=float)

    return np.array([
        center + sl * half_length * axis + sw * half_width * lateral + sh * half_height * up
        for sl in (-1.0, 1.0)
        for sw in (-1.0, 1.0)
        for sh in (-1.0, 1.0)
    ])


def project_bbox(camera, ue) -> Optional[BoundingBox]:
    """
    Return the pixel bounding box of a UE seen by a pinhole camera, clipped
    to the image, or None if the UE is behind the camera or out of frame
    """
    basis = pose_basis(camera.yaw, camera.pitch)
    right, forward, up = basis
    origin = np.asarray(camera.position, dtype=float)

    if (np.asarray(ue.position, dtype=float) - origin) @ forward <= 0.0:
        return None

    relative = ue_corners(ue) - origin
    depth = np.maximum(relative @ forward, NEAR_PLANE)
    focal = camera.focal_px
    xs = camera.width / 2.0 + focal * (relative @ right) / depth
    ys = camera.height / 2.0 - focal * (relative @ up) / depth

    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 <= 0.0 or x0 >= camera.width or y1 <= 0.0 or y0 >= camera.height:
        return None

    x0, x1 = max(x0, 0.0), min(x1, float(camera.width))
    y0, y1 = max(y0, 0.0), min(y1, float(camera.height))
    if x1 <= x0 or y1 <= y0:
        return None

    return BoundingBox.from_corners(x0, y0, x1, y1)


def visible_ues(scene, camera):
    """
    Return (ue, bbox) for every UE the camera sees: projected into the frame
    and not hidden behind a blocker
    """
    result = []
    for ue in scene.ues:
        bbox = project_bbox(camera, ue)
        if bbox is None:
            continue
        if tuple(ue.position) != tuple(camera.position) and not los_visible(scene, camera.position, ue.position):
            continue
        result.append((ue, bbox))

    return result


class SceneEncoder(json.JSONEncoder):
    def default(self, obj):
        if isinstance(obj, np.generic):
            return obj.item()
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        return json.JSONEncoder.default(self, obj)


def _camera_record(camera):
    return {
        "position": list(camera.position),
        "yaw": camera.yaw,
        "pitch": camera.pitch,
        "horizontal_fov": camera.horizontal_fov,
        "width": camera.width,
        "height": camera.height,
    }


def scene_to_record(scene):
    return {
        "scene_index": scene.scene_index,
        "scene_seed": scene.scene_seed,
        "ues": [
            {
                "id": ue.ue_id,
                "position": list(ue.position),
                "class_id": ue.class_id,
                "extents": list(ue.extents),
                "axis": list(ue.axis),
                "velocity": list(ue.velocity),
            }
            for ue in scene.ues
        ],
        "blockers": [
            {"center": list(b.center), "extents": list(b.extents)}
            for b in scene.blockers
        ],
        "ris": {"position": list(scene.ris.position), "yaw": scene.ris.yaw, "pitch": scene.ris.pitch},
        "bs_position": list(scene.bs_position),
        "cameras": [_camera_record(c) for c in scene.cameras],
    }


def scene_from_record(record):
    return Scene(
        scene_index=int(record["scene_index"]),
        scene_seed=int(record["scene_seed"]),
        ues=tuple(
            UserEquipment(
                ue_id=int(ue["id"]),
                position=tuple(ue["position"]),
                class_id=int(ue["class_id"]),
                extents=tuple(ue["extents"]),
                axis=tuple(ue["axis"]),
                velocity=tuple(ue["velocity"]),
            )
            for ue in record["ues"]
        ),
        blockers=tuple(
            BlockerSpec(center=tuple(b["center"]), extents=tuple(b["extents"]))
            for b in record["blockers"]
        ),
        ris=RisPose(
            position=tuple(record["ris"]["position"]),
            yaw=record["ris"]["yaw"],
            pitch=record["ris"]["pitch"],
        ),
        bs_position=tuple(record["bs_position"]),
        cameras=tuple(
            CameraModel(
                position=tuple(c["position"]),
                yaw=c["yaw"],
                pitch=c["pitch"],
                horizontal_fov=c["horizontal_fov"],
                width=int(c["width"]),
                height=int(c["height"]),
            )
            for c in record["cameras"]
        ),
    )


def scenes_to_string(scenes):
    return "".join(
        json.dumps(scene_to_record(scene), cls=SceneEncoder, sort_keys=True) + "\n"
        for scene in scenes
    )


def scenes_from_string(contents):
    return [
        scene_from_record(json.loads(line))
        for line in contents.splitlines()
        if line.strip()
    ]


def write_scenes(filename, scenes):
    filesystem.write_file_contents(filename, scenes_to_string(scenes))


def read_scenes(filename):
    return scenes_from_string(filesystem.get_file_contents(filename))
